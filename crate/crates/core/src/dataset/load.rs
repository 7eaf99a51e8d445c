//! Survey table ingestion: delimited text to a [`Dataset`] of normalized
//! cells.

use std::path::Path;

use crate::dataset::schema::{Encoding, SurveySchema};
use crate::error::{Error, Result};

/// Which country's interviews a dataset holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Country {
    Chile,
    Tunisia,
    Both,
}

impl std::fmt::Display for Country {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Country::Chile => write!(f, "Chile"),
            Country::Tunisia => write!(f, "Tunisia"),
            Country::Both => write!(f, "combined"),
        }
    }
}

/// In-memory survey table. Cells are normalized strings; `None` marks a
/// missing or unparseable response.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<String>>>,
    pub country: Country,
}

fn is_missing_marker(raw: &str) -> bool {
    matches!(raw, "" | "NA" | "na" | "N/A" | "n/a" | ".")
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Schema(format!("required column '{name}' not found")))
    }

    /// All values of one column, in row order.
    pub fn column(&self, name: &str) -> Result<Vec<Option<String>>> {
        let idx = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[idx].clone()).collect())
    }

    /// New dataset holding only the rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            country: self.country,
        }
    }

    pub fn with_country(mut self, country: Country) -> Dataset {
        self.country = country;
        self
    }

    /// Row indices whose value in `column` matches one of `levels`.
    pub fn rows_matching(&self, column: &str, levels: &[String]) -> Result<Vec<usize>> {
        let idx = self.column_index(column)?;
        Ok(self
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| {
                r[idx]
                    .as_deref()
                    .is_some_and(|v| levels.iter().any(|l| l == v))
            })
            .map(|(i, _)| i)
            .collect())
    }
}

/// Normalize one raw cell against a variable's encoding. Unparseable values
/// become explicit missing markers rather than errors.
fn normalize_cell(raw: &str, encoding: &Encoding) -> Option<String> {
    let trimmed = raw.trim();
    if is_missing_marker(trimmed) {
        return None;
    }
    match encoding {
        Encoding::Dichotomous { .. } => Some(trimmed.to_string()),
        Encoding::Likert5Top2 | Encoding::CountThreshold { .. } => {
            let v: f64 = trimmed.parse().ok()?;
            if v.is_finite() && (v - v.round()).abs() < 1e-9 {
                Some(format!("{}", v.round() as i64))
            } else {
                None
            }
        }
        Encoding::IntervalThreshold { .. } => {
            let v: f64 = trimmed.parse().ok()?;
            v.is_finite().then(|| trimmed.to_string())
        }
        Encoding::Nominal { levels, .. } => levels
            .iter()
            .any(|l| l == trimmed)
            .then(|| trimmed.to_string()),
    }
}

/// Read a delimited survey table and validate it against the schema.
///
/// The delimiter is inferred from the extension (`.tsv` reads tabs, anything
/// else commas). Columns beyond the schema (outcome, country markers, ids)
/// are kept verbatim apart from missing-marker normalization.
pub fn load_survey(path: &Path, schema: &SurveySchema) -> Result<Dataset> {
    let delimiter = match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => b'\t',
        _ => b',',
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_path(path)?;

    let columns: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    for v in schema.variables() {
        if !columns.contains(&v.name) {
            return Err(Error::Schema(format!(
                "required column '{}' not found in {}",
                v.name,
                path.display()
            )));
        }
    }

    let encodings: Vec<Option<&Encoding>> = columns
        .iter()
        .map(|c| schema.get(c).map(|v| &v.encoding))
        .collect();

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row: Vec<Option<String>> = record
            .iter()
            .zip(&encodings)
            .map(|(raw, enc)| match enc {
                Some(e) => normalize_cell(raw, e),
                None => {
                    let t = raw.trim();
                    (!is_missing_marker(t)).then(|| t.to_string())
                }
            })
            .collect();
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input(format!(
            "no observations in {}",
            path.display()
        )));
    }
    Ok(Dataset {
        columns,
        rows,
        country: Country::Both,
    })
}
