//! Schema-driven binarization of a survey table into a numeric design
//! matrix, with complete-case handling and a missingness report.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::dataset::load::Dataset;
use crate::dataset::schema::{ColumnMeta, Encoding, SurveySchema};
use crate::error::{Error, Result};

/// Encoded predictor matrix over complete cases.
///
/// `raw` holds the 0/1 encoded values, `centered` the same values with the
/// per-column mean removed. Means are retained so models trained on one
/// matrix can center new data identically.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub raw: Array2<f64>,
    pub centered: Array2<f64>,
    pub means: Array1<f64>,
    pub meta: Vec<ColumnMeta>,
    /// Row indices into the source dataset that survived complete-case
    /// filtering; identity when constructed directly from a matrix.
    pub kept_rows: Vec<usize>,
}

/// Missing-response accounting from one `encode` pass.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MissingnessReport {
    pub rows_in: usize,
    pub rows_kept: usize,
    pub rows_dropped: usize,
    /// (variable, missing-cell count) in schema order, all rows counted.
    pub per_variable: Vec<(String, usize)>,
}

impl DesignMatrix {
    /// Build from an already-encoded raw matrix, computing means and the
    /// centered copy.
    pub fn from_raw(raw: Array2<f64>, meta: Vec<ColumnMeta>) -> Self {
        assert_eq!(raw.ncols(), meta.len(), "meta length must match columns");
        let n = raw.nrows().max(1) as f64;
        let means = raw.sum_axis(Axis(0)) / n;
        let mut centered = raw.clone();
        for (mut col, &m) in centered.columns_mut().into_iter().zip(means.iter()) {
            col.mapv_inplace(|v| v - m);
        }
        DesignMatrix {
            kept_rows: (0..raw.nrows()).collect(),
            raw,
            centered,
            means,
            meta,
        }
    }

    pub fn n(&self) -> usize {
        self.raw.nrows()
    }

    pub fn p(&self) -> usize {
        self.raw.ncols()
    }

    /// Restrict to a row subset; the result is re-centered on that subset.
    pub fn subset_rows(&self, rows: &[usize]) -> DesignMatrix {
        let raw = self.raw.select(Axis(0), rows);
        let mut dm = DesignMatrix::from_raw(raw, self.meta.clone());
        dm.kept_rows = rows.iter().map(|&r| self.kept_rows[r]).collect();
        dm
    }

    /// Raw (uncentered) values of one column.
    pub fn raw_column(&self, idx: usize) -> ArrayView1<'_, f64> {
        self.raw.column(idx)
    }

    pub fn column_index(&self, label: &str) -> Result<usize> {
        self.meta
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| Error::Lookup(format!("no encoded column labeled '{label}'")))
    }

    /// Dump the raw encoded matrix as CSV for auditing.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.meta.iter().map(|m| m.label.as_str()))?;
        for row in self.raw.rows() {
            w.write_record(row.iter().map(|v| format!("{v}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn encode_cell(cell: Option<&str>, encoding: &Encoding) -> Option<Vec<f64>> {
    let value = cell?;
    match encoding {
        Encoding::Dichotomous { positive } => {
            Some(vec![value.eq_ignore_ascii_case(positive) as u8 as f64])
        }
        Encoding::Likert5Top2 => {
            let v: f64 = value.parse().ok()?;
            let r = v.round();
            if (v - r).abs() > 1e-9 {
                return None;
            }
            match r as i64 {
                4 | 5 => Some(vec![1.0]),
                1 | 2 | 3 => Some(vec![0.0]),
                _ => None,
            }
        }
        Encoding::CountThreshold { cutoff } | Encoding::IntervalThreshold { cutoff } => {
            let v: f64 = value.parse().ok()?;
            v.is_finite().then(|| vec![(v > *cutoff) as u8 as f64])
        }
        Encoding::Nominal { levels, reference } => {
            if !levels.iter().any(|l| l == value) {
                return None;
            }
            Some(
                levels
                    .iter()
                    .filter(|l| *l != reference)
                    .map(|l| (l == value) as u8 as f64)
                    .collect(),
            )
        }
    }
}

/// Encode every schema variable for every row, dropping incomplete rows.
///
/// Returns the complete-case design matrix alongside a per-variable report
/// of how many responses were missing or unencodable.
pub fn encode(data: &Dataset, schema: &SurveySchema) -> Result<(DesignMatrix, MissingnessReport)> {
    let var_cols: Vec<usize> = schema
        .variables()
        .iter()
        .map(|v| data.column_index(&v.name))
        .collect::<Result<_>>()?;
    let meta = schema.column_layout();
    let p = meta.len();

    let mut missing_counts = vec![0usize; schema.variables().len()];
    let mut kept_rows = Vec::new();
    let mut values: Vec<f64> = Vec::new();

    for (row_idx, row) in data.rows.iter().enumerate() {
        let mut encoded_row: Vec<f64> = Vec::with_capacity(p);
        let mut complete = true;
        for ((var, &col), missing) in schema
            .variables()
            .iter()
            .zip(&var_cols)
            .zip(&mut missing_counts)
        {
            match encode_cell(row[col].as_deref(), &var.encoding) {
                Some(cols) => encoded_row.extend(cols),
                None => {
                    *missing += 1;
                    complete = false;
                }
            }
        }
        if complete {
            values.extend(encoded_row);
            kept_rows.push(row_idx);
        }
    }

    let report = MissingnessReport {
        rows_in: data.n(),
        rows_kept: kept_rows.len(),
        rows_dropped: data.n() - kept_rows.len(),
        per_variable: schema
            .variables()
            .iter()
            .map(|v| v.name.clone())
            .zip(missing_counts)
            .collect(),
    };

    if kept_rows.is_empty() {
        let detail: Vec<String> = report
            .per_variable
            .iter()
            .filter(|(_, c)| *c > 0)
            .map(|(name, c)| format!("{name}: {c}"))
            .collect();
        return Err(Error::Encoding(format!(
            "all {} rows dropped as incomplete; missing per variable: {}",
            data.n(),
            detail.join(", ")
        )));
    }

    let raw = Array2::from_shape_vec((kept_rows.len(), p), values)
        .expect("row-major encoded values match (n, p)");
    let mut dm = DesignMatrix::from_raw(raw, meta);
    dm.kept_rows = kept_rows;
    Ok((dm, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load::Country;
    use crate::dataset::schema::VariableSpec;
    use approx::assert_abs_diff_eq;

    fn schema() -> SurveySchema {
        SurveySchema::new(vec![
            VariableSpec {
                name: "Farm size".into(),
                group: Some("biophysical".into()),
                encoding: Encoding::IntervalThreshold { cutoff: 7.0 },
            },
            VariableSpec {
                name: "Trust in industry".into(),
                group: Some("social".into()),
                encoding: Encoding::Likert5Top2,
            },
            VariableSpec {
                name: "Region".into(),
                group: Some("natural".into()),
                encoding: Encoding::Nominal {
                    levels: vec!["A".into(), "B".into(), "C".into()],
                    reference: "A".into(),
                },
            },
        ])
        .unwrap()
    }

    fn dataset(rows: Vec<Vec<Option<&str>>>) -> Dataset {
        Dataset {
            columns: vec![
                "Farm size".into(),
                "Trust in industry".into(),
                "Region".into(),
            ],
            rows: rows
                .into_iter()
                .map(|r| r.into_iter().map(|c| c.map(String::from)).collect())
                .collect(),
            country: Country::Both,
        }
    }

    #[test]
    fn encodes_thresholds_likert_and_dummies() {
        let ds = dataset(vec![
            vec![Some("9"), Some("3"), Some("B")],
            vec![Some("7"), Some("4"), Some("A")],
            vec![Some("2"), Some("5"), Some("C")],
        ]);
        let (dm, report) = encode(&ds, &schema()).unwrap();
        assert_eq!(dm.p(), 4);
        assert_eq!(report.rows_dropped, 0);
        // farm size: 9 > 7 → 1; 7 > 7 is false → 0
        assert_eq!(dm.raw.column(0).to_vec(), vec![1.0, 0.0, 0.0]);
        // likert top-2: 3 → 0, 4 → 1, 5 → 1
        assert_eq!(dm.raw.column(1).to_vec(), vec![0.0, 1.0, 1.0]);
        // region dummies over B, C with reference A
        assert_eq!(dm.raw.column(2).to_vec(), vec![1.0, 0.0, 0.0]);
        assert_eq!(dm.raw.column(3).to_vec(), vec![0.0, 0.0, 1.0]);
        assert_eq!(dm.meta[2].label, "Region=B");
    }

    #[test]
    fn centered_columns_have_zero_mean() {
        let ds = dataset(vec![
            vec![Some("9"), Some("4"), Some("B")],
            vec![Some("1"), Some("1"), Some("A")],
            vec![Some("8"), Some("5"), Some("C")],
            vec![Some("3"), Some("2"), Some("B")],
        ]);
        let (dm, _) = encode(&ds, &schema()).unwrap();
        for col in dm.centered.columns() {
            assert_abs_diff_eq!(col.mean().unwrap(), 0.0, epsilon = 1e-12);
        }
        // raw is recoverable from centered + means
        for (j, col) in dm.raw.columns().into_iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                assert_abs_diff_eq!(dm.centered[[i, j]] + dm.means[j], *v);
            }
        }
    }

    #[test]
    fn dummy_row_sums_at_most_one() {
        let ds = dataset(vec![
            vec![Some("9"), Some("4"), Some("B")],
            vec![Some("1"), Some("1"), Some("A")],
            vec![Some("8"), Some("5"), Some("C")],
        ]);
        let (dm, _) = encode(&ds, &schema()).unwrap();
        for row in dm.raw.rows() {
            let dummy_sum = row[2] + row[3];
            assert!(dummy_sum == 0.0 || dummy_sum == 1.0);
        }
    }

    #[test]
    fn incomplete_rows_are_dropped_and_counted() {
        let ds = dataset(vec![
            vec![Some("9"), Some("4"), Some("B")],
            vec![None, Some("4"), Some("B")],
            vec![Some("2"), Some("9"), Some("C")], // likert out of range
            vec![Some("2"), Some("2"), Some("D")], // unknown nominal level
        ]);
        let (dm, report) = encode(&ds, &schema()).unwrap();
        assert_eq!(dm.n(), 1);
        assert_eq!(dm.kept_rows, vec![0]);
        assert_eq!(report.rows_dropped, 3);
        assert_eq!(
            report.per_variable,
            vec![
                ("Farm size".to_string(), 1),
                ("Trust in industry".to_string(), 1),
                ("Region".to_string(), 1),
            ]
        );
    }

    #[test]
    fn all_rows_dropped_is_encoding_error_with_report() {
        let ds = dataset(vec![vec![None, Some("4"), Some("B")]]);
        let err = encode(&ds, &schema()).unwrap_err();
        assert!(matches!(err, Error::Encoding(_)));
        assert!(err.to_string().contains("Farm size: 1"));
    }

    #[test]
    fn subset_rows_recenters() {
        let ds = dataset(vec![
            vec![Some("9"), Some("4"), Some("B")],
            vec![Some("1"), Some("1"), Some("A")],
            vec![Some("8"), Some("5"), Some("C")],
            vec![Some("3"), Some("2"), Some("B")],
        ]);
        let (dm, _) = encode(&ds, &schema()).unwrap();
        let sub = dm.subset_rows(&[0, 2]);
        assert_eq!(sub.n(), 2);
        assert_eq!(sub.kept_rows, vec![0, 2]);
        for col in sub.centered.columns() {
            assert_abs_diff_eq!(col.mean().unwrap(), 0.0, epsilon = 1e-12);
        }
        assert_eq!(sub.raw[[1, 1]], dm.raw[[2, 1]]);
    }
}
