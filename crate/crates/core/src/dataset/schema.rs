//! Declarative survey schema: which variables exist, how each is binarized,
//! and which asset group it belongs to.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Asset groups a variable may belong to. Variables without a group form the
/// ungrouped individual set.
pub const GROUP_LABELS: [&str; 7] = [
    "natural",
    "human",
    "social",
    "biophysical",
    "economic",
    "climate-experience",
    "income-damage",
];

/// Rule for turning one raw survey variable into one or more 0/1 columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Encoding {
    /// 1 iff the response equals `positive` (case-insensitive), else 0.
    Dichotomous { positive: String },
    /// Five-point Likert response: {4,5} map to 1, {1,2,3} to 0, anything
    /// else is treated as missing.
    Likert5Top2,
    /// Integer count: 1 iff the count exceeds `cutoff`.
    CountThreshold { cutoff: f64 },
    /// Continuous quantity: 1 iff the value exceeds `cutoff`.
    IntervalThreshold { cutoff: f64 },
    /// Categorical with declared levels; expands to one dummy column per
    /// non-reference level, in declared order.
    Nominal { levels: Vec<String>, reference: String },
}

impl Encoding {
    /// Number of design-matrix columns this encoding produces.
    pub fn width(&self) -> usize {
        match self {
            Encoding::Nominal { levels, .. } => levels.len() - 1,
            _ => 1,
        }
    }
}

/// One survey variable: its column name in the data file, its encoding rule,
/// and an optional asset-group membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub encoding: Encoding,
}

/// Metadata for one encoded design-matrix column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    /// Source variable name.
    pub variable: String,
    /// Dummy level for nominal variables, `None` otherwise.
    pub level: Option<String>,
    /// Asset group of the source variable, `None` for ungrouped.
    pub group: Option<String>,
    /// Display label, `variable` or `variable=level`.
    pub label: String,
}

/// Validated collection of variable specs; the single source of truth for
/// the encoded column layout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveySchema {
    variables: Vec<VariableSpec>,
}

#[derive(Deserialize)]
struct SchemaFile {
    variable: Vec<VariableSpec>,
}

impl SurveySchema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Schema("schema declares no variables".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for v in &variables {
            if v.name.trim().is_empty() {
                return Err(Error::Schema("variable with empty name".into()));
            }
            if !seen.insert(v.name.clone()) {
                return Err(Error::Schema(format!("duplicate variable '{}'", v.name)));
            }
            if let Some(g) = &v.group {
                if !GROUP_LABELS.contains(&g.as_str()) {
                    return Err(Error::Schema(format!(
                        "variable '{}' names unknown group '{}' (expected one of {})",
                        v.name,
                        g,
                        GROUP_LABELS.join(", ")
                    )));
                }
            }
            if let Encoding::Nominal { levels, reference } = &v.encoding {
                if levels.len() < 2 {
                    return Err(Error::Schema(format!(
                        "nominal variable '{}' declares {} level(s); need at least 2",
                        v.name,
                        levels.len()
                    )));
                }
                let mut lv = std::collections::BTreeSet::new();
                for l in levels {
                    if !lv.insert(l) {
                        return Err(Error::Schema(format!(
                            "nominal variable '{}' repeats level '{}'",
                            v.name, l
                        )));
                    }
                }
                if !levels.contains(reference) {
                    return Err(Error::Schema(format!(
                        "nominal variable '{}' reference '{}' is not a declared level",
                        v.name, reference
                    )));
                }
            }
        }
        Ok(Self { variables })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SchemaFile = toml::from_str(text)
            .map_err(|e| Error::Schema(format!("schema parse failed: {e}")))?;
        Self::new(file.variable)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn get(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Deterministic encoded column layout: variables in schema order, each
    /// nominal expanded to its non-reference levels in declared order.
    pub fn column_layout(&self) -> Vec<ColumnMeta> {
        let mut meta = Vec::new();
        for v in &self.variables {
            match &v.encoding {
                Encoding::Nominal { levels, reference } => {
                    for level in levels.iter().filter(|l| *l != reference) {
                        meta.push(ColumnMeta {
                            variable: v.name.clone(),
                            level: Some(level.clone()),
                            group: v.group.clone(),
                            label: format!("{}={}", v.name, level),
                        });
                    }
                }
                _ => meta.push(ColumnMeta {
                    variable: v.name.clone(),
                    level: None,
                    group: v.group.clone(),
                    label: v.name.clone(),
                }),
            }
        }
        meta
    }

    pub fn n_encoded_columns(&self) -> usize {
        self.variables.iter().map(|v| v.encoding.width()).sum()
    }
}

/// Encoded column indices per asset group, plus the ungrouped remainder.
/// Group order follows first appearance in the schema.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMap {
    pub groups: Vec<(String, Vec<usize>)>,
    pub ungrouped: Vec<usize>,
}

impl GroupMap {
    pub fn empty() -> Self {
        GroupMap {
            groups: Vec::new(),
            ungrouped: Vec::new(),
        }
    }

    /// Derive the mapping from already-encoded column metadata.
    pub fn from_meta(meta: &[ColumnMeta]) -> Self {
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        let mut ungrouped = Vec::new();
        for (idx, col) in meta.iter().enumerate() {
            match &col.group {
                Some(g) => match groups.iter_mut().find(|(label, _)| label == g) {
                    Some((_, cols)) => cols.push(idx),
                    None => groups.push((g.clone(), vec![idx])),
                },
                None => ungrouped.push(idx),
            }
        }
        GroupMap { groups, ungrouped }
    }

    pub fn group(&self, label: &str) -> Option<&[usize]> {
        self.groups
            .iter()
            .find(|(g, _)| g == label)
            .map(|(_, cols)| cols.as_slice())
    }
}

/// Map every encoded column to its asset group (or the ungrouped set).
pub fn group_map(schema: &SurveySchema) -> GroupMap {
    GroupMap::from_meta(&schema.column_layout())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn likert(name: &str, group: &str) -> VariableSpec {
        VariableSpec {
            name: name.into(),
            group: Some(group.into()),
            encoding: Encoding::Likert5Top2,
        }
    }

    #[test]
    fn parses_all_encoding_kinds_from_toml() {
        let text = r#"
            [[variable]]
            name = "Gender"
            encoding = { kind = "dichotomous", positive = "female" }

            [[variable]]
            name = "Trust in industry"
            group = "social"
            encoding = { kind = "likert5-top2" }

            [[variable]]
            name = "Generations of farm ownership"
            group = "human"
            encoding = { kind = "count-threshold", cutoff = 3 }

            [[variable]]
            name = "Farm size"
            group = "biophysical"
            encoding = { kind = "interval-threshold", cutoff = 7.0 }

            [[variable]]
            name = "Region"
            group = "natural"
            encoding = { kind = "nominal", levels = ["A", "B", "C", "D"], reference = "A" }
        "#;
        let schema = SurveySchema::from_toml_str(text).unwrap();
        assert_eq!(schema.variables().len(), 5);
        assert_eq!(schema.n_encoded_columns(), 4 + 3);
        assert_eq!(
            schema.get("Farm size").unwrap().encoding,
            Encoding::IntervalThreshold { cutoff: 7.0 }
        );
    }

    #[test]
    fn nominal_expands_to_k_minus_one_dummies() {
        let schema = SurveySchema::new(vec![VariableSpec {
            name: "Region".into(),
            group: Some("natural".into()),
            encoding: Encoding::Nominal {
                levels: vec!["A".into(), "B".into(), "C".into(), "D".into()],
                reference: "B".into(),
            },
        }])
        .unwrap();
        let layout = schema.column_layout();
        let labels: Vec<_> = layout.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["Region=A", "Region=C", "Region=D"]);
    }

    #[test]
    fn rejects_bad_schemas() {
        assert!(SurveySchema::new(vec![]).is_err());
        assert!(SurveySchema::new(vec![likert("x", "social"), likert("x", "social")]).is_err());
        assert!(SurveySchema::new(vec![likert("x", "made-up-group")]).is_err());
        let bad_ref = VariableSpec {
            name: "r".into(),
            group: None,
            encoding: Encoding::Nominal {
                levels: vec!["a".into(), "b".into()],
                reference: "z".into(),
            },
        };
        assert!(SurveySchema::new(vec![bad_ref]).is_err());
        let one_level = VariableSpec {
            name: "r".into(),
            group: None,
            encoding: Encoding::Nominal {
                levels: vec!["a".into()],
                reference: "a".into(),
            },
        };
        assert!(SurveySchema::new(vec![one_level]).is_err());
    }

    #[test]
    fn group_map_partitions_columns() {
        let schema = SurveySchema::new(vec![
            VariableSpec {
                name: "Region".into(),
                group: Some("natural".into()),
                encoding: Encoding::Nominal {
                    levels: vec!["A".into(), "B".into(), "C".into()],
                    reference: "A".into(),
                },
            },
            likert("Trust in industry", "social"),
            likert("Trust in banks", "social"),
            VariableSpec {
                name: "Gender".into(),
                group: None,
                encoding: Encoding::Dichotomous {
                    positive: "female".into(),
                },
            },
        ])
        .unwrap();
        let gm = group_map(&schema);
        assert_eq!(gm.groups.len(), 2);
        assert_eq!(gm.group("natural"), Some(&[0usize, 1][..]));
        assert_eq!(gm.group("social"), Some(&[2usize, 3][..]));
        assert_eq!(gm.ungrouped, vec![4]);

        let mut all: Vec<usize> = gm
            .groups
            .iter()
            .flat_map(|(_, cols)| cols.iter().copied())
            .chain(gm.ungrouped.iter().copied())
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..schema.n_encoded_columns()).collect::<Vec<_>>());
    }

    #[test]
    fn ungrouped_schema_yields_empty_mapping() {
        let schema = SurveySchema::new(vec![
            VariableSpec {
                name: "a".into(),
                group: None,
                encoding: Encoding::Likert5Top2,
            },
            VariableSpec {
                name: "b".into(),
                group: None,
                encoding: Encoding::Likert5Top2,
            },
        ])
        .unwrap();
        let gm = group_map(&schema);
        assert!(gm.groups.is_empty());
        assert_eq!(gm.ungrouped, vec![0, 1]);
    }
}
