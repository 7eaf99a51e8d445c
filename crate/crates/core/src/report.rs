//! End-to-end pipeline driver behind the `analyze` binary: load a run
//! configuration, execute the requested analyses, and write every artifact
//! under a manifest that records the seed, the config hash, and per-file
//! checksums.
//!
//! Artifact families by analysis:
//! - `rq1`: climate-block odds-ratio tables (`effects.csv`/`.json`, plus the
//!   univariate sensitivity run).
//! - `rq2`: sparse-group-boosting importance tables with group directions
//!   (`importance_{target}.csv`), the CV curves behind the chosen m_stop, and
//!   the serialized models.
//! - `rq3`: interaction importance ranking and probability grids for the top
//!   three pairs.
//! - `compare`: the seven-model accuracy/AUC table and per-model ROC points.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselearners::{FeatureSpec, LearnerKind};
use crate::baselines::{ForestConfig, GbtConfig, MlpConfig};
use crate::boost::{
    self, cv_path, fit_boost, group_direction, variable_importance, BoostModel, FitConfig,
    GroupDirection, ImportanceRow, LearnerMode,
};
use crate::dataset::{
    code_outcomes, encode, load_survey, split_indices, Country, DesignMatrix, Encoding,
    MissingnessReport, SurveySchema,
};
use crate::error::{Error, Result};
use crate::eval::{comparison_scores, roc_curve, ComparisonConfig, ScopedData};
use crate::glm;

/// One of the four runnable analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Rq1,
    Rq2,
    Rq3,
    Compare,
}

const ALL_ANALYSES: [Analysis; 4] = [
    Analysis::Rq1,
    Analysis::Rq2,
    Analysis::Rq3,
    Analysis::Compare,
];

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Analysis::Rq1 => write!(f, "rq1"),
            Analysis::Rq2 => write!(f, "rq2"),
            Analysis::Rq3 => write!(f, "rq3"),
            Analysis::Compare => write!(f, "compare"),
        }
    }
}

impl FromStr for Analysis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rq1" => Ok(Analysis::Rq1),
            "rq2" => Ok(Analysis::Rq2),
            "rq3" => Ok(Analysis::Rq3),
            "compare" => Ok(Analysis::Compare),
            other => Err(Error::Config(format!(
                "unknown analysis '{other}' (expected rq1, rq2, rq3, compare)"
            ))),
        }
    }
}

fn parse_scope(s: &str) -> Result<Country> {
    match s.trim().to_ascii_lowercase().as_str() {
        "combined" | "both" => Ok(Country::Both),
        "chile" => Ok(Country::Chile),
        "tunisia" => Ok(Country::Tunisia),
        other => Err(Error::Config(format!(
            "unknown scope '{other}' (expected combined, chile, tunisia)"
        ))),
    }
}

/// Which data column holds the wellbeing response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeConfig {
    pub variable: String,
}

/// Which data column tags the country, and the two values it takes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountryConfig {
    pub variable: String,
    pub chile: String,
    pub tunisia: String,
}

/// Declarative description of one full run, normally read from TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_split_fraction")]
    pub split_fraction: f64,
    #[serde(default = "default_scopes")]
    pub scopes: Vec<String>,
    #[serde(default = "default_analyses")]
    pub analyses: Vec<Analysis>,
    pub outcome: OutcomeConfig,
    pub country: CountryConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub gbt: GbtConfig,
    #[serde(default)]
    pub mlp: MlpConfig,
}

fn default_split_fraction() -> f64 {
    0.7
}

fn default_scopes() -> Vec<String> {
    vec!["combined".into(), "chile".into(), "tunisia".into()]
}

fn default_analyses() -> Vec<Analysis> {
    ALL_ANALYSES.to_vec()
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("run config parse failed: {e}")))
}

/// One artifact the pipeline wrote, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

/// Record of one pipeline run: what was written, under which seed and
/// config, and whether the run finished. The manifest itself is not listed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_sha256: String,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missingness: Option<MissingnessReport>,
    pub files: Vec<ManifestEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Serializes artifacts into the output directory and accumulates their
/// manifest entries.
struct ArtifactWriter {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl ArtifactWriter {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(ArtifactWriter {
            root: root.to_path_buf(),
            entries: Vec::new(),
        })
    }

    fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes)?;
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Encoding(format!("serializing {rel}: {e}")))?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    fn write_csv<F>(&mut self, rel: &str, build: F) -> Result<()>
    where
        F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        build(&mut w)?;
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Encoding(format!("flushing {rel}: {e}")))?;
        self.write_bytes(rel, &bytes)
    }
}

/// Shortest-roundtrip decimal text; the same value always prints the same
/// bytes, which is what makes rerun artifacts byte-comparable.
fn num(v: f64) -> String {
    format!("{v}")
}

/// Run every requested analysis and write the manifest, even when a stage
/// fails partway: the manifest then carries `complete: false`, the error
/// text, and whichever files made it to disk.
pub fn run_pipeline(config: &RunConfig) -> Result<Manifest> {
    let mut writer = ArtifactWriter::new(&config.out)?;
    // hash the effective config minus the output location, which has no
    // bearing on the numbers; rehomed reruns stay byte-comparable
    let mut hashed = config.clone();
    hashed.out = PathBuf::new();
    let config_bytes = serde_json::to_vec(&hashed)
        .map_err(|e| Error::Encoding(format!("hashing run config: {e}")))?;
    let config_sha256 = sha256_hex(&config_bytes);

    let mut missingness = None;
    let outcome = run_analyses(config, &mut writer, &mut missingness);
    let manifest = Manifest {
        seed: config.seed,
        config_sha256,
        complete: outcome.is_ok(),
        error: outcome.as_ref().err().map(|e| e.to_string()),
        missingness,
        files: writer.entries.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Encoding(format!("serializing manifest: {e}")))?;
    text.push('\n');
    fs::write(config.out.join("manifest.json"), text)?;
    outcome.map(|()| manifest)
}

fn run_analyses(
    config: &RunConfig,
    writer: &mut ArtifactWriter,
    missingness: &mut Option<MissingnessReport>,
) -> Result<()> {
    if config.analyses.is_empty() {
        return Err(Error::Config("no analyses requested".into()));
    }
    let scopes: Vec<Country> = config
        .scopes
        .iter()
        .map(|s| parse_scope(s))
        .collect::<Result<_>>()?;
    if scopes.is_empty() {
        return Err(Error::Config("no scopes requested".into()));
    }

    let schema = SurveySchema::from_path(&config.schema)?;
    let (full, report) = assemble_scoped(config, &schema)?;
    *missingness = Some(report);

    let fit = FitConfig {
        seed: config.seed,
        ..config.fit.clone()
    };

    let wants = |a: Analysis| config.analyses.contains(&a);
    if wants(Analysis::Rq1) {
        rq1(writer, &full, &scopes)?;
    }

    if wants(Analysis::Rq2) || wants(Analysis::Rq3) || wants(Analysis::Compare) {
        let (train_idx, test_idx) =
            split_indices(full.design.n(), config.split_fraction, config.seed)?;
        let train = full.subset(&train_idx);
        let test = full.subset(&test_idx);

        if wants(Analysis::Rq2) {
            rq2(writer, &train, &fit)?;
        }
        if wants(Analysis::Rq3) {
            rq3(writer, &train, &fit, config, &schema)?;
        }
        if wants(Analysis::Compare) {
            compare(writer, &train, &test, config, &fit, &scopes)?;
        }
    }
    Ok(())
}

/// Load, filter, and encode the survey into scope-tagged modeling data.
///
/// Rows missing the outcome or the country tag are dropped before encoding,
/// so the missingness report counts predictor gaps only among rows that
/// could have been modeled at all.
fn assemble_scoped(
    config: &RunConfig,
    schema: &SurveySchema,
) -> Result<(ScopedData, MissingnessReport)> {
    let data = load_survey(&config.data, schema)?;
    let outcome_raw = data.column(&config.outcome.variable)?;
    let country_raw = data.column(&config.country.variable)?;
    let tagged: Vec<usize> = (0..data.n())
        .filter(|&i| outcome_raw[i].is_some() && country_raw[i].is_some())
        .collect();
    if tagged.is_empty() {
        return Err(Error::Input(
            "no rows carry both an outcome and a country tag".into(),
        ));
    }
    let data = data.subset(&tagged);
    let outcome_raw: Vec<String> = tagged
        .iter()
        .map(|&i| outcome_raw[i].clone().expect("filtered to Some"))
        .collect();
    let country_raw: Vec<String> = tagged
        .iter()
        .map(|&i| country_raw[i].clone().expect("filtered to Some"))
        .collect();

    let (design, report) = encode(&data, schema)?;
    let outcome_kept: Vec<&str> = design
        .kept_rows
        .iter()
        .map(|&r| outcome_raw[r].as_str())
        .collect();
    let outcomes = code_outcomes(&outcome_kept)?;
    let countries: Vec<Country> = design
        .kept_rows
        .iter()
        .map(|&r| {
            let v = country_raw[r].as_str();
            if v == config.country.chile {
                Ok(Country::Chile)
            } else if v == config.country.tunisia {
                Ok(Country::Tunisia)
            } else {
                Err(Error::Input(format!(
                    "country value '{v}' matches neither '{}' nor '{}'",
                    config.country.chile, config.country.tunisia
                )))
            }
        })
        .collect::<Result<_>>()?;
    Ok((ScopedData::new(design, outcomes, countries)?, report))
}

fn rq1(writer: &mut ArtifactWriter, full: &ScopedData, scopes: &[Country]) -> Result<()> {
    let mut joint = Vec::new();
    let mut univariate = Vec::new();
    for &scope in scopes {
        let rows = full.rows_in(scope);
        let name = scope.to_string();
        joint.extend(glm::climate_effect_analysis(
            &full.design,
            &full.outcomes,
            &rows,
            &name,
            false,
        )?);
        univariate.extend(glm::climate_effect_analysis(
            &full.design,
            &full.outcomes,
            &rows,
            &name,
            true,
        )?);
    }
    writer.write_csv("effects.csv", |w| write_effect_rows(w, &joint))?;
    writer.write_csv("effects_univariate.csv", |w| {
        write_effect_rows(w, &univariate)
    })?;
    writer.write_json("effects.json", &joint)
}

fn write_effect_rows(
    w: &mut csv::Writer<Vec<u8>>,
    rows: &[glm::ClimateEffectRow],
) -> Result<()> {
    w.write_record([
        "scope",
        "target",
        "block",
        "variable",
        "odds_ratio",
        "p_value",
        "ci_low",
        "ci_high",
    ])?;
    for r in rows {
        w.write_record([
            r.scope.as_str(),
            r.target.as_str(),
            r.block.as_str(),
            r.estimate.variable.as_str(),
            &num(r.estimate.odds_ratio),
            &num(r.estimate.p_value),
            &num(r.estimate.ci_low),
            &num(r.estimate.ci_high),
        ])?;
    }
    Ok(())
}

fn kind_name(kind: LearnerKind) -> &'static str {
    match kind {
        LearnerKind::Individual => "individual",
        LearnerKind::Group => "group",
        LearnerKind::Interaction => "interaction",
    }
}

/// Direction marker for one importance row: a group's summed effect for
/// group learners, the coefficient sign for single-column learners.
fn row_direction(model: &BoostModel, row: &ImportanceRow) -> Result<String> {
    let learner = &model.learners[row.learner_id];
    Ok(match learner.kind {
        LearnerKind::Group => group_direction(model, &learner.label)?.to_string(),
        LearnerKind::Individual => {
            let coef = model.coefficients[learner.columns[0]];
            match coef.partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => "+".into(),
                Some(std::cmp::Ordering::Less) => "-".into(),
                _ => GroupDirection::Undefined {
                    reason: "zero coefficient".into(),
                }
                .to_string(),
            }
        }
        LearnerKind::Interaction => String::new(),
    })
}

fn row_group(model: &BoostModel, row: &ImportanceRow) -> String {
    let learner = &model.learners[row.learner_id];
    match learner.kind {
        LearnerKind::Group => learner.label.clone(),
        LearnerKind::Individual => model.column_meta[learner.columns[0]]
            .group
            .clone()
            .unwrap_or_default(),
        LearnerKind::Interaction => String::new(),
    }
}

fn write_cv_curve(writer: &mut ArtifactWriter, rel: &str, curve: &[f64]) -> Result<()> {
    writer.write_csv(rel, |w| {
        w.write_record(["iteration", "mean_deviance"])?;
        for (m, d) in curve.iter().enumerate() {
            w.write_record([m.to_string(), num(*d)])?;
        }
        Ok(())
    })
}

fn rq2(writer: &mut ArtifactWriter, train: &ScopedData, fit: &FitConfig) -> Result<()> {
    let cfg = FitConfig {
        learner_mode: LearnerMode::Sgb,
        ..fit.clone()
    };
    for target in ["high", "low"] {
        let y = train.outcomes.target(target)?.to_vec();
        let path = cv_path(&train.design, &y, &cfg)?;
        let model = fit_boost(
            &train.design,
            &y,
            &FitConfig {
                mstop: Some(path.mstop),
                ..cfg.clone()
            },
        )?;
        write_cv_curve(writer, &format!("cv_{target}.csv"), &path.mean_deviance)?;
        let ranking = variable_importance(&model);
        writer.write_csv(&format!("importance_{target}.csv"), |w| {
            w.write_record([
                "rank",
                "label",
                "kind",
                "risk_reduction",
                "selection_count",
                "group",
                "direction",
            ])?;
            for (rank, row) in ranking.iter().enumerate() {
                w.write_record([
                    (rank + 1).to_string(),
                    row.label.clone(),
                    kind_name(row.kind).to_string(),
                    num(row.risk_reduction),
                    row.selection_count.to_string(),
                    row_group(&model, row),
                    row_direction(&model, row)?,
                ])?;
            }
            Ok(())
        })?;
        writer.write_json(&format!("model_{target}.json"), &model)?;
    }
    Ok(())
}

fn rq3(
    writer: &mut ArtifactWriter,
    train: &ScopedData,
    fit: &FitConfig,
    config: &RunConfig,
    schema: &SurveySchema,
) -> Result<()> {
    let cfg = FitConfig {
        learner_mode: LearnerMode::MbInt,
        ..fit.clone()
    };
    let y = train.outcomes.target("high")?.to_vec();
    let path = cv_path(&train.design, &y, &cfg)?;
    let model = fit_boost(
        &train.design,
        &y,
        &FitConfig {
            mstop: Some(path.mstop),
            ..cfg
        },
    )?;
    write_cv_curve(writer, "cv_interactions.csv", &path.mean_deviance)?;

    let pairs: Vec<ImportanceRow> = variable_importance(&model)
        .into_iter()
        .filter(|r| r.kind == LearnerKind::Interaction)
        .collect();
    writer.write_csv("interactions.csv", |w| {
        w.write_record(["rank", "label", "risk_reduction", "selection_count"])?;
        for (rank, row) in pairs.iter().enumerate() {
            w.write_record([
                (rank + 1).to_string(),
                row.label.clone(),
                num(row.risk_reduction),
                row.selection_count.to_string(),
            ])?;
        }
        Ok(())
    })?;

    let (zero_name, one_name) = country_level_names(schema, &config.country);
    for (i, row) in pairs.iter().take(3).enumerate() {
        let learner = &model.learners[row.learner_id];
        let (a, b) = match model.feature_specs[learner.columns[0]] {
            FeatureSpec::Product(a, b) => (a, b),
            FeatureSpec::Column(_) => continue,
        };
        let factor_a = model.column_meta[a].label.clone();
        let factor_b = model.column_meta[b].label.clone();
        let grid = interaction_grid(&model, (&factor_a, &factor_b), &config.country.variable)?;
        writer.write_csv(&format!("grid_{}.csv", i + 1), |w| {
            w.write_record(["factor_a", "a", "factor_b", "b", "country", "probability"])?;
            for cell in &grid.cells {
                let country = if cell.country == 1 {
                    &one_name
                } else {
                    &zero_name
                };
                w.write_record([
                    factor_a.as_str(),
                    &cell.a.to_string(),
                    factor_b.as_str(),
                    &cell.b.to_string(),
                    country,
                    &num(cell.probability),
                ])?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

/// Display names for the country dummy's 0 and 1 values, read off the
/// schema's dichotomous coding when the country is itself a predictor.
fn country_level_names(schema: &SurveySchema, country: &CountryConfig) -> (String, String) {
    if let Some(spec) = schema.get(&country.variable) {
        if let Encoding::Dichotomous { positive } = &spec.encoding {
            let zero = if positive.eq_ignore_ascii_case(&country.chile) {
                country.tunisia.clone()
            } else {
                country.chile.clone()
            };
            return (zero, positive.clone());
        }
    }
    ("0".into(), "1".into())
}

/// One cell of an interaction probability grid.
#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub a: u8,
    pub b: u8,
    pub country: u8,
    pub probability: f64,
}

/// Predicted probabilities over {0,1}³ for two factors and the country
/// dummy, all other columns held at their training means. When one factor
/// is itself the country column the grid collapses to the four consistent
/// cells.
#[derive(Debug, Clone, Serialize)]
pub struct InteractionGrid {
    pub factor_a: String,
    pub factor_b: String,
    pub country_column: String,
    pub cells: Vec<GridCell>,
}

pub fn interaction_grid(
    model: &BoostModel,
    factors: (&str, &str),
    country_variable: &str,
) -> Result<InteractionGrid> {
    let column = |label: &str| -> Result<usize> {
        model
            .column_meta
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| Error::Lookup(format!("factor '{label}' is not a design column")))
    };
    let ca = column(factors.0)?;
    let cb = column(factors.1)?;
    if ca == cb {
        return Err(Error::Lookup(format!(
            "factors '{}' and '{}' resolve to the same column",
            factors.0, factors.1
        )));
    }
    let cc = model
        .column_meta
        .iter()
        .position(|m| m.variable == country_variable && m.level.is_none())
        .ok_or_else(|| {
            Error::Lookup(format!(
                "country column '{country_variable}' is not in the model's design"
            ))
        })?;

    let combos: Vec<(u8, u8, u8)> = (0..=1u8)
        .flat_map(|c| (0..=1u8).flat_map(move |a| (0..=1u8).map(move |b| (c, a, b))))
        .filter(|&(c, a, b)| (ca != cc || a == c) && (cb != cc || b == c))
        .collect();
    let p = model.column_meta.len();
    let mut raw = Array2::zeros((combos.len(), p));
    let mut cells = Vec::with_capacity(combos.len());
    for (r, &(country, a, b)) in combos.iter().enumerate() {
        for j in 0..p {
            raw[[r, j]] = model.feature_means[j];
        }
        raw[[r, cc]] = country as f64;
        raw[[r, ca]] = a as f64;
        raw[[r, cb]] = b as f64;
        cells.push((a, b, country));
    }
    let design = DesignMatrix::from_raw(raw, model.column_meta.clone());
    let probabilities = boost::predict_proba(model, &design)?;
    Ok(InteractionGrid {
        factor_a: factors.0.to_string(),
        factor_b: factors.1.to_string(),
        country_column: country_variable.to_string(),
        cells: cells
            .into_iter()
            .zip(probabilities)
            .map(|((a, b, country), probability)| GridCell {
                a,
                b,
                country,
                probability,
            })
            .collect(),
    })
}

fn compare(
    writer: &mut ArtifactWriter,
    train: &ScopedData,
    test: &ScopedData,
    config: &RunConfig,
    fit: &FitConfig,
    scopes: &[Country],
) -> Result<()> {
    let cfg = ComparisonConfig {
        fit: fit.clone(),
        forest: ForestConfig {
            seed: config.seed.wrapping_add(1),
            ..config.forest.clone()
        },
        gbt: GbtConfig {
            seed: config.seed.wrapping_add(2),
            ..config.gbt.clone()
        },
        mlp: MlpConfig {
            seed: config.seed.wrapping_add(3),
            ..config.mlp.clone()
        },
        scopes: scopes.to_vec(),
        ..ComparisonConfig::default()
    };
    let comparison = comparison_scores(train, test, &cfg)?;
    writer.write_csv("comparison.csv", |w| {
        w.write_record(["model", "target", "scope", "accuracy", "auc"])?;
        for r in &comparison.rows {
            w.write_record([
                r.model.as_str(),
                r.target.as_str(),
                r.scope.as_str(),
                &num(r.accuracy),
                &num(r.auc),
            ])?;
        }
        Ok(())
    })?;
    writer.write_json("comparison.json", &comparison.rows)?;
    for s in &comparison.scores {
        let points = roc_curve(&s.scores, &s.labels)?;
        writer.write_csv(&format!("roc/{}_{}_{}.csv", s.model, s.target, s.scope), |w| {
            w.write_record(["fpr", "tpr"])?;
            for (fpr, tpr) in points {
                w.write_record([num(fpr), num(tpr)])?;
            }
            Ok(())
        })?;
    }
    Ok(())
}
