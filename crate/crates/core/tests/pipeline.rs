//! End-to-end contracts for the report pipeline that are cheap enough to
//! run on every test pass: manifest bookkeeping, analysis scoping, and the
//! failure path. The heavyweight full-config run lives in the acceptance
//! gate instead.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use surveyboost::report::{load_run_config, run_pipeline, Analysis, RunConfig};
use surveyboost::Error;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// The committed demo config with paths rebased and everything shrunk so a
/// full pass stays in the seconds range.
fn small_config(out: &Path) -> RunConfig {
    let root = workspace_root();
    let mut config = load_run_config(&root.join("config/run.toml")).unwrap();
    config.data = root.join("data/demo_survey.csv");
    config.schema = root.join("config/schema.toml");
    config.out = out.to_path_buf();
    config.seed = 7;
    config.scopes = vec!["combined".into()];
    config.fit.folds = 4;
    config.fit.mstop_max = 60;
    config.forest.ntree = 30;
    config.gbt.trees = 20;
    config.mlp.epochs = 100;
    config
}

fn on_disk(dir: &Path) -> Vec<PathBuf> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, out);
            } else {
                out.push(path);
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, &mut out);
    out
}

#[test]
fn manifest_lists_every_artifact_exactly_once_with_matching_hashes() {
    let out = tempfile::tempdir().unwrap();
    let mut config = small_config(out.path());
    config.analyses = vec![Analysis::Rq1, Analysis::Rq2];
    let manifest = run_pipeline(&config).unwrap();
    assert!(manifest.complete);

    let mut seen = HashSet::new();
    for entry in &manifest.files {
        assert!(seen.insert(&entry.path), "{} listed twice", entry.path);
        let bytes = std::fs::read(out.path().join(&entry.path)).unwrap();
        let digest: String = Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(digest, entry.sha256, "hash mismatch for {}", entry.path);
    }

    for path in on_disk(out.path()) {
        let rel = path
            .strip_prefix(out.path())
            .unwrap()
            .to_string_lossy()
            .replace('\\', "/");
        if rel == "manifest.json" {
            continue;
        }
        assert!(
            seen.contains(&rel),
            "{rel} on disk but absent from the manifest"
        );
    }
}

#[test]
fn rq1_only_run_writes_effect_tables_and_nothing_else() {
    let out = tempfile::tempdir().unwrap();
    let mut config = small_config(out.path());
    config.analyses = vec![Analysis::Rq1];
    let manifest = run_pipeline(&config).unwrap();
    assert!(manifest.complete);

    let mut paths: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
    paths.sort_unstable();
    assert_eq!(
        paths,
        ["effects.csv", "effects.json", "effects_univariate.csv"],
        "rq1-only run wrote unexpected artifacts"
    );
    assert!(out.path().join("manifest.json").is_file());
    assert!(!out.path().join("comparison.csv").exists());
    assert!(!out.path().join("roc").exists());
}

#[test]
fn failed_run_leaves_a_manifest_flagging_partial_output() {
    let out = tempfile::tempdir().unwrap();
    let mut config = small_config(out.path());
    config.data = workspace_root().join("data/no_such_file.csv");
    let err = run_pipeline(&config).unwrap_err();
    assert!(
        matches!(err, Error::Io(_) | Error::Csv(_)),
        "unexpected error: {err}"
    );
    assert_eq!(err.exit_code(), 1);

    let text = std::fs::read_to_string(out.path().join("manifest.json")).unwrap();
    let manifest: surveyboost::report::Manifest = serde_json::from_str(&text).unwrap();
    assert!(!manifest.complete);
    assert!(manifest.error.is_some());
    assert!(manifest.files.is_empty());
}

#[test]
fn seed_and_analysis_overrides_change_the_manifest_but_out_does_not() {
    let base = tempfile::tempdir().unwrap();
    let moved = tempfile::tempdir().unwrap();
    let reseeded = tempfile::tempdir().unwrap();

    let mut config = small_config(base.path());
    config.analyses = vec![Analysis::Rq1];
    let first = run_pipeline(&config).unwrap();

    config.out = moved.path().to_path_buf();
    let second = run_pipeline(&config).unwrap();
    assert_eq!(
        first.config_sha256, second.config_sha256,
        "output directory leaked into the config hash"
    );
    assert_eq!(first.files, second.files);

    config.out = reseeded.path().to_path_buf();
    config.seed = config.seed + 1;
    let third = run_pipeline(&config).unwrap();
    assert_ne!(first.config_sha256, third.config_sha256);
    assert_ne!(first.seed, third.seed);
}
