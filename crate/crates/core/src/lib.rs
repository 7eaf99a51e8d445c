//! Sparse-group component-wise boosting, logistic inference and model
//! comparison for survey-style tabular data.
//!
//! The crate covers the full path from a raw survey CSV to reported
//! artifacts:
//!
//! * [`dataset`]: schema-driven recoding of survey variables into a binary
//!   design matrix with grouped dummy blocks, outcome coding and train/test
//!   splitting.
//! * [`baselearners`]: ridge-penalized least-squares base-learners whose
//!   penalty is calibrated to a prescribed effective degrees of freedom.
//! * [`boost`]: component-wise gradient boosting for the binomial deviance,
//!   with sparse group selection and cross-validated stopping.
//! * [`glm`]: maximum-likelihood logistic regression with Wald inference
//!   for targeted effect estimates.
//! * [`baselines`]: random forest, gradient boosted trees and a single
//!   hidden layer perceptron used as comparison models.
//! * [`eval`]: ROC/AUC and accuracy metrics plus the comparison protocol.
//! * [`report`]: configuration, pipeline orchestration and artifact output
//!   behind the `analyze` binary.

pub mod baselearners;
pub mod baselines;
pub mod boost;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod glm;
pub mod linalg;
pub mod report;

pub use error::{Error, Result};
