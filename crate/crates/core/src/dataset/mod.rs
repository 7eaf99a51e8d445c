//! Survey ingestion, outcome coding, binarized design matrices, and
//! train/test splitting.

mod encode;
mod load;
mod outcomes;
mod schema;
mod split;

pub use encode::{encode, DesignMatrix, MissingnessReport};
pub use load::{load_survey, Country, Dataset};
pub use outcomes::{code_outcomes, OutcomePair, WELLBEING_LEVELS};
pub use schema::{
    group_map, ColumnMeta, Encoding, GroupMap, SurveySchema, VariableSpec, GROUP_LABELS,
};
pub use split::{split, split_indices, split_indices_stratified};
