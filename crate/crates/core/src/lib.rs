//! Click-probability ranking for six-product impressions.
//!
//! The crate covers the full modelling path:
//!
//! - [`dataset`]: impression/product CSV ingestion, the product join, and a
//!   seeded synthetic generator with a planted click signal.
//! - [`preprocess`]: first-appearance label encoding, `-999` / mean imputation.
//! - [`gbdt`]: oblivious gradient-boosted trees for logloss with ordered
//!   target statistics on categorical features.
//! - [`tpe`]: Tree-structured Parzen Estimator and random search.
//! - [`evalrank`]: logloss, per-query ranking, mean reciprocal rank.
//! - [`trainer`]: stratified K-fold training, fold ensembles and tuning.

pub mod dataset;
pub mod error;
pub mod evalrank;
pub mod gbdt;
pub mod preprocess;
pub mod tpe;
pub mod trainer;

pub use dataset::{ImpressionRow, JoinedTable, ProductRow, SyntheticConfig};
pub use error::{Error, Result};
pub use evalrank::{MetricReport, QueryRanking, ZeroClickPolicy};
pub use gbdt::{GbdtModel, GbdtParams, ObliviousTree};
pub use preprocess::{FeatureMatrix, Imputer, LabelEncoder, Preprocessor};
pub use tpe::{Dimension, Point, SearchSpace, TpeConfig, Trial, TrialStatus};
pub use trainer::{CvResult, FoldPlan};
