//! Weekly closing price model for a sector index: indicator ingestion,
//! Johnson SB response normalization, interaction regression with
//! backward elimination, diagnostics, validation, contribution ranking and
//! a fixed published reference model.

pub mod attribute;
pub mod cli;
pub mod dataset;
pub mod diagnose;
mod dist;
pub mod error;
pub mod exec;
pub mod johnson;
pub mod pipeline;
pub mod refmodel;
pub mod regress;
pub mod select;
pub mod synth;
pub mod validate;

pub use attribute::{AttributionMethod, ContributionRanking};
pub use dataset::{Dataset, Indicator, ObservationRow, ScalerParams, SplitSpec};
pub use error::{Error, Result};
pub use exec::Execution;
pub use johnson::JohnsonSbParams;
pub use regress::{FittedModel, ModelSpec, OlsEstimate, TermId, TrainingSet};
pub use select::{EliminationOptions, EliminationTrace};
pub use validate::{CvConfig, CvReport, ValidationReport};
