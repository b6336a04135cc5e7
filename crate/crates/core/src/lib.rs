//! Weekly per-learner behavioral features from MOOC event logs, lead/lag
//! stopout datasets, and stability-selection feature importance.
//!
//! Pipeline: [`ingest`] raw NDJSON into an [`EventStore`](model::EventStore),
//! [`featurize`] it into a [`FeatureMatrix`](featurize::FeatureMatrix), build
//! per-cohort [`dataset`]s for every (lead, lag) pair, and rank features with
//! randomized L1 logistic regression in [`stability`]. [`synthgen`] produces
//! seeded synthetic courses in the ingest wire format.

pub mod error;
#[macro_use]
pub mod model;
pub mod dataset;
pub mod featurize;
pub mod ingest;
pub mod stability;
pub mod synthgen;

pub use error::{Error, Result};
