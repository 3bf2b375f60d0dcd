//! Lexical semantic change detection over contextualized word embeddings.
//!
//! Form-based scores compare embedding sets directly ([`form`]); sense-based
//! scores cluster usages first ([`sense`]). The [`annotator`] module builds
//! usage graphs from computational judgments, and [`metrics`] evaluates
//! scores against gold data.

pub mod annotator;
pub mod clustering;
pub mod dataio;
pub mod error;
pub mod form;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod sense;

pub use error::{Error, Result};
pub use geometry::{DistanceKind, LayerSpec};
pub use model::{ChangeScore, Clustering, EmbeddingSet, Judgment, Method, UsageGraph, UsageInstance};
