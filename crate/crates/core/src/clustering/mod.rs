//! Clustering engines: affinity propagation, its incremental a-posteriori
//! variant, and weighted correlation clustering of usage graphs.

mod affinity;
mod correlation;
mod incremental;

pub use affinity::{
    affinity_propagation, affinity_propagation_on, similarity_matrix, ApParams, Preference, Similarity,
};
pub use correlation::{
    brute_force_correlation_cluster, correlation_cluster, correlation_loss, CorrParams, MAX_EXACT_NODES,
};
pub use incremental::{app_step, resolve_merges, AppMemory, AppStep, MemoryEntry};
