//! Topology diagnostics over learned graphs, spectral clustering and the edge
//! masks used by the intra-class and inter-class ablations.
//!
//! Edge-based statistics treat a pair as connected when its weight is positive
//! and at least `rel_eps` times the largest weight in the graph.

mod mask;
mod spectral;
pub(crate) mod topology;

pub use mask::{apply_mask, mask_edges, EdgeMask};
pub use spectral::{same_partition, spectral_clustering};
pub use topology::{
    avg_degree, clustering_coeff, community_ratio, edge_set, edge_sparsity, jaccard_index, topology_series,
    TopologyStats,
};
