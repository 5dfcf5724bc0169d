//! Workloads shared by the benchmarks.

use mmjoin_core::relation::{community_graph_with_edges, generate_skewed, IndexedRelation};

/// Dense community graph: large full join, small projection.
pub fn dense_graph(edges: usize, seed: u64) -> IndexedRelation {
    IndexedRelation::build(community_graph_with_edges(edges, 1, 0.8, seed))
}

/// Sparse skewed graph where most values are light.
pub fn skewed_graph(edges: usize, seed: u64) -> IndexedRelation {
    let n = (edges / 4).max(1);
    IndexedRelation::build(generate_skewed(n, n, edges, 1.1, seed))
}
