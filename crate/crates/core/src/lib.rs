//! In-memory evaluation of join-project queries.
//!
//! A two-path query `π_{x,z} R(x,y) ⋈ S(z,y)` (and its star generalisation)
//! is evaluated by splitting tuples on value degree: tuples touching a light
//! value go through an index nested-loop join with per-key deduplication,
//! while the remaining heavy tuples are packed into dense count matrices and
//! multiplied. A cost-based optimizer picks the degree thresholds.
//!
//! The crate also carries the applications built on top of the join:
//! overlap set-similarity joins, set-containment joins and batched boolean
//! set intersection.

pub mod apps;
pub mod error;
pub mod joinproject;
pub mod matmul;
pub mod optimizer;
pub mod oracle;
pub mod relation;
pub mod timing;

pub use error::{Error, Result};
pub use joinproject::{
    dedup_light, full_join_dedup, partition_two_path, star_join, two_path_join, DedupStrategy,
    JoinOptions, OutputSet, Partition,
};
pub use matmul::{multiply_counts, theoretical_cost, CalibrationTable, CountMatrix};
pub use optimizer::{
    closed_form_thresholds, estimate_output_size, optimize_thresholds, CostConstants, Planner,
    Strategy, ThresholdPlan,
};
pub use relation::{
    semi_join_reduce, DegreeStats, Dictionary, IndexedRelation, Relation, ValueId,
};
