//! Reduced-order modelling building blocks: truncated SVD, TPOD,
//! tensor-train bases, MDEIM, Galerkin projection and the snapshot store.

pub mod mdeim;
pub mod project;
pub mod store;
pub mod svd;
pub mod tpod;
pub mod tt;

pub use mdeim::{greedy_indices, mdeim, online_coefficients, HyperReduction};
pub use project::{combine_matrices, combine_vectors, project_matrix_components, project_vector_components, solve_online, ReducedOperator};
pub use store::{read_array, write_array, SnapshotKind, SnapshotSet, StoredArray};
pub use svd::{energy_rank, rsvd, SvdOptions, TruncatedSvd};
pub use tpod::{tpod, ReducedBasis};
pub use tt::{tt_orthogonalize, ttsvd, ttsvd_weighted, TtBasis, TtCore};
