//! Saddle-point (Stokes) support: full-order assembly, supremizer
//! enrichment on the reference configuration, and the reduced block solve.

pub mod coupling;
pub mod stokes;
pub mod supremizer;

pub use coupling::{coupling_constant_check, CellCoupling, CouplingCheck};
pub use stokes::{assemble_stokes, reference_coupling_bulk, stokes_local, stokes_norms, StokesData, StokesLocal, StokesSpaces, StokesSystem, VectorFn};
pub use supremizer::{enrich, gram_schmidt, reduced_coupling_sigma_min, reduced_stokes_condition, solve_reduced_stokes, SupremizerKind, SupremizerSet};
