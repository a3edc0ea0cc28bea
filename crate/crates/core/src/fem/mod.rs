//! Aggregated unfitted finite elements: Lagrange bases, spaces, assembly,
//! norms, harmonic extension and export.

pub mod assembly;
pub mod basis;
pub mod export;
pub mod extension;
pub mod norms;
pub mod poisson;
pub mod space;

pub use assembly::{assemble_vector, map_cell, CellMotion, CellShapes, LocalMatrix, MappedCell, MatrixAssembler};
pub use basis::LagrangeBasis;
pub use extension::HarmonicExtension;
pub use norms::{assemble_background_norm, assemble_h1_norm, assemble_mass};
pub use poisson::{assemble_poisson, default_eta, AssembledSystem, PoissonData, ScalarFn};
pub use space::{CellDofs, FeSpace, SpaceFlavor};
