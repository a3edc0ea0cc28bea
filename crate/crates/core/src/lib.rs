//! Localized reduced-order models for parametrized PDEs discretized with
//! aggregated unfitted finite elements on a fixed background grid.
//!
//! The crate is organised bottom-up:
//! `geometry` (grid, level set, cut quadrature, aggregation),
//! `deformation` (elastic map to a reference configuration),
//! `fem` (spaces, assembly, norms, extension, export),
//! `rom` (SVD, TPOD, TT-SVD, MDEIM, projections, snapshot store),
//! `localization` (clustering and local offline/online),
//! `saddle` (Stokes, supremizers, reduced saddle solve) and
//! `pipeline` (benchmarks, configuration, metrics, reports).

pub mod deformation;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod linalg;
pub mod localization;
pub mod pipeline;
pub mod quadrature;
pub mod rom;
pub mod saddle;

pub use error::{Result, RomError};

/// Point in two space dimensions.
pub type Point = [f64; 2];
