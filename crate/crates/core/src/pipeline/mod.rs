//! Benchmark configuration, parameter sampling, drivers and metrics.

pub mod alloc;
pub mod benchmark;
pub mod config;
pub mod metrics;
pub mod run;
pub mod sampling;

pub use benchmark::{poisson_data, stokes_data, Benchmark, Geometry, NodalSource, OnlineEvaluator, Physics};
pub use config::{Config, Method, Problem};
pub use metrics::{evaluate_online, mean_errors, offline_bounds, projection_error, relative_error, BoundCheck, OnlineRecord, TT_SLACK};
pub use run::{build_models, check_model_hash, compute_snapshots, online_parameters, report, run_fom, run_offline, run_online, training_parameters, OfflineOutput, OnlineOutput};
pub use sampling::{halton, uniform};
