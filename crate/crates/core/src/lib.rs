//! Sensor placement for detecting rare events on a one-dimensional corridor.
//!
//! Event intensity is modelled as a log-Gaussian Cox process on a regular
//! grid. [`lgcp_fit`] fits the latent field by a Laplace approximation,
//! [`placement`] selects sensor cells greedily on a monotone submodular
//! surrogate, and [`void_eval`] estimates the probability that no event
//! escapes detection.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod error;
pub mod gp_prior;
pub mod grid;
pub mod ingest;
pub mod lgcp_fit;
mod par;
pub mod placement;
pub mod sensor_model;
pub mod void_eval;

pub use error::{Error, Result};
pub use gp_prior::{GaussianFieldPosterior, MaternParams};
pub use grid::Grid1D;
pub use lgcp_fit::{laplace_fit, EventCounts, LaplaceFit};
pub use placement::{
    brute_force_place, greedy_place, lazy_greedy_place, mean_intensity, GreedyTrace, MeanIntensityField,
};
pub use sensor_model::{Placement, SensorParams};
pub use void_eval::{evaluate_placement, IntensitySampleSet, VoidEstimate};
