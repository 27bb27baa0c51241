//! Regularized particle ("blob") method for mean-field optimal control with
//! terminal constraints.
//!
//! Particles carry discretized trajectories; the terminal constraint is
//! replaced by a Gaussian-mollified nonlocal penalty, and the resulting finite
//! dimensional objective is minimized by plain gradient descent. The crate
//! also ships exact transport references (assignment, monotone 1-d map,
//! closed-form geodesic) and the error metrics used to compare against them.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod gradients;
pub mod kernels;
pub mod metrics;
pub mod optimize;
pub mod oracle;
pub mod par;
pub mod points;

pub mod config;
pub mod experiments;

pub use energy::{
    Circle, ControlMode, Energies, ObstacleSet, ProblemSpec, TargetMeasure, TrajectoryField,
};
pub use error::{BlobError, Result};
pub use gradients::GradientField;
pub use kernels::Mollifier;
pub use optimize::{gd_run, GdOutcome, OptimizerConfig};
pub use points::PointCloud;
