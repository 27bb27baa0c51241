//! Initialization and the gradient-descent driver.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{Energies, ProblemSpec, TargetMeasure, TrajectoryField};
use crate::error::{check_dim, BlobError, Result};
use crate::gradients::value_and_gradient;
use crate::par::Execution;
use crate::points::PointCloud;

/// Slack below which a new loss does not count as a decrease.
pub const DECREASE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    #[serde(default = "defaults::lr_reduce_factor")]
    pub lr_reduce_factor: f64,
    #[serde(default = "defaults::lr_reduce_patience")]
    pub lr_reduce_patience: usize,
    #[serde(default = "defaults::lr_floor")]
    pub lr_floor: f64,
    #[serde(default = "defaults::early_stop_patience")]
    pub early_stop_patience: usize,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn lr_reduce_factor() -> f64 {
        0.2
    }
    pub fn lr_reduce_patience() -> usize {
        2
    }
    pub fn lr_floor() -> f64 {
        1e-8
    }
    pub fn early_stop_patience() -> usize {
        5
    }
}

impl OptimizerConfig {
    pub fn new(learning_rate: f64, max_steps: usize) -> Self {
        Self {
            learning_rate,
            max_steps,
            lr_reduce_factor: defaults::lr_reduce_factor(),
            lr_reduce_patience: defaults::lr_reduce_patience(),
            lr_floor: defaults::lr_floor(),
            early_stop_patience: defaults::early_stop_patience(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(BlobError::arg("learning rate must be positive"));
        }
        if !(self.lr_reduce_factor > 0.0 && self.lr_reduce_factor < 1.0) {
            return Err(BlobError::arg("lr_reduce_factor must lie in (0, 1)"));
        }
        if self.lr_reduce_patience == 0 || self.early_stop_patience == 0 {
            return Err(BlobError::arg("patience values must be at least 1"));
        }
        if !(self.lr_floor >= 0.0) {
            return Err(BlobError::arg("lr_floor must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iter: usize,
    pub energies: Energies,
    /// Learning rate in effect after this record.
    pub lr: f64,
}

/// Loss decomposition of the initial state and of every completed step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub records: Vec<LossRecord>,
}

impl LossTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first(&self) -> Option<&LossRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&LossRecord> {
        self.records.last()
    }

    pub fn best(&self) -> Option<&LossRecord> {
        self.records
            .iter()
            .min_by(|a, b| a.energies.total.total_cmp(&b.energies.total))
    }
}

#[derive(Clone, Debug)]
pub struct GdOutcome {
    /// Iterate with the lowest recorded total loss.
    pub best: TrajectoryField,
    pub best_iter: usize,
    pub best_energies: Energies,
    pub trace: LossTrace,
    pub early_stopped: bool,
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Setup(#[from] BlobError),
    /// The loss or gradient stopped being finite. Carries the last finite
    /// iterate and the trace up to it.
    #[error("non-finite loss or gradient at step {iteration}")]
    NonFinite {
        iteration: usize,
        last_finite: Box<TrajectoryField>,
        trace: LossTrace,
    },
}

/// Straight lines from each source to the target's center of mass.
pub fn init_straight_lines(
    sources: &PointCloud,
    target: &TargetMeasure,
    n_times: usize,
) -> Result<TrajectoryField> {
    check_dim(target.dim(), sources.dim())?;
    let com = target.center_of_mass();
    let last = (n_times.max(2) - 1) as f64;
    TrajectoryField::from_fn(sources.len(), n_times, sources.dim(), 1, |i, j| {
        let s = j as f64 / last;
        let z = sources.point(i);
        z.iter()
            .zip(&com)
            .map(|(a, b)| (1.0 - s) * a + s * b)
            .collect()
    })
}

/// Knots 1 and 2 fixed by position and velocity, then a straight line from
/// knot 2 to the target's position center of mass.
pub fn init_acceleration(
    sources: &PointCloud,
    initial_velocities: &PointCloud,
    target: &TargetMeasure,
    n_times: usize,
) -> Result<TrajectoryField> {
    let d = sources.dim();
    check_dim(d, initial_velocities.dim())?;
    check_dim(2 * d, target.dim())?;
    if initial_velocities.len() != sources.len() {
        return Err(BlobError::arg("one initial velocity per source required"));
    }
    if n_times < 3 {
        return Err(BlobError::arg(
            "acceleration control needs at least 3 time knots",
        ));
    }
    let com = target.center_of_mass();
    let h = 1.0 / (n_times - 1) as f64;
    let span = (n_times - 2) as f64;
    TrajectoryField::from_fn(sources.len(), n_times, d, 2, |i, j| {
        let z = sources.point(i);
        let second: Vec<f64> = z
            .iter()
            .zip(initial_velocities.point(i))
            .map(|(x, v)| x + h * v)
            .collect();
        match j {
            0 => z.to_vec(),
            _ => {
                let s = (j - 1) as f64 / span;
                second
                    .iter()
                    .zip(&com[..d])
                    .map(|(a, b)| (1.0 - s) * a + s * b)
                    .collect()
            }
        }
    })
}

/// Gradient descent with plateau learning-rate reduction and early stopping.
pub fn gd_run(
    init: &TrajectoryField,
    spec: &ProblemSpec,
    cfg: &OptimizerConfig,
) -> std::result::Result<GdOutcome, OptimizeError> {
    gd_run_with(init, spec, cfg, Execution::Auto)
}

pub fn gd_run_with(
    init: &TrajectoryField,
    spec: &ProblemSpec,
    cfg: &OptimizerConfig,
    exec: Execution,
) -> std::result::Result<GdOutcome, OptimizeError> {
    cfg.validate()?;
    let mut x = init.clone();
    let (mut energies, mut grad) = value_and_gradient(&x, spec, exec)?;
    let mut lr = cfg.learning_rate;
    let mut trace = LossTrace::default();
    trace.records.push(LossRecord {
        iter: 0,
        energies,
        lr,
    });
    if !energies.total.is_finite() || !grad.is_finite() {
        return Err(OptimizeError::NonFinite {
            iteration: 0,
            last_finite: Box::new(x),
            trace,
        });
    }

    let mut best = x.clone();
    let mut best_energies = energies;
    let mut best_iter = 0;
    let mut since_improve = 0usize;
    let mut since_reduce = 0usize;
    let mut early_stopped = false;
    let free_from = x.frozen_knots() * x.dim();
    let width = x.n_times() * x.dim();

    for iter in 1..=cfg.max_steps {
        let prev = x.clone();
        for (p, g) in x
            .as_mut_slice()
            .chunks_exact_mut(width)
            .zip(grad.as_slice().chunks_exact(width))
        {
            for (a, b) in p[free_from..].iter_mut().zip(&g[free_from..]) {
                *a -= lr * b;
            }
        }
        (energies, grad) = value_and_gradient(&x, spec, exec)?;
        if !energies.total.is_finite() || !grad.is_finite() {
            return Err(OptimizeError::NonFinite {
                iteration: iter,
                last_finite: Box::new(prev),
                trace,
            });
        }

        if energies.total < best_energies.total - DECREASE_SLACK {
            best_energies = energies;
            best.as_mut_slice().copy_from_slice(x.as_slice());
            best_iter = iter;
            since_improve = 0;
            since_reduce = 0;
        } else {
            since_improve += 1;
            since_reduce += 1;
            if since_reduce >= cfg.lr_reduce_patience {
                let reduced = lr * cfg.lr_reduce_factor;
                if reduced >= cfg.lr_floor {
                    lr = reduced;
                }
                since_reduce = 0;
            }
        }
        trace.records.push(LossRecord { iter, energies, lr });
        if since_improve >= cfg.early_stop_patience {
            early_stopped = true;
            break;
        }
    }

    Ok(GdOutcome {
        best,
        best_iter,
        best_energies,
        trace,
        early_stopped,
    })
}
