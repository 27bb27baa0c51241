//! Experiment configuration (a single strict JSON document) and presets.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::energy::Circle;
use crate::error::{BlobError, Result};
use crate::gradients::Term;
use crate::kernels::DEFAULT_DELTA_EXPONENT;
use crate::optimize::OptimizerConfig;
use crate::points::PointCloud;

/// Identifier of the generator behind every random draw, recorded in reports.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng::seed_from_u64 (rand_chacha 0.9)";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Comparison,
    GaussianTarget,
    Obstacle,
    Acceleration,
    Landscape,
    Convergence,
    Gradcheck,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Velocity,
    Acceleration,
}

/// Exact reference used for error metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    None,
    /// Chords of the optimal assignment between source and empirical target.
    Assignment,
    /// The 1-d geodesic from the uniform measure on [0,1] to [2,2.5].
    Geodesic1d,
}

/// How a point set is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSpec {
    /// Tensor grid including both ends of every axis; the count must be a
    /// perfect power of the dimension.
    Grid {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    UniformRandom {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    GaussianRandom {
        mean: Vec<f64>,
        std: f64,
    },
    Explicit {
        points: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Empirical {
        points: PointSpec,
    },
    Gaussian {
        mean: Vec<f64>,
        std: f64,
    },
    /// Phase-space target for acceleration control: point `i` is
    /// `(positions_i, velocities_i)`.
    Phase {
        positions: PointSpec,
        velocities: PointSpec,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaRule {
    #[serde(default = "default_k")]
    pub k: f64,
}

fn default_k() -> f64 {
    DEFAULT_DELTA_EXPONENT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaRule {
    Constant {
        value: f64,
    },
    /// `alpha = c * epsilon`
    ScaleEps {
        c: f64,
    },
    /// `alpha = max(c * epsilon, floor)`
    ScaleEpsFloored {
        c: f64,
        floor: f64,
    },
}

impl AlphaRule {
    pub fn resolve(&self, epsilon: f64) -> f64 {
        match *self {
            AlphaRule::Constant { value } => value,
            AlphaRule::ScaleEps { c } => c * epsilon,
            AlphaRule::ScaleEpsFloored { c, floor } => (c * epsilon).max(floor),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub circles: Vec<Circle>,
    /// Defaults to `(h * epsilon)^-1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_rule: Option<AlphaRule>,
    pub max_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_reduce_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_reduce_patience: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_stop_patience: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSpec {
    pub grid_size: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub n_values: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSpec {
    #[serde(default = "default_instances")]
    pub instances_per_mode: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Negates one gradient term; exercises the failure path of the check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrupt: Option<Term>,
}

fn default_instances() -> usize {
    100
}

fn default_tolerance() -> f64 {
    1e-6
}

impl Default for GradcheckSpec {
    fn default() -> Self {
        Self {
            instances_per_mode: default_instances(),
            tolerance: default_tolerance(),
            corrupt: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub mode: Mode,
    pub n_particles: usize,
    pub n_times: usize,
    /// Spatial dimension of the trajectories.
    pub dim: usize,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_rule: Option<DeltaRule>,
    pub source: PointSpec,
    pub target: TargetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacles: Option<ObstacleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_velocities: Option<PointSpec>,
    pub optimizer: OptimizerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape: Option<LandscapeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradcheck: Option<GradcheckSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// A report file can be fed back in; its `config` member is used.
#[derive(Deserialize)]
struct ReportEnvelope {
    config: ExperimentConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| BlobError::config("<document>", e.to_string()))?;
        let parsed = if value.get("config").is_some_and(|c| c.is_object()) {
            serde_path_from(value).map(|r: ReportEnvelope| r.config)
        } else {
            serde_path_from(value)
        }?;
        parsed.validate()?;
        Ok(parsed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BlobError::config(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(BlobError::config("n_particles", "must be at least 1"));
        }
        if self.dim == 0 {
            return Err(BlobError::config("dim", "must be at least 1"));
        }
        let min_times = match self.mode {
            Mode::Velocity => 2,
            Mode::Acceleration => 3,
        };
        if self.n_times < min_times {
            return Err(BlobError::config(
                "n_times",
                format!("must be at least {min_times}"),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(BlobError::config("epsilon", "must be positive"));
        }
        match (&self.delta, &self.delta_rule) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(BlobError::config(
                    "delta",
                    "exactly one of delta / delta_rule is required",
                ))
            }
            (Some(d), None) if !(*d > 0.0) => {
                return Err(BlobError::config("delta", "must be positive"))
            }
            (None, Some(r)) if !(r.k > 0.0 && r.k < 1.0) => {
                return Err(BlobError::config("delta_rule.k", "must lie in (0, 1)"))
            }
            _ => {}
        }
        match (&self.optimizer.alpha, &self.optimizer.alpha_rule) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(BlobError::config(
                    "optimizer.alpha",
                    "exactly one of alpha / alpha_rule is required",
                ))
            }
            _ => {}
        }
        match (self.mode, &self.initial_velocities, &self.target) {
            (Mode::Acceleration, None, _) => {
                return Err(BlobError::config(
                    "initial_velocities",
                    "required under acceleration control",
                ))
            }
            (Mode::Velocity, Some(_), _) => {
                return Err(BlobError::config(
                    "initial_velocities",
                    "only valid under acceleration control",
                ))
            }
            (Mode::Velocity, _, TargetSpec::Phase { .. }) => {
                return Err(BlobError::config(
                    "target",
                    "phase targets need acceleration control",
                ))
            }
            _ => {}
        }
        if self.mode == Mode::Acceleration
            && self
                .obstacles
                .as_ref()
                .is_some_and(|o| !o.circles.is_empty())
        {
            return Err(BlobError::config(
                "obstacles",
                "only supported under velocity control",
            ));
        }
        if self.experiment == ExperimentKind::Landscape {
            let l = self
                .landscape
                .as_ref()
                .ok_or_else(|| BlobError::config("landscape", "required for landscape runs"))?;
            if l.grid_size < 2 || !(l.hi > l.lo) {
                return Err(BlobError::config(
                    "landscape",
                    "need grid_size >= 2 and hi > lo",
                ));
            }
            if self.n_particles != 2
                || self.n_times != 2
                || self.dim != 1
                || self.mode != Mode::Velocity
            {
                return Err(BlobError::config(
                    "experiment",
                    "landscape runs need n_particles = 2, n_times = 2, dim = 1, velocity control",
                ));
            }
        }
        if self.experiment == ExperimentKind::Convergence {
            let c = self
                .convergence
                .as_ref()
                .ok_or_else(|| BlobError::config("convergence", "required for convergence runs"))?;
            if c.n_values.is_empty() || c.n_values.contains(&0) {
                return Err(BlobError::config(
                    "convergence.n_values",
                    "need positive particle counts",
                ));
            }
        }
        Ok(())
    }

    /// Resolved learning rate.
    pub fn alpha(&self) -> f64 {
        match (&self.optimizer.alpha, &self.optimizer.alpha_rule) {
            (Some(a), _) => *a,
            (None, Some(rule)) => rule.resolve(self.epsilon),
            (None, None) => unreachable!("validated"),
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        let mut cfg = OptimizerConfig::new(self.alpha(), o.max_steps);
        if let Some(v) = o.lr_reduce_factor {
            cfg.lr_reduce_factor = v;
        }
        if let Some(v) = o.lr_reduce_patience {
            cfg.lr_reduce_patience = v;
        }
        if let Some(v) = o.lr_floor {
            cfg.lr_floor = v;
        }
        if let Some(v) = o.early_stop_patience {
            cfg.early_stop_patience = v;
        }
        cfg.seed = o.seed;
        cfg
    }
}

fn serde_path_from<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| BlobError::config("<document>", e.to_string()))
}

impl PointSpec {
    /// Produce `n` points of dimension `dim`; random kinds draw from `rng`.
    pub fn generate(
        &self,
        n: usize,
        dim: usize,
        rng: &mut ChaCha8Rng,
        path: &str,
    ) -> Result<PointCloud> {
        let check_len = |v: &[f64], what: &str| {
            if v.len() == dim {
                Ok(())
            } else {
                Err(BlobError::config(
                    format!("{path}.{what}"),
                    format!("expected {dim} coordinates, got {}", v.len()),
                ))
            }
        };
        match self {
            PointSpec::Grid { lo, hi } => {
                check_len(lo, "lo")?;
                check_len(hi, "hi")?;
                let side = (n as f64).powf(1.0 / dim as f64).round() as usize;
                if side.pow(dim as u32) != n {
                    return Err(BlobError::config(
                        path,
                        format!("grid needs a perfect {dim}-th power of points, got {n}"),
                    ));
                }
                let axis = |c: usize, k: usize| {
                    if side == 1 {
                        lo[c]
                    } else {
                        lo[c] + (hi[c] - lo[c]) * k as f64 / (side - 1) as f64
                    }
                };
                let mut data = Vec::with_capacity(n * dim);
                for idx in 0..n {
                    // First coordinate varies slowest.
                    let mut rem = idx;
                    let mut digits = vec![0; dim];
                    for c in (0..dim).rev() {
                        digits[c] = rem % side;
                        rem /= side;
                    }
                    data.extend((0..dim).map(|c| axis(c, digits[c])));
                }
                PointCloud::new(dim, data)
            }
            PointSpec::UniformRandom { lo, hi } => {
                check_len(lo, "lo")?;
                check_len(hi, "hi")?;
                if lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
                    return Err(BlobError::config(path, "need hi > lo on every axis"));
                }
                let data = (0..n * dim)
                    .map(|k| {
                        let c = k % dim;
                        rng.random_range(lo[c]..hi[c])
                    })
                    .collect();
                PointCloud::new(dim, data)
            }
            PointSpec::GaussianRandom { mean, std } => {
                check_len(mean, "mean")?;
                if !(*std > 0.0) {
                    return Err(BlobError::config(format!("{path}.std"), "must be positive"));
                }
                let data = (0..n * dim)
                    .map(|k| {
                        let z: f64 = StandardNormal.sample(rng);
                        mean[k % dim] + std * z
                    })
                    .collect();
                PointCloud::new(dim, data)
            }
            PointSpec::Explicit { points } => {
                if points.len() != n {
                    return Err(BlobError::config(
                        format!("{path}.points"),
                        format!("expected {n} points, got {}", points.len()),
                    ));
                }
                for p in points {
                    check_len(p, "points")?;
                }
                PointCloud::from_rows(points).map_err(|e| BlobError::config(path, e.to_string()))
            }
        }
    }
}

/// Named configurations reproducing the reference experiments.
pub mod presets {
    use super::*;

    pub const NAMES: &[&str] = &[
        "comparison",
        "gaussian_target",
        "gaussian_target_samples",
        "obstacle",
        "acceleration",
        "landscape",
        "error_decay",
        "convergence",
        "gradcheck",
    ];

    pub fn by_name(name: &str) -> Option<ExperimentConfig> {
        Some(match name {
            "comparison" => comparison(),
            "gaussian_target" => gaussian_target(),
            "gaussian_target_samples" => gaussian_target_samples(),
            "obstacle" => obstacle(),
            "acceleration" => acceleration(),
            "landscape" => landscape(1e-2, None),
            "error_decay" => error_decay(),
            "convergence" => convergence(),
            "gradcheck" => gradcheck(),
            _ => return None,
        })
    }

    fn optimizer(alpha_rule: AlphaRule, max_steps: usize, seed: u64) -> OptimizerSpec {
        OptimizerSpec {
            alpha: None,
            alpha_rule: Some(alpha_rule),
            max_steps,
            lr_reduce_factor: None,
            lr_reduce_patience: None,
            lr_floor: None,
            early_stop_patience: None,
            seed,
        }
    }

    fn base(
        experiment: ExperimentKind,
        n: usize,
        m: usize,
        dim: usize,
        eps: f64,
    ) -> ExperimentConfig {
        ExperimentConfig {
            experiment,
            mode: Mode::Velocity,
            n_particles: n,
            n_times: m,
            dim,
            epsilon: eps,
            delta: None,
            delta_rule: Some(DeltaRule {
                k: DEFAULT_DELTA_EXPONENT,
            }),
            source: PointSpec::Grid {
                lo: vec![0.0; dim],
                hi: vec![1.0; dim],
            },
            target: TargetSpec::Gaussian {
                mean: vec![0.0; dim],
                std: 1.0,
            },
            obstacles: None,
            initial_velocities: None,
            optimizer: optimizer(AlphaRule::Constant { value: 0.01 }, 1000, 0),
            reference: None,
            landscape: None,
            convergence: None,
            gradcheck: None,
            output_dir: None,
        }
    }

    /// 30 uniform samples on the unit square sent to 30 uniform samples on
    /// `[1,2]^2`, compared against the optimal assignment.
    pub fn comparison() -> ExperimentConfig {
        let mut c = base(ExperimentKind::Comparison, 30, 3, 2, 0.01);
        c.source = PointSpec::UniformRandom {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        c.target = TargetSpec::Empirical {
            points: PointSpec::UniformRandom {
                lo: vec![1.0, 1.0],
                hi: vec![2.0, 2.0],
            },
        };
        c.optimizer = optimizer(AlphaRule::Constant { value: 0.01 }, 2000, 1);
        c.reference = Some(Reference::Assignment);
        c
    }

    /// 225-point grid to the continuum Gaussian N((1.5,1.5), 0.25 I).
    pub fn gaussian_target() -> ExperimentConfig {
        let mut c = base(ExperimentKind::GaussianTarget, 225, 5, 2, 0.01);
        c.target = TargetSpec::Gaussian {
            mean: vec![1.5, 1.5],
            std: 0.5,
        };
        c.optimizer = optimizer(AlphaRule::ScaleEps { c: 0.01 }, 5_000_000, 0);
        c
    }

    /// As [`gaussian_target`] but towards 225 iid samples of the Gaussian.
    pub fn gaussian_target_samples() -> ExperimentConfig {
        let mut c = gaussian_target();
        c.target = TargetSpec::Empirical {
            points: PointSpec::GaussianRandom {
                mean: vec![1.5, 1.5],
                std: 0.5,
            },
        };
        c
    }

    /// 25-point grid around two circular obstacles to N((1.5,1.7), 0.04 I).
    pub fn obstacle() -> ExperimentConfig {
        let mut c = base(ExperimentKind::Obstacle, 25, 21, 2, 0.1);
        c.target = TargetSpec::Gaussian {
            mean: vec![1.5, 1.7],
            std: 0.2,
        };
        c.obstacles = Some(ObstacleSpec {
            circles: vec![
                Circle {
                    center: vec![1.0, 1.5],
                    radius: 0.2,
                },
                Circle {
                    center: vec![1.25, 1.25],
                    radius: 0.2,
                },
            ],
            strength: None,
        });
        c.optimizer = optimizer(AlphaRule::ScaleEps { c: 0.001 }, 200_000, 0);
        c
    }

    /// Ten particles at rest on [0,1] steered by acceleration to positions on
    /// [2,2.5] with velocities on [-2,2].
    pub fn acceleration() -> ExperimentConfig {
        let mut c = base(ExperimentKind::Acceleration, 10, 11, 1, 1e-4);
        c.mode = Mode::Acceleration;
        c.initial_velocities = Some(PointSpec::Grid {
            lo: vec![0.0],
            hi: vec![0.0],
        });
        c.target = TargetSpec::Phase {
            positions: PointSpec::Grid {
                lo: vec![2.0],
                hi: vec![2.5],
            },
            velocities: PointSpec::Grid {
                lo: vec![-2.0],
                hi: vec![2.0],
            },
        };
        c.optimizer = optimizer(AlphaRule::ScaleEps { c: 4e-3 }, 1_000_000, 0);
        c
    }

    /// Two particles at 0 and 0.5, target points 1 and 1.5, one time step.
    pub fn landscape(epsilon: f64, delta: Option<f64>) -> ExperimentConfig {
        let mut c = base(ExperimentKind::Landscape, 2, 2, 1, epsilon);
        c.source = PointSpec::Explicit {
            points: vec![vec![0.0], vec![0.5]],
        };
        c.target = TargetSpec::Empirical {
            points: PointSpec::Explicit {
                points: vec![vec![1.0], vec![1.5]],
            },
        };
        if let Some(d) = delta {
            c.delta = Some(d);
            c.delta_rule = None;
        }
        c.optimizer = optimizer(AlphaRule::Constant { value: 0.01 }, 0, 0);
        c.landscape = Some(LandscapeSpec {
            grid_size: 101,
            lo: -0.5,
            hi: 2.5,
        });
        c
    }

    /// 20-point grid on [0,1] to 20-point grid on [2,2.5], small epsilon,
    /// errors against the exact geodesic.
    pub fn error_decay() -> ExperimentConfig {
        let mut c = base(ExperimentKind::Custom, 20, 5, 1, 1e-3);
        c.target = TargetSpec::Empirical {
            points: PointSpec::Grid {
                lo: vec![2.0],
                hi: vec![2.5],
            },
        };
        c.optimizer = optimizer(
            AlphaRule::ScaleEpsFloored {
                c: 1e-3,
                floor: 1e-5,
            },
            1_000_000,
            0,
        );
        c.reference = Some(Reference::Geodesic1d);
        c
    }

    pub fn convergence() -> ExperimentConfig {
        let mut c = error_decay();
        c.experiment = ExperimentKind::Convergence;
        c.epsilon = 0.01;
        c.optimizer = optimizer(AlphaRule::ScaleEps { c: 3e-3 }, 2_000_000, 0);
        c.convergence = Some(ConvergenceSpec {
            n_values: vec![5, 10, 20, 40, 80, 100],
        });
        c
    }

    pub fn gradcheck() -> ExperimentConfig {
        let mut c = base(ExperimentKind::Gradcheck, 4, 4, 2, 0.5);
        c.optimizer = optimizer(AlphaRule::Constant { value: 0.01 }, 0, 0);
        c.gradcheck = Some(GradcheckSpec::default());
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in presets::NAMES {
            let c = presets::by_name(name).unwrap();
            c.validate().unwrap();
            let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
            assert_eq!(back, c, "{name}");
        }
        assert!(presets::by_name("nope").is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value =
            serde_json::from_str(&presets::comparison().to_json()).unwrap();
        v["epsilonn"] = serde_json::json!(0.1);
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(err, BlobError::Config { .. }), "{err}");
    }

    #[test]
    fn delta_and_rule_are_exclusive() {
        let mut c = presets::comparison();
        c.delta = Some(0.1);
        assert!(matches!(c.validate(), Err(BlobError::Config { ref path, .. }) if path == "delta"));
        c.delta_rule = None;
        c.validate().unwrap();
    }

    #[test]
    fn alpha_rules() {
        assert_eq!(AlphaRule::Constant { value: 0.3 }.resolve(5.0), 0.3);
        assert_eq!(AlphaRule::ScaleEps { c: 0.01 }.resolve(0.5), 0.005);
        assert_eq!(
            AlphaRule::ScaleEpsFloored {
                c: 1e-3,
                floor: 1e-5
            }
            .resolve(1e-3),
            1e-5
        );
        assert_eq!(
            AlphaRule::ScaleEpsFloored {
                c: 1e-3,
                floor: 1e-5
            }
            .resolve(1.0),
            1e-3
        );
    }

    #[test]
    fn grid_generation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = PointSpec::Grid {
            lo: vec![0.0],
            hi: vec![1.0],
        }
        .generate(5, 1, &mut rng, "source")
        .unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let g2 = PointSpec::Grid {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 2.0],
        };
        let p = g2.generate(9, 2, &mut rng, "source").unwrap();
        assert_eq!(p.point(1), &[0.0, 1.0]);
        assert_eq!(p.point(3), &[0.5, 0.0]);
        assert!(g2.generate(10, 2, &mut rng, "source").is_err());
    }

    #[test]
    fn random_generation_is_seeded() {
        let spec = PointSpec::UniformRandom {
            lo: vec![0.0, 1.0],
            hi: vec![1.0, 2.0],
        };
        let a = spec
            .generate(10, 2, &mut ChaCha8Rng::seed_from_u64(3), "s")
            .unwrap();
        let b = spec
            .generate(10, 2, &mut ChaCha8Rng::seed_from_u64(3), "s")
            .unwrap();
        assert_eq!(a, b);
        assert!(a
            .iter()
            .all(|p| (0.0..1.0).contains(&p[0]) && (1.0..2.0).contains(&p[1])));
    }

    #[test]
    fn acceleration_requires_velocities() {
        let mut c = presets::acceleration();
        c.initial_velocities = None;
        assert!(c.validate().is_err());
    }
}
