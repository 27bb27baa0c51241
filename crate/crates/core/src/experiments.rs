//! Experiment drivers: build a problem from a config, optimize, measure, and
//! write `trajectories.csv`, `loss.csv` and `report.json`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{
    DeltaRule, ExperimentConfig, ExperimentKind, Mode, ObstacleSpec, PointSpec, Reference,
    TargetSpec, RNG_ALGORITHM,
};
use crate::energy::{
    energies_with, phase_terminal, terminal_penalty_full, Circle, ControlMode, Energies,
    ObstacleSet, ProblemSpec, TargetMeasure, TrajectoryField,
};
use crate::error::{BlobError, Result};
use crate::gradients::{
    default_fd_step, finite_difference_gradient, gradient_impl, relative_error, Term,
};
use crate::kernels::{delta_from_n, Mollifier};
use crate::metrics::{loglog_slope, ChordMap, ErrorReport, Geodesic1d};
use crate::optimize::{
    gd_run_with, init_acceleration, init_straight_lines, LossTrace, OptimizeError,
};
use crate::oracle::hungarian_assign;
use crate::par::{self, Execution};
use crate::points::PointCloud;

/// Where and how outputs are written.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub overwrite: bool,
    pub exec: Execution,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            overwrite: false,
            exec: Execution::Auto,
        }
    }

    pub fn overwrite(mut self, yes: bool) -> Self {
        self.overwrite = yes;
        self
    }
}

/// A config turned into concrete data.
#[derive(Clone, Debug)]
pub struct BuiltProblem {
    pub spec: ProblemSpec,
    pub init: TrajectoryField,
    pub sources: PointCloud,
    /// Resolved config: every rule expanded and every random draw written out.
    pub resolved: ExperimentConfig,
}

fn explicit(points: &PointCloud) -> PointSpec {
    PointSpec::Explicit {
        points: points.to_rows(),
    }
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<BuiltProblem> {
    cfg.validate()?;
    let n = cfg.n_particles;
    let d = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.optimizer.seed);
    let mut resolved = cfg.clone();

    let sources = cfg.source.generate(n, d, &mut rng, "source")?;
    resolved.source = explicit(&sources);

    let target = match &cfg.target {
        TargetSpec::Empirical { points } => {
            let w = points.generate(n, kernel_dim(cfg), &mut rng, "target.points")?;
            resolved.target = TargetSpec::Empirical {
                points: explicit(&w),
            };
            TargetMeasure::empirical(w)?
        }
        TargetSpec::Gaussian { mean, std } => {
            if mean.len() != kernel_dim(cfg) {
                return Err(BlobError::config("target.mean", "dimension mismatch"));
            }
            TargetMeasure::gaussian(mean.clone(), *std)
                .map_err(|e| BlobError::config("target", e.to_string()))?
        }
        TargetSpec::Phase {
            positions,
            velocities,
        } => {
            let x = positions.generate(n, d, &mut rng, "target.positions")?;
            let v = velocities.generate(n, d, &mut rng, "target.velocities")?;
            resolved.target = TargetSpec::Phase {
                positions: explicit(&x),
                velocities: explicit(&v),
            };
            TargetMeasure::empirical(x.concat(&v)?)?
        }
    };

    let delta = match (&cfg.delta, &cfg.delta_rule) {
        (Some(dl), _) => *dl,
        (None, Some(DeltaRule { k })) => delta_from_n(n, kernel_dim(cfg), *k)?,
        (None, None) => unreachable!("validated"),
    };
    resolved.delta = Some(delta);
    resolved.delta_rule = None;
    let mollifier = Mollifier::new(delta, kernel_dim(cfg))?;

    let (spec, init) = match cfg.mode {
        Mode::Velocity => {
            let mut spec = ProblemSpec::velocity(cfg.epsilon, mollifier, target)
                .map_err(|e| BlobError::config("target", e.to_string()))?;
            if let Some(o) = &cfg.obstacles {
                let strength = o
                    .strength
                    .unwrap_or_else(|| ObstacleSet::default_strength(cfg.n_times, cfg.epsilon));
                let set = ObstacleSet::new(o.circles.clone(), strength)
                    .map_err(|e| BlobError::config("obstacles", e.to_string()))?;
                spec = spec
                    .with_obstacles(set)
                    .map_err(|e| BlobError::config("obstacles", e.to_string()))?;
                resolved.obstacles = Some(ObstacleSpec {
                    circles: o.circles.clone(),
                    strength: Some(strength),
                });
            }
            let init = init_straight_lines(&sources, &spec.target, cfg.n_times)?;
            (spec, init)
        }
        Mode::Acceleration => {
            let vspec = cfg.initial_velocities.as_ref().expect("validated");
            let v0 = vspec.generate(n, d, &mut rng, "initial_velocities")?;
            resolved.initial_velocities = Some(explicit(&v0));
            let spec = ProblemSpec::acceleration(cfg.epsilon, mollifier, target, v0.clone())
                .map_err(|e| BlobError::config("target", e.to_string()))?;
            let init = init_acceleration(&sources, &v0, &spec.target, cfg.n_times)?;
            (spec, init)
        }
    };

    let opt = cfg.optimizer_config();
    resolved.optimizer.alpha = Some(opt.learning_rate);
    resolved.optimizer.alpha_rule = None;
    resolved.optimizer.lr_reduce_factor = Some(opt.lr_reduce_factor);
    resolved.optimizer.lr_reduce_patience = Some(opt.lr_reduce_patience);
    resolved.optimizer.lr_floor = Some(opt.lr_floor);
    resolved.optimizer.early_stop_patience = Some(opt.early_stop_patience);

    Ok(BuiltProblem {
        spec,
        init,
        sources,
        resolved,
    })
}

fn kernel_dim(cfg: &ExperimentConfig) -> usize {
    match cfg.mode {
        Mode::Velocity => cfg.dim,
        Mode::Acceleration => 2 * cfg.dim,
    }
}

/// Measurements against exact references, when available.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Control cost + potential + full (nonnegative) terminal penalty.
    pub total_with_full_penalty: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignment_mean_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_gap_to_assignment: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors_initial: Option<ErrorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors_final: Option<ErrorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_penetration_depth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_rms_mismatch: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: ExperimentKind,
    pub rng_algorithm: String,
    pub config: ExperimentConfig,
    pub initial: Energies,
    #[serde(rename = "final")]
    pub final_energies: Energies,
    pub initial_penalty_full: f64,
    pub final_penalty_full: f64,
    pub steps_run: usize,
    pub best_iter: usize,
    pub early_stopped: bool,
    pub final_lr: f64,
    pub metrics: RunMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub wall_time_s: f64,
}

/// Terminal penalty with the dropped constant restored, evaluated on the
/// terminal points (or phase-space terminal points) of `traj`.
pub fn full_penalty_of(traj: &TrajectoryField, spec: &ProblemSpec) -> Result<f64> {
    if !spec.nonlocal_enabled {
        return Ok(0.0);
    }
    match spec.mode {
        ControlMode::Velocity => terminal_penalty_full(&traj.terminal(), spec),
        ControlMode::Acceleration { .. } => terminal_penalty_full(&phase_terminal(traj), spec),
    }
}

/// Deepest intrusion of any knot into any obstacle.
pub fn max_penetration(traj: &TrajectoryField, circles: &[Circle]) -> f64 {
    let obs = ObstacleSet {
        circles: circles.to_vec(),
        strength: 1.0,
    };
    traj.as_slice()
        .chunks_exact(traj.dim())
        .map(|y| obs.penetration_depth(y))
        .fold(0.0, f64::max)
}

/// RMS distance from terminal phase points to their optimally assigned targets.
pub fn phase_rms_mismatch(traj: &TrajectoryField, target: &PointCloud) -> Result<f64> {
    Ok(hungarian_assign(&phase_terminal(traj), target)?
        .mean_cost
        .sqrt())
}

fn compute_metrics(
    cfg: &ExperimentConfig,
    built: &BuiltProblem,
    traj: &TrajectoryField,
    final_energies: &Energies,
) -> Result<RunMetrics> {
    let spec = &built.spec;
    let mut m = RunMetrics {
        total_with_full_penalty: final_energies.control
            + final_energies.potential
            + full_penalty_of(traj, spec)?,
        ..RunMetrics::default()
    };
    let reference = cfg.reference.unwrap_or(match cfg.experiment {
        ExperimentKind::Comparison => Reference::Assignment,
        ExperimentKind::Convergence => Reference::Geodesic1d,
        _ => Reference::None,
    });
    match reference {
        Reference::None => {}
        Reference::Assignment => {
            let TargetMeasure::Empirical(w) = &spec.target else {
                return Err(BlobError::config(
                    "reference",
                    "assignment reference needs an empirical target",
                ));
            };
            if spec.mode != ControlMode::Velocity {
                return Err(BlobError::config(
                    "reference",
                    "assignment reference needs velocity control",
                ));
            }
            let asg = hungarian_assign(&built.sources, w)?;
            let map = ChordMap::new(w.clone(), &asg);
            m.relative_gap_to_assignment =
                Some((m.total_with_full_penalty - asg.mean_cost).abs() / asg.mean_cost);
            m.assignment_mean_cost = Some(asg.mean_cost);
            m.errors_initial = Some(ErrorReport::new(&built.init, &map));
            m.errors_final = Some(ErrorReport::new(traj, &map));
        }
        Reference::Geodesic1d => {
            if cfg.dim != 1 || cfg.mode != Mode::Velocity {
                return Err(BlobError::config(
                    "reference",
                    "the 1-d geodesic needs dim = 1, velocity control",
                ));
            }
            m.errors_initial = Some(ErrorReport::new(&built.init, &Geodesic1d));
            m.errors_final = Some(ErrorReport::new(traj, &Geodesic1d));
        }
    }
    if spec.obstacles.is_active() {
        m.max_penetration_depth = Some(max_penetration(traj, &spec.obstacles.circles));
    }
    if let (ControlMode::Acceleration { .. }, TargetMeasure::Empirical(w)) =
        (&spec.mode, &spec.target)
    {
        m.phase_rms_mismatch = Some(phase_rms_mismatch(traj, w)?);
    }
    Ok(m)
}

/// Build, optimize, measure and write outputs. A numerical failure still
/// writes the last finite state and returns [`BlobError::Numerical`].
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    let files = ["trajectories.csv", "loss.csv", "report.json"];
    prepare_dir(&opts.out_dir, &files, opts.overwrite)?;
    let (report, traj, trace) = solve(cfg, opts.exec)?;
    write_trajectories(
        &opts.out_dir.join(files[0]),
        &traj,
        &report_spec_mode(&report)?,
    )?;
    write_loss(&opts.out_dir.join(files[1]), &trace)?;
    write_json(&opts.out_dir.join(files[2]), &report)?;
    match &report.failure {
        Some(msg) => Err(BlobError::Numerical(msg.clone())),
        None => Ok(report),
    }
}

fn report_spec_mode(report: &RunReport) -> Result<Option<PointCloud>> {
    match (&report.config.mode, &report.config.initial_velocities) {
        (Mode::Acceleration, Some(v)) => Ok(Some(v.generate(
            report.config.n_particles,
            report.config.dim,
            &mut ChaCha8Rng::seed_from_u64(0),
            "initial_velocities",
        )?)),
        _ => Ok(None),
    }
}

/// Run without touching the filesystem.
pub fn solve(
    cfg: &ExperimentConfig,
    exec: Execution,
) -> Result<(RunReport, TrajectoryField, LossTrace)> {
    let started = Instant::now();
    let built = build_problem(cfg)?;
    let opt = cfg.optimizer_config();
    let initial = energies_with(&built.init, &built.spec, exec)?;
    let initial_penalty_full = full_penalty_of(&built.init, &built.spec)?;

    let (traj, trace, best_iter, early_stopped, failure) =
        match gd_run_with(&built.init, &built.spec, &opt, exec) {
            Ok(out) => (out.best, out.trace, out.best_iter, out.early_stopped, None),
            Err(OptimizeError::NonFinite {
                iteration,
                last_finite,
                trace,
            }) => {
                let best = trace.len().saturating_sub(1);
                (
                    *last_finite,
                    trace,
                    best,
                    false,
                    Some(format!("non-finite loss or gradient at step {iteration}")),
                )
            }
            Err(OptimizeError::Setup(e)) => return Err(e),
        };
    let final_energies = energies_with(&traj, &built.spec, exec)?;
    let metrics = compute_metrics(&built.resolved, &built, &traj, &final_energies)?;
    let report = RunReport {
        experiment: cfg.experiment,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        config: built.resolved.clone(),
        initial,
        final_energies,
        initial_penalty_full,
        final_penalty_full: full_penalty_of(&traj, &built.spec)?,
        steps_run: trace.len().saturating_sub(1),
        best_iter,
        early_stopped,
        final_lr: trace.last().map_or(opt.learning_rate, |r| r.lr),
        metrics,
        failure,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok((report, traj, trace))
}

// ---------------------------------------------------------------------------
// Loss landscape

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeMarker {
    pub y12: f64,
    pub y22: f64,
    pub energies: Energies,
    pub penalty_full: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeReport {
    pub config: ExperimentConfig,
    pub delta: f64,
    pub epsilon: f64,
    pub grid_size: usize,
    pub source: LandscapeMarker,
    pub target: LandscapeMarker,
    pub flipped: LandscapeMarker,
    pub initialization: LandscapeMarker,
    pub min_value: f64,
    pub max_value: f64,
}

/// Objective of the two-particle, one-step problem at terminal points `(a, b)`.
pub fn landscape_point(built: &BuiltProblem, a: f64, b: f64) -> Result<LandscapeMarker> {
    let z = &built.sources;
    let traj = TrajectoryField::from_fn(2, 2, 1, 1, |i, j| match (i, j) {
        (_, 0) => z.point(i).to_vec(),
        (0, _) => vec![a],
        _ => vec![b],
    })?;
    Ok(LandscapeMarker {
        y12: a,
        y22: b,
        energies: energies_with(&traj, &built.spec, Execution::Sequential)?,
        penalty_full: full_penalty_of(&traj, &built.spec)?,
    })
}

/// Evaluate the objective on a square grid of terminal positions and at the
/// four reference configurations; writes `landscape.csv` and `report.json`.
pub fn run_landscape(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<LandscapeReport> {
    let files = ["landscape.csv", "report.json"];
    prepare_dir(&opts.out_dir, &files, opts.overwrite)?;
    let report = landscape(cfg, opts)?;
    write_json(&opts.out_dir.join(files[1]), &report)?;
    Ok(report)
}

fn landscape(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<LandscapeReport> {
    if cfg.experiment != ExperimentKind::Landscape {
        return Err(BlobError::config(
            "experiment",
            "expected a landscape config",
        ));
    }
    let built = build_problem(cfg)?;
    let spec_l = cfg.landscape.as_ref().expect("validated");
    let TargetMeasure::Empirical(w) = &built.spec.target else {
        return Err(BlobError::config(
            "target",
            "landscape runs need an empirical target",
        ));
    };
    let g = spec_l.grid_size;
    let coord = |k: usize| spec_l.lo + (spec_l.hi - spec_l.lo) * k as f64 / (g - 1) as f64;
    let rows = par::map_rows(g, opts.exec, |r| {
        (0..g)
            .map(|c| landscape_point(&built, coord(r), coord(c)))
            .collect::<Result<Vec<_>>>()
    });
    let path = opts.out_dir.join("landscape.csv");
    let mut out = BufWriter::new(fs::File::create(&path)?);
    writeln!(out, "y12,y22,total,kinetic,nonlocal,penalty_full")?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in rows {
        for p in row? {
            lo = lo.min(p.energies.total);
            hi = hi.max(p.energies.total);
            writeln!(
                out,
                "{},{},{},{},{},{}",
                num(p.y12),
                num(p.y22),
                num(p.energies.total),
                num(p.energies.control),
                num(p.energies.nonlocal),
                num(p.penalty_full)
            )?;
        }
    }
    out.flush()?;
    let z = &built.sources;
    let com = built.spec.target.center_of_mass()[0];
    Ok(LandscapeReport {
        config: built.resolved.clone(),
        delta: built.spec.mollifier.delta(),
        epsilon: built.spec.epsilon,
        grid_size: g,
        source: landscape_point(&built, z.point(0)[0], z.point(1)[0])?,
        target: landscape_point(&built, w.point(0)[0], w.point(1)[0])?,
        flipped: landscape_point(&built, w.point(1)[0], w.point(0)[0])?,
        initialization: landscape_point(&built, com, com)?,
        min_value: lo,
        max_value: hi,
    })
}

// ---------------------------------------------------------------------------
// Convergence study

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub delta: f64,
    pub alpha: f64,
    pub seed: u64,
    pub steps_run: usize,
    pub error_terminal: f64,
    pub error_all_times: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: ExperimentConfig,
    pub rng_algorithm: String,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log error against log N; absent when the fit is
    /// degenerate (for instance, an error of exactly zero).
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<String>,
    pub wall_time_s: f64,
}

/// Per-N configuration of a convergence study.
pub fn convergence_job(cfg: &ExperimentConfig, n: usize) -> ExperimentConfig {
    let mut job = cfg.clone();
    job.experiment = ExperimentKind::Custom;
    job.n_particles = n;
    job.convergence = None;
    job.reference = Some(Reference::Geodesic1d);
    job.optimizer.seed = cfg.optimizer.seed.wrapping_add(n as u64);
    job
}

/// Convergence study with the default solver (gradient descent per N).
pub fn run_convergence(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ConvergenceReport> {
    run_convergence_with(cfg, opts, |job| {
        let built = build_problem(job)?;
        let out = gd_run_with(
            &built.init,
            &built.spec,
            &job.optimizer_config(),
            Execution::Sequential,
        )
        .map_err(|e| BlobError::Numerical(e.to_string()))?;
        Ok((out.best, out.trace.len() - 1))
    })
}

/// Convergence study with an injected solver mapping a per-N config to final
/// trajectories and a step count. Jobs run concurrently; rows are ordered by N.
pub fn run_convergence_with<F>(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    solver: F,
) -> Result<ConvergenceReport>
where
    F: Fn(&ExperimentConfig) -> Result<(TrajectoryField, usize)> + Sync + Send,
{
    let files = ["convergence.csv", "report.json"];
    prepare_dir(&opts.out_dir, &files, opts.overwrite)?;
    let started = Instant::now();
    if cfg.experiment != ExperimentKind::Convergence {
        return Err(BlobError::config(
            "experiment",
            "expected a convergence config",
        ));
    }
    cfg.validate()?;
    if cfg.dim != 1 || cfg.mode != Mode::Velocity {
        return Err(BlobError::config(
            "dim",
            "convergence studies are 1-d velocity problems",
        ));
    }
    let mut ns = cfg
        .convergence
        .as_ref()
        .expect("validated")
        .n_values
        .clone();
    ns.sort_unstable();
    ns.dedup();
    let rows = par::map_rows(
        ns.len(),
        Execution::Parallel,
        |k| -> Result<ConvergenceRow> {
            let job = convergence_job(cfg, ns[k]);
            let built = build_problem(&job)?;
            let (traj, steps_run) = solver(&job)?;
            let errors = ErrorReport::new(&traj, &Geodesic1d);
            Ok(ConvergenceRow {
                n: ns[k],
                delta: built.spec.mollifier.delta(),
                alpha: job.alpha(),
                seed: job.optimizer.seed,
                steps_run,
                error_terminal: errors.error_terminal,
                error_all_times: errors.error_all_times,
            })
        },
    )
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.n as f64, r.error_terminal))
        .collect();
    let (slope, degenerate) = match loglog_slope(&points) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let path = opts.out_dir.join(files[0]);
    let mut out = BufWriter::new(fs::File::create(&path)?);
    writeln!(
        out,
        "n,delta,alpha,steps_run,error_terminal,error_all_times"
    )?;
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n,
            num(r.delta),
            num(r.alpha),
            r.steps_run,
            num(r.error_terminal),
            num(r.error_all_times)
        )?;
    }
    out.flush()?;
    let report = ConvergenceReport {
        config: cfg.clone(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        rows,
        slope,
        degenerate,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    write_json(&opts.out_dir.join(files[1]), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Gradient check

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckMode {
    pub mode: String,
    pub instances: usize,
    pub max_relative_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrupted_term: Option<Term>,
    pub modes: Vec<GradcheckMode>,
    pub passed: bool,
}

/// Problem families covered by the gradient check.
pub const GRADCHECK_MODES: &[&str] = &[
    "velocity_empirical",
    "velocity_gaussian",
    "velocity_obstacles",
    "acceleration_empirical",
];

/// A seeded random instance of one gradient-check family.
pub fn gradcheck_instance(
    mode: &str,
    rng: &mut ChaCha8Rng,
) -> Result<(TrajectoryField, ProblemSpec)> {
    let n = rng.random_range(1..=6);
    let d = rng.random_range(1..=2);
    let eps = rng.random_range(0.05..2.0);
    let delta = rng.random_range(0.3..1.2);
    let cloud = |rng: &mut ChaCha8Rng, dim: usize| {
        PointCloud::new(
            dim,
            (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
    };
    let field = |rng: &mut ChaCha8Rng, frozen: usize| {
        let m = rng.random_range(frozen + 1..=6);
        let vals: Vec<f64> = (0..n * m * d)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        TrajectoryField::from_fn(n, m, d, frozen, |i, j| {
            vals[(i * m + j) * d..(i * m + j + 1) * d].to_vec()
        })
    };
    Ok(match mode {
        "velocity_empirical" => {
            let t = field(rng, 1)?;
            let w = cloud(rng, d)?;
            (
                t,
                ProblemSpec::velocity(
                    eps,
                    Mollifier::new(delta, d)?,
                    TargetMeasure::empirical(w)?,
                )?,
            )
        }
        "velocity_gaussian" => {
            let t = field(rng, 1)?;
            let mean: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
            let target = TargetMeasure::gaussian(mean, rng.random_range(0.2..1.0))?;
            (
                t,
                ProblemSpec::velocity(eps, Mollifier::new(delta, d)?, target)?,
            )
        }
        "velocity_obstacles" => {
            let t = field(rng, 1)?;
            let w = cloud(rng, d)?;
            let circles = (0..2)
                .map(|_| Circle {
                    center: (0..d).map(|_| rng.random_range(-0.5..0.5)).collect(),
                    radius: rng.random_range(0.2..0.8),
                })
                .collect();
            let obs = ObstacleSet::new(circles, rng.random_range(0.5..5.0))?;
            let spec = ProblemSpec::velocity(
                eps,
                Mollifier::new(delta, d)?,
                TargetMeasure::empirical(w)?,
            )?
            .with_obstacles(obs)?;
            (t, spec)
        }
        "acceleration_empirical" => {
            let t = field(rng, 2)?;
            let w = cloud(rng, 2 * d)?;
            let v0 = cloud(rng, d)?;
            // Terminal velocities scale with M - 1, so widen the kernel.
            let spec = ProblemSpec::acceleration(
                eps,
                Mollifier::new(3.0 * delta, 2 * d)?,
                TargetMeasure::empirical(w)?,
                v0,
            )?;
            (t, spec)
        }
        other => return Err(BlobError::arg(format!("unknown gradcheck mode `{other}`"))),
    })
}

/// Compare analytic and central-difference gradients on seeded instances.
pub fn gradcheck(
    seed: u64,
    instances: usize,
    tolerance: f64,
    corrupt: Option<Term>,
) -> Result<GradcheckReport> {
    let modes = GRADCHECK_MODES
        .iter()
        .enumerate()
        .map(|(k, &mode)| -> Result<GradcheckMode> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let mut worst = 0.0f64;
            for _ in 0..instances {
                let (t, spec) = gradcheck_instance(mode, &mut rng)?;
                let (_, g) = gradient_impl(&t, &spec, Execution::Sequential, corrupt)?;
                let fd = finite_difference_gradient(&t, &spec, default_fd_step(&t))?;
                worst = worst.max(relative_error(&g, &fd));
            }
            Ok(GradcheckMode {
                mode: mode.to_string(),
                instances,
                max_relative_error: worst,
                passed: worst <= tolerance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradcheckReport {
        seed,
        tolerance,
        corrupted_term: corrupt,
        passed: modes.iter().all(|m| m.passed),
        modes,
    })
}

/// Gradient check driven by a config (or defaults); writes `gradcheck.json`.
pub fn run_gradcheck(cfg: Option<&ExperimentConfig>, opts: &RunOptions) -> Result<GradcheckReport> {
    prepare_dir(&opts.out_dir, &["gradcheck.json"], opts.overwrite)?;
    let spec = cfg.and_then(|c| c.gradcheck.clone()).unwrap_or_default();
    let seed = cfg.map_or(0, |c| c.optimizer.seed);
    let report = gradcheck(seed, spec.instances_per_mode, spec.tolerance, spec.corrupt)?;
    write_json(&opts.out_dir.join("gradcheck.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Output

/// 17 significant digits, '.' decimal separator.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn prepare_dir(dir: &Path, files: &[&str], overwrite: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    if !overwrite {
        if let Some(f) = files.iter().find(|f| dir.join(f).exists()) {
            return Err(BlobError::config(
                "output_dir",
                format!(
                    "{} already exists; pass --overwrite to replace it",
                    dir.join(f).display()
                ),
            ));
        }
    }
    Ok(())
}

/// `particle_index,knot_index,t,coord_*` and, under acceleration control,
/// `vel_*` (initial velocity at the first knot, backward differences after).
pub fn write_trajectories(
    path: &Path,
    traj: &TrajectoryField,
    initial_velocities: &Option<PointCloud>,
) -> Result<()> {
    let d = traj.dim();
    let m = traj.n_times();
    let mut out = BufWriter::new(fs::File::create(path)?);
    let mut header = vec![
        "particle_index".to_string(),
        "knot_index".into(),
        "t".into(),
    ];
    header.extend((0..d).map(|c| format!("coord_{c}")));
    if initial_velocities.is_some() {
        header.extend((0..d).map(|c| format!("vel_{c}")));
    }
    writeln!(out, "{}", header.join(","))?;
    let inv_h = (m - 1) as f64;
    for i in 0..traj.n_particles() {
        for j in 0..m {
            let mut cols = vec![i.to_string(), j.to_string(), num(j as f64 / inv_h)];
            cols.extend(traj.knot(i, j).iter().map(|&x| num(x)));
            if let Some(v0) = initial_velocities {
                if j == 0 {
                    cols.extend(v0.point(i).iter().map(|&x| num(x)));
                } else {
                    let (a, b) = (traj.knot(i, j), traj.knot(i, j - 1));
                    cols.extend(a.iter().zip(b).map(|(x, y)| num((x - y) * inv_h)));
                }
            }
            writeln!(out, "{}", cols.join(","))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `iter,total,kinetic_or_cc,potential,nonlocal,lr`.
pub fn write_loss(path: &Path, trace: &LossTrace) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "iter,total,kinetic_or_cc,potential,nonlocal,lr")?;
    for r in &trace.records {
        let e = &r.energies;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter,
            num(e.total),
            num(e.control),
            num(e.potential),
            num(e.nonlocal),
            num(r.lr)
        )?;
    }
    out.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
