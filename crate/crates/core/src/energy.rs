//! The discrete objective: control cost, obstacle potential and the nonlocal
//! terminal penalty.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, BlobError, Result};
use crate::kernels::{gaussian_norm, Mollifier};
use crate::par::{self, Execution};
use crate::points::{sq_dist, PointCloud};

/// Particle trajectories sampled on a uniform time grid of `n_times` knots
/// over `[0, 1]`. The leading `frozen_knots` knots of every particle are
/// initial data and never move.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryField {
    n_particles: usize,
    n_times: usize,
    dim: usize,
    frozen_knots: usize,
    values: Vec<f64>,
}

impl TrajectoryField {
    pub fn zeros(
        n_particles: usize,
        n_times: usize,
        dim: usize,
        frozen_knots: usize,
    ) -> Result<Self> {
        if n_particles == 0 || dim == 0 {
            return Err(BlobError::arg(
                "need at least one particle and one dimension",
            ));
        }
        if !(1..=2).contains(&frozen_knots) {
            return Err(BlobError::arg(
                "frozen_knots must be 1 (velocity) or 2 (acceleration)",
            ));
        }
        let min_times = frozen_knots + 1;
        if n_times < min_times {
            return Err(BlobError::arg(format!(
                "need at least {min_times} time knots with {frozen_knots} frozen, got {n_times}"
            )));
        }
        Ok(Self {
            n_particles,
            n_times,
            dim,
            frozen_knots,
            values: vec![0.0; n_particles * n_times * dim],
        })
    }

    /// Build from a function of `(particle, knot) -> point`.
    pub fn from_fn(
        n_particles: usize,
        n_times: usize,
        dim: usize,
        frozen_knots: usize,
        mut f: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let mut t = Self::zeros(n_particles, n_times, dim, frozen_knots)?;
        for i in 0..n_particles {
            for j in 0..n_times {
                let p = f(i, j);
                check_dim(dim, p.len())?;
                t.knot_mut(i, j).copy_from_slice(&p);
            }
        }
        Ok(t)
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frozen_knots(&self) -> usize {
        self.frozen_knots
    }

    /// Time step `h = 1/(M-1)`.
    pub fn step(&self) -> f64 {
        1.0 / (self.n_times - 1) as f64
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        (i * self.n_times + j) * self.dim
    }

    pub fn knot(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j);
        &self.values[o..o + self.dim]
    }

    pub fn knot_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = self.offset(i, j);
        &mut self.values[o..o + self.dim]
    }

    /// All knots of one particle, `n_times * dim` values.
    pub fn particle(&self, i: usize) -> &[f64] {
        let w = self.n_times * self.dim;
        &self.values[i * w..(i + 1) * w]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Knot `j` of every particle.
    pub fn knots_at(&self, j: usize) -> PointCloud {
        let mut data = Vec::with_capacity(self.n_particles * self.dim);
        for i in 0..self.n_particles {
            data.extend_from_slice(self.knot(i, j));
        }
        PointCloud::new(self.dim, data).expect("dim checked at construction")
    }

    pub fn sources(&self) -> PointCloud {
        self.knots_at(0)
    }

    pub fn terminal(&self) -> PointCloud {
        self.knots_at(self.n_times - 1)
    }

    /// Largest absolute coordinate.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    /// Copy with every knot shifted by `shift`.
    pub fn translated(&self, shift: &[f64]) -> TrajectoryField {
        let mut out = self.clone();
        for p in out.values.chunks_exact_mut(self.dim) {
            for (x, s) in p.iter_mut().zip(shift) {
                *x += s;
            }
        }
        out
    }

    /// Copy with particles reordered: particle `i` of the result is particle
    /// `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> TrajectoryField {
        let mut out = self.clone();
        let w = self.n_times * self.dim;
        for (i, &p) in perm.iter().enumerate() {
            out.values[i * w..(i + 1) * w].copy_from_slice(self.particle(p));
        }
        out
    }
}

/// Terminal target measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TargetMeasure {
    /// Equal-weight point cloud.
    Empirical(PointCloud),
    /// `N(mean, std^2 I)`.
    GaussianIso { mean: Vec<f64>, std: f64 },
}

impl TargetMeasure {
    pub fn empirical(points: PointCloud) -> Result<Self> {
        if points.is_empty() {
            return Err(BlobError::arg("empirical target needs at least one point"));
        }
        Ok(TargetMeasure::Empirical(points))
    }

    pub fn gaussian(mean: Vec<f64>, std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(BlobError::arg(format!(
                "gaussian std must be positive, got {std}"
            )));
        }
        if mean.is_empty() {
            return Err(BlobError::arg(
                "gaussian mean must have at least one coordinate",
            ));
        }
        Ok(TargetMeasure::GaussianIso { mean, std })
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetMeasure::Empirical(p) => p.dim(),
            TargetMeasure::GaussianIso { mean, .. } => mean.len(),
        }
    }

    pub fn center_of_mass(&self) -> Vec<f64> {
        match self {
            TargetMeasure::Empirical(p) => p.mean(),
            TargetMeasure::GaussianIso { mean, .. } => mean.clone(),
        }
    }

    pub fn translated(&self, shift: &[f64]) -> TargetMeasure {
        match self {
            TargetMeasure::Empirical(p) => TargetMeasure::Empirical(p.translated(shift)),
            TargetMeasure::GaussianIso { mean, std } => TargetMeasure::GaussianIso {
                mean: mean.iter().zip(shift).map(|(m, s)| m + s).collect(),
                std: *std,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Union of open balls, penalized by `strength * sum_k max(r_k^2 - |y - c_k|^2, 0)`.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ObstacleSet {
    pub circles: Vec<Circle>,
    pub strength: f64,
}

impl ObstacleSet {
    pub fn new(circles: Vec<Circle>, strength: f64) -> Result<Self> {
        if !(strength >= 0.0 && strength.is_finite()) {
            return Err(BlobError::arg(
                "obstacle strength must be finite and nonnegative",
            ));
        }
        if let Some(c) = circles.iter().find(|c| !(c.radius > 0.0)) {
            return Err(BlobError::arg(format!(
                "obstacle radius must be positive, got {}",
                c.radius
            )));
        }
        Ok(Self { circles, strength })
    }

    /// The default strength `(h * epsilon)^-1`.
    pub fn default_strength(n_times: usize, epsilon: f64) -> f64 {
        (n_times - 1) as f64 / epsilon
    }

    pub fn is_active(&self) -> bool {
        self.strength > 0.0 && !self.circles.is_empty()
    }

    pub fn cost(&self, y: &[f64]) -> f64 {
        if !self.is_active() {
            return 0.0;
        }
        let s: f64 = self
            .circles
            .iter()
            .map(|c| (c.radius * c.radius - sq_dist(y, &c.center)).max(0.0))
            .sum();
        self.strength * s
    }

    /// Adds `scale * grad cost(y)` to `out`.
    pub fn add_cost_gradient(&self, y: &[f64], scale: f64, out: &mut [f64]) {
        if !self.is_active() {
            return;
        }
        for c in &self.circles {
            if c.radius * c.radius - sq_dist(y, &c.center) > 0.0 {
                for ((o, a), b) in out.iter_mut().zip(y).zip(&c.center) {
                    *o += scale * self.strength * (-2.0) * (a - b);
                }
            }
        }
    }

    /// How far `y` lies inside the deepest circle (0 when outside all).
    pub fn penetration_depth(&self, y: &[f64]) -> f64 {
        self.circles
            .iter()
            .map(|c| (c.radius - sq_dist(y, &c.center).sqrt()).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn translated(&self, shift: &[f64]) -> ObstacleSet {
        ObstacleSet {
            circles: self
                .circles
                .iter()
                .map(|c| Circle {
                    center: c.center.iter().zip(shift).map(|(a, s)| a + s).collect(),
                    radius: c.radius,
                })
                .collect(),
            strength: self.strength,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ControlMode {
    Velocity,
    /// Acceleration control; the target lives in phase space (position, velocity).
    Acceleration {
        initial_velocities: PointCloud,
    },
}

impl ControlMode {
    pub fn frozen_knots(&self) -> usize {
        match self {
            ControlMode::Velocity => 1,
            ControlMode::Acceleration { .. } => 2,
        }
    }
}

/// Everything that defines the objective apart from the trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub mode: ControlMode,
    pub epsilon: f64,
    pub mollifier: Mollifier,
    pub target: TargetMeasure,
    pub obstacles: ObstacleSet,
    /// Turns the terminal penalty off, leaving a purely quadratic problem.
    pub nonlocal_enabled: bool,
}

impl ProblemSpec {
    pub fn velocity(epsilon: f64, mollifier: Mollifier, target: TargetMeasure) -> Result<Self> {
        let spec = Self {
            mode: ControlMode::Velocity,
            epsilon,
            mollifier,
            target,
            obstacles: ObstacleSet::default(),
            nonlocal_enabled: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn acceleration(
        epsilon: f64,
        mollifier: Mollifier,
        target: TargetMeasure,
        initial_velocities: PointCloud,
    ) -> Result<Self> {
        let spec = Self {
            mode: ControlMode::Acceleration { initial_velocities },
            epsilon,
            mollifier,
            target,
            obstacles: ObstacleSet::default(),
            nonlocal_enabled: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_obstacles(mut self, obstacles: ObstacleSet) -> Result<Self> {
        self.obstacles = obstacles;
        self.validate()?;
        Ok(self)
    }

    pub fn without_nonlocal(mut self) -> Self {
        self.nonlocal_enabled = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(BlobError::arg(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        check_dim(self.mollifier.dim(), self.target.dim())?;
        match &self.mode {
            ControlMode::Velocity => {
                for c in &self.obstacles.circles {
                    check_dim(self.target.dim(), c.center.len())?;
                }
            }
            ControlMode::Acceleration { initial_velocities } => {
                if self.target.dim() != 2 * initial_velocities.dim() {
                    return Err(BlobError::arg(format!(
                        "acceleration target must live in phase space of dimension {}, got {}",
                        2 * initial_velocities.dim(),
                        self.target.dim()
                    )));
                }
                if self.obstacles.is_active() {
                    return Err(BlobError::arg(
                        "obstacles are only supported under velocity control",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Spatial dimension of the trajectories.
    pub fn space_dim(&self) -> usize {
        match &self.mode {
            ControlMode::Velocity => self.target.dim(),
            ControlMode::Acceleration { .. } => self.target.dim() / 2,
        }
    }

    pub(crate) fn check_traj(&self, traj: &TrajectoryField) -> Result<()> {
        if traj.frozen_knots() != self.mode.frozen_knots() {
            return Err(BlobError::arg(format!(
                "trajectory has {} frozen knots but the control mode needs {}",
                traj.frozen_knots(),
                self.mode.frozen_knots()
            )));
        }
        check_dim(self.space_dim(), traj.dim())?;
        if let ControlMode::Acceleration { initial_velocities } = &self.mode {
            if initial_velocities.len() != traj.n_particles() {
                return Err(BlobError::arg("one initial velocity per particle required"));
            }
        }
        Ok(())
    }

    /// `C_{delta, m1}`: the measure-independent constant dropped from the
    /// nonlocal energy, i.e. `int (K_delta * m1) dm1`.
    pub fn penalty_constant(&self) -> f64 {
        let k = &self.mollifier;
        match &self.target {
            TargetMeasure::Empirical(w) => {
                let n = w.len();
                let rows = par::sum_rows(n, Execution::Auto, |i| {
                    let wi = w.point(i);
                    w.iter().map(|wk| k.value_sq(sq_dist(wi, wk))).sum()
                });
                rows / (n * n) as f64
            }
            TargetMeasure::GaussianIso { std, .. } => {
                let v = std * std;
                gaussian_norm(2.0 * v + k.delta() * k.delta(), k.dim())
            }
        }
    }
}

/// Loss decomposition at one iterate.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Energies {
    /// Kinetic energy (velocity control) or control cost (acceleration control).
    pub control: f64,
    pub potential: f64,
    pub nonlocal: f64,
    pub total: f64,
}

impl Energies {
    pub(crate) fn new(control: f64, potential: f64, nonlocal: f64) -> Self {
        Self {
            control,
            potential,
            nonlocal,
            total: control + potential + nonlocal,
        }
    }
}

/// `((M-1)/N) sum_i sum_j |y_{i,j+1} - y_{i,j}|^2`.
pub fn kinetic_energy(traj: &TrajectoryField) -> f64 {
    let m = traj.n_times();
    let d = traj.dim();
    let s: f64 = (0..traj.n_particles())
        .map(|i| {
            traj.particle(i)
                .windows(2 * d)
                .step_by(d)
                .map(|w| sq_dist(&w[..d], &w[d..]))
                .sum::<f64>()
        })
        .sum();
    (m - 1) as f64 / traj.n_particles() as f64 * s
}

/// `(1/(N(M-1))) sum_i sum_{j=1..M} L(y_{i,j})`, including the initial knot.
pub fn potential_energy(traj: &TrajectoryField, obs: &ObstacleSet) -> f64 {
    if !obs.is_active() {
        return 0.0;
    }
    let s: f64 = traj
        .as_slice()
        .chunks_exact(traj.dim())
        .map(|y| obs.cost(y))
        .sum();
    s / (traj.n_particles() * (traj.n_times() - 1)) as f64
}

/// `((M-1)^3/N) sum_i sum_j |x_{i,j} - 2x_{i,j+1} + x_{i,j+2}|^2`.
pub fn control_cost_acceleration(traj: &TrajectoryField) -> Result<f64> {
    let m = traj.n_times();
    if m < 3 {
        return Err(BlobError::arg("control cost needs at least 3 time knots"));
    }
    let d = traj.dim();
    let mut s = 0.0;
    for i in 0..traj.n_particles() {
        let p = traj.particle(i);
        for j in 0..m - 2 {
            for c in 0..d {
                let dd = p[j * d + c] - 2.0 * p[(j + 1) * d + c] + p[(j + 2) * d + c];
                s += dd * dd;
            }
        }
    }
    let mm = (m - 1) as f64;
    Ok(mm * mm * mm / traj.n_particles() as f64 * s)
}

/// Terminal (position, velocity) pairs with backward-difference velocities.
pub fn phase_terminal(traj: &TrajectoryField) -> PointCloud {
    let m = traj.n_times();
    let d = traj.dim();
    let inv_h = (m - 1) as f64;
    let mut data = Vec::with_capacity(traj.n_particles() * 2 * d);
    for i in 0..traj.n_particles() {
        let last = traj.knot(i, m - 1);
        let prev = traj.knot(i, m - 2);
        data.extend_from_slice(last);
        data.extend(last.iter().zip(prev).map(|(a, b)| (a - b) * inv_h));
    }
    PointCloud::new(2 * d, data).expect("nonzero dimension")
}

/// Nonlocal energy with the constant `C_{delta,m1}` dropped; may be negative.
pub fn nonlocal_energy(terminal: &PointCloud, spec: &ProblemSpec) -> Result<f64> {
    nonlocal_energy_with(terminal, spec, Execution::Auto)
}

pub fn nonlocal_energy_with(
    terminal: &PointCloud,
    spec: &ProblemSpec,
    exec: Execution,
) -> Result<f64> {
    nonlocal_eval(terminal, spec, exec, None)
}

/// The full penalty `(1/eps) |k_delta * mu_N - k_delta * m1|^2_{L^2}`, always
/// nonnegative up to rounding.
pub fn terminal_penalty_full(terminal: &PointCloud, spec: &ProblemSpec) -> Result<f64> {
    Ok(nonlocal_energy(terminal, spec)? + spec.penalty_constant() / spec.epsilon)
}

/// Evaluates the nonlocal energy, optionally writing its gradient with respect
/// to each terminal point into `grad` (row-major, `terminal.dim()` wide).
type RowFn<'a> = dyn Fn(&[f64], &mut [f64]) -> f64 + Sync + Send + 'a;

pub(crate) fn nonlocal_eval(
    terminal: &PointCloud,
    spec: &ProblemSpec,
    exec: Execution,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let k = &spec.mollifier;
    let d = terminal.dim();
    check_dim(k.dim(), d)?;
    let n = terminal.len();
    if let TargetMeasure::Empirical(w) = &spec.target {
        if w.len() != n {
            return Err(BlobError::arg(format!(
                "empirical target has {} points but there are {n} particles",
                w.len()
            )));
        }
    }
    let eps = spec.epsilon;
    let nf = n as f64;
    let peak = k.peak();
    let inv_2d2 = 1.0 / (2.0 * k.delta() * k.delta());
    let inv_d2 = 1.0 / (k.delta() * k.delta());
    let y = terminal.as_slice();

    // Row i returns sum_k K(y_i - y_k) - 2 * (attraction to the target), and
    // writes sum_k grad K(y_i - y_k) - (target attraction gradient) into `g`,
    // both scaled so that the energy is rows / (eps N^2) and the gradient is
    // 2 g / (eps N^2).
    let target_row: Box<RowFn<'_>> = match &spec.target {
        TargetMeasure::Empirical(w) => {
            let w = w.as_slice();
            Box::new(move |yi: &[f64], g: &mut [f64]| {
                let mut s = 0.0;
                for wk in w.chunks_exact(d) {
                    let kv = peak * (-sq_dist(yi, wk) * inv_2d2).exp();
                    s += kv;
                    for c in 0..d {
                        // - grad K(y_i - w_k)
                        g[c] += (yi[c] - wk[c]) * inv_d2 * kv;
                    }
                }
                s
            })
        }
        TargetMeasure::GaussianIso { mean, std } => {
            let var = std * std + k.delta() * k.delta();
            let norm = gaussian_norm(var, d);
            let mean = mean.clone();
            Box::new(move |yi: &[f64], g: &mut [f64]| {
                let gv = norm * (-sq_dist(yi, &mean) / (2.0 * var)).exp();
                for c in 0..d {
                    g[c] += nf * (yi[c] - mean[c]) / var * gv;
                }
                nf * gv
            })
        }
    };

    let row = |i: usize, g: &mut [f64]| -> f64 {
        let yi = &y[i * d..(i + 1) * d];
        let mut self_sum = 0.0;
        for yk in y.chunks_exact(d) {
            let kv = peak * (-sq_dist(yi, yk) * inv_2d2).exp();
            self_sum += kv;
            for c in 0..d {
                g[c] -= (yi[c] - yk[c]) * inv_d2 * kv;
            }
        }
        self_sum - 2.0 * target_row(yi, g)
    };

    let scale = 1.0 / (eps * nf * nf);
    match grad {
        Some(buf) => {
            check_dim(n * d, buf.len())?;
            let rows = par::fill_rows(buf, d, exec, |i, g| {
                g.iter_mut().for_each(|x| *x = 0.0);
                row(i, g)
            });
            buf.iter_mut().for_each(|x| *x *= 2.0 * scale);
            Ok(rows * scale)
        }
        None => {
            let rows = par::sum_rows(n, exec, |i| {
                let mut scratch = [0.0f64; 8];
                if d <= scratch.len() {
                    row(i, &mut scratch[..d])
                } else {
                    row(i, &mut vec![0.0; d])
                }
            });
            Ok(rows * scale)
        }
    }
}

/// The loss decomposition at `traj`.
pub fn energies(traj: &TrajectoryField, spec: &ProblemSpec) -> Result<Energies> {
    energies_with(traj, spec, Execution::Auto)
}

pub fn energies_with(
    traj: &TrajectoryField,
    spec: &ProblemSpec,
    exec: Execution,
) -> Result<Energies> {
    spec.check_traj(traj)?;
    match &spec.mode {
        ControlMode::Velocity => {
            let ne = if spec.nonlocal_enabled {
                nonlocal_energy_with(&traj.terminal(), spec, exec)?
            } else {
                0.0
            };
            Ok(Energies::new(
                kinetic_energy(traj),
                potential_energy(traj, &spec.obstacles),
                ne,
            ))
        }
        ControlMode::Acceleration { .. } => {
            let ne = if spec.nonlocal_enabled {
                nonlocal_energy_with(&phase_terminal(traj), spec, exec)?
            } else {
                0.0
            };
            Ok(Energies::new(control_cost_acceleration(traj)?, 0.0, ne))
        }
    }
}

/// Total objective: KE + PE + NE (velocity) or CC + NPVE (acceleration).
pub fn total_objective(traj: &TrajectoryField, spec: &ProblemSpec) -> Result<f64> {
    Ok(energies(traj, spec)?.total)
}
