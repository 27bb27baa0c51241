//! Analytic gradients of the discrete objective and a central-difference oracle.

use serde::{Deserialize, Serialize};

use crate::energy::{
    control_cost_acceleration, kinetic_energy, nonlocal_eval, phase_terminal, potential_energy,
    total_objective, ControlMode, Energies, ProblemSpec, TrajectoryField,
};
use crate::error::{BlobError, Result};
use crate::par::Execution;

/// Gradient with the shape of a [`TrajectoryField`]; frozen entries are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    n_particles: usize,
    n_times: usize,
    dim: usize,
    frozen_knots: usize,
    values: Vec<f64>,
}

impl GradientField {
    fn zeros_like(traj: &TrajectoryField) -> Self {
        Self {
            n_particles: traj.n_particles(),
            n_times: traj.n_times(),
            dim: traj.dim(),
            frozen_knots: traj.frozen_knots(),
            values: vec![0.0; traj.as_slice().len()],
        }
    }

    pub fn knot(&self, i: usize, j: usize) -> &[f64] {
        let o = (i * self.n_times + j) * self.dim;
        &self.values[o..o + self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_particles, self.n_times, self.dim)
    }

    pub fn frozen_knots(&self) -> usize {
        self.frozen_knots
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    fn zero_frozen(&mut self) {
        let w = self.n_times * self.dim;
        let f = self.frozen_knots * self.dim;
        for p in self.values.chunks_exact_mut(w) {
            p[..f].iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// Objective terms, used to address one contribution of the gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Control,
    Potential,
    Nonlocal,
}

/// Gradient of the kinetic energy at every knot, frozen ones included.
pub fn kinetic_gradient_unmasked(traj: &TrajectoryField) -> Vec<f64> {
    let mut g = vec![0.0; traj.as_slice().len()];
    add_kinetic(traj, 1.0, &mut g);
    g
}

fn add_kinetic(traj: &TrajectoryField, sign: f64, g: &mut [f64]) {
    let m = traj.n_times();
    let d = traj.dim();
    let scale = sign * 2.0 * (m - 1) as f64 / traj.n_particles() as f64;
    let w = m * d;
    for (i, gp) in g.chunks_exact_mut(w).enumerate() {
        let p = traj.particle(i);
        for j in 0..m - 1 {
            for c in 0..d {
                let inc = scale * (p[(j + 1) * d + c] - p[j * d + c]);
                gp[(j + 1) * d + c] += inc;
                gp[j * d + c] -= inc;
            }
        }
    }
}

fn add_potential(traj: &TrajectoryField, spec: &ProblemSpec, sign: f64, g: &mut [f64]) {
    let obs = &spec.obstacles;
    if !obs.is_active() {
        return;
    }
    let scale = sign / (traj.n_particles() * (traj.n_times() - 1)) as f64;
    let d = traj.dim();
    for (y, gy) in traj.as_slice().chunks_exact(d).zip(g.chunks_exact_mut(d)) {
        obs.add_cost_gradient(y, scale, gy);
    }
}

fn add_acceleration_cost(traj: &TrajectoryField, sign: f64, g: &mut [f64]) {
    let m = traj.n_times();
    let d = traj.dim();
    let mm = (m - 1) as f64;
    let c2 = sign * 2.0 * mm * mm * mm / traj.n_particles() as f64;
    for (i, gp) in g.chunks_exact_mut(m * d).enumerate() {
        let p = traj.particle(i);
        for j in 0..m - 2 {
            for c in 0..d {
                let s = c2 * (p[j * d + c] - 2.0 * p[(j + 1) * d + c] + p[(j + 2) * d + c]);
                gp[j * d + c] += s;
                gp[(j + 1) * d + c] -= 2.0 * s;
                gp[(j + 2) * d + c] += s;
            }
        }
    }
}

/// Loss decomposition and gradient in one pass.
pub fn value_and_gradient(
    traj: &TrajectoryField,
    spec: &ProblemSpec,
    exec: Execution,
) -> Result<(Energies, GradientField)> {
    gradient_impl(traj, spec, exec, None)
}

pub(crate) fn gradient_impl(
    traj: &TrajectoryField,
    spec: &ProblemSpec,
    exec: Execution,
    negate: Option<Term>,
) -> Result<(Energies, GradientField)> {
    spec.check_traj(traj)?;
    let sign = |t: Term| if negate == Some(t) { -1.0 } else { 1.0 };
    let mut grad = GradientField::zeros_like(traj);
    let m = traj.n_times();
    let d = traj.dim();
    let energies = match &spec.mode {
        ControlMode::Velocity => {
            add_kinetic(traj, sign(Term::Control), &mut grad.values);
            add_potential(traj, spec, sign(Term::Potential), &mut grad.values);
            let ne = if spec.nonlocal_enabled {
                let mut tg = vec![0.0; traj.n_particles() * d];
                let ne = nonlocal_eval(&traj.terminal(), spec, exec, Some(&mut tg))?;
                let s = sign(Term::Nonlocal);
                for (i, row) in tg.chunks_exact(d).enumerate() {
                    let o = (i * m + m - 1) * d;
                    for (gv, r) in grad.values[o..o + d].iter_mut().zip(row) {
                        *gv += s * r;
                    }
                }
                ne
            } else {
                0.0
            };
            Energies::new(
                kinetic_energy(traj),
                potential_energy(traj, &spec.obstacles),
                ne,
            )
        }
        ControlMode::Acceleration { .. } => {
            add_acceleration_cost(traj, sign(Term::Control), &mut grad.values);
            let ne = if spec.nonlocal_enabled {
                let phase = phase_terminal(traj);
                let mut pg = vec![0.0; traj.n_particles() * 2 * d];
                let ne = nonlocal_eval(&phase, spec, exec, Some(&mut pg))?;
                let s = sign(Term::Nonlocal);
                let inv_h = (m - 1) as f64;
                for (i, row) in pg.chunks_exact(2 * d).enumerate() {
                    let last = (i * m + m - 1) * d;
                    let prev = (i * m + m - 2) * d;
                    for c in 0..d {
                        let gx = row[c];
                        let gv = row[d + c];
                        grad.values[last + c] += s * (gx + inv_h * gv);
                        grad.values[prev + c] -= s * inv_h * gv;
                    }
                }
                ne
            } else {
                0.0
            };
            Energies::new(control_cost_acceleration(traj)?, 0.0, ne)
        }
    };
    grad.zero_frozen();
    Ok((energies, grad))
}

/// Exact gradient of [`total_objective`] with respect to the free knots.
pub fn objective_gradient(traj: &TrajectoryField, spec: &ProblemSpec) -> Result<GradientField> {
    Ok(value_and_gradient(traj, spec, Execution::Auto)?.1)
}

/// Step that keeps central differences accurate at the trajectory's scale.
pub fn default_fd_step(traj: &TrajectoryField) -> f64 {
    1e-5 * (1.0 + traj.max_abs())
}

/// Central differences of [`total_objective`] over every free coordinate.
pub fn finite_difference_gradient(
    traj: &TrajectoryField,
    spec: &ProblemSpec,
    step: f64,
) -> Result<GradientField> {
    if !(step > 0.0) {
        return Err(BlobError::arg(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    spec.check_traj(traj)?;
    let mut grad = GradientField::zeros_like(traj);
    let mut work = traj.clone();
    let (m, d) = (traj.n_times(), traj.dim());
    for i in 0..traj.n_particles() {
        for j in traj.frozen_knots()..m {
            for c in 0..d {
                let k = (i * m + j) * d + c;
                let x0 = traj.as_slice()[k];
                work.as_mut_slice()[k] = x0 + step;
                let fp = total_objective(&work, spec)?;
                work.as_mut_slice()[k] = x0 - step;
                let fm = total_objective(&work, spec)?;
                work.as_mut_slice()[k] = x0;
                grad.values[k] = (fp - fm) / (2.0 * step);
            }
        }
    }
    Ok(grad)
}

/// `max |a - b| / (1 + max |b|)` over all entries.
pub fn relative_error(analytic: &GradientField, reference: &GradientField) -> f64 {
    let diff = analytic
        .values
        .iter()
        .zip(&reference.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    diff / (1.0 + reference.max_abs())
}
