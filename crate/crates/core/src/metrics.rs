//! Errors against an exact transport reference and the log-log rate fit.

use serde::{Deserialize, Serialize};

use crate::energy::TrajectoryField;
use crate::error::{BlobError, Result};
use crate::oracle::{continuum_geodesic, Assignment};
use crate::points::{sq_dist, PointCloud};

/// Exact position at time `t` of the particle that started at `source`
/// (particle index `i`).
pub trait ExactMap {
    fn position(&self, i: usize, source: &[f64], t: f64) -> Vec<f64>;
}

impl<F> ExactMap for F
where
    F: Fn(usize, &[f64], f64) -> Vec<f64>,
{
    fn position(&self, i: usize, source: &[f64], t: f64) -> Vec<f64> {
        self(i, source, t)
    }
}

/// The 1-d uniform-to-uniform geodesic, applied coordinate-wise.
#[derive(Clone, Copy, Debug, Default)]
pub struct Geodesic1d;

impl ExactMap for Geodesic1d {
    fn position(&self, _i: usize, source: &[f64], t: f64) -> Vec<f64> {
        source.iter().map(|&y| continuum_geodesic(y, t)).collect()
    }
}

/// Straight chords from each source to its assigned target.
#[derive(Clone, Debug)]
pub struct ChordMap {
    targets: PointCloud,
    permutation: Vec<usize>,
}

impl ChordMap {
    pub fn new(targets: PointCloud, assignment: &Assignment) -> Self {
        Self {
            targets,
            permutation: assignment.permutation.clone(),
        }
    }
}

impl ExactMap for ChordMap {
    fn position(&self, i: usize, source: &[f64], t: f64) -> Vec<f64> {
        let w = self.targets.point(self.permutation[i]);
        source
            .iter()
            .zip(w)
            .map(|(z, w)| (1.0 - t) * z + t * w)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error_all_times: f64,
    pub error_terminal: f64,
}

impl ErrorReport {
    pub fn new(traj: &TrajectoryField, exact: &impl ExactMap) -> Self {
        Self {
            error_all_times: error_all_times(traj, exact),
            error_terminal: error_terminal(traj, exact),
        }
    }
}

/// RMS deviation from the exact map over knots `2..=M`.
pub fn error_all_times(traj: &TrajectoryField, exact: &impl ExactMap) -> f64 {
    let m = traj.n_times();
    let mut s = 0.0;
    for i in 0..traj.n_particles() {
        let z = traj.knot(i, 0);
        for j in 1..m {
            let t = j as f64 / (m - 1) as f64;
            s += sq_dist(traj.knot(i, j), &exact.position(i, z, t));
        }
    }
    (s / (traj.n_particles() * (m - 1)) as f64).sqrt()
}

/// RMS deviation of the terminal knots from the exact map at `t = 1`.
pub fn error_terminal(traj: &TrajectoryField, exact: &impl ExactMap) -> f64 {
    let m = traj.n_times();
    let s: f64 = (0..traj.n_particles())
        .map(|i| {
            sq_dist(
                traj.knot(i, m - 1),
                &exact.position(i, traj.knot(i, 0), 1.0),
            )
        })
        .sum();
    (s / traj.n_particles() as f64).sqrt()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(BlobError::arg("slope fit needs at least two points"));
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(BlobError::arg(format!(
            "log-log fit needs positive values, got ({x}, {y})"
        )));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(BlobError::arg(
            "slope fit needs at least two distinct x values",
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line(values: &[f64]) -> TrajectoryField {
        TrajectoryField::from_fn(1, values.len(), 1, 1, |_, j| vec![values[j]]).unwrap()
    }

    #[test]
    fn exact_trajectories_have_zero_error() {
        let n = 6;
        let m = 5;
        let t = TrajectoryField::from_fn(n, m, 1, 1, |i, j| {
            let y = i as f64 / (n - 1) as f64;
            vec![continuum_geodesic(y, j as f64 / (m - 1) as f64)]
        })
        .unwrap();
        let r = ErrorReport::new(&t, &Geodesic1d);
        assert!(r.error_all_times < 1e-15 && r.error_terminal < 1e-15);
    }

    #[test]
    fn error_examples() {
        assert_relative_eq!(
            error_all_times(&line(&[0.0, 2.1]), &Geodesic1d),
            0.1,
            epsilon = 1e-14
        );
        assert_eq!(error_all_times(&line(&[0.0, 1.0, 2.0]), &Geodesic1d), 0.0);
        let t = TrajectoryField::from_fn(2, 2, 1, 1, |i, j| vec![[[0.0, 2.1], [1.0, 2.5]][i][j]])
            .unwrap();
        assert_relative_eq!(error_terminal(&t, &Geodesic1d), 0.0707107, epsilon = 1e-7);
    }

    #[test]
    fn errors_scale_linearly() {
        let base = TrajectoryField::from_fn(3, 4, 1, 1, |i, j| {
            vec![continuum_geodesic(i as f64 / 2.0, j as f64 / 3.0)]
        })
        .unwrap();
        let dev = [0.0, 0.1, -0.3, 0.2];
        let shifted = |c: f64| {
            TrajectoryField::from_fn(3, 4, 1, 1, |i, j| {
                let extra = if j == 0 {
                    0.0
                } else {
                    c * dev[j] * (i as f64 + 1.0)
                };
                vec![base.knot(i, j)[0] + extra]
            })
            .unwrap()
        };
        let r1 = ErrorReport::new(&shifted(1.0), &Geodesic1d);
        let r3 = ErrorReport::new(&shifted(-3.0), &Geodesic1d);
        assert_relative_eq!(
            r3.error_all_times,
            3.0 * r1.error_all_times,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            r3.error_terminal,
            3.0 * r1.error_terminal,
            max_relative = 1e-12
        );
    }

    #[test]
    fn chord_map_follows_assignment() {
        let targets = PointCloud::from_scalars(&[5.0, 3.0]);
        let asg = Assignment {
            permutation: vec![1, 0],
            mean_cost: 0.0,
        };
        let map = ChordMap::new(targets, &asg);
        assert_eq!(map.position(0, &[1.0], 0.5), vec![2.0]);
        assert_eq!(map.position(1, &[1.0], 1.0), vec![5.0]);
    }

    #[test]
    fn slope_examples() {
        assert_relative_eq!(
            loglog_slope(&[(1.0, 1.0), (10.0, 0.1)]).unwrap(),
            -1.0,
            epsilon = 1e-14
        );
        assert_eq!(loglog_slope(&[(1.0, 2.0), (10.0, 2.0)]).unwrap(), 0.0);
        // Closed form on the log pairs (0, 0), (ln 2, ln 0.52), (ln 4, ln 0.26).
        let (a, b) = (2f64.ln(), 4f64.ln());
        let (p, q) = (0.52f64.ln(), 0.26f64.ln());
        let mx = (a + b) / 3.0;
        let my = (p + q) / 3.0;
        let expected = ((0.0 - mx) * (0.0 - my) + (a - mx) * (p - my) + (b - mx) * (q - my))
            / ((0.0 - mx).powi(2) + (a - mx).powi(2) + (b - mx).powi(2));
        let got = loglog_slope(&[(1.0, 1.0), (2.0, 0.52), (4.0, 0.26)]).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        assert_relative_eq!(got, -0.9717082358, epsilon = 1e-9);
    }

    #[test]
    fn slope_rejects_bad_input() {
        assert!(loglog_slope(&[(1.0, 1.0)]).is_err());
        assert!(loglog_slope(&[(1.0, 0.0), (2.0, 1.0)]).is_err());
        assert!(loglog_slope(&[(-1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn slope_invariant_to_y_scaling() {
        let pts = [(5.0, 0.3), (10.0, 0.17), (20.0, 0.08), (40.0, 0.05)];
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x, 7.5 * y)).collect();
        assert_relative_eq!(
            loglog_slope(&pts).unwrap(),
            loglog_slope(&scaled).unwrap(),
            max_relative = 1e-12
        );
    }
}
