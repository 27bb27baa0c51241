//! Gaussian mollifiers and their closed-form cross integrals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, BlobError, Result};
use crate::points::sq_dist;

/// Default exponent in `delta = N^(-k/d)`.
pub const DEFAULT_DELTA_EXPONENT: f64 = 0.99;

/// Isotropic Gaussian kernel `K_delta` on `R^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    delta: f64,
    dim: usize,
}

impl Mollifier {
    pub fn new(delta: f64, dim: usize) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(BlobError::arg(format!(
                "mollifier width must be positive, got {delta}"
            )));
        }
        if dim == 0 {
            return Err(BlobError::arg("mollifier dimension must be at least 1"));
        }
        Ok(Self { delta, dim })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The convolution square root `k_delta = K_{delta/sqrt 2}`, so that
    /// `k_delta * k_delta = K_delta`.
    pub fn sqrt_kernel(&self) -> Mollifier {
        Mollifier {
            delta: self.delta / std::f64::consts::SQRT_2,
            dim: self.dim,
        }
    }

    /// Value at the origin, `(2 pi delta^2)^(-dim/2)`.
    pub fn peak(&self) -> f64 {
        gaussian_norm(self.delta * self.delta, self.dim)
    }

    /// Kernel value as a function of the squared distance.
    #[inline]
    pub fn value_sq(&self, r2: f64) -> f64 {
        self.peak() * (-r2 / (2.0 * self.delta * self.delta)).exp()
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.dim, theta.len())?;
        Ok(self.value_sq(theta.iter().map(|x| x * x).sum()))
    }

    /// `grad K(theta) = -(theta / delta^2) K(theta)`.
    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, theta.len())?;
        let k = self.value_sq(theta.iter().map(|x| x * x).sum());
        let s = -k / (self.delta * self.delta);
        Ok(theta.iter().map(|x| s * x).collect())
    }

    /// `int (K_delta * mu) d nu` for `mu = N(mean_a, var_a I)` and
    /// `nu = N(mean_b, var_b I)`; zero variance means a Dirac mass.
    pub fn gaussian_cross_term(
        &self,
        mean_a: &[f64],
        var_a: f64,
        mean_b: &[f64],
        var_b: f64,
    ) -> Result<f64> {
        check_dim(self.dim, mean_a.len())?;
        check_dim(self.dim, mean_b.len())?;
        if var_a < 0.0 || var_b < 0.0 {
            return Err(BlobError::arg("variances must be nonnegative"));
        }
        let s = var_a + var_b + self.delta * self.delta;
        Ok(gaussian_norm(s, self.dim) * (-sq_dist(mean_a, mean_b) / (2.0 * s)).exp())
    }
}

/// `(2 pi var)^(-dim/2)`.
#[inline]
pub(crate) fn gaussian_norm(var: f64, dim: usize) -> f64 {
    let base = 2.0 * PI * var;
    match dim {
        1 => base.sqrt().recip(),
        2 => base.recip(),
        _ => base.powf(-(dim as f64) / 2.0),
    }
}

/// `delta = n^(-k/dim)`.
pub fn delta_from_n(n_particles: usize, dim: usize, exponent_k: f64) -> Result<f64> {
    if n_particles == 0 || dim == 0 {
        return Err(BlobError::arg(
            "particle count and dimension must be positive",
        ));
    }
    Ok((n_particles as f64).powf(-exponent_k / dim as f64))
}
