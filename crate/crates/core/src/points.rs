use serde::{Deserialize, Serialize};

use crate::error::{check_dim, BlobError, Result};

/// A finite set of points in `R^dim`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(BlobError::arg("point dimension must be at least 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(BlobError::arg(format!(
                "{} coordinates do not split into points of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| BlobError::arg("empty point list"))?;
        let mut data = Vec::with_capacity(dim * rows.len());
        for r in rows {
            check_dim(dim, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        Self::new(dim, data)
    }

    /// Points on the real line.
    pub fn from_scalars(values: &[f64]) -> Self {
        Self {
            dim: 1,
            data: values.to_vec(),
        }
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; n * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.iter() {
            for (a, b) in m.iter_mut().zip(p) {
                *a += b;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Concatenate coordinates point-wise: `(a_i, b_i)`.
    pub fn concat(&self, other: &PointCloud) -> Result<PointCloud> {
        if self.len() != other.len() {
            return Err(BlobError::arg(format!(
                "cannot pair {} points with {} points",
                self.len(),
                other.len()
            )));
        }
        let dim = self.dim + other.dim;
        let mut data = Vec::with_capacity(dim * self.len());
        for (a, b) in self.iter().zip(other.iter()) {
            data.extend_from_slice(a);
            data.extend_from_slice(b);
        }
        Ok(PointCloud { dim, data })
    }

    pub fn translated(&self, shift: &[f64]) -> PointCloud {
        let mut out = self.clone();
        for p in out.data.chunks_exact_mut(self.dim) {
            for (x, s) in p.iter_mut().zip(shift) {
                *x += s;
            }
        }
        out
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_pairs_rows() {
        let a = PointCloud::from_scalars(&[1.0, 2.0]);
        let b = PointCloud::from_scalars(&[-1.0, -2.0]);
        let c = a.concat(&b).unwrap();
        assert_eq!(c.dim(), 2);
        assert_eq!(c.point(1), &[2.0, -2.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows = vec![vec![0.0, 1.0], vec![2.0]];
        assert!(PointCloud::from_rows(&rows).is_err());
    }

    #[test]
    fn mean_of_points() {
        let p = PointCloud::from_rows(&[[0.0, 0.0], [2.0, 4.0]]).unwrap();
        assert_eq!(p.mean(), vec![1.0, 2.0]);
    }
}
