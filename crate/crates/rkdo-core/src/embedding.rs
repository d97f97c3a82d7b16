//! Embedding tables: the n x d coordinate matrices the kernel field is
//! computed from, plus the unit-sphere projection used after every optimizer
//! step.

use crate::error::{Error, Result};
use crate::io;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::path::Path;

/// An n x d matrix of point coordinates, stored row-major. All entries are
/// finite; beyond that the table makes no normalization promise, callers that
/// need unit rows apply [`EmbeddingTable::project_to_unit_sphere`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    n: usize,
    d: usize,
    coords: Vec<f64>,
}

impl EmbeddingTable {
    pub fn from_rows(n: usize, d: usize, coords: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid(format!(
                "embedding table needs positive dimensions, got {n}x{d}"
            )));
        }
        if coords.len() != n * d {
            return Err(Error::invalid(format!(
                "expected {} coordinates for a {n}x{d} table, got {}",
                n * d,
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite coordinate at flat index {bad}"
            )));
        }
        Ok(EmbeddingTable { n, d, coords })
    }

    /// Rows drawn from a standard Gaussian and projected to the unit sphere.
    pub fn random_unit(n: usize, d: usize, rng: &mut impl Rng) -> Result<Self> {
        let coords: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(rng)).collect();
        let mut table = EmbeddingTable::from_rows(n, d, coords)?;
        table.project_to_unit_sphere()?;
        Ok(table)
    }

    /// Rows drawn from a standard Gaussian, left unnormalized.
    pub fn random_gaussian(n: usize, d: usize, rng: &mut impl Rng) -> Result<Self> {
        let coords: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(rng)).collect();
        EmbeddingTable::from_rows(n, d, coords)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn coords_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_flat_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    /// Dot product of rows `i` and `j`, summed left to right.
    pub fn dot(&self, i: usize, j: usize) -> f64 {
        let a = self.row(i);
        let b = self.row(j);
        let mut acc = 0.0;
        for k in 0..self.d {
            acc += a[k] * b[k];
        }
        acc
    }

    /// Rescales every row to unit L2 norm. A row of (near-)zero norm has no
    /// direction to keep and is rejected.
    pub fn project_to_unit_sphere(&mut self) -> Result<()> {
        for i in 0..self.n {
            let row = &mut self.coords[i * self.d..(i + 1) * self.d];
            let mut sq = 0.0;
            for &v in row.iter() {
                sq += v * v;
            }
            let norm = sq.sqrt();
            if norm < 1e-300 {
                return Err(Error::invalid(format!(
                    "row {i} has zero norm; cannot project to the unit sphere"
                )));
            }
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
        Ok(())
    }

    /// Largest absolute coordinate difference between two tables.
    pub fn max_abs_diff(&self, other: &EmbeddingTable) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Serializes as the shared text matrix format (`n d` header, one row per
    /// line, 17 significant digits).
    pub fn to_text(&self) -> String {
        io::matrix_to_text(self.n, self.d, &self.coords)
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        io::atomic_write(path, self.to_text().as_bytes())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (n, d, coords) = io::matrix_from_text(text)?;
        EmbeddingTable::from_rows(n, d, coords)
    }

    pub fn read_text(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        EmbeddingTable::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamPurpose};

    #[test]
    fn projection_normalizes_rows() {
        let mut e = EmbeddingTable::from_rows(2, 3, vec![3.0, 4.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        e.project_to_unit_sphere().unwrap();
        assert!((e.row(0)[0] - 0.6).abs() < 1e-15);
        assert!((e.row(0)[1] - 0.8).abs() < 1e-15);
        assert_eq!(e.row(1), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn projection_rejects_zero_rows() {
        let mut e = EmbeddingTable::from_rows(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(e.project_to_unit_sphere().is_err());
    }

    #[test]
    fn random_unit_rows_have_unit_norm() {
        let mut rng = substream(42, StreamPurpose::Init);
        let e = EmbeddingTable::random_unit(10, 4, &mut rng).unwrap();
        for i in 0..10 {
            let norm: f64 = e.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn from_rows_validates() {
        assert!(EmbeddingTable::from_rows(2, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(EmbeddingTable::from_rows(1, 2, vec![f64::NAN, 0.0]).is_err());
        assert!(EmbeddingTable::from_rows(0, 2, vec![]).is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut rng = substream(7, StreamPurpose::Init);
        let e = EmbeddingTable::random_unit(5, 3, &mut rng).unwrap();
        let back = EmbeddingTable::from_text(&e.to_text()).unwrap();
        assert_eq!(e, back);
    }

    #[test]
    fn dot_is_plain_left_to_right_sum() {
        let e = EmbeddingTable::from_rows(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(e.dot(0, 1), 1.0 * 4.0 + 2.0 * 5.0 + 3.0 * 6.0);
    }
}
