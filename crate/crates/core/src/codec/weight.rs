use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// `N x N` receive combining matrix: unit diagonal, off-diagonals in `[1/2, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    size: usize,
    entries: DMatrix<f64>,
}

const MAX_COND: f64 = 1e12;

impl WeightMatrix {
    pub fn identity(size: usize) -> Self {
        WeightMatrix {
            size,
            entries: DMatrix::identity(size, size),
        }
    }

    /// Row-major entries; validates the shape, diagonal, range and conditioning.
    pub fn from_rows(size: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != size * size {
            return Err(Error::Dimension(format!(
                "{} entries for a {size}x{size} matrix",
                rows.len()
            )));
        }
        let entries = DMatrix::from_row_slice(size, size, rows);
        for r in 0..size {
            for c in 0..size {
                let v = entries[(r, c)];
                let ok = if r == c { v == 1.0 } else { (0.5..=1.0).contains(&v) };
                if !ok {
                    return Err(Error::InvalidConfig(format!("weight entry ({r},{c}) = {v}")));
                }
            }
        }
        let w = WeightMatrix { size, entries };
        let cond = w.condition_number();
        if cond.is_nan() || cond >= MAX_COND {
            return Err(Error::Degenerate("weight matrix is numerically singular".into()));
        }
        Ok(w)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[(r, c)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.entries.singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.size)
            .map(|r| (0..self.size).map(|c| self.entries[(r, c)] * v[c]).sum())
            .collect()
    }

    /// `(W W^T)^{-1}`, the metric that undoes the noise coloring of `W`.
    pub fn gram_inverse(&self) -> DMatrix<f64> {
        let gram = &self.entries * self.entries.transpose();
        gram.try_inverse()
            .expect("weight matrix checked invertible at construction")
    }
}

/// Draws `W` with i.i.d. uniform off-diagonals. Deterministic per seed.
pub fn sample_w(size: usize, seed: u64) -> Result<WeightMatrix> {
    if size == 0 {
        return Err(Error::InvalidConfig("N must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..64 {
        let rows: Vec<f64> = (0..size * size)
            .map(|i| {
                if i / size == i % size {
                    1.0
                } else {
                    rng.random_range(0.5..=1.0)
                }
            })
            .collect();
        match WeightMatrix::from_rows(size, &rows) {
            Ok(w) => return Ok(w),
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Degenerate(format!(
        "no invertible {size}x{size} weight matrix after 64 draws"
    )))
}
