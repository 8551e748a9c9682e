use rand::Rng;

use crate::directions::DirectionTable;
use crate::error::{Error, Result};

/// Integer symbols of one user, laid out antenna-major, then stream, then
/// direction: entry `(t, l, i)` sits at `(t * streams + l) * dim + i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolVector {
    tx: usize,
    streams: usize,
    dim: usize,
    values: Vec<i64>,
}

impl SymbolVector {
    pub fn new(tx: usize, streams: usize, dim: usize, values: Vec<i64>) -> Result<Self> {
        if values.len() != tx * streams * dim {
            return Err(Error::Dimension(format!(
                "{} symbols for M={tx}, streams={streams}, D={dim}",
                values.len()
            )));
        }
        Ok(SymbolVector {
            tx,
            streams,
            dim,
            values,
        })
    }

    pub fn zeros(tx: usize, streams: usize, dim: usize) -> Self {
        SymbolVector {
            tx,
            streams,
            dim,
            values: vec![0; tx * streams * dim],
        }
    }

    /// Uniform symbols in `[-q, q]`.
    pub fn random<R: Rng + ?Sized>(tx: usize, streams: usize, dim: usize, q: u32, rng: &mut R) -> Self {
        let q = q as i64;
        let values = (0..tx * streams * dim).map(|_| rng.random_range(-q..=q)).collect();
        SymbolVector {
            tx,
            streams,
            dim,
            values,
        }
    }

    pub fn tx(&self) -> usize {
        self.tx
    }

    pub fn streams(&self) -> usize {
        self.streams
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, t: usize, l: usize, i: usize) -> i64 {
        self.values[(t * self.streams + l) * self.dim + i]
    }

    pub fn check_bound(&self, q: u32) -> Result<()> {
        let bound = q as i64;
        match self.values.iter().find(|v| v.abs() > bound) {
            Some(&value) => Err(Error::SymbolOutOfRange { value, bound }),
            None => Ok(()),
        }
    }
}

/// `x_t = lambda * sum_l delta_l * sum_i T_{l,i} u_{t,l,i}` for every antenna.
pub fn encode(u: &SymbolVector, tables: &[DirectionTable], lambda: f64, q: u32) -> Result<Vec<f64>> {
    u.check_bound(q)?;
    if tables.len() < u.streams {
        return Err(Error::Dimension(format!(
            "{} direction tables for {} streams",
            tables.len(),
            u.streams
        )));
    }
    if let Some(t) = tables.iter().take(u.streams).find(|t| t.len() != u.dim) {
        return Err(Error::Dimension(format!(
            "table has {} directions, symbols use {}",
            t.len(),
            u.dim
        )));
    }
    Ok((0..u.tx)
        .map(|t| {
            let mut acc = 0.0;
            for (l, table) in tables.iter().take(u.streams).enumerate() {
                let s: f64 = table
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * u.get(t, l, i) as f64)
                    .sum();
                acc += table.delta() * s;
            }
            lambda * acc
        })
        .collect())
}
