//! Per-receiver structured model and joint-antenna ML decoding.
//!
//! At receiver `j`, antenna `r` sees the desired symbols through row `r` of
//! `H[j][j] (x) T` and all interference through the interference directions
//! `T'` with integer coefficients `u'^r`. Stacking the antennas gives an
//! `N x (M d_j D + N L_j D')` matrix; left-multiplying by `W` gives the
//! matrix used in the separation argument.
//!
//! The coefficients `u'^r` are fixed integer combinations of the interfering
//! users' symbols, routed through the closure map. Decoding therefore runs
//! over the joint transmit hypotheses `(u_1, ..., u_K)`, which spans the same
//! constellation as the free `(u_j, u')` parameterization with far fewer
//! candidates.

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::encode::SymbolVector;
use super::params::ModulationParams;
use super::scheme::SchemeDirections;
use super::weight::WeightMatrix;
use crate::channel::ChannelMatrix;
use crate::directions::CrossLinkCoord;
use crate::error::{Error, Result};

pub const HYPOTHESIS_CAP: u64 = 10_000_000;
const PRECOMPUTE_LIMIT: u64 = 1 << 20;

/// The stacked receive matrix of one receiver and its hypothesis map.
#[derive(Debug, Clone)]
pub struct StructuredModel {
    receiver: usize,
    users: usize,
    tx: usize,
    rx: usize,
    dim: usize,
    d_prime: usize,
    /// `max_{k != j} d_bar_k`
    interference_streams: usize,
    streams: Vec<usize>,
    /// `rx x cols`, row-major, unweighted.
    matrix: Vec<f64>,
    weighted: Vec<f64>,
    /// `rx x symbols`: noiseless point per unit of each transmitted symbol.
    generator: Vec<f64>,
    offsets: Vec<usize>,
    /// `(t, r) -> closure coordinate` per interfering user.
    coord_of: Vec<Vec<usize>>,
    weight: WeightMatrix,
    closure_rows: Vec<Vec<usize>>,
}

impl StructuredModel {
    pub fn build(receiver: usize, h: &ChannelMatrix, dirs: &SchemeDirections, weight: &WeightMatrix) -> Result<Self> {
        let shape = dirs.shape();
        if shape != crate::directions::LinkShape::of(h) {
            return Err(Error::Dimension(
                "direction tables built for another channel shape".into(),
            ));
        }
        if receiver >= shape.users {
            return Err(Error::Dimension(format!("receiver {receiver} out of range")));
        }
        if weight.size() != shape.rx {
            return Err(Error::Dimension(format!(
                "weight matrix is {}x{}, need N={}",
                weight.size(),
                weight.size(),
                shape.rx
            )));
        }
        let (users, tx, rx) = (shape.users, shape.tx, shape.rx);
        let dim = dirs.d();
        let d_prime = dirs.d_prime();
        let streams: Vec<usize> = dirs.plan.streams.iter().map(|&s| s as usize).collect();
        let own = streams[receiver];
        let interference_streams = dirs.plan.max_other(receiver) as usize;
        let desired_cols = tx * own * dim;
        let cols = desired_cols + rx * interference_streams * d_prime;

        let mut matrix = vec![0.0; rx * cols];
        for r in 0..rx {
            let row = &mut matrix[r * cols..(r + 1) * cols];
            for t in 0..tx {
                let hd = h.coeff(receiver, receiver, r, t);
                for l in 0..own {
                    let delta = dirs.delta(l);
                    for (i, v) in dirs.transmit[l].values().iter().enumerate() {
                        row[(t * own + l) * dim + i] = hd * delta * v;
                    }
                }
            }
            for l in 0..interference_streams {
                let start = desired_cols + (r * interference_streams + l) * d_prime;
                row[start..start + d_prime].copy_from_slice(dirs.interference[l].values());
            }
        }
        let weighted = weigh(weight, &matrix, rx, cols);

        let mut offsets = Vec::with_capacity(users + 1);
        let mut acc = 0;
        for &s in &streams {
            offsets.push(acc);
            acc += tx * s * dim;
        }
        offsets.push(acc);

        let coord_of: Vec<Vec<usize>> = (0..users)
            .map(|k| {
                if k == receiver {
                    return Vec::new();
                }
                let mut v = Vec::with_capacity(tx * rx);
                for t in 0..tx {
                    for r in 0..rx {
                        let c = CrossLinkCoord { j: receiver, k, r, t };
                        v.push(shape.coord_index(c).expect("cross link"));
                    }
                }
                v
            })
            .collect();
        let closure_rows = (0..dirs.closure.coord_count())
            .map(|c| dirs.closure.row(c).to_vec())
            .collect();

        let mut model = StructuredModel {
            receiver,
            users,
            tx,
            rx,
            dim,
            d_prime,
            interference_streams,
            streams,
            matrix,
            weighted,
            generator: Vec::new(),
            offsets,
            coord_of,
            weight: weight.clone(),
            closure_rows,
        };
        model.generator = model.build_generator(dirs);
        Ok(model)
    }

    /// Each transmitted symbol's contribution, read off the structured form:
    /// desired columns directly, interfering symbols via their `T'` slot.
    fn build_generator(&self, dirs: &SchemeDirections) -> Vec<f64> {
        let total = self.symbol_count();
        let mut g = vec![0.0; self.rx * total];
        let desired_cols = self.desired_cols();
        let cols = self.cols();
        for k in 0..self.users {
            let s = self.streams[k];
            for t in 0..self.tx {
                for l in 0..s {
                    for i in 0..self.dim {
                        let col = self.offsets[k] + (t * s + l) * self.dim + i;
                        for r in 0..self.rx {
                            g[r * total + col] = if k == self.receiver {
                                self.matrix[r * cols + (t * s + l) * self.dim + i]
                            } else {
                                let c = self.coord_of[k][t * self.rx + r];
                                let target = self.closure_rows[c][i];
                                let start = desired_cols + (r * self.interference_streams + l) * self.d_prime;
                                debug_assert_eq!(
                                    self.matrix[r * cols + start + target],
                                    dirs.interference[l].values()[target]
                                );
                                self.matrix[r * cols + start + target]
                            };
                        }
                    }
                }
            }
        }
        g
    }

    pub fn receiver(&self) -> usize {
        self.receiver
    }

    pub fn rx(&self) -> usize {
        self.rx
    }

    pub fn desired_cols(&self) -> usize {
        self.tx * self.streams[self.receiver] * self.dim
    }

    /// `M d_j D + N L_j D'`
    pub fn cols(&self) -> usize {
        self.desired_cols() + self.rx * self.interference_streams * self.d_prime
    }

    /// Total transmitted symbols over all users.
    pub fn symbol_count(&self) -> usize {
        self.offsets[self.users]
    }

    pub fn user_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn streams(&self, k: usize) -> usize {
        self.streams[k]
    }

    pub fn tx(&self) -> usize {
        self.tx
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self) -> &WeightMatrix {
        &self.weight
    }

    /// Unweighted stacked matrix, row-major `N x cols`.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// `W` times the stacked matrix.
    pub fn weighted_matrix(&self) -> &[f64] {
        &self.weighted
    }

    /// Row-major `N x symbol_count`.
    pub fn generator(&self) -> &[f64] {
        &self.generator
    }

    /// `(K - 1) M Q`: no interference coefficient can exceed this.
    pub fn interference_bound(&self, q: u32) -> i64 {
        ((self.users - 1) * self.tx) as i64 * q as i64
    }

    fn check_hypothesis(&self, symbols: &[SymbolVector]) -> Result<()> {
        if symbols.len() != self.users {
            return Err(Error::Dimension(format!(
                "{} users in hypothesis, K={}",
                symbols.len(),
                self.users
            )));
        }
        for (k, u) in symbols.iter().enumerate() {
            if u.tx() != self.tx || u.streams() != self.streams[k] || u.dim() != self.dim {
                return Err(Error::Dimension(format!(
                    "symbol layout of user {k} does not match the plan"
                )));
            }
        }
        Ok(())
    }

    /// Integer interference coefficients `(u'^1, ..., u'^N)` implied by the
    /// interfering users' symbols.
    pub fn interference_coefficients(&self, symbols: &[SymbolVector]) -> Result<Vec<i64>> {
        self.check_hypothesis(symbols)?;
        let mut out = vec![0i64; self.rx * self.interference_streams * self.d_prime];
        for (k, u) in symbols.iter().enumerate() {
            if k == self.receiver {
                continue;
            }
            for t in 0..self.tx {
                for l in 0..self.streams[k] {
                    for r in 0..self.rx {
                        let row = &self.closure_rows[self.coord_of[k][t * self.rx + r]];
                        let base = (r * self.interference_streams + l) * self.d_prime;
                        for (i, &target) in row.iter().enumerate() {
                            out[base + target] += u.get(t, l, i);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `(u_j, u'^1, ..., u'^N)`
    pub fn full_coefficients(&self, symbols: &[SymbolVector]) -> Result<Vec<i64>> {
        let mut q = symbols
            .get(self.receiver)
            .ok_or_else(|| Error::Dimension("missing receiver symbols".into()))?
            .values()
            .to_vec();
        q.extend(self.interference_coefficients(symbols)?);
        Ok(q)
    }

    /// Stacked matrix times the full coefficient vector (unscaled by lambda).
    pub fn predict_structured(&self, symbols: &[SymbolVector]) -> Result<Vec<f64>> {
        let q = self.full_coefficients(symbols)?;
        Ok(mat_vec(&self.matrix, self.rx, &q))
    }

    /// `W` times [`Self::predict_structured`].
    pub fn predict_weighted(&self, symbols: &[SymbolVector]) -> Result<Vec<f64>> {
        let q = self.full_coefficients(symbols)?;
        Ok(mat_vec(&self.weighted, self.rx, &q))
    }

    /// Noiseless point of a flat joint hypothesis via the generator.
    pub fn point(&self, hypothesis: &[i64]) -> Vec<f64> {
        mat_vec(&self.generator, self.rx, hypothesis)
    }

    pub fn flatten(&self, symbols: &[SymbolVector]) -> Result<Vec<i64>> {
        self.check_hypothesis(symbols)?;
        Ok(symbols.iter().flat_map(|u| u.values().iter().copied()).collect())
    }

    pub fn split(&self, hypothesis: &[i64]) -> Vec<SymbolVector> {
        (0..self.users)
            .map(|k| {
                SymbolVector::new(
                    self.tx,
                    self.streams[k],
                    self.dim,
                    hypothesis[self.user_range(k)].to_vec(),
                )
                .expect("layout from plan")
            })
            .collect()
    }
}

fn weigh(w: &WeightMatrix, m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for s in 0..rows {
            let ws = w.get(r, s);
            for c in 0..cols {
                out[r * cols + c] += ws * m[s * cols + c];
            }
        }
    }
    out
}

fn mat_vec(m: &[f64], rows: usize, v: &[i64]) -> Vec<f64> {
    let cols = v.len();
    debug_assert_eq!(m.len(), rows * cols);
    (0..rows)
        .map(|r| {
            m[r * cols..(r + 1) * cols]
                .iter()
                .zip(v)
                .map(|(a, &b)| a * b as f64)
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Recovered symbols of the intended user.
    pub symbols: SymbolVector,
    /// Full joint argmin hypothesis.
    pub hypothesis: Vec<i64>,
    /// Euclidean distance from the observation to the chosen point.
    pub distance: f64,
    /// Set by the caller once the truth is known.
    pub success: Option<bool>,
}

/// A structured model bound to a constellation `(Q, lambda)` and ready to decode.
#[derive(Debug, Clone)]
pub struct ReceiveModel {
    structured: StructuredModel,
    q: u32,
    lambda: f64,
    count: u64,
    points: Option<Vec<f64>>,
}

/// `(2Q + 1)^{sum_k M d_bar_k D}` joint hypotheses, exactly.
pub fn hypothesis_count(q: u32, symbols: usize) -> BigUint {
    BigUint::from(2 * q as u64 + 1).pow(symbols as u32)
}

pub fn build_receive_model(
    receiver: usize,
    h: &ChannelMatrix,
    dirs: &SchemeDirections,
    weight: &WeightMatrix,
    params: &ModulationParams,
) -> Result<ReceiveModel> {
    let structured = StructuredModel::build(receiver, h, dirs, weight)?;
    ReceiveModel::new(structured, params)
}

impl ReceiveModel {
    pub fn new(structured: StructuredModel, params: &ModulationParams) -> Result<Self> {
        Self::with_cap(structured, params, HYPOTHESIS_CAP)
    }

    pub fn with_cap(structured: StructuredModel, params: &ModulationParams, cap: u64) -> Result<Self> {
        let size = hypothesis_count(params.q, structured.symbol_count());
        let count = match size.to_u64() {
            Some(c) if c <= cap => c,
            _ => {
                return Err(Error::EnumerationInfeasible {
                    count: size.to_string(),
                    cap,
                })
            }
        };
        let mut model = ReceiveModel {
            structured,
            q: params.q,
            lambda: params.lambda,
            count,
            points: None,
        };
        if count <= PRECOMPUTE_LIMIT {
            let mut pts = Vec::with_capacity(count as usize * model.structured.rx);
            model.for_each_hypothesis(|_, p| pts.extend_from_slice(p));
            model.points = Some(pts);
        }
        Ok(model)
    }

    pub fn structured(&self) -> &StructuredModel {
        &self.structured
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn hypothesis_count(&self) -> u64 {
        self.count
    }

    /// Visits every joint hypothesis in lexicographic order with its
    /// unscaled noiseless point.
    fn for_each_hypothesis(&self, mut f: impl FnMut(&[i64], &[f64])) {
        let q = self.q as i64;
        let len = self.structured.symbol_count();
        let mut digits = vec![-q; len];
        for _ in 0..self.count {
            let p = self.structured.point(&digits);
            f(&digits, &p);
            for d in digits.iter_mut().rev() {
                if *d < q {
                    *d += 1;
                    break;
                }
                *d = -q;
            }
        }
    }

    fn digits_of(&self, mut idx: u64) -> Vec<i64> {
        let base = 2 * self.q as u64 + 1;
        let len = self.structured.symbol_count();
        let mut digits = vec![0i64; len];
        for d in digits.iter_mut().rev() {
            *d = (idx % base) as i64 - self.q as i64;
            idx /= base;
        }
        digits
    }

    /// All noiseless points `lambda * p`, row-major `count x N`.
    pub fn constellation(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.count as usize * self.structured.rx);
        match &self.points {
            Some(p) => out.extend(p.iter().map(|v| v * self.lambda)),
            None => self.for_each_hypothesis(|_, p| out.extend(p.iter().map(|v| v * self.lambda))),
        }
        out
    }

    /// Nearest constellation point to `y` in Euclidean distance; ties go
    /// to the lexicographically smallest hypothesis.
    pub fn decode(&self, y: &[f64]) -> Result<DecodeResult> {
        self.check_obs(y)?;
        let lambda = self.lambda;
        let metric = |p: &[f64]| y.iter().zip(p).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>();
        let (best, best_metric) = self.argmin(metric);
        Ok(self.result(best, best_metric.sqrt()))
    }

    /// Nearest point after combining with `W`, under the `(W W^T)^{-1}`
    /// metric. Mathematically identical to [`Self::decode`].
    pub fn decode_weighted(&self, y: &[f64]) -> Result<DecodeResult> {
        self.check_obs(y)?;
        let w = self.structured.weight();
        let n = self.structured.rx;
        let z = w.apply(y);
        let ginv: DMatrix<f64> = w.gram_inverse();
        let lambda = self.lambda;
        let metric = |p: &[f64]| {
            let wp = w.apply(p);
            let v: Vec<f64> = z.iter().zip(&wp).map(|(a, b)| a - lambda * b).collect();
            let mut acc = 0.0;
            for r in 0..n {
                for c in 0..n {
                    acc += v[r] * ginv[(r, c)] * v[c];
                }
            }
            acc
        };
        let (best, best_metric) = self.argmin(metric);
        Ok(self.result(best, best_metric.max(0.0).sqrt()))
    }

    fn check_obs(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.structured.rx {
            return Err(Error::Dimension(format!(
                "observation has {} entries, N={}",
                y.len(),
                self.structured.rx
            )));
        }
        Ok(())
    }

    fn argmin(&self, metric: impl Fn(&[f64]) -> f64) -> (u64, f64) {
        let mut best = 0u64;
        let mut best_metric = f64::INFINITY;
        match &self.points {
            Some(pts) => {
                for (idx, p) in pts.chunks_exact(self.structured.rx).enumerate() {
                    let m = metric(p);
                    if m < best_metric {
                        best_metric = m;
                        best = idx as u64;
                    }
                }
            }
            None => {
                let mut idx = 0u64;
                self.for_each_hypothesis(|_, p| {
                    let m = metric(p);
                    if m < best_metric {
                        best_metric = m;
                        best = idx;
                    }
                    idx += 1;
                });
            }
        }
        (best, best_metric)
    }

    fn result(&self, idx: u64, distance: f64) -> DecodeResult {
        let hypothesis = self.digits_of(idx);
        let j = self.structured.receiver;
        let symbols = self.structured.split(&hypothesis).swap_remove(j);
        DecodeResult {
            symbols,
            hypothesis,
            distance,
            success: None,
        }
    }
}
