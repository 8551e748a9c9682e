//! Empirical separation probe for the receive constellation.
//!
//! For a real `m x d` matrix `A` and a box bound `Q` this finds (or bounds)
//! `min ||A q||_inf` over nonzero integer `q` with `||q||_inf <= Q`, then
//! fits how that minimum decays as `Q` grows. Generic channels are expected
//! to decay no faster than a power law with exponent about `-(D + D')`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::least_squares_slope;

pub const EXACT_CAP: u64 = 100_000_000;

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(RealMatrix { rows, cols, data })
    }

    pub fn row_vector(data: Vec<f64>) -> Result<Self> {
        let cols = data.len();
        Self::new(1, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `||A q||_inf`
    pub fn image_norm(&self, q: &[i64]) -> f64 {
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(q)
                    .map(|(a, &b)| a * b as f64)
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    Exhaustive,
    MeetInMiddle,
    RandomSample,
}

impl SearchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchMode::Exhaustive => "exhaustive",
            SearchMode::MeetInMiddle => "meet-in-middle",
            SearchMode::RandomSample => "random-sample",
        }
    }
}

impl std::str::FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(SearchMode::Exhaustive),
            "meet-in-middle" | "mitm" => Ok(SearchMode::MeetInMiddle),
            "random-sample" | "sample" => Ok(SearchMode::RandomSample),
            other => Err(Error::InvalidConfig(format!("unknown search mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRecord {
    pub q: u32,
    pub d_min: f64,
    pub argmin: Vec<i64>,
    /// `false` when the value is only an upper bound on the true minimum.
    pub exact: bool,
    pub mode: SearchMode,
}

impl DistanceRecord {
    /// A nonzero `q` with `A q = 0`: the entries of `A` are rationally dependent.
    pub fn is_degenerate(&self) -> bool {
        self.d_min == 0.0
    }
}

fn box_size(q: u32, dim: usize) -> Option<u64> {
    (2 * q as u64 + 1).checked_pow(dim as u32)
}

fn check_q(q: u32) -> Result<()> {
    if q == 0 {
        return Err(Error::InvalidConfig("Q must be at least 1".into()));
    }
    Ok(())
}

/// Exact minimum over the box by enumerating the half-space whose first
/// nonzero coordinate is positive (`q` and `-q` have the same image norm).
/// Ties go to the lexicographically smallest `q`.
pub fn min_distance_exact(a: &RealMatrix, q: u32) -> Result<DistanceRecord> {
    check_q(q)?;
    match box_size(q, a.cols) {
        Some(size) if size <= EXACT_CAP => {}
        _ => {
            let size = num_bigint::BigUint::from(2 * q as u64 + 1).pow(a.cols as u32);
            return Err(Error::EnumerationInfeasible {
                count: size.to_string(),
                cap: EXACT_CAP,
            });
        }
    }
    let columns: Vec<Vec<f64>> = (0..a.cols).map(|c| a.column(c)).collect();
    let qi = q as i64;
    // one task per (pivot, leading value)
    let tasks: Vec<(usize, i64)> = (0..a.cols).flat_map(|p| (1..=qi).map(move |v| (p, v))).collect();
    let best = tasks
        .par_iter()
        .map(|&(pivot, lead)| {
            let mut digits = vec![0i64; a.cols];
            digits[pivot] = lead;
            let partial: Vec<f64> = columns[pivot].iter().map(|c| c * lead as f64).collect();
            let mut best = Best::new();
            search(&columns, qi, pivot + 1, &mut digits, &partial, &mut best);
            best
        })
        .reduce(Best::new, Best::merge);
    Ok(DistanceRecord {
        q,
        d_min: best.value,
        argmin: best.q,
        exact: true,
        mode: SearchMode::Exhaustive,
    })
}

#[derive(Debug, Clone)]
struct Best {
    value: f64,
    q: Vec<i64>,
}

impl Best {
    fn new() -> Self {
        Best {
            value: f64::INFINITY,
            q: Vec::new(),
        }
    }

    fn offer(&mut self, value: f64, q: &[i64]) {
        if value < self.value || (value == self.value && q < self.q.as_slice()) {
            self.value = value;
            self.q = q.to_vec();
        }
    }

    fn merge(mut self, other: Best) -> Best {
        if !other.q.is_empty() {
            self.offer(other.value, &other.q);
        }
        self
    }
}

fn search(columns: &[Vec<f64>], q: i64, depth: usize, digits: &mut [i64], partial: &[f64], best: &mut Best) {
    if depth == columns.len() {
        let norm = partial.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        best.offer(norm, digits);
        return;
    }
    let col = &columns[depth];
    let mut next = partial.to_vec();
    for v in -q..=q {
        digits[depth] = v;
        for ((n, p), c) in next.iter_mut().zip(partial).zip(col) {
            *n = p + c * v as f64;
        }
        search(columns, q, depth + 1, digits, &next, best);
    }
    digits[depth] = 0;
}

fn canonical_sign(mut q: Vec<i64>) -> Vec<i64> {
    if q.iter().find(|&&v| v != 0).is_some_and(|&v| v < 0) {
        q.iter_mut().for_each(|v| *v = -*v);
    }
    q
}

/// Exact minimum for single-row matrices by sorting the two half-sums.
pub fn min_distance_meet_in_middle(a: &RealMatrix, q: u32) -> Result<DistanceRecord> {
    check_q(q)?;
    if a.rows != 1 {
        return Err(Error::InvalidConfig(format!(
            "meet-in-middle search needs a single-row matrix, got {} rows",
            a.rows
        )));
    }
    let split = a.cols / 2;
    let (left_cols, right_cols) = (&a.data[..split], &a.data[split..]);
    for part in [left_cols.len(), right_cols.len()] {
        if box_size(q, part).is_none_or(|s| s > EXACT_CAP) {
            return Err(Error::EnumerationInfeasible {
                count: num_bigint::BigUint::from(2 * q as u64 + 1).pow(part as u32).to_string(),
                cap: EXACT_CAP,
            });
        }
    }
    let left = half_sums(left_cols, q);
    let mut right = half_sums(right_cols, q);
    right.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(&y.1)));
    let is_zero = |v: &[i64]| v.iter().all(|&d| d == 0);

    let mut best: Option<(f64, Vec<i64>)> = None;
    for (sl, ql) in &left {
        let left_zero = is_zero(ql);
        let target = -sl;
        let pos = right.partition_point(|(v, _)| *v < target);
        for (sr, qr) in &right[pos.saturating_sub(2)..(pos + 2).min(right.len())] {
            if left_zero && is_zero(qr) {
                continue;
            }
            let value = (sl + sr).abs();
            let better = match &best {
                None => true,
                Some((b, _)) => value < *b,
            };
            if better {
                let mut full = ql.clone();
                full.extend_from_slice(qr);
                best = Some((value, full));
            }
        }
    }
    let (_, argmin) = best.ok_or_else(|| Error::Degenerate("empty search box".into()))?;
    let argmin = canonical_sign(argmin);
    let d_min = a.image_norm(&argmin);
    Ok(DistanceRecord {
        q,
        d_min,
        argmin,
        exact: true,
        mode: SearchMode::MeetInMiddle,
    })
}

fn half_sums(coeffs: &[f64], q: u32) -> Vec<(f64, Vec<i64>)> {
    let qi = q as i64;
    let count = (2 * q as usize + 1).pow(coeffs.len() as u32);
    let mut digits = vec![-qi; coeffs.len()];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let s: f64 = coeffs.iter().zip(&digits).map(|(c, &d)| c * d as f64).sum();
        out.push((s, digits.clone()));
        for d in digits.iter_mut().rev() {
            if *d < qi {
                *d += 1;
                break;
            }
            *d = -qi;
        }
    }
    out
}

/// Best of `budget` uniformly drawn nonzero `q`; an upper bound on the minimum.
pub fn min_distance_sample(a: &RealMatrix, q: u32, budget: u64, seed: u64) -> Result<DistanceRecord> {
    check_q(q)?;
    if budget == 0 {
        return Err(Error::InvalidConfig("sample budget must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qi = q as i64;
    let mut best = Best::new();
    let mut cand = vec![0i64; a.cols];
    let mut drawn = 0;
    while drawn < budget {
        cand.iter_mut().for_each(|v| *v = rng.random_range(-qi..=qi));
        if cand.iter().all(|&v| v == 0) {
            continue;
        }
        drawn += 1;
        let c = canonical_sign(cand.clone());
        best.offer(a.image_norm(&c), &c);
    }
    Ok(DistanceRecord {
        q,
        d_min: best.value,
        argmin: best.q,
        exact: false,
        mode: SearchMode::RandomSample,
    })
}

pub fn min_distance(a: &RealMatrix, q: u32, mode: SearchMode, budget: u64, seed: u64) -> Result<DistanceRecord> {
    match mode {
        SearchMode::Exhaustive => min_distance_exact(a, q),
        SearchMode::MeetInMiddle => min_distance_meet_in_middle(a, q),
        SearchMode::RandomSample => min_distance_sample(a, q, budget, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    /// Least-squares slope of `ln d_min` against `ln Q`.
    pub slope: f64,
    /// `min_Q d_min / Q^slope`
    pub beta: f64,
    pub reference_slope: f64,
    pub meets_reference: bool,
    pub points: usize,
}

/// Fits `d_min ~ beta Q^slope` over exact records. With `lambdas`, fits the
/// scaled distances `lambda_i d_min_i` instead.
pub fn fit_distance_exponent(
    records: &[DistanceRecord],
    lambdas: Option<&[f64]>,
    reference_slope: f64,
) -> Result<ExponentFit> {
    if let Some(l) = lambdas {
        if l.len() != records.len() {
            return Err(Error::Dimension(format!(
                "{} lambdas for {} records",
                l.len(),
                records.len()
            )));
        }
    }
    if let Some(r) = records.iter().find(|r| r.is_degenerate()) {
        return Err(Error::Degenerate(format!(
            "zero minimum distance at Q={} (q={:?})",
            r.q, r.argmin
        )));
    }
    let pts: Vec<(f64, f64)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.exact)
        .map(|(i, r)| {
            let scale = lambdas.map_or(1.0, |l| l[i]);
            (r.q as f64, r.d_min * scale)
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "need at least 3 exact records, got {}",
            pts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let slope =
        least_squares_slope(&xs, &ys).ok_or_else(|| Error::Degenerate("Q values must not all be equal".into()))?;
    let beta = pts.iter().map(|(q, d)| d / q.powf(slope)).fold(f64::INFINITY, f64::min);
    Ok(ExponentFit {
        slope,
        beta,
        reference_slope,
        meets_reference: slope >= reference_slope,
        points: pts.len(),
    })
}
