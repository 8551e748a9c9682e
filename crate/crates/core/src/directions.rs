//! Monomial transmit directions and the alignment closure.
//!
//! A direction is a monomial in the cross-link coefficients
//! `h_{j,k,r,t}` (`k != j`). The transmit set uses exponents in `[0, n-1]`,
//! the interference set exponents in `[0, n]`. Multiplying any transmit
//! direction by a cross-link coefficient bumps one exponent by one, which
//! lands inside the interference set: that is the whole alignment argument,
//! and it is checked here with integer exponent vectors rather than floats.
//!
//! Coordinates are ordered lexicographically on `(j, k, r, t)` and tables
//! are ordered lexicographically on exponent vectors, first coordinate most
//! significant.

use std::fmt;
use std::io::Write;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_TABLE_CAP: u64 = 1_000_000;

/// `(K, M, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkShape {
    pub users: usize,
    pub tx: usize,
    pub rx: usize,
}

impl LinkShape {
    pub fn new(users: usize, tx: usize, rx: usize) -> Self {
        LinkShape { users, tx, rx }
    }

    pub fn of(h: &ChannelMatrix) -> Self {
        LinkShape {
            users: h.users(),
            tx: h.tx_antennas(),
            rx: h.rx_antennas(),
        }
    }

    /// `K (K - 1) N M`, the number of cross-link coefficients.
    pub fn coord_count(&self) -> usize {
        self.users * (self.users - 1) * self.rx * self.tx
    }

    pub fn coords(&self) -> Vec<CrossLinkCoord> {
        let mut out = Vec::with_capacity(self.coord_count());
        for j in 0..self.users {
            for k in (0..self.users).filter(|&k| k != j) {
                for r in 0..self.rx {
                    for t in 0..self.tx {
                        out.push(CrossLinkCoord { j, k, r, t });
                    }
                }
            }
        }
        out
    }

    /// Position of `c` in the coordinate order, `None` for direct links.
    pub fn coord_index(&self, c: CrossLinkCoord) -> Option<usize> {
        if c.j == c.k || c.j >= self.users || c.k >= self.users || c.r >= self.rx || c.t >= self.tx {
            return None;
        }
        let k_slot = if c.k < c.j { c.k } else { c.k - 1 };
        Some(((c.j * (self.users - 1) + k_slot) * self.rx + c.r) * self.tx + c.t)
    }
}

/// Zero-based `(j, k, r, t)` with `k != j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CrossLinkCoord {
    pub j: usize,
    pub k: usize,
    pub r: usize,
    pub t: usize,
}

impl CrossLinkCoord {
    pub fn coeff(&self, h: &ChannelMatrix) -> f64 {
        h.coeff(self.j, self.k, self.r, self.t)
    }
}

impl fmt::Display for CrossLinkCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.j + 1, self.k + 1, self.r + 1, self.t + 1)
    }
}

/// Exponents indexed by cross-link coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExponentVector(pub Vec<u32>);

impl ExponentVector {
    pub fn zeros(len: usize) -> Self {
        ExponentVector(vec![0; len])
    }

    pub fn unit(len: usize, at: usize) -> Self {
        let mut v = vec![0; len];
        v[at] = 1;
        ExponentVector(v)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Lexicographic rank among all vectors with entries in `[0, base)`.
    pub fn rank(&self, base: u32) -> Option<usize> {
        rank(&self.0, base)
    }
}

impl std::ops::Add for &ExponentVector {
    type Output = ExponentVector;

    fn add(self, rhs: &ExponentVector) -> ExponentVector {
        ExponentVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Display for ExponentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        f.write_str(&parts.join(":"))
    }
}

fn rank(exps: &[u32], base: u32) -> Option<usize> {
    let mut idx: usize = 0;
    for &e in exps {
        if e >= base {
            return None;
        }
        idx = idx.checked_mul(base as usize)?.checked_add(e as usize)?;
    }
    Some(idx)
}

/// `(bound + 1)^coords`, exactly.
pub fn table_size(shape: LinkShape, bound: u32) -> BigUint {
    BigUint::from(bound + 1).pow(shape.coord_count() as u32)
}

/// `D = n^{K(K-1)NM}`.
pub fn transmit_count(shape: LinkShape, n: u32) -> BigUint {
    BigUint::from(n).pow(shape.coord_count() as u32)
}

/// `D' = (n+1)^{K(K-1)NM}`.
pub fn interference_count(shape: LinkShape, n: u32) -> BigUint {
    BigUint::from(n + 1).pow(shape.coord_count() as u32)
}

/// Every exponent vector with entries in `[0, bound]`, lexicographic, flattened.
pub fn enumerate_exponents(shape: LinkShape, bound: u32, cap: u64) -> Result<Vec<u32>> {
    let size = table_size(shape, bound);
    let count = match size.to_u64() {
        Some(c) if c <= cap => c as usize,
        _ => {
            return Err(Error::TableTooLarge {
                count: size.to_string(),
                cap,
            })
        }
    };
    let width = shape.coord_count();
    let mut out = Vec::with_capacity(count * width);
    let mut cur = vec![0u32; width];
    for _ in 0..count {
        out.extend_from_slice(&cur);
        for slot in cur.iter_mut().rev() {
            if *slot < bound {
                *slot += 1;
                break;
            }
            *slot = 0;
        }
    }
    Ok(out)
}

/// `prod_c h_c^{e_c}` by balanced pairwise multiplication.
pub fn evaluate_direction(exps: &[u32], h: &ChannelMatrix) -> Result<f64> {
    let shape = LinkShape::of(h);
    let coords = shape.coords();
    if exps.len() != coords.len() {
        return Err(Error::Dimension(format!(
            "exponent vector has {} entries, expected {}",
            exps.len(),
            coords.len()
        )));
    }
    evaluate_with(exps, &coeff_list(h, &coords))
}

fn coeff_list(h: &ChannelMatrix, coords: &[CrossLinkCoord]) -> Vec<f64> {
    coords.iter().map(|c| c.coeff(h)).collect()
}

fn evaluate_with(exps: &[u32], coeffs: &[f64]) -> Result<f64> {
    let mut factors: Vec<f64> = exps
        .iter()
        .zip(coeffs)
        .filter(|(&e, _)| e > 0)
        .map(|(&e, &c)| c.powi(e as i32))
        .collect();
    let value = balanced_product(&mut factors);
    if !value.is_normal() {
        return Err(Error::NumericRange(format!(
            "direction value {value} is not a normal float"
        )));
    }
    Ok(value)
}

fn balanced_product(factors: &mut Vec<f64>) -> f64 {
    if factors.is_empty() {
        return 1.0;
    }
    while factors.len() > 1 {
        let next: Vec<f64> = factors
            .chunks(2)
            .map(|p| if p.len() == 2 { p[0] * p[1] } else { p[0] })
            .collect();
        *factors = next;
    }
    factors[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// Transmit set, exponents in `[0, n-1]`.
    Transmit,
    /// Interference set, exponents in `[0, n]`.
    Interference,
    /// Transmit set of stream `l`, coefficients scaled by `delta_l`.
    TransmitStream(usize),
    /// Interference set of stream `l`.
    InterferenceStream(usize),
}

impl TableKind {
    pub fn is_interference(self) -> bool {
        matches!(self, TableKind::Interference | TableKind::InterferenceStream(_))
    }
}

/// An ordered direction set evaluated on one channel. Immutable.
#[derive(Debug, Clone)]
pub struct DirectionTable {
    shape: LinkShape,
    kind: TableKind,
    bound: u32,
    delta: f64,
    exps: Vec<u32>,
    values: Vec<f64>,
}

impl DirectionTable {
    /// Evaluates every monomial with exponents in `[0, bound]` on `h`,
    /// each scaled by `delta^degree`.
    pub fn build(h: &ChannelMatrix, kind: TableKind, bound: u32, delta: f64, cap: u64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "stream constant {delta} must be positive"
            )));
        }
        let shape = LinkShape::of(h);
        let exps = enumerate_exponents(shape, bound, cap)?;
        let coeffs = coeff_list(h, &shape.coords());
        let width = shape.coord_count();
        let values = exps
            .chunks(width)
            .map(|e| {
                let v = evaluate_with(e, &coeffs)?;
                let degree: u32 = e.iter().sum();
                let scaled = v * delta.powi(degree as i32);
                if scaled.is_normal() {
                    Ok(scaled)
                } else {
                    Err(Error::NumericRange(format!("scaled direction {scaled} not normal")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DirectionTable {
            shape,
            kind,
            bound,
            delta,
            exps,
            values,
        })
    }

    pub fn shape(&self) -> LinkShape {
        self.shape
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    /// Largest exponent allowed in this table.
    pub fn bound(&self) -> u32 {
        self.bound
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exponents(&self, i: usize) -> &[u32] {
        let w = self.shape.coord_count();
        &self.exps[i * w..(i + 1) * w]
    }

    pub fn exponent_vector(&self, i: usize) -> ExponentVector {
        ExponentVector(self.exponents(i).to_vec())
    }

    /// Index of `exps` in this table.
    pub fn index_of(&self, exps: &[u32]) -> Option<usize> {
        if exps.len() != self.shape.coord_count() {
            return None;
        }
        rank(exps, self.bound + 1)
    }

    /// CSV with columns `index,exponents,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "exponents", "value"])?;
        for i in 0..self.len() {
            w.write_record([
                i.to_string(),
                self.exponent_vector(i).to_string(),
                format!("{:e}", self.values[i]),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn check_bound(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfig("exponent bound n must be at least 1".into()));
    }
    Ok(())
}

/// Transmit directions `T`: exponents in `[0, n-1]`, `n^{K(K-1)NM}` entries.
pub fn enumerate_t(h: &ChannelMatrix, n: u32) -> Result<DirectionTable> {
    check_bound(n)?;
    DirectionTable::build(h, TableKind::Transmit, n - 1, 1.0, DEFAULT_TABLE_CAP)
}

/// Interference directions `T'`: exponents in `[0, n]`, `(n+1)^{K(K-1)NM}` entries.
pub fn enumerate_tprime(h: &ChannelMatrix, n: u32) -> Result<DirectionTable> {
    check_bound(n)?;
    DirectionTable::build(h, TableKind::Interference, n, 1.0, DEFAULT_TABLE_CAP)
}

/// Transmit directions of stream `l`: monomials in `h * delta`.
pub fn stream_directions(l: usize, delta: f64, h: &ChannelMatrix, n: u32) -> Result<DirectionTable> {
    check_bound(n)?;
    check_delta(delta)?;
    DirectionTable::build(h, TableKind::TransmitStream(l), n - 1, delta, DEFAULT_TABLE_CAP)
}

/// Interference directions of stream `l`.
pub fn stream_interference_directions(l: usize, delta: f64, h: &ChannelMatrix, n: u32) -> Result<DirectionTable> {
    check_bound(n)?;
    check_delta(delta)?;
    DirectionTable::build(h, TableKind::InterferenceStream(l), n, delta, DEFAULT_TABLE_CAP)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.5..=1.0).contains(&delta) {
        return Err(Error::InvalidConfig(format!("stream constant {delta} not in [1/2, 1]")));
    }
    Ok(())
}

/// Stream separation constants `delta_l`, one per stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamDirectionParams {
    pub deltas: Vec<f64>,
}

impl StreamDirectionParams {
    /// One stream with `delta = 1`: the plain single-stream construction.
    pub fn single() -> Self {
        StreamDirectionParams { deltas: vec![1.0] }
    }

    /// `count` pairwise-distinct constants drawn uniformly from `[1/2, 1]`.
    /// A single stream always gets `delta = 1`.
    pub fn sample(count: usize, seed: u64) -> Self {
        if count <= 1 {
            return Self::single();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut deltas: Vec<f64> = Vec::with_capacity(count);
        while deltas.len() < count {
            let d = rng.random_range(0.5..=1.0);
            if !deltas.contains(&d) {
                deltas.push(d);
            }
        }
        StreamDirectionParams { deltas }
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }
}

/// `sigma(c, i)`: index in `T'` of `h_c * T[i]`.
#[derive(Debug, Clone)]
pub struct ClosureMap {
    coords: usize,
    sources: usize,
    targets: Vec<usize>,
}

impl ClosureMap {
    pub fn get(&self, coord: usize, i: usize) -> usize {
        self.targets[coord * self.sources + i]
    }

    pub fn coord_count(&self) -> usize {
        self.coords
    }

    pub fn source_len(&self) -> usize {
        self.sources
    }

    /// All targets for one coordinate, indexed by source.
    pub fn row(&self, coord: usize) -> &[usize] {
        &self.targets[coord * self.sources..(coord + 1) * self.sources]
    }
}

/// Builds `sigma` by exact exponent addition.
pub fn build_closure_map(t: &DirectionTable, tp: &DirectionTable) -> Result<ClosureMap> {
    if t.shape != tp.shape {
        return Err(Error::Closure(format!(
            "shape mismatch {:?} vs {:?}",
            t.shape, tp.shape
        )));
    }
    if tp.bound != t.bound + 1 {
        return Err(Error::Closure(format!(
            "interference bound {} must be transmit bound {} plus one",
            tp.bound, t.bound
        )));
    }
    let coords = t.shape.coord_count();
    let mut targets = Vec::with_capacity(coords * t.len());
    let mut buf = vec![0u32; coords];
    for c in 0..coords {
        for i in 0..t.len() {
            buf.copy_from_slice(t.exponents(i));
            buf[c] += 1;
            let idx = tp
                .index_of(&buf)
                .filter(|&idx| idx < tp.len() && tp.exponents(idx) == buf.as_slice())
                .ok_or_else(|| Error::Closure(format!("no target for coordinate {c}, source {i}")))?;
            targets.push(idx);
        }
    }
    Ok(ClosureMap {
        coords,
        sources: t.len(),
        targets,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    /// Number of (coordinate, direction) pairs checked.
    pub checked: usize,
    /// Pairs whose product is not in `T'` by exponent vector.
    pub membership_failures: usize,
    pub max_rel_deviation: f64,
    pub tolerance: f64,
}

impl AlignmentReport {
    pub fn passed(&self) -> bool {
        self.membership_failures == 0 && self.max_rel_deviation <= self.tolerance
    }
}

pub const ALIGNMENT_TOLERANCE: f64 = 1e-10;

/// Confirms every cross-link product `h_c * delta * T[i]` lies in `T'`.
pub fn verify_alignment(t: &DirectionTable, tp: &DirectionTable, h: &ChannelMatrix) -> Result<AlignmentReport> {
    let map = build_closure_map(t, tp)?;
    Ok(verify_with_map(t, tp, &map, h))
}

pub fn verify_with_map(
    t: &DirectionTable,
    tp: &DirectionTable,
    map: &ClosureMap,
    h: &ChannelMatrix,
) -> AlignmentReport {
    let coords = t.shape.coords();
    let mut failures = 0;
    let mut max_dev: f64 = 0.0;
    let mut buf = vec![0u32; coords.len()];
    for (ci, c) in coords.iter().enumerate() {
        let hc = c.coeff(h) * t.delta;
        for i in 0..t.len() {
            let target = map.get(ci, i);
            buf.copy_from_slice(t.exponents(i));
            buf[ci] += 1;
            if tp.exponents(target) != buf.as_slice() {
                failures += 1;
                continue;
            }
            let expected = hc * t.values[i];
            let dev = ((tp.values[target] - expected) / expected).abs();
            max_dev = max_dev.max(dev);
        }
    }
    AlignmentReport {
        checked: coords.len() * t.len(),
        membership_failures: failures,
        max_rel_deviation: max_dev,
        tolerance: ALIGNMENT_TOLERANCE,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectLinkReport {
    pub checked: usize,
    /// Products whose value matches some `T'` entry within the tolerance.
    pub in_set: usize,
}

/// Searches `T'` by value for direct-link products `h_{j,j,r,t} * T[i]`.
/// Generic channels give no matches: desired signals stay out of the
/// interference set.
pub fn check_direct_links(
    t: &DirectionTable,
    tp: &DirectionTable,
    h: &ChannelMatrix,
    rel_tol: f64,
) -> DirectLinkReport {
    let mut sorted = tp.values.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut checked = 0;
    let mut in_set = 0;
    for j in 0..h.users() {
        for r in 0..h.rx_antennas() {
            for tx in 0..h.tx_antennas() {
                let hd = h.coeff(j, j, r, tx) * t.delta;
                for &v in &t.values {
                    checked += 1;
                    if contains_close(&sorted, hd * v, rel_tol) {
                        in_set += 1;
                    }
                }
            }
        }
    }
    DirectLinkReport { checked, in_set }
}

fn contains_close(sorted: &[f64], x: f64, rel_tol: f64) -> bool {
    let pos = sorted.partition_point(|&v| v < x);
    [pos.wrapping_sub(1), pos]
        .iter()
        .filter_map(|&i| sorted.get(i))
        .any(|&v| (v - x).abs() <= rel_tol * x.abs())
}
