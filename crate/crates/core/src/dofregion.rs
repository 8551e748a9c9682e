//! DoF-region arithmetic in exact rationals.
//!
//! The achievable region of a `(K, M, N)` channel is
//! `{ d >= 0 : M d_k + N max_{k' != k} d_{k'} <= MN for all k }`; for `M = N`
//! it reduces to `d_k + max_{k' != k} d_{k'} <= N`. Boundary points matter,
//! so nothing here touches floating point except for display.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::directions::{interference_count, transmit_count, LinkShape};
use crate::error::{Error, Result};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn int(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Parses `"2/3"`, `"1"`, `"0.25"` or `"-1.5e0"`-free decimals exactly.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::InvalidPoint(format!("cannot parse {s:?} as a rational"));
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        let digits = format!("{whole_digits}{frac}");
        let numer: BigInt = digits.parse().map_err(|_| bad())?;
        let denom = BigInt::from(10u32).pow(frac.len() as u32);
        let r = BigRational::new(numer, denom);
        return Ok(if neg { -r } else { r });
    }
    BigRational::from_str(s).map_err(|_| bad())
}

/// Exact decimal expansion of `r`, truncated to `frac_digits` places.
pub fn to_decimal(r: &BigRational, frac_digits: usize) -> String {
    let neg = r.is_negative();
    let a = r.abs();
    let scale = BigInt::from(10u32).pow(frac_digits as u32);
    let scaled = (a.numer() * &scale) / a.denom();
    let (whole, frac) = scaled.div_rem(&scale);
    let sign = if neg && !scaled.is_zero() { "-" } else { "" };
    if frac_digits == 0 {
        return format!("{sign}{whole}");
    }
    format!("{sign}{whole}.{:0>width$}", frac.to_string(), width = frac_digits)
}

/// A DoF vector with non-negative rational entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoFPoint(Vec<BigRational>);

impl DoFPoint {
    pub fn new(d: Vec<BigRational>) -> Result<Self> {
        if let Some(neg) = d.iter().find(|v| v.is_negative()) {
            return Err(Error::InvalidPoint(format!("negative entry {neg}")));
        }
        Ok(DoFPoint(d))
    }

    /// Comma-separated rationals, e.g. `"2/3,2/3,1"`.
    pub fn parse(s: &str) -> Result<Self> {
        let entries = s.split(',').map(parse_rational).collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[BigRational] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> BigRational {
        self.0.iter().fold(BigRational::zero(), |acc, v| acc + v)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()
    }

    /// `max_{k' != k} d_{k'}`.
    fn max_other(&self, k: usize) -> BigRational {
        self.0
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .map(|(_, v)| v.clone())
            .max()
            .unwrap_or_else(BigRational::zero)
    }
}

impl fmt::Display for DoFPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RegionReport {
    pub member: bool,
    /// Users whose constraint holds with equality.
    pub binding_constraints: Vec<usize>,
    pub violated_constraints: Vec<usize>,
}

fn check_len(d: &DoFPoint, users: usize) -> Result<()> {
    if d.len() != users {
        return Err(Error::InvalidPoint(format!("point has {} entries, K={users}", d.len())));
    }
    if users < 2 {
        return Err(Error::InvalidPoint("K must be at least 2".into()));
    }
    Ok(())
}

fn report_from(lhs_rhs: impl Iterator<Item = (BigRational, BigRational)>) -> RegionReport {
    let mut binding = Vec::new();
    let mut violated = Vec::new();
    for (k, (lhs, rhs)) in lhs_rhs.enumerate() {
        if lhs == rhs {
            binding.push(k);
        } else if lhs > rhs {
            violated.push(k);
        }
    }
    RegionReport {
        member: violated.is_empty(),
        binding_constraints: binding,
        violated_constraints: violated,
    }
}

/// Membership in `{ M d_k + N max_{k' != k} d_{k'} <= MN }`.
pub fn in_region(d: &DoFPoint, users: usize, tx: usize, rx: usize) -> Result<RegionReport> {
    check_len(d, users)?;
    let (m, n) = (int(tx), int(rx));
    let cap = &m * &n;
    Ok(report_from(
        (0..users).map(|k| (&m * &d.0[k] + &n * d.max_other(k), cap.clone())),
    ))
}

/// Membership in the square-channel region `{ d_k + max_{k' != k} d_{k'} <= N }`.
pub fn in_region_square(d: &DoFPoint, users: usize, antennas: usize) -> Result<RegionReport> {
    check_len(d, users)?;
    let n = int(antennas);
    Ok(report_from((0..users).map(|k| (&d.0[k] + d.max_other(k), n.clone()))))
}

/// `d_k = MN/(M+N)` for every user, and its total `KMN/(M+N)`.
pub fn symmetric_point(users: usize, tx: usize, rx: usize) -> (DoFPoint, BigRational) {
    let dk = rat((tx * rx) as i64, (tx + rx) as i64);
    let point = DoFPoint(vec![dk.clone(); users]);
    (point, dk * int(users))
}

/// Integer stream counts `d_bar_k = rho d_k / M` with minimal `rho`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StreamPlan {
    pub rho: u64,
    pub streams: Vec<u64>,
}

impl StreamPlan {
    /// Single stream for every user.
    pub fn single(users: usize) -> Self {
        StreamPlan {
            rho: 1,
            streams: vec![1; users],
        }
    }

    pub fn max_streams(&self) -> u64 {
        self.streams.iter().copied().max().unwrap_or(0)
    }

    /// `max_{k != j} d_bar_k`.
    pub fn max_other(&self, j: usize) -> u64 {
        self.streams
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, &s)| s)
            .max()
            .unwrap_or(0)
    }

    /// `(M / rho) d_bar`, which recovers the planned point.
    pub fn dof(&self, tx: usize) -> DoFPoint {
        DoFPoint(
            self.streams
                .iter()
                .map(|&s| rat((tx as u64 * s) as i64, self.rho as i64))
                .collect(),
        )
    }
}

pub fn stream_plan(d: &DoFPoint, tx: usize) -> Result<StreamPlan> {
    if tx == 0 {
        return Err(Error::InvalidPoint("M must be positive".into()));
    }
    let m = int(tx);
    let per_antenna: Vec<BigRational> = d.0.iter().map(|v| v / &m).collect();
    let rho = per_antenna.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let rho_r = BigRational::from_integer(rho.clone());
    let streams = per_antenna
        .iter()
        .map(|v| {
            let s = v * &rho_r;
            debug_assert!(s.is_integer());
            s.to_integer()
                .to_u64()
                .ok_or_else(|| Error::InvalidPoint(format!("stream count {s} too large")))
        })
        .collect::<Result<Vec<_>>>()?;
    let rho = rho
        .to_u64()
        .ok_or_else(|| Error::InvalidPoint(format!("rho {rho} too large")))?;
    Ok(StreamPlan { rho, streams })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionBudget {
    /// `M D d_bar_j + N D' max_{k != j} d_bar_k`
    pub budget: BigUint,
    /// `(M d_bar_j + N max_{k != j} d_bar_k) D'`
    pub middle: BigUint,
    /// `rho N D'`
    pub cap: BigUint,
    pub chain_holds: bool,
}

pub fn direction_budget(
    plan: &StreamPlan,
    j: usize,
    d: &BigUint,
    d_prime: &BigUint,
    tx: usize,
    rx: usize,
) -> DirectionBudget {
    let own = BigUint::from(plan.streams[j]);
    let other = BigUint::from(plan.max_other(j));
    let (m, n) = (BigUint::from(tx), BigUint::from(rx));
    let budget = &m * d * &own + &n * d_prime * &other;
    let middle = (&m * &own + &n * &other) * d_prime;
    let cap = BigUint::from(plan.rho) * &n * d_prime;
    let chain_holds = budget <= middle && middle <= cap;
    DirectionBudget {
        budget,
        middle,
        cap,
        chain_holds,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofFormula {
    pub d: BigUint,
    pub d_prime: BigUint,
    /// `N K D / (D + D' + 1)`
    pub total: BigRational,
    /// `NK/2`, only for `M = N`.
    pub limit: Option<BigRational>,
    pub gap: Option<BigRational>,
}

/// Total DoF achieved by the single-stream scheme at finite `n`.
pub fn dof_formula(users: usize, tx: usize, rx: usize, n: u32) -> Result<DofFormula> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let shape = LinkShape::new(users, tx, rx);
    let d = transmit_count(shape, n);
    let d_prime = interference_count(shape, n);
    let numer = BigInt::from(rx * users) * BigInt::from(d.clone());
    let denom = BigInt::from(&d + &d_prime + 1u32);
    let total = BigRational::new(numer, denom);
    let (limit, gap) = if tx == rx {
        let limit = rat((rx * users) as i64, 2);
        let gap = (&limit - &total).abs();
        (Some(limit), Some(gap))
    } else {
        (None, None)
    };
    Ok(DofFormula {
        d,
        d_prime,
        total,
        limit,
        gap,
    })
}

/// `(M / rho) d_bar_j`, the per-user DoF approached as `n` grows.
pub fn per_user_limit(plan: &StreamPlan, j: usize, tx: usize) -> BigRational {
    rat((tx as u64 * plan.streams[j]) as i64, plan.rho as i64)
}

/// `M D d_bar_j / (rho D')`, the per-user DoF at finite `n`.
pub fn per_user_at(plan: &StreamPlan, j: usize, tx: usize, d: &BigUint, d_prime: &BigUint) -> BigRational {
    let numer = BigInt::from(tx as u64 * plan.streams[j]) * BigInt::from(d.clone());
    let denom = BigInt::from(plan.rho) * BigInt::from(d_prime.clone());
    BigRational::new(numer, denom)
}

/// Vertices of the two-user region, counter-clockwise from the origin.
pub fn region_vertices_2d(tx: usize, rx: usize) -> Vec<(BigRational, BigRational)> {
    let (m, n) = (int(tx), int(rx));
    let mn = &m * &n;
    let zero = BigRational::zero();
    let one = BigRational::one();
    // a*d1 + b*d2 <= c
    let lines = [
        (m.clone(), n.clone(), mn.clone()),
        (n.clone(), m.clone(), mn.clone()),
        (-one.clone(), zero.clone(), zero.clone()),
        (zero.clone(), -one.clone(), zero.clone()),
    ];
    let feasible = |x: &BigRational, y: &BigRational| lines.iter().all(|(a, b, c)| a * x + b * y <= *c);
    let mut verts: Vec<(BigRational, BigRational)> = Vec::new();
    for i in 0..lines.len() {
        for k in i + 1..lines.len() {
            let (a1, b1, c1) = &lines[i];
            let (a2, b2, c2) = &lines[k];
            let det = a1 * b2 - a2 * b1;
            if det.is_zero() {
                continue;
            }
            let x = (c1 * b2 - c2 * b1) / &det;
            let y = (a1 * c2 - a2 * c1) / &det;
            if feasible(&x, &y) && !verts.contains(&(x.clone(), y.clone())) {
                verts.push((x, y));
            }
        }
    }
    let f = |v: &BigRational| v.to_f64().unwrap_or(0.0);
    let cx = verts.iter().map(|v| f(&v.0)).sum::<f64>() / verts.len() as f64;
    let cy = verts.iter().map(|v| f(&v.1)).sum::<f64>() / verts.len() as f64;
    let angle = |v: &(BigRational, BigRational)| {
        let a = (f(&v.1) - cy).atan2(f(&v.0) - cx);
        // start at the origin vertex, which sits at the bottom-left
        let origin = (-cy).atan2(-cx);
        (a - origin).rem_euclid(std::f64::consts::TAU)
    };
    verts.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
    verts
}

/// Human-readable region constraints, one per user.
pub fn region_constraints(users: usize, tx: usize, rx: usize) -> Vec<String> {
    (0..users)
        .map(|k| {
            let others: Vec<String> = (0..users).filter(|&i| i != k).map(|i| format!("d{}", i + 1)).collect();
            format!("{tx}*d{} + {rx}*max({}) <= {}", k + 1, others.join(","), tx * rx)
        })
        .collect()
}
