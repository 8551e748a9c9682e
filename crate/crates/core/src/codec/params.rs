use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the symbol bound `Q` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QMode {
    /// `Q = floor(P^{(1-eps) / (2(D + D' + 1 + eps))})`, at least 1.
    Coupled,
    /// Fixed `Q` regardless of power.
    Fixed(u32),
}

/// Constellation design: symbols are `lambda * q` with `|q| <= Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulationParams {
    pub power: f64,
    pub eps: f64,
    pub q: u32,
    pub lambda: f64,
    pub zeta: f64,
    pub coupled: bool,
}

/// `(1 - eps) / (2 (D + D' + 1 + eps))`.
pub fn q_exponent(eps: f64, d: f64, d_prime: f64) -> f64 {
    (1.0 - eps) / (2.0 * (d + d_prime + 1.0 + eps))
}

/// Designs `(Q, lambda, zeta)` for power `power`.
///
/// `peak` is the worst-case amplitude sum `S` of one transmit antenna per
/// unit symbol, so `zeta = 1 / (sqrt(M) S)` keeps `sum_t |x_t|^2 <= P` for
/// every admissible symbol vector.
pub fn design_params(
    power: f64,
    eps: f64,
    d: f64,
    d_prime: f64,
    mode: QMode,
    peak: f64,
    tx: usize,
) -> Result<ModulationParams> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidConfig(format!("eps {eps} not in (0, 1)")));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "power {power} must be positive and finite"
        )));
    }
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::Degenerate(format!("amplitude sum {peak} must be positive")));
    }
    if tx == 0 {
        return Err(Error::InvalidConfig("M must be positive".into()));
    }
    let (q, coupled) = match mode {
        QMode::Coupled => {
            if power <= 1.0 {
                return Err(Error::InvalidConfig(format!("coupled mode needs P > 1, got {power}")));
            }
            let raw = power.powf(q_exponent(eps, d, d_prime)).floor();
            (raw.clamp(1.0, u32::MAX as f64) as u32, true)
        }
        QMode::Fixed(q) => {
            if q == 0 {
                return Err(Error::InvalidConfig("fixed Q must be at least 1".into()));
            }
            (q, false)
        }
    };
    let zeta = 1.0 / ((tx as f64).sqrt() * peak);
    let lambda = zeta * power.sqrt() / q as f64;
    Ok(ModulationParams {
        power,
        eps,
        q,
        lambda,
        zeta,
        coupled,
    })
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
