//! Constant real MIMO interference channels.
//!
//! A `(K, M, N)` channel has `K` transmitter/receiver pairs, `M` antennas at
//! each transmitter and `N` at each receiver. The link from transmitter `k`
//! to receiver `j` is the `N x M` block `H[j][k]`, and receiver `j` observes
//! `y_j = sum_k H[j][k] x_k + v_j` with unit-variance white Gaussian `v_j`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution used to draw channel coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoeffProfile {
    /// Magnitude uniform on `[0.5, 2]`, sign uniform.
    #[default]
    BoundedUniform,
    /// i.i.d. `N(0, 1)`. Large exponents may overflow or underflow.
    StandardNormal,
}

impl CoeffProfile {
    pub fn as_str(self) -> &'static str {
        match self {
            CoeffProfile::BoundedUniform => "bounded-uniform",
            CoeffProfile::StandardNormal => "standard-normal",
        }
    }
}

impl fmt::Display for CoeffProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoeffProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bounded-uniform" => Ok(CoeffProfile::BoundedUniform),
            "standard-normal" => Ok(CoeffProfile::StandardNormal),
            other => Err(Error::InvalidConfig(format!("unknown coefficient profile {other:?}"))),
        }
    }
}

pub const BOUNDED_MIN: f64 = 0.5;
pub const BOUNDED_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConfig {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "M")]
    pub tx_antennas: usize,
    #[serde(rename = "N")]
    pub rx_antennas: usize,
    pub seed: u64,
    #[serde(default)]
    pub profile: CoeffProfile,
}

impl ChannelConfig {
    pub fn new(users: usize, tx_antennas: usize, rx_antennas: usize, seed: u64) -> Self {
        ChannelConfig {
            users,
            tx_antennas,
            rx_antennas,
            seed,
            profile: CoeffProfile::default(),
        }
    }

    pub fn with_profile(mut self, profile: CoeffProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.users < 2 {
            return Err(Error::InvalidConfig(format!(
                "K must be at least 2, got {}",
                self.users
            )));
        }
        if self.tx_antennas == 0 || self.rx_antennas == 0 {
            return Err(Error::InvalidConfig(format!(
                "antenna counts must be positive, got M={} N={}",
                self.tx_antennas, self.rx_antennas
            )));
        }
        Ok(())
    }
}

/// All `K^2` link blocks of a channel. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    users: usize,
    tx: usize,
    rx: usize,
    profile: CoeffProfile,
    seed: u64,
    // block (j, k) occupies [(j*K + k)*N*M ..) in row-major N x M order
    coeffs: Vec<f64>,
}

/// Draws a channel from `cfg`. Identical configs give bitwise-identical channels.
pub fn generate_channel(cfg: &ChannelConfig) -> Result<ChannelMatrix> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let count = cfg.users * cfg.users * cfg.rx_antennas * cfg.tx_antennas;
    let coeffs = (0..count)
        .map(|_| match cfg.profile {
            CoeffProfile::BoundedUniform => {
                let mag = rng.random_range(BOUNDED_MIN..=BOUNDED_MAX);
                if rng.random_bool(0.5) {
                    -mag
                } else {
                    mag
                }
            }
            CoeffProfile::StandardNormal => loop {
                let v: f64 = rng.sample(StandardNormal);
                if v != 0.0 {
                    break v;
                }
            },
        })
        .collect();
    Ok(ChannelMatrix {
        users: cfg.users,
        tx: cfg.tx_antennas,
        rx: cfg.rx_antennas,
        profile: cfg.profile,
        seed: cfg.seed,
        coeffs,
    })
}

impl ChannelMatrix {
    /// Builds a channel from explicit blocks, `blocks[j][k]` row-major `N x M`.
    pub fn from_blocks(
        tx_antennas: usize,
        rx_antennas: usize,
        profile: CoeffProfile,
        seed: u64,
        blocks: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        let users = blocks.len();
        ChannelConfig::new(users, tx_antennas, rx_antennas, seed).validate()?;
        let mut coeffs = Vec::with_capacity(users * users * rx_antennas * tx_antennas);
        for (j, row) in blocks.iter().enumerate() {
            if row.len() != users {
                return Err(Error::Dimension(format!(
                    "receiver {j} has {} blocks, expected {users}",
                    row.len()
                )));
            }
            for (k, block) in row.iter().enumerate() {
                if block.len() != rx_antennas * tx_antennas {
                    return Err(Error::Dimension(format!(
                        "block ({j},{k}) has {} entries, expected {}",
                        block.len(),
                        rx_antennas * tx_antennas
                    )));
                }
                for &h in block {
                    if !h.is_finite() || h == 0.0 {
                        return Err(Error::NumericRange(format!(
                            "coefficient {h} in block ({j},{k}) must be finite and nonzero"
                        )));
                    }
                    if profile == CoeffProfile::BoundedUniform && !(BOUNDED_MIN..=BOUNDED_MAX).contains(&h.abs()) {
                        return Err(Error::NumericRange(format!(
                            "coefficient {h} in block ({j},{k}) outside bounded-uniform range"
                        )));
                    }
                }
                coeffs.extend_from_slice(block);
            }
        }
        Ok(ChannelMatrix {
            users,
            tx: tx_antennas,
            rx: rx_antennas,
            profile,
            seed,
            coeffs,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx
    }

    pub fn rx_antennas(&self) -> usize {
        self.rx
    }

    pub fn profile(&self) -> CoeffProfile {
        self.profile
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `h_{j,k,r,t}` with zero-based indices.
    #[inline]
    pub fn coeff(&self, j: usize, k: usize, r: usize, t: usize) -> f64 {
        self.coeffs[((j * self.users + k) * self.rx + r) * self.tx + t]
    }

    /// Row-major `N x M` block `H[j][k]`.
    pub fn block(&self, j: usize, k: usize) -> &[f64] {
        let size = self.rx * self.tx;
        let start = (j * self.users + k) * size;
        &self.coeffs[start..start + size]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&ChannelFile::from(self))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Io { .. } => e,
            other => Error::MalformedChannel {
                path: path.to_path_buf(),
                msg: other.to_string(),
            },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ChannelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ChannelFile = serde_json::from_str(text)?;
        let profile: CoeffProfile = file.profile.parse()?;
        if file.blocks.len() != file.users {
            return Err(Error::Dimension(format!(
                "header says K={} but file has {} block rows",
                file.users,
                file.blocks.len()
            )));
        }
        Self::from_blocks(file.tx, file.rx, profile, file.seed, &file.blocks)
    }
}

/// On-disk layout: `{"K","M","N","profile","seed","blocks"}`.
#[derive(Debug, Serialize, Deserialize)]
struct ChannelFile {
    #[serde(rename = "K")]
    users: usize,
    #[serde(rename = "M")]
    tx: usize,
    #[serde(rename = "N")]
    rx: usize,
    profile: String,
    seed: u64,
    blocks: Vec<Vec<Vec<f64>>>,
}

impl From<&ChannelMatrix> for ChannelFile {
    fn from(h: &ChannelMatrix) -> Self {
        let blocks = (0..h.users)
            .map(|j| (0..h.users).map(|k| h.block(j, k).to_vec()).collect())
            .collect();
        ChannelFile {
            users: h.users,
            tx: h.tx,
            rx: h.rx,
            profile: h.profile.as_str().to_string(),
            seed: h.seed,
            blocks,
        }
    }
}

/// Additive receiver noise: i.i.d. zero-mean Gaussian per antenna.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub variance: f64,
    /// Stream id mixed with a seed to give an independent generator.
    pub stream: u64,
}

impl NoiseModel {
    pub fn unit(stream: u64) -> Self {
        NoiseModel { variance: 1.0, stream }
    }

    pub fn source(&self, seed: u64) -> NoiseSource {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.stream);
        NoiseSource {
            rng,
            std_dev: self.variance.sqrt(),
        }
    }
}

/// A seeded Gaussian sample stream.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    std_dev: f64,
}

impl NoiseSource {
    pub fn from_rng(rng: ChaCha8Rng, variance: f64) -> Self {
        NoiseSource {
            rng,
            std_dev: variance.sqrt(),
        }
    }

    pub fn sample(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        z * self.std_dev
    }
}

/// Computes every receiver's observation. `x[k]` is transmitter `k`'s
/// length-`M` vector; `noise = None` gives the noiseless output.
pub fn apply_channel(h: &ChannelMatrix, x: &[Vec<f64>], mut noise: Option<&mut NoiseSource>) -> Result<Vec<Vec<f64>>> {
    if x.len() != h.users {
        return Err(Error::Dimension(format!(
            "got {} transmit vectors for K={}",
            x.len(),
            h.users
        )));
    }
    for (k, xk) in x.iter().enumerate() {
        if xk.len() != h.tx {
            return Err(Error::Dimension(format!(
                "transmit vector {k} has length {}, expected M={}",
                xk.len(),
                h.tx
            )));
        }
    }
    let mut out = Vec::with_capacity(h.users);
    for j in 0..h.users {
        let mut yj = vec![0.0; h.rx];
        for (k, xk) in x.iter().enumerate() {
            let block = h.block(j, k);
            for (r, y) in yj.iter_mut().enumerate() {
                let row = &block[r * h.tx..(r + 1) * h.tx];
                *y += row.iter().zip(xk).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        if let Some(src) = noise.as_deref_mut() {
            for y in yj.iter_mut() {
                *y += src.sample();
            }
        }
        out.push(yj);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_range() {
        let h = generate_channel(&ChannelConfig::new(2, 2, 2, 7)).unwrap();
        assert_eq!(h.coeffs().len(), 16);
        for &c in h.coeffs() {
            assert!((0.5..=2.0).contains(&c.abs()), "{c}");
        }
        let h = generate_channel(&ChannelConfig::new(3, 1, 2, 1)).unwrap();
        assert_eq!(h.coeffs().len(), 18);
        assert_eq!(h.block(2, 1).len(), 2);
    }

    #[test]
    fn both_signs_appear() {
        let h = generate_channel(&ChannelConfig::new(4, 3, 3, 11)).unwrap();
        assert!(h.coeffs().iter().any(|&c| c > 0.0));
        assert!(h.coeffs().iter().any(|&c| c < 0.0));
    }

    #[test]
    fn deterministic() {
        let cfg = ChannelConfig::new(2, 2, 2, 7);
        let a = generate_channel(&cfg).unwrap();
        let b = generate_channel(&cfg).unwrap();
        let bits = |h: &ChannelMatrix| h.coeffs().iter().map(|c| c.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = generate_channel(&ChannelConfig::new(2, 2, 2, 8)).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn rejects_single_user() {
        assert!(generate_channel(&ChannelConfig::new(1, 2, 2, 0)).is_err());
        assert!(generate_channel(&ChannelConfig::new(2, 0, 2, 0)).is_err());
    }

    #[test]
    fn standard_normal_profile() {
        let cfg = ChannelConfig::new(3, 2, 2, 5).with_profile(CoeffProfile::StandardNormal);
        let h = generate_channel(&cfg).unwrap();
        assert!(h.coeffs().iter().all(|c| c.is_finite() && *c != 0.0));
        assert!(h.coeffs().iter().any(|c| c.abs() < 0.5 || c.abs() > 2.0));
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let h = generate_channel(&ChannelConfig::new(3, 2, 2, 3)).unwrap();
        let y = apply_channel(&h, &vec![vec![0.0; 2]; 3], None).unwrap();
        assert!(y.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_input_picks_first_column() {
        let h = generate_channel(&ChannelConfig::new(2, 2, 2, 9)).unwrap();
        let x = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        let y = apply_channel(&h, &x, None).unwrap();
        for (j, yj) in y.iter().enumerate() {
            assert_eq!(*yj, vec![h.coeff(j, 0, 0, 0), h.coeff(j, 0, 1, 0)]);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let h = generate_channel(&ChannelConfig::new(2, 2, 2, 9)).unwrap();
        assert!(matches!(
            apply_channel(&h, &[vec![1.0], vec![0.0, 0.0]], None),
            Err(Error::Dimension(_))
        ));
        assert!(apply_channel(&h, &[vec![1.0, 0.0]], None).is_err());
    }

    #[test]
    fn noise_is_unit_variance_and_seeded() {
        let model = NoiseModel::unit(3);
        let mut a = model.source(42);
        let mut b = model.source(42);
        let xs: Vec<f64> = (0..20_000).map(|_| a.sample()).collect();
        let ys: Vec<f64> = (0..20_000).map(|_| b.sample()).collect();
        assert_eq!(xs, ys);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.03, "{mean}");
        assert!((var - 1.0).abs() < 0.04, "{var}");
        let mut c = NoiseModel::unit(4).source(42);
        assert_ne!(xs[0], c.sample());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let h = generate_channel(&ChannelConfig::new(3, 2, 2, 17).with_profile(CoeffProfile::StandardNormal)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.json");
        h.save(&path).unwrap();
        let back = ChannelMatrix::load(&path).unwrap();
        assert_eq!(h, back);
        for (a, b) in h.coeffs().iter().zip(back.coeffs()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn malformed_files() {
        let bad_header = r#"{"K":3,"M":1,"N":1,"profile":"bounded-uniform","seed":0,
            "blocks":[[[1.0],[1.0]],[[1.0],[1.0]]]}"#;
        assert!(ChannelMatrix::from_json(bad_header).is_err());
        let bad_block = r#"{"K":2,"M":1,"N":1,"profile":"bounded-uniform","seed":0,
            "blocks":[[[1.0,1.0],[1.0]],[[1.0],[1.0]]]}"#;
        assert!(matches!(ChannelMatrix::from_json(bad_block), Err(Error::Dimension(_))));
        let zero = r#"{"K":2,"M":1,"N":1,"profile":"standard-normal","seed":0,
            "blocks":[[[0.0],[1.0]],[[1.0],[1.0]]]}"#;
        assert!(ChannelMatrix::from_json(zero).is_err());
        assert!(ChannelMatrix::from_json("{not json").is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, bad_block).unwrap();
        assert!(matches!(
            ChannelMatrix::load(&path),
            Err(Error::MalformedChannel { .. })
        ));
    }
}
