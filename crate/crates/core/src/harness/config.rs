use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::codec::QMode;
use crate::diophantine::SearchMode;
use crate::dofregion::{stream_plan, symmetric_point, DoFPoint, StreamPlan};
use crate::error::{Error, Result};

/// Independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum SeedDomain {
    Weight = 1,
    Deltas = 2,
    Symbols = 3,
    Noise = 4,
    Resample = 5,
}

/// Generator for `(master, domain, index)`. A pure function of its inputs,
/// so results never depend on scheduling.
pub(crate) fn sub_rng(master: u64, domain: SeedDomain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((domain as u64) << 56) ^ index);
    rng
}

pub(crate) fn sub_seed(master: u64, domain: SeedDomain, index: u64) -> u64 {
    use rand::RngCore;
    sub_rng(master, domain, index).next_u64()
}

pub(crate) fn trial_index(p_index: usize, trial: usize) -> u64 {
    ((p_index as u64) << 32) | trial as u64
}

fn default_workers() -> usize {
    1
}

fn default_run_id() -> String {
    "run".to_string()
}

/// Monte Carlo link experiment. Loaded from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_run_id")]
    pub run_id: String,
    pub channel: ChannelConfig,
    /// Exponent bound of the direction construction.
    pub n: u32,
    pub eps: f64,
    pub q_mode: QMode,
    /// Target DoF point as rationals (`"2/3"`); symmetric point when absent.
    #[serde(default)]
    pub dof_point: Option<Vec<String>>,
    pub p_grid_db: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Trial CSV destination.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Summary JSON destination.
    #[serde(default)]
    pub summary: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidConfig(format!("eps {} not in (0, 1)", self.eps)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        if self.p_grid_db.is_empty() {
            return Err(Error::InvalidConfig("power grid is empty".into()));
        }
        if self.p_grid_db.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("power grid has non-finite values".into()));
        }
        if self.p_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("power grid must be strictly increasing".into()));
        }
        self.plan()?;
        Ok(())
    }

    pub fn point(&self) -> Result<DoFPoint> {
        match &self.dof_point {
            Some(entries) => DoFPoint::parse(&entries.join(",")),
            None => {
                let c = &self.channel;
                Ok(symmetric_point(c.users, c.tx_antennas, c.rx_antennas).0)
            }
        }
    }

    pub fn plan(&self) -> Result<StreamPlan> {
        let point = self.point()?;
        if point.len() != self.channel.users {
            return Err(Error::InvalidPoint(format!(
                "dof point has {} entries, K={}",
                point.len(),
                self.channel.users
            )));
        }
        stream_plan(&point, self.channel.tx_antennas)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMatrix {
    /// `W` times the stacked receive matrix, `N(D + D')` columns for one stream.
    Raw,
    /// Realizable points only: one column per transmitted symbol.
    Hypothesis,
}

impl ProbeMatrix {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeMatrix::Raw => "raw",
            ProbeMatrix::Hypothesis => "hypothesis",
        }
    }
}

impl std::str::FromStr for ProbeMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(ProbeMatrix::Raw),
            "hypothesis" => Ok(ProbeMatrix::Hypothesis),
            other => Err(Error::InvalidConfig(format!("unknown matrix kind {other:?}"))),
        }
    }
}

fn default_budget() -> u64 {
    100_000
}

/// Minimum-distance probe over many random channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Shape and profile; `seed` is the first channel seed.
    pub channel: ChannelConfig,
    pub n: u32,
    /// Number of channels, seeds `seed, seed + 1, ...`.
    pub channels: usize,
    pub q_values: Vec<u32>,
    pub mode: SearchMode,
    pub matrix: ProbeMatrix,
    #[serde(default)]
    pub receiver: usize,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default)]
    pub dof_point: Option<Vec<String>>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ProbeConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.channels == 0 {
            return Err(Error::InvalidConfig("channels must be at least 1".into()));
        }
        if self.q_values.is_empty() || self.q_values[0] == 0 || self.q_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("Q values must be positive and increasing".into()));
        }
        if self.budget == 0 {
            return Err(Error::InvalidConfig("budget must be positive".into()));
        }
        if self.receiver >= self.channel.users {
            return Err(Error::InvalidConfig(format!("receiver {} out of range", self.receiver)));
        }
        self.plan()?;
        Ok(())
    }

    pub fn plan(&self) -> Result<StreamPlan> {
        let c = &self.channel;
        let point = match &self.dof_point {
            Some(entries) => DoFPoint::parse(&entries.join(","))?,
            None => symmetric_point(c.users, c.tx_antennas, c.rx_antennas).0,
        };
        if point.len() != c.users {
            return Err(Error::InvalidPoint(format!(
                "dof point has {} entries, K={}",
                point.len(),
                c.users
            )));
        }
        stream_plan(&point, c.tx_antennas)
    }
}
