use std::io::Write;

use serde::Serialize;

use super::config::{sub_seed, ProbeConfig, ProbeMatrix, SeedDomain};
use crate::channel::{generate_channel, ChannelConfig, ChannelMatrix};
use crate::codec::{sample_w, SchemeDirections, StructuredModel};
use crate::diophantine::{fit_distance_exponent, min_distance, DistanceRecord, ExponentFit, RealMatrix};
use crate::directions::StreamDirectionParams;
use crate::dofregion::StreamPlan;
use crate::error::{Error, Result};
use crate::stats::median;

pub const PROBE_HEADER: [&str; 10] = [
    "channel_seed",
    "receiver",
    "matrix",
    "Q",
    "mode",
    "exact",
    "d_min",
    "fit_slope",
    "fit_beta",
    "bound_slope",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelProbe {
    pub channel_seed: u64,
    /// Seed originally requested when the first draw was degenerate.
    pub replaced: Option<u64>,
    pub rows: usize,
    pub cols: usize,
    #[serde(skip)]
    pub records: Vec<DistanceRecord>,
    pub fit: Option<ExponentFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSummary {
    pub channels: Vec<ChannelProbe>,
    pub median_slope: Option<f64>,
    pub reference_slope: f64,
    pub all_positive: bool,
}

/// The matrix whose integer image is probed, for one channel matrix. The
/// direction scales and `W` are drawn from `seed`.
pub fn matrix_for_channel(
    h: &ChannelMatrix,
    n: u32,
    plan: &StreamPlan,
    receiver: usize,
    kind: ProbeMatrix,
    seed: u64,
) -> Result<RealMatrix> {
    let deltas = StreamDirectionParams::sample(plan.max_streams() as usize, sub_seed(seed, SeedDomain::Deltas, 0));
    let dirs = SchemeDirections::build(h, n, plan, &deltas)?;
    let w = sample_w(h.rx_antennas(), sub_seed(seed, SeedDomain::Weight, 0))?;
    let model = StructuredModel::build(receiver, h, &dirs, &w)?;
    let rows = model.rx();
    match kind {
        ProbeMatrix::Raw => RealMatrix::new(rows, model.cols(), model.weighted_matrix().to_vec()),
        ProbeMatrix::Hypothesis => RealMatrix::new(rows, model.symbol_count(), model.generator().to_vec()),
    }
}

/// The probed matrix for a freshly generated channel.
pub fn probe_matrix(cfg: &ProbeConfig, channel: &ChannelConfig) -> Result<RealMatrix> {
    let h = generate_channel(channel)?;
    matrix_for_channel(&h, cfg.n, &cfg.plan()?, cfg.receiver, cfg.matrix, channel.seed)
}

fn probe_records(cfg: &ProbeConfig, a: &RealMatrix, seed: u64) -> Result<Vec<DistanceRecord>> {
    cfg.q_values
        .iter()
        .map(|&q| min_distance(a, q, cfg.mode, cfg.budget, seed))
        .collect()
}

/// Probes one channel seed. A degenerate draw (some nonzero `q` with zero
/// image) is replaced once by a fresh seed.
pub fn probe_channel(cfg: &ProbeConfig, seed: u64) -> Result<ChannelProbe> {
    let mut channel = cfg.channel;
    channel.seed = seed;
    let mut replaced = None;
    let mut a = probe_matrix(cfg, &channel)?;
    let mut records = probe_records(cfg, &a, seed)?;
    if records.iter().any(DistanceRecord::is_degenerate) {
        replaced = Some(seed);
        channel.seed = sub_seed(seed, SeedDomain::Resample, 0);
        a = probe_matrix(cfg, &channel)?;
        records = probe_records(cfg, &a, channel.seed)?;
        if let Some(r) = records.iter().find(|r| r.is_degenerate()) {
            return Err(Error::Degenerate(format!(
                "channel seeds {seed} and {} both give zero distance at Q={}",
                channel.seed, r.q
            )));
        }
    }
    let reference = reference_slope(&a);
    let fit = if records.iter().filter(|r| r.exact).count() >= 3 {
        Some(fit_distance_exponent(&records, None, reference)?)
    } else {
        None
    };
    Ok(ChannelProbe {
        channel_seed: channel.seed,
        replaced,
        rows: a.rows(),
        cols: a.cols(),
        records,
        fit,
    })
}

/// `-(cols / rows) - 1`, the exponent a generic matrix attains.
pub fn reference_slope(a: &RealMatrix) -> f64 {
    -(a.cols() as f64 / a.rows() as f64) - 1.0
}

pub fn run_probe(cfg: &ProbeConfig) -> Result<ProbeSummary> {
    cfg.validate()?;
    let channels = (0..cfg.channels as u64)
        .map(|c| probe_channel(cfg, cfg.channel.seed.wrapping_add(c)))
        .collect::<Result<Vec<_>>>()?;
    let slopes: Vec<f64> = channels
        .iter()
        .filter_map(|c| c.fit.as_ref().map(|f| f.slope))
        .collect();
    let reference_slope = channels
        .first()
        .map_or(f64::NAN, |c| -(c.cols as f64 / c.rows as f64) - 1.0);
    let all_positive = channels.iter().flat_map(|c| &c.records).all(|r| r.d_min > 0.0);
    let summary = ProbeSummary {
        median_slope: median(&slopes),
        channels,
        reference_slope,
        all_positive,
    };
    if let Some(path) = &cfg.output {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        write_probe_csv(cfg, &summary, std::io::BufWriter::new(file))?;
    }
    Ok(summary)
}

pub fn write_probe_csv<W: Write>(cfg: &ProbeConfig, summary: &ProbeSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PROBE_HEADER)?;
    let matrix = cfg.matrix.as_str();
    for ch in &summary.channels {
        let (slope, beta) = ch.fit.as_ref().map_or((String::new(), String::new()), |f| {
            (f.slope.to_string(), f.beta.to_string())
        });
        let bound = -(ch.cols as f64 / ch.rows as f64) - 1.0;
        for r in &ch.records {
            w.write_record([
                ch.channel_seed.to_string(),
                cfg.receiver.to_string(),
                matrix.to_string(),
                r.q.to_string(),
                r.mode.as_str().to_string(),
                r.exact.to_string(),
                r.d_min.to_string(),
                slope.clone(),
                beta.clone(),
                bound.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
