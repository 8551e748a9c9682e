use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{sub_rng, sub_seed, trial_index, ExperimentConfig, SeedDomain};
use crate::channel::{apply_channel, generate_channel, ChannelMatrix, NoiseModel};
use crate::codec::{
    db_to_linear, design_params, encode, hypothesis_count, sample_w, ModulationParams, QMode, ReceiveModel,
    SchemeDirections, StructuredModel, SymbolVector, HYPOTHESIS_CAP,
};
use crate::directions::StreamDirectionParams;
use crate::dofregion::StreamPlan;
use crate::error::{Error, Result};
use crate::stats::least_squares_slope;

pub const CSV_HEADER: [&str; 13] = [
    "run_id", "K", "M", "N", "n", "Q", "eps", "P_db", "trial", "receiver", "success", "distance", "lambda",
];

/// One decoded observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub p_db: f64,
    pub trial: usize,
    pub receiver: usize,
    pub success: bool,
    pub distance: f64,
    pub lambda: f64,
    pub q: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerPoint {
    pub p_db: f64,
    pub q: u32,
    pub lambda: f64,
    /// Block symbol error rate per receiver.
    pub ser: Vec<f64>,
    pub errors: Vec<usize>,
    /// Uncoded bits per channel use, discounted by the success rate.
    pub rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub trials: usize,
    pub d: usize,
    pub d_prime: usize,
    pub plan: StreamPlan,
    pub points: Vec<PowerPoint>,
    /// Slope of rate against `log2(P)/2` over the top half of the grid.
    pub slope: Vec<Option<f64>>,
    /// Slope the coupled schedule converges to: `M d_k D (1-eps) / (D + D' + 1 + eps)`.
    pub predicted_slope: Vec<f64>,
    /// Per-user share of the finite-`n` total DoF, `N D / (D + D' + 1)`.
    pub formula_per_user: f64,
}

/// Everything fixed for a run: channel, directions, combining matrix.
struct Setup {
    h: ChannelMatrix,
    dirs: SchemeDirections,
    structured: Vec<StructuredModel>,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.validate()?;
    let h = generate_channel(&cfg.channel)?;
    let plan = cfg.plan()?;
    let deltas = StreamDirectionParams::sample(
        plan.max_streams() as usize,
        sub_seed(cfg.master_seed, SeedDomain::Deltas, 0),
    );
    let dirs = SchemeDirections::build(&h, cfg.n, &plan, &deltas)?;
    let w = sample_w(
        cfg.channel.rx_antennas,
        sub_seed(cfg.master_seed, SeedDomain::Weight, 0),
    )?;
    let structured = (0..h.users())
        .map(|j| StructuredModel::build(j, &h, &dirs, &w))
        .collect::<Result<Vec<_>>>()?;
    Ok(Setup { h, dirs, structured })
}

fn params_for(cfg: &ExperimentConfig, dirs: &SchemeDirections, p_db: f64) -> Result<ModulationParams> {
    design_params(
        db_to_linear(p_db),
        cfg.eps,
        dirs.d() as f64,
        dirs.d_prime() as f64,
        cfg.q_mode,
        dirs.peak_amplitude(),
        cfg.channel.tx_antennas,
    )
}

/// Checks the largest hypothesis space on the grid before any trial runs.
pub fn feasibility_check(cfg: &ExperimentConfig) -> Result<()> {
    let s = setup(cfg)?;
    let top = *cfg.p_grid_db.last().expect("validated non-empty");
    let params = params_for(cfg, &s.dirs, top)?;
    let count = hypothesis_count(params.q, s.structured[0].symbol_count());
    if count > HYPOTHESIS_CAP.into() {
        return Err(Error::EnumerationInfeasible {
            count: count.to_string(),
            cap: HYPOTHESIS_CAP,
        });
    }
    Ok(())
}

/// Runs every `(P, trial)` pair and decodes at all receivers.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<(RunSummary, Vec<TrialRecord>)> {
    let s = setup(cfg)?;
    feasibility_check(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let noise_seed = sub_seed(cfg.master_seed, SeedDomain::Noise, 0);
    let users = s.h.users();

    let mut records = Vec::with_capacity(cfg.p_grid_db.len() * cfg.trials * users);
    let mut params_per_p = Vec::with_capacity(cfg.p_grid_db.len());
    for (p_index, &p_db) in cfg.p_grid_db.iter().enumerate() {
        let params = params_for(cfg, &s.dirs, p_db)?;
        let models = s
            .structured
            .iter()
            .map(|m| ReceiveModel::new(m.clone(), &params))
            .collect::<Result<Vec<_>>>()?;
        let batch: Vec<Vec<TrialRecord>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|trial| run_one(cfg, &s, &models, &params, p_db, p_index, trial, noise_seed))
                .collect::<Result<Vec<_>>>()
        })?;
        records.extend(batch.into_iter().flatten());
        params_per_p.push(params);
    }
    let summary = summarize(cfg, &s.dirs, &params_per_p, &records);
    Ok((summary, records))
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    cfg: &ExperimentConfig,
    s: &Setup,
    models: &[ReceiveModel],
    params: &ModulationParams,
    p_db: f64,
    p_index: usize,
    trial: usize,
    noise_seed: u64,
) -> Result<Vec<TrialRecord>> {
    let idx = trial_index(p_index, trial);
    let mut rng = sub_rng(cfg.master_seed, SeedDomain::Symbols, idx);
    let m = &s.structured[0];
    let symbols: Vec<SymbolVector> = (0..s.h.users())
        .map(|k| SymbolVector::random(m.tx(), m.streams(k), m.dim(), params.q, &mut rng))
        .collect();
    let x = symbols
        .iter()
        .map(|u| encode(u, &s.dirs.transmit, params.lambda, params.q))
        .collect::<Result<Vec<_>>>()?;
    let y = if cfg.noiseless {
        apply_channel(&s.h, &x, None)?
    } else {
        let mut noise = NoiseModel::unit(idx).source(noise_seed);
        apply_channel(&s.h, &x, Some(&mut noise))?
    };
    models
        .iter()
        .enumerate()
        .map(|(j, model)| {
            let res = model.decode(&y[j])?;
            Ok(TrialRecord {
                p_db,
                trial,
                receiver: j,
                success: res.symbols == symbols[j],
                distance: res.distance,
                lambda: params.lambda,
                q: params.q,
            })
        })
        .collect()
}

fn summarize(
    cfg: &ExperimentConfig,
    dirs: &SchemeDirections,
    params: &[ModulationParams],
    records: &[TrialRecord],
) -> RunSummary {
    let users = cfg.channel.users;
    let (d, d_prime) = (dirs.d(), dirs.d_prime());
    let m = cfg.channel.tx_antennas;
    let per_p = cfg.trials * users;
    let symbols_of = |k: usize| (m * dirs.plan.streams[k] as usize * d) as f64;
    let points: Vec<PowerPoint> = cfg
        .p_grid_db
        .iter()
        .zip(params)
        .enumerate()
        .map(|(pi, (&p_db, prm))| {
            let chunk = &records[pi * per_p..(pi + 1) * per_p];
            let mut errors = vec![0usize; users];
            for r in chunk.iter().filter(|r| !r.success) {
                errors[r.receiver] += 1;
            }
            let ser: Vec<f64> = errors.iter().map(|&e| e as f64 / cfg.trials as f64).collect();
            let bits = (2.0 * prm.q as f64 + 1.0).log2();
            let rate = (0..users).map(|k| symbols_of(k) * bits * (1.0 - ser[k])).collect();
            PowerPoint {
                p_db,
                q: prm.q,
                lambda: prm.lambda,
                ser,
                errors,
                rate,
            }
        })
        .collect();
    let mut summary = RunSummary {
        run_id: cfg.run_id.clone(),
        trials: cfg.trials,
        d,
        d_prime,
        plan: dirs.plan.clone(),
        points,
        slope: Vec::new(),
        predicted_slope: (0..users)
            .map(|k| match cfg.q_mode {
                QMode::Coupled => symbols_of(k) * (1.0 - cfg.eps) / (d as f64 + d_prime as f64 + 1.0 + cfg.eps),
                QMode::Fixed(_) => 0.0,
            })
            .collect(),
        formula_per_user: cfg.channel.rx_antennas as f64 * d as f64 / (d + d_prime + 1) as f64,
    };
    summary.slope = estimate_dof_slope(&summary);
    summary
}

/// Per-user least-squares slope of rate against `log2(P)/2`, using the top
/// half of the power grid. `None` when fewer than two points remain.
pub fn estimate_dof_slope(summary: &RunSummary) -> Vec<Option<f64>> {
    let n = summary.points.len();
    let top = &summary.points[n / 2..];
    let xs: Vec<f64> = top.iter().map(|p| 0.5 * db_to_linear(p.p_db).log2()).collect();
    let users = summary.points.first().map_or(0, |p| p.rate.len());
    (0..users)
        .map(|k| {
            let ys: Vec<f64> = top.iter().map(|p| p.rate[k]).collect();
            least_squares_slope(&xs, &ys)
        })
        .collect()
}

pub fn write_trials_csv<W: Write>(cfg: &ExperimentConfig, records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let c = &cfg.channel;
    for r in records {
        w.write_record([
            cfg.run_id.clone(),
            c.users.to_string(),
            c.tx_antennas.to_string(),
            c.rx_antennas.to_string(),
            cfg.n.to_string(),
            r.q.to_string(),
            cfg.eps.to_string(),
            r.p_db.to_string(),
            r.trial.to_string(),
            r.receiver.to_string(),
            u8::from(r.success).to_string(),
            r.distance.to_string(),
            r.lambda.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Runs the experiment and writes the CSV and summary to the configured paths.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let (summary, records) = run_trials(cfg)?;
    if let Some(path) = &cfg.output {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        write_trials_csv(cfg, &records, std::io::BufWriter::new(file))?;
    }
    if let Some(path) = &cfg.summary {
        let text = serde_json::to_string_pretty(&summary)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(summary)
}
