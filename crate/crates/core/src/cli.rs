//! Command-line driver. Every subcommand prints JSON on stdout; failures are
//! reported by the binary as one `error: <kind>: <message>` line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde_json::{json, Value};

use crate::channel::{generate_channel, ChannelConfig, ChannelMatrix, CoeffProfile};
use crate::diophantine::{fit_distance_exponent, min_distance, SearchMode};
use crate::directions::{
    build_closure_map, check_direct_links, enumerate_t, enumerate_tprime, verify_with_map, LinkShape,
    ALIGNMENT_TOLERANCE,
};
use crate::dofregion::{
    direction_budget, dof_formula, in_region, in_region_square, per_user_at, per_user_limit, region_constraints,
    region_vertices_2d, stream_plan, symmetric_point, to_decimal, DoFPoint,
};
use crate::error::{Error, Result};
use crate::harness::{
    matrix_for_channel, reference_slope, run_experiment, run_probe, ExperimentConfig, ProbeConfig, ProbeMatrix,
};

const DECIMAL_DIGITS: usize = 50;

#[derive(Debug, Parser)]
#[command(
    name = "ria",
    version,
    about = "Real interference alignment for MIMO interference channels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a channel and write it as JSON.
    GenChannel(GenChannelArgs),
    /// Build the transmit and interference direction sets.
    Directions(DirectionsArgs),
    /// Verify that every cross-link product lands in the interference set.
    AlignCheck(AlignCheckArgs),
    /// Run a Monte Carlo experiment from a JSON config.
    Simulate(SimulateArgs),
    /// Minimum image norm of a receive matrix over an integer box.
    MinDistance(MinDistanceArgs),
    /// Minimum-distance probe over many channels from a JSON config.
    Probe(ProbeArgs),
    /// DoF region queries in exact arithmetic.
    Dof(DofArgs),
}

#[derive(Debug, Args)]
pub struct GenChannelArgs {
    #[arg(long = "K")]
    pub users: usize,
    #[arg(long = "M")]
    pub tx: usize,
    #[arg(long = "N")]
    pub rx: usize,
    #[arg(long)]
    pub seed: u64,
    /// bounded-uniform or standard-normal
    #[arg(long, default_value = "bounded-uniform")]
    pub profile: CoeffProfile,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DirectionsArgs {
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long)]
    pub n: u32,
    /// Directory for `transmit.csv` and `interference.csv`.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignCheckArgs {
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long)]
    pub n: u32,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the worker count of the config.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MinDistanceArgs {
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long)]
    pub n: u32,
    /// Box half-widths, comma separated.
    #[arg(long = "Q", value_delimiter = ',', required = true)]
    pub q: Vec<u32>,
    /// exhaustive, meet-in-middle or random-sample
    #[arg(long, default_value = "exhaustive")]
    pub mode: SearchMode,
    /// raw or hypothesis
    #[arg(long, default_value = "raw")]
    pub matrix: ProbeMatrix,
    #[arg(long, default_value_t = 0)]
    pub receiver: usize,
    /// Samples per Q in random-sample mode.
    #[arg(long, default_value_t = 100_000)]
    pub budget: u64,
    /// Seed for the combining matrix, stream scales and sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Target DoF point; symmetric point when absent.
    #[arg(long)]
    pub point: Option<String>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct DofArgs {
    #[arg(long = "K")]
    pub users: usize,
    #[arg(long = "M")]
    pub tx: usize,
    #[arg(long = "N")]
    pub rx: usize,
    /// Point to test, e.g. `2/3,2/3,2/3`.
    #[arg(long)]
    pub point: Option<String>,
    /// Report the finite-n total DoF.
    #[arg(long)]
    pub n: Option<u32>,
    /// Report the stream plan of the point (symmetric point by default).
    #[arg(long)]
    pub plan: bool,
}

pub fn run(cli: Cli) -> Result<Value> {
    match cli.command {
        Command::GenChannel(a) => gen_channel(a),
        Command::Directions(a) => directions(a),
        Command::AlignCheck(a) => align_check(a),
        Command::Simulate(a) => simulate(a),
        Command::MinDistance(a) => min_distance_cmd(a),
        Command::Probe(a) => {
            let cfg = ProbeConfig::load(&a.config)?;
            Ok(serde_json::to_value(run_probe(&cfg)?)?)
        }
        Command::Dof(a) => dof(a),
    }
}

fn gen_channel(a: GenChannelArgs) -> Result<Value> {
    let cfg = ChannelConfig::new(a.users, a.tx, a.rx, a.seed).with_profile(a.profile);
    let h = generate_channel(&cfg)?;
    match &a.out {
        Some(path) => {
            h.save(path)?;
            Ok(json!({ "out": path, "K": a.users, "M": a.tx, "N": a.rx, "seed": a.seed }))
        }
        None => Ok(serde_json::from_str(&h.to_json()?)?),
    }
}

fn load_channel(path: &Path) -> Result<ChannelMatrix> {
    ChannelMatrix::load(path)
}

fn directions(a: DirectionsArgs) -> Result<Value> {
    let h = load_channel(&a.channel)?;
    let t = enumerate_t(&h, a.n)?;
    let tp = enumerate_tprime(&h, a.n)?;
    if let Some(dir) = &a.dump {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, table) in [("transmit.csv", &t), ("interference.csv", &tp)] {
            let path = dir.join(name);
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            table.write_csv(std::io::BufWriter::new(file))?;
        }
    }
    let direct = check_direct_links(&t, &tp, &h, ALIGNMENT_TOLERANCE);
    Ok(json!({
        "n": a.n,
        "cross_links": LinkShape::of(&h).coord_count(),
        "D": t.len(),
        "D_prime": tp.len(),
        "direct_links_in_interference_set": direct.in_set,
        "direct_links_checked": direct.checked,
    }))
}

fn align_check(a: AlignCheckArgs) -> Result<Value> {
    let h = load_channel(&a.channel)?;
    let t = enumerate_t(&h, a.n)?;
    let tp = enumerate_tprime(&h, a.n)?;
    let map = build_closure_map(&t, &tp)?;
    let report = verify_with_map(&t, &tp, &map, &h);
    if !report.passed() {
        return Err(Error::Closure(format!(
            "{} membership failures, max relative deviation {:e}",
            report.membership_failures, report.max_rel_deviation
        )));
    }
    Ok(json!({
        "verified": true,
        "checked": report.checked,
        "max_rel_deviation": report.max_rel_deviation,
        "tolerance": report.tolerance,
    }))
}

fn simulate(a: SimulateArgs) -> Result<Value> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    Ok(serde_json::to_value(run_experiment(&cfg)?)?)
}

fn min_distance_cmd(a: MinDistanceArgs) -> Result<Value> {
    let h = load_channel(&a.channel)?;
    let point = match &a.point {
        Some(p) => DoFPoint::parse(p)?,
        None => symmetric_point(h.users(), h.tx_antennas(), h.rx_antennas()).0,
    };
    let plan = stream_plan(&point, h.tx_antennas())?;
    if a.receiver >= h.users() {
        return Err(Error::InvalidConfig(format!("receiver {} out of range", a.receiver)));
    }
    let m = matrix_for_channel(&h, a.n, &plan, a.receiver, a.matrix, a.seed)?;
    let records =
        a.q.iter()
            .map(|&q| min_distance(&m, q, a.mode, a.budget, a.seed))
            .collect::<Result<Vec<_>>>()?;
    let reference = reference_slope(&m);
    let fit = if records.iter().filter(|r| r.exact).count() >= 3 {
        Some(fit_distance_exponent(&records, None, reference)?)
    } else {
        None
    };
    let rows: Vec<Value> = records
        .iter()
        .map(|r| json!({ "Q": r.q, "d_min": r.d_min, "argmin": r.argmin, "exact": r.exact, "mode": r.mode.as_str() }))
        .collect();
    Ok(json!({
        "rows": m.rows(),
        "cols": m.cols(),
        "matrix": a.matrix.as_str(),
        "records": rows,
        "fit": fit,
        "reference_slope": reference,
    }))
}

fn rat_json(r: &BigRational) -> Value {
    json!({ "exact": r.to_string(), "decimal": to_decimal(r, DECIMAL_DIGITS) })
}

fn dof(a: DofArgs) -> Result<Value> {
    let (users, tx, rx) = (a.users, a.tx, a.rx);
    ChannelConfig::new(users, tx, rx, 0).validate()?;
    let (sym, total) = symmetric_point(users, tx, rx);
    let mut out = json!({
        "K": users,
        "M": tx,
        "N": rx,
        "symmetric": {
            "point": sym.entries().iter().map(ToString::to_string).collect::<Vec<_>>(),
            "decimal": sym.to_f64(),
            "total": rat_json(&total),
        },
        "constraints": region_constraints(users, tx, rx),
    });
    if users == 2 {
        let verts: Vec<[String; 2]> = region_vertices_2d(tx, rx)
            .iter()
            .map(|(x, y)| [x.to_string(), y.to_string()])
            .collect();
        out["vertices"] = json!(verts);
    }
    let point = match &a.point {
        Some(p) => {
            let d = DoFPoint::parse(p)?;
            let report = in_region(&d, users, tx, rx)?;
            let mut v = serde_json::to_value(&report)?;
            v["point"] = json!(d.entries().iter().map(ToString::to_string).collect::<Vec<_>>());
            v["total"] = rat_json(&d.total());
            if tx == rx {
                v["square-form-member"] = json!(in_region_square(&d, users, rx)?.member);
            }
            out["query"] = v;
            d
        }
        None => sym,
    };
    let formula = match a.n {
        Some(n) => {
            let f = dof_formula(users, tx, rx, n)?;
            out["formula"] = json!({
                "n": n,
                "D": f.d.to_string(),
                "D_prime": f.d_prime.to_string(),
                "total": rat_json(&f.total),
                "limit": f.limit.as_ref().map(rat_json),
                "gap": f.gap.as_ref().map(rat_json),
            });
            Some(f)
        }
        None => None,
    };
    if a.plan {
        let plan = stream_plan(&point, tx)?;
        let mut users_out = Vec::new();
        for j in 0..users {
            let mut u = json!({
                "streams": plan.streams[j],
                "limit": rat_json(&per_user_limit(&plan, j, tx)),
            });
            if let Some(f) = &formula {
                let b = direction_budget(&plan, j, &f.d, &f.d_prime, tx, rx);
                u["at_n"] = rat_json(&per_user_at(&plan, j, tx, &f.d, &f.d_prime));
                u["budget"] = json!({
                    "used": b.budget.to_string(),
                    "middle": b.middle.to_string(),
                    "cap": b.cap.to_string(),
                    "chain_holds": b.chain_holds,
                });
            }
            users_out.push(u);
        }
        out["plan"] = json!({ "rho": plan.rho, "users": users_out });
    }
    Ok(out)
}
