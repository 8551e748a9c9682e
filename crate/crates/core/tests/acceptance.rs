//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints one PASS/FAIL line; exits nonzero if any fails.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ria::channel::{generate_channel, ChannelConfig, ChannelMatrix, NoiseModel};
use ria::codec::{design_params, sample_w, QMode, ReceiveModel, SchemeDirections, StructuredModel, SymbolVector};
use ria::diophantine::{RealMatrix, SearchMode};
use ria::directions::{enumerate_t, enumerate_tprime, verify_alignment, StreamDirectionParams};
use ria::dofregion::{dof_formula, in_region, in_region_square, stream_plan, symmetric_point, DoFPoint, StreamPlan};
use ria::harness::{run_probe, run_trials, write_trials_csv, ExperimentConfig, ProbeConfig, ProbeMatrix};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn workers() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn cross_coords(k: usize, m: usize, n: usize) -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    for j in 0..k {
        for kk in 0..k {
            if kk == j {
                continue;
            }
            for r in 0..n {
                for t in 0..m {
                    out.push((j, kk, r, t));
                }
            }
        }
    }
    out
}

const CLOSURE_CONFIGS: [(usize, usize, usize, u32); 5] =
    [(2, 1, 1, 3), (2, 2, 2, 1), (2, 2, 2, 2), (3, 1, 1, 2), (2, 1, 2, 1)];

fn alignment_closure() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for (i, &(k, m, n, order)) in CLOSURE_CONFIGS.iter().enumerate() {
        let h = generate_channel(&ChannelConfig::new(k, m, n, 100 + i as u64)).map_err(|e| e.to_string())?;
        let t = enumerate_t(&h, order).map_err(|e| e.to_string())?;
        let tp = enumerate_tprime(&h, order).map_err(|e| e.to_string())?;
        let index: HashMap<Vec<u32>, usize> = (0..tp.len()).map(|i| (tp.exponents(i).to_vec(), i)).collect();
        let coords = cross_coords(k, m, n);
        for (c, &(j, kk, r, tt)) in coords.iter().enumerate() {
            let coeff = h.coeff(j, kk, r, tt);
            for i in 0..t.len() {
                let mut e = t.exponents(i).to_vec();
                e[c] += 1;
                let Some(&target) = index.get(&e) else {
                    return Err(format!(
                        "({k},{m},{n},{order}): exponent {e:?} missing from interference set"
                    ));
                };
                let dev = rel(coeff * t.values()[i], tp.values()[target]);
                worst = worst.max(dev);
                if dev > 1e-10 {
                    return Err(format!("({k},{m},{n},{order}): relative deviation {dev:e}"));
                }
                checked += 1;
            }
        }
        let report = verify_alignment(&t, &tp, &h).map_err(|e| e.to_string())?;
        if !report.passed() || report.membership_failures != 0 {
            return Err(format!("library check failed for ({k},{m},{n},{order})"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(10) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("{checked} products, max rel dev {worst:.1e}, {elapsed:.2?}"))
}

fn cardinalities() -> Outcome {
    let mut parts = Vec::new();
    for (i, &(k, m, n, order)) in CLOSURE_CONFIGS.iter().enumerate() {
        let h = generate_channel(&ChannelConfig::new(k, m, n, 200 + i as u64)).map_err(|e| e.to_string())?;
        let exp = (k * (k - 1) * n * m) as u32;
        let want_t = BigUint::from(order).pow(exp);
        let want_tp = BigUint::from(order + 1).pow(exp);
        let t = enumerate_t(&h, order).map_err(|e| e.to_string())?;
        let tp = enumerate_tprime(&h, order).map_err(|e| e.to_string())?;
        if BigUint::from(t.len()) != want_t || BigUint::from(tp.len()) != want_tp {
            return Err(format!(
                "({k},{m},{n},{order}): got {}/{}, want {want_t}/{want_tp}",
                t.len(),
                tp.len()
            ));
        }
        parts.push(format!("{}/{}", t.len(), tp.len()));
    }
    Ok(parts.join(" "))
}

fn reshape_identity() -> Outcome {
    let (k, m, n) = (2, 2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst = 0.0f64;
    for c in 0..10u64 {
        let h = generate_channel(&ChannelConfig::new(k, m, n, 300 + c)).map_err(|e| e.to_string())?;
        let dirs = SchemeDirections::build(&h, 1, &StreamPlan::single(k), &StreamDirectionParams::single())
            .map_err(|e| e.to_string())?;
        let w = sample_w(n, 400 + c).map_err(|e| e.to_string())?;
        let models: Vec<StructuredModel> = (0..k)
            .map(|j| StructuredModel::build(j, &h, &dirs, &w))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let t = dirs.transmit[0].values().to_vec();
        for _ in 0..100 {
            let symbols: Vec<SymbolVector> = (0..k)
                .map(|_| SymbolVector::random(m, 1, t.len(), 3, &mut rng))
                .collect();
            // transmit signal and channel output written out by hand
            let x: Vec<Vec<f64>> = symbols
                .iter()
                .map(|u| {
                    (0..m)
                        .map(|tt| (0..t.len()).map(|i| t[i] * u.get(tt, 0, i) as f64).sum())
                        .collect()
                })
                .collect();
            for (j, model) in models.iter().enumerate() {
                let y: Vec<f64> = (0..n)
                    .map(|r| {
                        (0..k)
                            .map(|kk| (0..m).map(|tt| h.coeff(j, kk, r, tt) * x[kk][tt]).sum::<f64>())
                            .sum()
                    })
                    .collect();
                let wy: Vec<f64> = (0..n).map(|r| (0..n).map(|c| w.get(r, c) * y[c]).sum()).collect();
                let pred = model.predict_weighted(&symbols).map_err(|e| e.to_string())?;
                let num: f64 = pred.iter().zip(&wy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let den: f64 = wy.iter().map(|v| v * v).sum::<f64>().sqrt();
                let e = if den == 0.0 { num } else { num / den };
                worst = worst.max(e);
                if e > 1e-9 {
                    return Err(format!("channel {c}, receiver {j}: relative error {e:e}"));
                }
            }
        }
    }
    Ok(format!("2000 comparisons, max rel err {worst:.1e}"))
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let trials = 2000;
    let cfg = ExperimentConfig {
        run_id: "acceptance".into(),
        channel: ChannelConfig::new(2, 2, 2, 11),
        n: 1,
        eps: 0.1,
        q_mode: QMode::Fixed(1),
        dof_point: None,
        p_grid_db: vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
        trials,
        master_seed: 2024,
        noiseless: false,
        workers: workers(),
        output: None,
        summary: None,
    };
    let (summary, _) = run_trials(&cfg).map_err(|e| e.to_string())?;
    let t = trials as f64;
    for j in 0..2 {
        let ser: Vec<f64> = summary.points.iter().map(|p| p.ser[j]).collect();
        for w in ser.windows(2) {
            let sigma = ((w[0] * (1.0 - w[0]) + w[1] * (1.0 - w[1])) / t).sqrt();
            if w[1] > w[0] + 2.0 * sigma {
                return Err(format!(
                    "receiver {j}: SER rose from {} to {} (2 sigma = {})",
                    w[0],
                    w[1],
                    2.0 * sigma
                ));
            }
        }
        let top = *ser.last().unwrap();
        if top >= 1e-3 {
            return Err(format!("receiver {j}: SER {top} at top of grid"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(300) {
        return Err(format!("took {elapsed:?}"));
    }
    let curves: Vec<String> = (0..2)
        .map(|j| {
            summary
                .points
                .iter()
                .map(|p| format!("{:.4}", p.ser[j]))
                .collect::<Vec<_>>()
                .join("/")
        })
        .collect();
    Ok(format!("SER rx0 {} rx1 {}, {elapsed:.2?}", curves[0], curves[1]))
}

fn whitening_invariance() -> Outcome {
    let mut agree = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for inst in 0..100u64 {
        let ch = ChannelConfig::new(2, 2, 2, 500 + inst / 10);
        let h: ChannelMatrix = generate_channel(&ch).map_err(|e| e.to_string())?;
        let dirs = SchemeDirections::build(&h, 1, &StreamPlan::single(2), &StreamDirectionParams::single())
            .map_err(|e| e.to_string())?;
        let w = sample_w(2, 600 + inst / 10).map_err(|e| e.to_string())?;
        let params = design_params(1e2, 0.1, 1.0, 256.0, QMode::Fixed(1), dirs.peak_amplitude(), 2)
            .map_err(|e| e.to_string())?;
        let j = (inst % 2) as usize;
        let model = ReceiveModel::new(
            StructuredModel::build(j, &h, &dirs, &w).map_err(|e| e.to_string())?,
            &params,
        )
        .map_err(|e| e.to_string())?;
        let symbols: Vec<SymbolVector> = (0..2).map(|_| SymbolVector::random(2, 1, 1, 1, &mut rng)).collect();
        let flat = model.structured().flatten(&symbols).map_err(|e| e.to_string())?;
        let mut noise = NoiseModel::unit(inst).source(77);
        let y: Vec<f64> = model
            .structured()
            .point(&flat)
            .iter()
            .map(|v| params.lambda * v + noise.sample())
            .collect();

        // both metrics by brute force over all 81 hypotheses
        let wm = nalgebra::DMatrix::from_fn(2, 2, |r, c| w.get(r, c));
        let ginv = (&wm * wm.transpose()).try_inverse().ok_or("singular W")?;
        let z = &wm * nalgebra::DVector::from_column_slice(&y);
        let (mut best_plain, mut best_weighted) = ((f64::INFINITY, vec![]), (f64::INFINITY, vec![]));
        for idx in 0..81u32 {
            let hyp: Vec<i64> = (0..4).rev().map(|p| ((idx / 3u32.pow(p)) % 3) as i64 - 1).collect();
            let p = model.structured().point(&hyp);
            let plain: f64 = y.iter().zip(&p).map(|(a, b)| (a - params.lambda * b).powi(2)).sum();
            let wp = &wm * nalgebra::DVector::from_iterator(2, p.iter().map(|v| params.lambda * v));
            let v = &z - wp;
            let weighted = (v.transpose() * &ginv * &v)[(0, 0)];
            if plain < best_plain.0 {
                best_plain = (plain, hyp.clone());
            }
            if weighted < best_weighted.0 {
                best_weighted = (weighted, hyp);
            }
        }
        let lib_plain = model.decode(&y).map_err(|e| e.to_string())?;
        let lib_weighted = model.decode_weighted(&y).map_err(|e| e.to_string())?;
        if best_plain.1 != best_weighted.1
            || lib_plain.hypothesis != best_plain.1
            || lib_weighted.hypothesis != best_plain.1
        {
            return Err(format!("instance {inst}: argmins disagree"));
        }
        agree += 1;
    }
    Ok(format!("{agree}/100 argmins agree"))
}

fn brute_min(a: &RealMatrix, q: i64) -> f64 {
    let dim = a.cols();
    let total = (2 * q + 1).pow(dim as u32);
    let mut best = f64::INFINITY;
    for idx in 0..total {
        let mut rest = idx;
        let v: Vec<i64> = (0..dim)
            .map(|_| {
                let d = rest % (2 * q + 1) - q;
                rest /= 2 * q + 1;
                d
            })
            .collect();
        if v.iter().all(|&x| x == 0) {
            continue;
        }
        let norm = (0..a.rows())
            .map(|r| (0..dim).map(|c| a.get(r, c) * v[c] as f64).sum::<f64>().abs())
            .fold(0.0, f64::max);
        best = best.min(norm);
    }
    best
}

fn min_distance_exponent() -> Outcome {
    let start = Instant::now();
    let cfg = ProbeConfig {
        channel: ChannelConfig::new(2, 1, 1, 900),
        n: 1,
        channels: 50,
        q_values: vec![1, 2, 4, 8],
        mode: SearchMode::Exhaustive,
        matrix: ProbeMatrix::Raw,
        receiver: 0,
        budget: 1,
        dof_point: None,
        output: None,
    };
    let summary = run_probe(&cfg).map_err(|e| e.to_string())?;
    if summary.channels.iter().any(|c| c.cols != 5 || c.rows != 1) {
        return Err("probed matrix is not 1 x 5".into());
    }
    if !summary.all_positive
        || summary
            .channels
            .iter()
            .flat_map(|c| &c.records)
            .any(|r| !r.exact || r.d_min <= 0.0)
    {
        return Err("a record is zero or inexact".into());
    }
    // spot-check the first channel against plain enumeration
    let first = &summary.channels[0];
    let mut ch = cfg.channel;
    ch.seed = first.channel_seed;
    let a = ria::harness::probe_matrix(&cfg, &ch).map_err(|e| e.to_string())?;
    for r in first.records.iter().take(2) {
        let b = brute_min(&a, r.q as i64);
        if b != r.d_min {
            return Err(format!("Q={}: exhaustive {} vs brute force {b}", r.q, r.d_min));
        }
    }
    let median = summary.median_slope.ok_or("no fitted slopes")?;
    if median < -6.0 {
        return Err(format!("median slope {median} below -6"));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(120) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!(
        "median slope {median:.3} >= -6 over 50 channels, {elapsed:.2?}"
    ))
}

fn exact_total(k: u64, n_ant: u64, n: u64) -> BigRational {
    let exp = (k * (k - 1) * n_ant * n_ant) as u32;
    let d = BigInt::from(n).pow(exp);
    let dp = BigInt::from(n + 1).pow(exp);
    BigRational::new(BigInt::from(n_ant * k) * &d, &d + &dp + BigInt::one())
}

fn dof_convergence() -> Outcome {
    let limit = BigRational::from_integer(BigInt::from(2));
    let at = dof_formula(2, 2, 2, 1000).map_err(|e| e.to_string())?;
    if at.total != exact_total(2, 2, 1000) {
        return Err("finite-n total disagrees with direct computation".into());
    }
    let gap = (&limit - &at.total).abs() / &limit;
    if gap > BigRational::new(BigInt::from(1), BigInt::from(100)) {
        return Err(format!("relative gap {gap} above 1%"));
    }
    let mut prev = BigRational::zero();
    for p in 0..=10 {
        let n = 1u32 << p;
        let v = dof_formula(2, 2, 2, n).map_err(|e| e.to_string())?.total;
        if v <= prev || v >= limit {
            return Err(format!("not monotone below 2 at n={n}"));
        }
        prev = v;
    }
    let pct = ria::dofregion::to_decimal(&(gap * BigRational::from_integer(BigInt::from(100))), 4);
    Ok(format!(
        "n=1000 total {} (gap {pct}%), monotone over n=1..1024",
        ria::dofregion::to_decimal(&at.total, 6)
    ))
}

fn random_rational(rng: &mut ChaCha8Rng, max_num: i64, den: i64) -> BigRational {
    BigRational::new(
        BigInt::from(rng.random_range(0..=max_num)),
        BigInt::from(rng.random_range(1..=den)),
    )
}

fn region_arithmetic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let (k, m, n) = (
            rng.random_range(2..=6usize),
            rng.random_range(1..=5usize),
            rng.random_range(1..=5usize),
        );
        let (p, total) = symmetric_point(k, m, n);
        let dk = BigRational::new(BigInt::from(m * n), BigInt::from(m + n));
        if p.entries().iter().any(|v| *v != dk) || total != &dk * BigRational::from_integer(BigInt::from(k)) {
            return Err(format!("symmetric point wrong for ({k},{m},{n})"));
        }
        let rep = in_region(&p, k, m, n).map_err(|e| e.to_string())?;
        if !rep.member || rep.binding_constraints.len() != k {
            return Err(format!("symmetric point not tight for ({k},{m},{n})"));
        }
    }
    let mut agree = 0;
    for _ in 0..1000 {
        let k = rng.random_range(2..=4usize);
        let n = rng.random_range(1..=3usize);
        let d: Vec<BigRational> = (0..k).map(|_| random_rational(&mut rng, 3 * n as i64, 6)).collect();
        let point = DoFPoint::new(d.clone()).map_err(|e| e.to_string())?;
        let general = in_region(&point, k, n, n).map_err(|e| e.to_string())?.member;
        let square = in_region_square(&point, k, n).map_err(|e| e.to_string())?.member;
        let cap = BigRational::from_integer(BigInt::from(n));
        let oracle = (0..k).all(|i| {
            let other = (0..k).filter(|&x| x != i).map(|x| d[x].clone()).max().unwrap();
            &d[i] + other <= cap
        });
        if general != square || general != oracle {
            return Err(format!("membership disagreement at {point}"));
        }
        agree += 1;
    }
    let two_thirds = DoFPoint::parse("2/3,2/3,2/3").map_err(|e| e.to_string())?;
    let plan = stream_plan(&two_thirds, 2).map_err(|e| e.to_string())?;
    if plan.rho != 3 || plan.streams != vec![1, 1, 1] || plan.dof(2) != two_thirds {
        return Err(format!("stream plan of 2/3 point: {plan:?}"));
    }
    for _ in 0..200 {
        let k = rng.random_range(2..=4usize);
        let m = rng.random_range(1..=4usize);
        let d: Vec<BigRational> = (0..k).map(|_| random_rational(&mut rng, 8, 9)).collect();
        let point = DoFPoint::new(d).map_err(|e| e.to_string())?;
        let plan = stream_plan(&point, m).map_err(|e| e.to_string())?;
        if plan.dof(m) != point {
            return Err(format!("stream plan round trip failed at {point}"));
        }
    }
    Ok(format!(
        "20 symmetric points tight, {agree}/1000 agree, plans round-trip"
    ))
}

fn reproducibility() -> Outcome {
    let mut cfg = ExperimentConfig {
        run_id: "repro".into(),
        channel: ChannelConfig::new(2, 2, 2, 31),
        n: 1,
        eps: 0.1,
        q_mode: QMode::Fixed(1),
        dof_point: None,
        p_grid_db: vec![5.0, 15.0, 25.0],
        trials: 300,
        master_seed: 99,
        noiseless: false,
        workers: 1,
        output: None,
        summary: None,
    };
    let mut bytes = Vec::new();
    for w in [1, 4, 1, 4] {
        cfg.workers = w;
        let (_, records) = run_trials(&cfg).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_trials_csv(&cfg, &records, &mut buf).map_err(|e| e.to_string())?;
        bytes.push(buf);
    }
    if bytes.windows(2).any(|w| w[0] != w[1]) {
        return Err("CSV bytes differ between runs".into());
    }
    let rows = bytes[0].iter().filter(|&&b| b == b'\n').count() - 1;
    if rows != 3 * 300 * 2 {
        return Err(format!("{rows} rows"));
    }
    Ok(format!(
        "4 runs byte-identical ({} bytes, workers 1 and 4)",
        bytes[0].len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("alignment closure", alignment_closure),
        ("direction set cardinalities", cardinalities),
        ("reshape identity", reshape_identity),
        ("end-to-end decoding", end_to_end),
        ("whitening invariance", whitening_invariance),
        ("min-distance exponent", min_distance_exponent),
        ("DoF formula convergence", dof_convergence),
        ("region arithmetic", region_arithmetic),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
