use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ria::channel::{apply_channel, generate_channel, ChannelConfig, ChannelMatrix};
use ria::codec::{
    design_params, encode, sample_w, QMode, ReceiveModel, SchemeDirections, StructuredModel, SymbolVector,
};
use ria::diophantine::{min_distance_exact, min_distance_sample, RealMatrix};
use ria::directions::{enumerate_t, enumerate_tprime, verify_alignment, ExponentVector, StreamDirectionParams};
use ria::dofregion::{dof_formula, in_region, in_region_square, stream_plan, symmetric_point, DoFPoint, StreamPlan};

fn shape() -> impl Strategy<Value = (usize, usize, usize)> {
    (2usize..=3, 1usize..=2, 1usize..=2)
}

fn rational() -> impl Strategy<Value = BigRational> {
    (0i64..=12, 1i64..=6).prop_map(|(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channel_json_round_trip_is_bit_exact((k, m, n) in shape(), seed in any::<u64>()) {
        let h = generate_channel(&ChannelConfig::new(k, m, n, seed)).unwrap();
        let back = ChannelMatrix::from_json(&h.to_json().unwrap()).unwrap();
        let a: Vec<u64> = h.coeffs().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.coeffs().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn channel_is_linear((k, m, n) in shape(), seed in any::<u64>(),
                         xs in prop::collection::vec(-10.0f64..10.0, 12),
                         ys in prop::collection::vec(-10.0f64..10.0, 12)) {
        let h = generate_channel(&ChannelConfig::new(k, m, n, seed)).unwrap();
        let split = |v: &[f64]| -> Vec<Vec<f64>> { (0..k).map(|u| v[u * m..(u + 1) * m].to_vec()).collect() };
        let x = split(&xs);
        let y = split(&ys);
        let sum: Vec<Vec<f64>> = x.iter().zip(&y).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + q).collect()).collect();
        let ox = apply_channel(&h, &x, None).unwrap();
        let oy = apply_channel(&h, &y, None).unwrap();
        let os = apply_channel(&h, &sum, None).unwrap();
        for j in 0..k {
            for r in 0..n {
                let want = ox[j][r] + oy[j][r];
                let scale = want.abs().max(ox[j][r].abs()).max(oy[j][r].abs()).max(1e-300);
                prop_assert!((os[j][r] - want).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn generation_is_reproducible((k, m, n) in shape(), seed in any::<u64>()) {
        let cfg = ChannelConfig::new(k, m, n, seed);
        prop_assert_eq!(generate_channel(&cfg).unwrap(), generate_channel(&cfg).unwrap());
    }

    #[test]
    fn encode_is_linear(seed in any::<u64>(), a in prop::collection::vec(-2i64..=2, 8), b in prop::collection::vec(-2i64..=2, 8)) {
        let h = generate_channel(&ChannelConfig::new(2, 2, 1, seed)).unwrap();
        let dirs = SchemeDirections::build(&h, 2, &StreamPlan::single(2), &StreamDirectionParams::single()).unwrap();
        let dim = dirs.d();
        let ua = SymbolVector::new(2, 1, dim, a.iter().cycle().take(2 * dim).copied().collect()).unwrap();
        let ub = SymbolVector::new(2, 1, dim, b.iter().cycle().take(2 * dim).copied().collect()).unwrap();
        let us = SymbolVector::new(2, 1, dim, ua.values().iter().zip(ub.values()).map(|(x, y)| x + y).collect()).unwrap();
        let xa = encode(&ua, &dirs.transmit, 1.5, 4).unwrap();
        let xb = encode(&ub, &dirs.transmit, 1.5, 4).unwrap();
        let xs = encode(&us, &dirs.transmit, 1.5, 4).unwrap();
        for t in 0..2 {
            prop_assert!((xs[t] - xa[t] - xb[t]).abs() <= 1e-12 * (xa[t].abs() + xb[t].abs()).max(1.0));
        }
    }

    #[test]
    fn power_is_respected(seed in any::<u64>(), db in 0.0f64..60.0, q in 1u32..4) {
        let h = generate_channel(&ChannelConfig::new(2, 2, 1, seed)).unwrap();
        let dirs = SchemeDirections::build(&h, 2, &StreamPlan::single(2), &StreamDirectionParams::single()).unwrap();
        let power = 10f64.powf(db / 10.0);
        let p = design_params(power, 0.1, dirs.d() as f64, dirs.d_prime() as f64, QMode::Fixed(q), dirs.peak_amplitude(), 2).unwrap();
        // worst case: every symbol at +-Q, signed to match its direction
        let dim = dirs.d();
        let vals: Vec<i64> = (0..2)
            .flat_map(|_| dirs.transmit[0].values().iter().map(|v| if *v >= 0.0 { q as i64 } else { -(q as i64) }).collect::<Vec<_>>())
            .collect();
        let u = SymbolVector::new(2, 1, dim, vals).unwrap();
        let x = encode(&u, &dirs.transmit, p.lambda, q).unwrap();
        let energy: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!(energy <= power * (1.0 + 1e-12));
    }

    #[test]
    fn exponent_rank_is_a_bijection(len in 1usize..5, base in 1u32..5) {
        let total = (base as usize).pow(len as u32);
        let mut seen = vec![false; total];
        for idx in 0..total {
            let mut rest = idx;
            let mut e = vec![0u32; len];
            for slot in e.iter_mut().rev() {
                *slot = (rest % base as usize) as u32;
                rest /= base as usize;
            }
            let r = ExponentVector(e).rank(base).unwrap();
            prop_assert_eq!(r, idx);
            seen[r] = true;
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn closure_holds_for_small_sets(seed in any::<u64>(), n in 1u32..=3) {
        let h = generate_channel(&ChannelConfig::new(2, 1, 1, seed)).unwrap();
        let t = enumerate_t(&h, n).unwrap();
        let tp = enumerate_tprime(&h, n).unwrap();
        let rep = verify_alignment(&t, &tp, &h).unwrap();
        prop_assert!(rep.passed());
    }

    #[test]
    fn square_region_forms_agree(k in 2usize..=4, n in 1usize..=3, d in prop::collection::vec(rational(), 4)) {
        let point = DoFPoint::new(d[..k].to_vec()).unwrap();
        prop_assert_eq!(in_region(&point, k, n, n).unwrap().member, in_region_square(&point, k, n).unwrap().member);
    }

    #[test]
    fn symmetric_point_is_tight(k in 2usize..=8, m in 1usize..=6, n in 1usize..=6) {
        let (p, _) = symmetric_point(k, m, n);
        let rep = in_region(&p, k, m, n).unwrap();
        prop_assert!(rep.member);
        prop_assert_eq!(rep.binding_constraints.len(), k);
    }

    #[test]
    fn stream_plan_round_trips(m in 1usize..=5, d in prop::collection::vec(rational(), 2..=5)) {
        let point = DoFPoint::new(d).unwrap();
        let plan = stream_plan(&point, m).unwrap();
        prop_assert_eq!(plan.dof(m), point);
    }

    #[test]
    fn exhaustive_matches_brute_force(row in prop::collection::vec(-3.0f64..3.0, 1..=3), q in 1u32..=3) {
        let a = RealMatrix::row_vector(row.clone()).unwrap();
        let exact = min_distance_exact(&a, q).unwrap();
        let qi = q as i64;
        let side = 2 * qi + 1;
        let mut best = f64::INFINITY;
        for idx in 0..side.pow(row.len() as u32) {
            let mut rest = idx;
            let v: Vec<i64> = (0..row.len()).map(|_| { let d = rest % side - qi; rest /= side; d }).collect();
            if v.iter().any(|&x| x != 0) {
                best = best.min(a.image_norm(&v));
            }
        }
        prop_assert_eq!(exact.d_min, best);
        prop_assert_eq!(a.image_norm(&exact.argmin), best);
        let sampled = min_distance_sample(&a, q, 50, 3).unwrap();
        prop_assert!(sampled.d_min >= exact.d_min);
    }

    #[test]
    fn exact_distance_is_monotone_in_q(seed in any::<u64>()) {
        let h = generate_channel(&ChannelConfig::new(2, 1, 1, seed)).unwrap();
        let row: Vec<f64> = h.coeffs().to_vec();
        let a = RealMatrix::row_vector(row).unwrap();
        let mut prev = f64::INFINITY;
        for q in 1..=4 {
            let d = min_distance_exact(&a, q).unwrap().d_min;
            prop_assert!(d <= prev);
            prop_assert!(d > 0.0);
            prev = d;
        }
    }
}

#[test]
fn dof_formula_bounds() {
    for (k, n_ant) in [(2usize, 1usize), (2, 2), (3, 1)] {
        let limit = BigRational::new(BigInt::from(n_ant * k), BigInt::from(2));
        let mut prev = None;
        for n in 1..=12u32 {
            let total = dof_formula(k, n_ant, n_ant, n).unwrap().total;
            assert!(total < limit);
            if let Some(p) = prev {
                assert!(total > p);
            }
            if n >= 2 {
                let bound = BigRational::new(BigInt::from(n_ant * k * k * (k - 1) * n_ant * n_ant), BigInt::from(n));
                assert!((&limit - &total).abs() <= bound);
            }
            prev = Some(total);
        }
    }
}

#[test]
fn noiseless_constellation_is_distinct() {
    for c in 0..50u64 {
        let h = generate_channel(&ChannelConfig::new(2, 2, 2, 700 + c)).unwrap();
        let dirs = SchemeDirections::build(&h, 1, &StreamPlan::single(2), &StreamDirectionParams::single()).unwrap();
        let w = sample_w(2, c).unwrap();
        let p = design_params(1e3, 0.1, 1.0, 256.0, QMode::Fixed(1), dirs.peak_amplitude(), 2).unwrap();
        for j in 0..2 {
            let model = ReceiveModel::new(StructuredModel::build(j, &h, &dirs, &w).unwrap(), &p).unwrap();
            let pts = model.constellation();
            assert_eq!(pts.len(), 81 * 2);
            let mut min = f64::INFINITY;
            for a in 0..81 {
                for b in a + 1..81 {
                    let d = (pts[2 * a] - pts[2 * b]).hypot(pts[2 * a + 1] - pts[2 * b + 1]);
                    min = min.min(d);
                }
            }
            assert!(min > 0.0, "channel {c}, receiver {j}");
        }
    }
}

#[test]
fn interference_coefficients_stay_bounded() {
    let h = generate_channel(&ChannelConfig::new(3, 1, 1, 12)).unwrap();
    let dirs = SchemeDirections::build(&h, 2, &StreamPlan::single(3), &StreamDirectionParams::single()).unwrap();
    let w = sample_w(1, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for j in 0..3 {
        let model = StructuredModel::build(j, &h, &dirs, &w).unwrap();
        let bound = model.interference_bound(2);
        for _ in 0..100 {
            let symbols: Vec<SymbolVector> = (0..3)
                .map(|_| SymbolVector::random(1, 1, dirs.d(), 2, &mut rng))
                .collect();
            let coeffs = model.interference_coefficients(&symbols).unwrap();
            assert!(coeffs.iter().all(|c| c.abs() <= bound));
        }
    }
}
