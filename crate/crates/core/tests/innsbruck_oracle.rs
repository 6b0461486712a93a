//! Repeater tables and key rates against independent constructions.

use std::collections::HashMap;

use chainstat::bounds::{connect_fidelity, dejmps_werner};
use chainstat::counting::joint_error_pmf;
use chainstat::innsbruck::{
    dejmps, distillation_matrix, distillation_success, full_matrix, normalized_key_rate, q1_distribution,
    section_matrix, swap, werner_state, RepeaterConfig, RepeaterTables, W0, W1,
};
use rand::distributions::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Side {
    /// Pairs connected so far, fewer than all.
    Connecting(usize),
    /// All pairs connected, first distillation pending.
    Connected,
    Finished,
}

fn choose(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// One step of a single side: `(next, probability, counted)`. While `j`
/// of `q` pairs are connected the representative pair is one of them with
/// probability `j / q`, in which case its hold is counted.
fn side_steps(s: Side, q: usize, p: f64, success: f64) -> Vec<(Side, f64, bool)> {
    match s {
        Side::Connecting(j) => {
            let mut out = Vec::new();
            for m in 0..=q - j {
                let prob = choose(q - j, m) * p.powi(m as i32) * (1.0 - p).powi((q - j - m) as i32);
                let next = if j + m == q { Side::Connected } else { Side::Connecting(j + m) };
                let counted = j as f64 / q as f64;
                if counted > 0.0 {
                    out.push((next, prob * counted, true));
                }
                if counted < 1.0 {
                    out.push((next, prob * (1.0 - counted), false));
                }
            }
            out
        }
        Side::Connected => vec![
            (Side::Finished, success, false),
            (Side::Connecting(0), 1.0 - success, false),
        ],
        Side::Finished => vec![(Side::Finished, 1.0, false)],
    }
}

/// Unnormalised `p(t, k0, k1)` for `t <= t_max` by enumerating every walk of
/// both sides, merged by state.
fn enumerate_walks(q: usize, p: f64, lambda: f64, t_max: usize) -> Vec<HashMap<(usize, usize), f64>> {
    let success = distillation_success(lambda, q);
    let mut live: HashMap<(Side, Side, usize, usize), f64> = HashMap::new();
    live.insert((Side::Connecting(0), Side::Connecting(0), 0, 0), 1.0);
    let mut out = vec![HashMap::new(); t_max + 1];
    for t in 1..=t_max {
        let mut next: HashMap<(Side, Side, usize, usize), f64> = HashMap::new();
        for (&(a, b, k0, k1), &w) in &live {
            let waits = a == Side::Finished;
            for (na, pa, counted) in side_steps(a, q, p, success) {
                for (nb, pb, _) in side_steps(b, q, p, success) {
                    let key = (na, nb, k0 + counted as usize, k1 + waits as usize);
                    *next.entry(key).or_default() += w * pa * pb;
                }
            }
        }
        live.clear();
        for (key @ (a, b, k0, k1), w) in next {
            if a == Side::Finished && b == Side::Finished {
                *out[t].entry((k0, k1)).or_default() += w;
            } else {
                live.insert(key, w);
            }
        }
    }
    out
}

#[test]
fn joint_waits_match_walk_enumeration() {
    for (p, lambda) in [(0.5, 0.8), (0.3, 0.6), (0.9, 1.0)] {
        let q = 2;
        let t_max = 8;
        let walks = enumerate_walks(q, p, lambda, t_max);
        let tables = RepeaterTables::with_steps(q, p, lambda, t_max, t_max).unwrap();
        let full = full_matrix(&distillation_matrix(&section_matrix(q, p, W0).unwrap(), lambda, q).unwrap(), W1).unwrap();
        assert_eq!(full.counters(), [W0, W1]);
        let pmf = tables.pmf();
        for t in 0..=t_max {
            let total: f64 = walks[t].values().sum();
            assert!((total - pmf[t]).abs() < 1e-12, "t={t}");
            if total == 0.0 {
                continue;
            }
            let coeffs = tables.joint_coefficients(t);
            let dft = joint_error_pmf(&full, t).unwrap();
            for k0 in 0..=t {
                for k1 in 0..=t {
                    let want = walks[t].get(&(k0, k1)).copied().unwrap_or(0.0) / total;
                    let got = coeffs[k0 * (t + 1) + k1] / total;
                    assert!((got - want).abs() < 1e-9, "t={t} ({k0},{k1}): {got} vs {want}");
                    assert!((dft.get(&[k0, k1]) - want).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn q1_law_matches_sampling() {
    let (q0, lambda) = (4, 0.5);
    let law = q1_distribution(q0, lambda);
    let coin = Bernoulli::new(lambda).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 1_000_000;
    let mut counts = vec![0usize; law.len()];
    for _ in 0..n {
        let side = |rng: &mut ChaCha8Rng| (0..q0 / 2).filter(|_| coin.sample(rng)).count();
        let q1 = side(&mut rng).min(side(&mut rng));
        counts[q1] += 1;
    }
    for (x, &c) in counts.iter().enumerate() {
        let freq = c as f64 / n as f64;
        let sigma = (law[x] * (1.0 - law[x]) / n as f64).sqrt();
        assert!((freq - law[x]).abs() <= 3.0 * sigma.max(1e-12), "x={x}: {freq} vs {}", law[x]);
    }
}

#[test]
fn werner_maps_agree_with_state_algebra() {
    for i in 0..8 {
        let f = 0.6 + 0.05 * i as f64;
        let w = werner_state(f);
        let (d, _) = dejmps(&w, &w).unwrap();
        assert!((d.twirl().fidelity() - dejmps_werner(f)).abs() < 1e-12);
        let g = 0.97 - 0.03 * i as f64;
        for eps_l in [0.0, 1e-3, 0.05] {
            let s = swap(&w, &werner_state(g)).decay(eps_l);
            assert!((s.fidelity() - connect_fidelity(f, g, eps_l)).abs() < 1e-12);
        }
    }
}

#[test]
fn rate_never_increases_with_memory_error() {
    let base = RepeaterConfig {
        q0: 2,
        p: 0.1,
        samples: 100_000,
        seed: 5,
        ..RepeaterConfig::default()
    };
    let rates: Vec<_> = [1e-4, 1e-3, 1e-2]
        .iter()
        .map(|&eps_w| normalized_key_rate(&RepeaterConfig { eps_w, ..base.clone() }).unwrap())
        .collect();
    for w in rates.windows(2) {
        assert!(w[1].rate <= w[0].rate + 2.0 * (w[0].stderr + w[1].stderr));
        assert!(w[1].rate >= 0.0);
    }
}

#[test]
fn doubling_samples_stays_within_two_standard_errors() {
    let trials = 40;
    let mut agree = 0;
    for seed in 0..trials {
        let cfg = RepeaterConfig {
            q0: 3,
            p: 0.2,
            eps_w: 1e-3,
            lambda_grid: vec![0.8],
            samples: 4_000,
            seed,
            ..RepeaterConfig::default()
        };
        let a = normalized_key_rate(&cfg).unwrap();
        let b = normalized_key_rate(&RepeaterConfig { samples: 8_000, ..cfg }).unwrap();
        if (a.rate - b.rate).abs() < 2.0 * a.stderr {
            agree += 1;
        }
    }
    assert!(agree * 100 >= 95 * trials, "{agree} of {trials}");
}
