//! Residue-based statistics against matrix powers and the fundamental matrix
//! on randomized absorbing chains.

use chainstat::pgf::{analyze, pgf, poles_and_residues};
use chainstat::{pmf_series, CountedMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense absorbing chain with entries that are multiples of 1/10. Every
/// transient column sends at least one unit to a higher index so the chain
/// terminates with probability one.
fn random_chain(rng: &mut ChaCha8Rng, dim: usize) -> CountedMatrix {
    let terminals = if dim > 3 && rng.gen_bool(0.5) { 2 } else { 1 };
    let first_terminal = dim - terminals;
    let mut rows = vec![vec![0.0; dim]; dim];
    for j in 0..first_terminal {
        let mut units = [0u32; 32];
        units[rng.gen_range(j + 1..dim)] += 1;
        for _ in 0..9 {
            units[rng.gen_range(0..dim)] += 1;
        }
        for i in 0..dim {
            rows[i][j] = units[i] as f64 / 10.0;
        }
    }
    let terms: Vec<usize> = (first_terminal..dim).collect();
    CountedMatrix::from_dense(&rows, &terms)
}

/// Mean and variance of the absorption time from the fundamental matrix.
fn fundamental_moments(m: &CountedMatrix) -> (f64, f64) {
    let transient: Vec<usize> = (0..m.dim()).filter(|&j| !m.is_terminal(j)).collect();
    let n = transient.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    for (r, &j) in transient.iter().enumerate() {
        for (c, &i) in transient.iter().enumerate() {
            if let Some(p) = m.get(i, j) {
                a[(r, c)] -= p.at_ones();
            }
        }
    }
    // E[T_j] = 1 + sum_i Q[i,j] E[T_i];  E[T_j^2] = 1 + sum_i Q[i,j] (2 E[T_i] + E[T_i^2]).
    let lu = a.lu();
    let mean = lu.solve(&DVector::from_element(n, 1.0)).unwrap();
    let mut rhs = DVector::from_element(n, 1.0);
    for (r, &j) in transient.iter().enumerate() {
        for (c, &i) in transient.iter().enumerate() {
            if let Some(p) = m.get(i, j) {
                rhs[r] += 2.0 * p.at_ones() * mean[c];
            }
        }
    }
    let second = lu.solve(&rhs).unwrap();
    (mean[0], second[0] - mean[0] * mean[0])
}

#[test]
fn random_chains_match_matrix_powers() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..50 {
        let dim = rng.gen_range(3..=20);
        let m = random_chain(&mut rng, dim);
        let ps = analyze(&m).unwrap_or_else(|e| panic!("case {case}: {e}"));
        assert!(ps.poles().len() <= dim - m.terminals().len());
        let pmf = pmf_series(&m, 200);
        let mut cum = 0.0;
        for (t, &p) in pmf.iter().enumerate() {
            cum += p;
            let r = ps.pmf(t).unwrap();
            assert!((r - p).abs() < 1e-9, "case {case} t={t}: {r} vs {p}");
            assert!(r > -1e-12);
            let c = ps.cdf(t).unwrap();
            assert!((c - cum).abs() < 1e-9, "case {case} cdf t={t}: {c} vs {cum}");
        }
        let (mean, var) = fundamental_moments(&m);
        let rm = ps.mean().unwrap();
        let rv = ps.variance().unwrap();
        assert!((rm - mean).abs() < 1e-9 * mean.max(1.0), "case {case}: mean {rm} vs {mean}");
        assert!((rv - var).abs() < 1e-8 * var.max(1.0), "case {case}: var {rv} vs {var}");
    }
}

#[test]
fn pgf_is_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let dim = rng.gen_range(2..=10);
        let m = random_chain(&mut rng, dim);
        let f = pgf(&m, &[]).unwrap();
        let one = num_complex::Complex64::new(1.0, 0.0);
        assert!((f.eval(one) - one).norm() < 1e-9);
        poles_and_residues(&f).unwrap();
    }
}
