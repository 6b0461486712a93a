//! The repeater as a counted Markov process and the waiting-time tables
//! derived from it.

use rayon::prelude::*;

use crate::counting::ErrorTableSweep;
use crate::error::{Error, Result};
use crate::lumping::{binomial, lumped_section_matrix};
use crate::poly::CounterPoly;
use crate::process::{compose_and_held, CountedMatrix};

/// Counter on the hold of a representative pair within a section.
pub const W0: &str = "w0";
/// Counter on the hold of one distilled section waiting for the other.
pub const W1: &str = "w1";
/// Completion-time mass that may be left in the tail.
pub const TAIL_MASS: f64 = 1e-6;
/// Longest completion time the tables will be extended to.
pub const MAX_STEPS: usize = 1 << 20;

/// `q0` pairs connecting in parallel, lumped by connected count.
pub fn section_matrix(q0: usize, p: f64, w0: &str) -> Result<CountedMatrix> {
    if q0 == 0 {
        return Err(Error::InvalidConfig("q0 must be at least 1".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(lumped_section_matrix(q0, p, w0))
}

/// Probability that at least one of the `floor(q0/2)` first-round
/// distillations succeeds.
pub fn distillation_success(lambda: f64, q0: usize) -> f64 {
    1.0 - (1.0 - lambda).powi((q0 / 2) as i32)
}

/// Append a distillation step to a section matrix: from the section's
/// terminal, succeed into a new terminal or fail back to the start.
pub fn distillation_matrix(sect: &CountedMatrix, lambda: f64, q0: usize) -> Result<CountedMatrix> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidProbability(lambda));
    }
    let n = sect.dim();
    if n < 2 || sect.terminals() != [n - 1] {
        return Err(Error::BadBlockForm);
    }
    let s = distillation_success(lambda, q0);
    let mut out = CountedMatrix::new(n + 1, &[n]);
    for c in sect.counters() {
        out.add_counter(c);
    }
    for (i, j, p) in sect.entries() {
        out.set(i, j, p.clone());
    }
    out.set(n, n - 1, CounterPoly::constant(s));
    if s < 1.0 {
        out.set(0, n - 1, CounterPoly::constant(1.0 - s));
    }
    Ok(out)
}

/// Both sections run in parallel; `w1` weights the hold of the first copy
/// while it waits for the second. Counters of the second copy are set to one.
pub fn full_matrix(dist: &CountedMatrix, w1: &str) -> Result<CountedMatrix> {
    let mut other = dist.clone();
    while let Some(name) = other.counters().first().cloned() {
        other = other.bind_counter(&name, 1.0)?;
    }
    Ok(compose_and_held(dist, &other, Some(w1), None))
}

/// Longest wait before a Werner state falls below the fidelity whose
/// self-distillation succeeds with probability `lambda`.
pub fn kmax(lambda: f64, f_init: f64, eps_w0: f64) -> Result<usize> {
    if !(lambda > 0.5) || lambda > 1.0 {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    if !(f_init > 0.25 && f_init <= 1.0) {
        return Err(Error::InvalidConfig(format!("f_init = {f_init} outside (0.25, 1]")));
    }
    if !(0.0..1.0).contains(&eps_w0) {
        return Err(Error::InvalidProbability(eps_w0));
    }
    let ratio = 3.0 * (2.0 * lambda - 1.0).sqrt() / (4.0 * f_init - 1.0);
    if eps_w0 == 0.0 {
        return Ok(if ratio <= 1.0 { usize::MAX } else { 0 });
    }
    let k = (ratio.ln() / (1.0 - eps_w0).ln()).floor();
    Ok(if k.is_nan() || k <= 0.0 {
        0
    } else if k >= usize::MAX as f64 {
        usize::MAX
    } else {
        k as usize
    })
}

/// `P(q1 = x)` for `x = 0..=floor(q0/2)`, with `q1` the smaller of two
/// independent binomial success counts.
pub fn q1_distribution(q0: usize, lambda: f64) -> Vec<f64> {
    let n = q0 / 2;
    let side: Vec<f64> = (0..=n)
        .map(|x| binomial(n, x) * lambda.powi(x as i32) * (1.0 - lambda).powi((n - x) as i32))
        .collect();
    // tail[x] = P(side >= x)
    let mut tail = vec![0.0; n + 2];
    for x in (0..=n).rev() {
        tail[x] = tail[x + 1] + side[x];
    }
    (0..=n).map(|x| tail[x] * tail[x] - tail[x + 1] * tail[x + 1]).collect()
}

/// `p_t <- p_t P(k <= kmax | t)^q0`.
pub fn postselect_pmf(pmf: &[f64], within_kmax: &[f64], q0: usize) -> Vec<f64> {
    pmf.iter()
        .enumerate()
        .map(|(t, &p)| p * within_kmax.get(t).copied().unwrap_or(1.0).powi(q0 as i32))
        .collect()
}

/// Completion pmf of a chain until the CDF of the maximum of `copies`
/// independent runs exceeds `1 - tail`.
fn pmf_until(m: &CountedMatrix, copies: i32, tail: f64) -> Result<Vec<f64>> {
    let e = m.evaluate_at_ones();
    let n = e.dim();
    let zero = num_complex::Complex64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    x[0] = num_complex::Complex64::new(1.0, 0.0);
    let mut next = x.clone();
    let mass = |x: &[num_complex::Complex64]| -> f64 {
        (0..n).filter(|&i| e.is_terminal(i)).map(|i| x[i].re).sum()
    };
    let mut pmf = vec![mass(&x)];
    let mut cdf = pmf[0];
    while cdf.powi(copies) <= 1.0 - tail {
        if pmf.len() > MAX_STEPS {
            return Err(Error::Truncation(MAX_STEPS));
        }
        e.apply(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
        // Terminal columns are empty, so terminal mass is new arrivals only.
        let total = mass(&x);
        pmf.push(total);
        cdf += total;
    }
    Ok(pmf)
}

/// Joint waiting-time tables for the two-section repeater at one `lambda`.
///
/// Side A carries the `w0` counter and waits (counted by `w1`) for side B.
/// Because the two sides are independent, the joint coefficients of the
/// full chain factor into single-side tables:
/// `J_t(k0, 0) = A_t(k0) F_B(t)` and `J_t(k0, k1) = A_{t-k1}(k0) b_t` for
/// `k1 >= 1`, where `A_t` are the `w0` coefficients of side A finishing at
/// `t`, `b_t` the pmf of side B and `F_B` its CDF.
#[derive(Clone, Debug)]
pub struct RepeaterTables {
    q0: usize,
    k0_cap: usize,
    side_pmf: Vec<f64>,
    side_cdf: Vec<f64>,
    side_a: Vec<Vec<f64>>,
}

impl RepeaterTables {
    /// Tables up to the truncation time, keeping `k0 <= k0_cap`.
    pub fn new(q0: usize, p: f64, lambda: f64, k0_cap: usize) -> Result<Self> {
        let dist = distillation_matrix(&section_matrix(q0, p, W0)?, lambda, q0)?;
        let side_pmf = pmf_until(&dist, 2, TAIL_MASS)?;
        let t_max = side_pmf.len() - 1;
        Self::with_horizon(&dist, q0, side_pmf, k0_cap.min(t_max))
    }

    fn with_horizon(dist: &CountedMatrix, q0: usize, side_pmf: Vec<f64>, k0_cap: usize) -> Result<Self> {
        let t_max = side_pmf.len() - 1;
        let mut side_a = Vec::with_capacity(t_max + 1);
        if dist.counters().is_empty() {
            side_a.extend(side_pmf.iter().map(|&p| vec![p]));
        } else {
            let mut sweep = ErrorTableSweep::new(dist, &[k0_cap])?;
            for _ in 0..=t_max {
                side_a.push(sweep.table());
                sweep.step();
            }
        }
        let side_cdf = side_pmf
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            q0,
            k0_cap: if dist.counters().is_empty() { 0 } else { k0_cap },
            side_pmf,
            side_cdf,
            side_a,
        })
    }

    /// Tables for an explicit horizon, without tail truncation.
    pub fn with_steps(q0: usize, p: f64, lambda: f64, t_max: usize, k0_cap: usize) -> Result<Self> {
        let dist = distillation_matrix(&section_matrix(q0, p, W0)?, lambda, q0)?;
        let side_pmf: Vec<f64> = crate::process::pmf_series(&dist, t_max);
        Self::with_horizon(&dist, q0, side_pmf, k0_cap.min(t_max))
    }

    pub fn q0(&self) -> usize {
        self.q0
    }

    /// Last completion time covered.
    pub fn t_max(&self) -> usize {
        self.side_pmf.len() - 1
    }

    pub fn k0_cap(&self) -> usize {
        self.k0_cap
    }

    /// Completion pmf of the full repeater, `p_t = F(t)^2 - F(t-1)^2`.
    pub fn pmf(&self) -> Vec<f64> {
        (0..=self.t_max())
            .map(|t| {
                let prev = if t == 0 { 0.0 } else { self.side_cdf[t - 1] };
                let a = self.side_pmf[t];
                // Written to avoid cancellation in F(t)^2 - F(t-1)^2.
                a * (self.side_cdf[t] + prev)
            })
            .collect()
    }

    /// Unnormalised joint coefficients at `t`, row-major over
    /// `(k0, k1)` with shape `[k0_cap + 1, t + 1]`.
    pub fn joint_coefficients(&self, t: usize) -> Vec<f64> {
        let n0 = self.k0_cap + 1;
        let n1 = t + 1;
        let mut out = vec![0.0; n0 * n1];
        if t > self.t_max() {
            return out;
        }
        let b = self.side_pmf[t];
        let fb = self.side_cdf[t];
        for k0 in 0..n0 {
            out[k0 * n1] = self.side_a[t].get(k0).copied().unwrap_or(0.0) * fb;
            for k1 in 1..=t {
                out[k0 * n1 + k1] = self.side_a[t - k1].get(k0).copied().unwrap_or(0.0) * b;
            }
        }
        out
    }

    /// Conditional joint `p(k0, k1 | t)` restricted to `k0 <= k0_cap`.
    pub fn joint(&self, t: usize) -> Result<crate::counting::ErrorDistribution> {
        let total = self.pmf().get(t).copied().unwrap_or(0.0);
        if total < crate::counting::MIN_MASS {
            return Err(Error::ZeroMass(t));
        }
        let probs = self.joint_coefficients(t).into_iter().map(|v| v / total).collect();
        Ok(crate::counting::ErrorDistribution {
            t,
            counters: vec![W0.to_string(), W1.to_string()],
            shape: vec![self.k0_cap + 1, t + 1],
            probs,
            total,
        })
    }

    /// `P(k0 <= kmax | t)` for every `t`, where `kmax` is at least the cap.
    pub fn within_cap(&self) -> Vec<f64> {
        let pmf = self.pmf();
        (0..=self.t_max())
            .into_par_iter()
            .map(|t| {
                if pmf[t] < crate::counting::MIN_MASS {
                    return 1.0;
                }
                if self.k0_cap >= t {
                    return 1.0;
                }
                let s: f64 = self.joint_coefficients(t).iter().sum();
                (s / pmf[t]).min(1.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::ErrorTableSweep;
    use crate::process::pmf_series;

    #[test]
    fn section_matrix_examples() {
        let m = section_matrix(1, 0.3, W0).unwrap();
        assert!(m.counters().is_empty());
        assert_eq!(m.dim(), 2);
        for q in 1..=4 {
            for p in [0.2, 0.5, 0.9] {
                let pmf = pmf_series(&section_matrix(q, p, W0).unwrap(), 30);
                for t in 1..=30 {
                    let cdf = |t: i32| (1.0 - (1.0 - p).powi(t)).powi(q as i32);
                    let want = cdf(t as i32) - cdf(t as i32 - 1);
                    assert!((pmf[t] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn distillation_examples() {
        assert_eq!(distillation_success(1.0, 4), 1.0);
        assert!((distillation_success(0.5, 4) - 0.75).abs() < 1e-15);
        let sect = section_matrix(4, 0.5, W0).unwrap();
        let d = distillation_matrix(&sect, 0.5, 4).unwrap();
        assert_eq!(d.dim(), sect.dim() + 1);
        assert_eq!(d.terminals(), vec![5]);
        d.validate().unwrap();
        let bad = sect.with_terminals(&[0, 4]);
        assert_eq!(distillation_matrix(&bad, 0.5, 4), Err(Error::BadBlockForm));
    }

    #[test]
    fn full_matrix_is_max_of_sides() {
        let dist = distillation_matrix(&section_matrix(3, 0.4, W0).unwrap(), 0.7, 3).unwrap();
        let full = full_matrix(&dist, W1).unwrap();
        assert_eq!(full.dim(), dist.dim() * dist.dim());
        let side = pmf_series(&dist, 40);
        let pmf = pmf_series(&full, 40);
        let mut f = 0.0;
        for t in 0..=40 {
            let prev = f;
            f += side[t];
            assert!((pmf[t] - (f * f - prev * prev)).abs() < 1e-12);
        }
    }

    #[test]
    fn kmax_examples() {
        assert_eq!(kmax(1.0, 1.0, 0.01).unwrap(), 0);
        assert_eq!(kmax(0.9, 0.95, 0.01).unwrap(), 4);
        assert_eq!(kmax(0.5, 0.95, 0.01), Err(Error::LambdaOutOfRange(0.5)));
        assert_eq!(kmax(0.9, 0.95, 0.0).unwrap(), usize::MAX);
    }

    #[test]
    fn q1_examples() {
        assert_eq!(q1_distribution(2, 1.0), vec![0.0, 1.0]);
        for (q0, l) in [(4, 0.5), (7, 0.8), (8, 0.6)] {
            let d = q1_distribution(q0, l);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
        // Two independent Bernoulli(0.5) sides: min is one with probability 1/4.
        let d = q1_distribution(3, 0.5);
        assert!((d[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn factorised_tables_match_full_sweep() {
        for (q0, p, lambda) in [(2, 0.5, 0.8), (3, 0.3, 0.6), (4, 0.6, 0.9)] {
            let dist = distillation_matrix(&section_matrix(q0, p, W0).unwrap(), lambda, q0).unwrap();
            let full = full_matrix(&dist, W1).unwrap();
            let t_max = 14;
            let cap = 6;
            let tables = RepeaterTables::with_steps(q0, p, lambda, t_max, cap).unwrap();
            let mut sweep = ErrorTableSweep::new(&full, &[cap, t_max]).unwrap();
            let pmf = tables.pmf();
            for t in 0..=t_max {
                let want = sweep.table();
                let got = tables.joint_coefficients(t);
                for k0 in 0..=cap {
                    for k1 in 0..=t_max {
                        let w = want[k0 * (t_max + 1) + k1];
                        let g = if k1 <= t { got[k0 * (t + 1) + k1] } else { 0.0 };
                        assert!((w - g).abs() < 1e-14, "q0={q0} t={t} k0={k0} k1={k1}: {g} vs {w}");
                    }
                }
                let all: f64 = want.iter().sum();
                assert!(all <= pmf[t] + 1e-14);
                sweep.step();
            }
        }
    }

    #[test]
    fn postselect_examples() {
        // Two-pair AND at p = 0.5: p_2 = 5/16 and p(0 | 2) = 0.6.
        let pmf = [0.0, 0.25, 5.0 / 16.0];
        let out = postselect_pmf(&pmf, &[1.0, 1.0, 0.6], 2);
        assert!((out[2] - 0.1125).abs() < 1e-15);
        assert_eq!(postselect_pmf(&pmf, &[1.0; 3], 2), pmf.to_vec());
    }

    #[test]
    fn truncated_tables_cover_mass() {
        let tables = RepeaterTables::new(4, 0.1, 0.6, usize::MAX).unwrap();
        let s: f64 = tables.pmf().iter().sum();
        assert!(s > 1.0 - TAIL_MASS && s <= 1.0 + 1e-12);
        assert!(tables.within_cap().iter().all(|&x| x == 1.0));
    }
}
