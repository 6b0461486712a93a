//! Error-count distributions from counting variables.
//!
//! `p_t(w)` is a polynomial in the counters whose coefficients are the
//! probabilities of finishing at `t` having passed the counted edges a given
//! number of times. Sampling it on roots of unity and transforming back
//! recovers those coefficients. [`ErrorTableSweep`] propagates the same
//! coefficients exactly, one step at a time, for callers that need the
//! tables for every `t`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::CountedMatrix;

/// Default cap on the number of evaluation points of a joint transform.
pub const GRID_BUDGET: usize = 1 << 24;
/// Smallest completion probability that can be conditioned on.
pub const MIN_MASS: f64 = 1e-300;

/// Conditional distribution `p(k | t)` of counter values at completion time
/// `t`, stored row-major over `shape` (one axis per counter).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorDistribution {
    pub t: usize,
    pub counters: Vec<String>,
    pub shape: Vec<usize>,
    pub probs: Vec<f64>,
    /// `p_t` with every counter at one.
    pub total: f64,
}

impl ErrorDistribution {
    fn index(&self, k: &[usize]) -> Option<usize> {
        if k.len() != self.shape.len() {
            return None;
        }
        let mut idx = 0;
        for (&ki, &n) in k.iter().zip(&self.shape) {
            if ki >= n {
                return None;
            }
            idx = idx * n + ki;
        }
        Some(idx)
    }

    /// `p(k | t)`, zero outside the stored range.
    pub fn get(&self, k: &[usize]) -> f64 {
        self.index(k).map_or(0.0, |i| self.probs[i])
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Distribution of a single axis.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let inner: usize = self.shape[axis + 1..].iter().product();
        let n = self.shape[axis];
        let mut out = vec![0.0; n];
        for (i, &p) in self.probs.iter().enumerate() {
            out[(i / inner) % n] += p;
        }
        out
    }
}

/// `1 - (1 - eps)^k`: probability that at least one of `k` events errs.
pub fn heralded_error(k: usize, eps: f64) -> f64 {
    1.0 - (1.0 - eps).powi(k as i32)
}

/// Attach a counting variable to existing edges.
pub fn attach_counter(m: &CountedMatrix, edges: &[(usize, usize)], var: &str) -> Result<CountedMatrix> {
    m.attach_counter(edges, var)
}

fn counter_axis(m: &CountedMatrix, name: Option<&str>) -> Result<usize> {
    match name {
        Some(n) => m.counter_index(n).ok_or_else(|| Error::UnknownCounter(n.to_string())),
        None if m.counters().is_empty() => Err(Error::NoCounter),
        None => Ok(0),
    }
}

/// Transform size for `t` steps when each step raises the counter degree by
/// at most `d`.
fn transform_size(t: usize, d: usize) -> usize {
    (t * d + 1).next_power_of_two()
}

/// `p(k | t)` for the first counter (other counters set to one).
pub fn error_pmf(m: &CountedMatrix, t: usize) -> Result<ErrorDistribution> {
    counter_axis(m, None)?;
    error_pmf_for(m, t, &m.counters()[0].clone())
}

/// `p(k | t)` for a named counter (other counters set to one).
pub fn error_pmf_for(m: &CountedMatrix, t: usize, counter: &str) -> Result<ErrorDistribution> {
    let axis = counter_axis(m, Some(counter))?;
    let mut sizes = vec![1; m.counters().len()];
    sizes[axis] = transform_size(t, m.max_total_degree() as usize);
    let joint = joint_error_pmf_with(m, t, &sizes, GRID_BUDGET)?;
    let probs = joint.marginal(axis);
    Ok(ErrorDistribution {
        t,
        counters: vec![counter.to_string()],
        shape: vec![probs.len()],
        probs,
        total: joint.total,
    })
}

/// Joint `p(k_1, .., k_m | t)` over all counters.
pub fn joint_error_pmf(m: &CountedMatrix, t: usize) -> Result<ErrorDistribution> {
    if m.counters().is_empty() {
        return Err(Error::NoCounter);
    }
    let n = transform_size(t, m.max_total_degree() as usize);
    joint_error_pmf_with(m, t, &vec![n; m.counters().len()], GRID_BUDGET)
}

/// Joint transform with explicit per-axis sizes. An axis of size one is
/// evaluated at `w = 1`, which marginalises that counter out.
pub fn joint_error_pmf_with(
    m: &CountedMatrix,
    t: usize,
    sizes: &[usize],
    budget: usize,
) -> Result<ErrorDistribution> {
    if m.counters().is_empty() {
        return Err(Error::NoCounter);
    }
    if sizes.len() != m.counters().len() || sizes.contains(&0) {
        return Err(Error::InvalidConfig("one positive size per counter required".into()));
    }
    let points = sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .unwrap_or(usize::MAX);
    if points > budget {
        return Err(Error::GridTooLarge { points, budget });
    }
    let total = m.evaluate_at_ones().pmf_at(t).re;
    if total < MIN_MASS {
        return Err(Error::ZeroMass(t));
    }
    let roots: Vec<Vec<Complex64>> = sizes
        .iter()
        .map(|&n| {
            (0..n)
                .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
                .collect()
        })
        .collect();
    // Evaluate p_t on every grid point; collected in index order.
    let mut values: Vec<Complex64> = (0..points)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut w = vec![Complex64::new(0.0, 0.0); sizes.len()];
            for a in (0..sizes.len()).rev() {
                w[a] = roots[a][rem % sizes[a]];
                rem /= sizes[a];
            }
            m.evaluate(&w).pmf_at(t)
        })
        .collect();
    let max_abs = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    fft_nd(&mut values, sizes);
    let norm = points as f64;
    let tol = (64.0 * norm * f64::EPSILON * max_abs / total).max(1e-12);
    let mut probs = Vec::with_capacity(points);
    for (i, v) in values.iter().enumerate() {
        let p = v.re / norm / total;
        if p < -tol {
            return Err(Error::NegativeCoefficient { index: i, value: p });
        }
        probs.push(p.max(0.0));
    }
    Ok(ErrorDistribution {
        t,
        counters: m.counters().to_vec(),
        shape: sizes.to_vec(),
        probs,
        total,
    })
}

/// In-place forward transform along every axis of a row-major array.
fn fft_nd(data: &mut [Complex64], shape: &[usize]) {
    let mut planner = FftPlanner::new();
    let total: usize = shape.iter().product();
    for (axis, &n) in shape.iter().enumerate() {
        if n == 1 {
            continue;
        }
        let fft = planner.plan_fft_forward(n);
        let inner: usize = shape[axis + 1..].iter().product();
        let outer = total / (n * inner);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * inner + i;
                for k in 0..n {
                    line[k] = data[base + k * inner];
                }
                fft.process(&mut line);
                for k in 0..n {
                    data[base + k * inner] = line[k];
                }
            }
        }
    }
}

/// `1 - p_t(1 - eps) / p_t(1)` for the first counter (others at one).
pub fn nonheralded_error(m: &CountedMatrix, t: usize, eps: f64) -> Result<f64> {
    counter_axis(m, None)?;
    let total = m.evaluate_at_ones().pmf_at(t).re;
    if total < MIN_MASS {
        return Err(Error::ZeroMass(t));
    }
    let mut w = vec![Complex64::new(1.0, 0.0); m.counters().len()];
    w[0] = Complex64::new(1.0 - eps, 0.0);
    Ok(1.0 - m.evaluate(&w).pmf_at(t).re / total)
}

/// Exact step-by-step propagation of counter coefficients for up to two
/// counters. Exponents above the per-axis caps are dropped; they never
/// flow back into lower exponents, so retained coefficients stay exact.
#[derive(Clone, Debug)]
pub struct ErrorTableSweep {
    dim: usize,
    /// Per target row: `(source column, [(e0, e1, coeff)])`.
    rows: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
    terminal: Vec<bool>,
    shape: [usize; 2],
    degree: [usize; 2],
    state: Vec<Vec<f64>>,
    t: usize,
}

impl ErrorTableSweep {
    /// `caps[a]` is the largest exponent kept on axis `a`.
    pub fn new(m: &CountedMatrix, caps: &[usize]) -> Result<Self> {
        let nc = m.counters().len();
        if nc > 2 {
            return Err(Error::InvalidConfig("sweep supports at most two counters".into()));
        }
        if caps.len() != nc {
            return Err(Error::InvalidConfig("one cap per counter required".into()));
        }
        let mut shape = [1, 1];
        let mut degree = [0, 0];
        for a in 0..nc {
            shape[a] = caps[a] + 1;
            degree[a] = m.degree_in(a) as usize;
        }
        let dim = m.dim();
        let mut rows = vec![Vec::new(); dim];
        for (i, j, p) in m.entries() {
            let terms = p
                .terms()
                .map(|(mono, c)| {
                    let e = |a: usize| mono.get(a).copied().unwrap_or(0) as usize;
                    (e(0), e(1), c)
                })
                .collect();
            rows[i].push((j, terms));
        }
        let cells = shape[0] * shape[1];
        let mut state = vec![vec![0.0; cells]; dim];
        state[0][0] = 1.0;
        Ok(Self {
            dim,
            rows,
            terminal: m.terminal_mask().to_vec(),
            shape,
            degree,
            state,
            t: 0,
        })
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn time(&self) -> usize {
        self.t
    }

    /// Unconditioned coefficients of `p_t(w)` at the current step, row-major
    /// over `(k0, k1)`.
    pub fn table(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.shape[0] * self.shape[1]];
        for (i, x) in self.state.iter().enumerate() {
            if self.terminal[i] {
                for (o, v) in out.iter_mut().zip(x) {
                    *o += v;
                }
            }
        }
        out
    }

    /// Advance one step.
    pub fn step(&mut self) {
        let [n0, n1] = self.shape;
        let reach = |a: usize| (self.t * self.degree[a]).min(self.shape[a] - 1);
        let (r0, r1) = (reach(0), reach(1));
        let state = &self.state;
        let next: Vec<Vec<f64>> = self
            .rows
            .par_iter()
            .map(|entries| {
                let mut out = vec![0.0; n0 * n1];
                for (j, terms) in entries {
                    let x = &state[*j];
                    for &(e0, e1, c) in terms {
                        for k0 in 0..=r0 {
                            if k0 + e0 >= n0 {
                                break;
                            }
                            let src = &x[k0 * n1..k0 * n1 + r1 + 1];
                            let dst = (k0 + e0) * n1 + e1;
                            let len = (r1 + 1).min(n1.saturating_sub(e1));
                            for (d, s) in out[dst..dst + len].iter_mut().zip(&src[..len]) {
                                *d += c * s;
                            }
                        }
                    }
                }
                out
            })
            .collect();
        debug_assert_eq!(next.len(), self.dim);
        self.state = next;
        self.t += 1;
    }
}
