//! Monte Carlo secret key rates.
//!
//! Every sample draws its own generator from `(seed, t, index)`, so results
//! do not depend on how rayon schedules the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::chain::{kmax, postselect_pmf, q1_distribution, RepeaterTables};
use super::states::{dejmps, key_fraction, swap, werner_state, BellDiagonalState};
use super::{FinalDistillation, RepeaterConfig};
use crate::counting::{heralded_error, ErrorDistribution, MIN_MASS};
use crate::error::{Error, Result};

/// Largest pair count searched exhaustively in the final distillation.
pub const EXHAUSTIVE_LIMIT: usize = 6;

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KeyEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl KeyEstimate {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            samples: n,
        }
    }

    /// Fail if the standard error exceeds 5% of the mean.
    pub fn check(&self) -> Result<()> {
        if self.stderr > 0.05 * self.mean.abs() {
            return Err(Error::InsufficientSamples {
                mean: self.mean,
                stderr: self.stderr,
            });
        }
        Ok(())
    }
}

/// A key rate at the best `lambda` of the configured grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub lambda: f64,
    pub rate: f64,
    pub stderr: f64,
    /// Last completion time included.
    pub t_truncation: usize,
    pub samples: usize,
}

impl RateEstimate {
    pub fn check(&self) -> Result<()> {
        KeyEstimate {
            mean: self.rate,
            stderr: self.stderr,
            samples: self.samples,
        }
        .check()
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn sample_rng(seed: u64, t: usize, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(splitmix(seed) ^ t as u64) ^ i as u64))
}

fn cumulative(ps: impl IntoIterator<Item = f64>) -> Vec<f64> {
    ps.into_iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

fn draw(cdf: &[f64], rng: &mut impl Rng) -> usize {
    let u = rng.gen::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Everything a single sample needs at one completion time.
struct Sampler {
    q0: usize,
    f_init: f64,
    eps_w0: f64,
    eps_w1: f64,
    eps_l: f64,
    strategy: FinalDistillation,
    q1_cdf: Vec<f64>,
    /// CDF of `k0` over `k0 <= kmax`.
    marginal: Vec<f64>,
    /// CDF over `(k0, k1)` row-major with `n1` columns, `k0 <= kmax`.
    joint: Vec<f64>,
    n1: usize,
}

impl Sampler {
    fn new(cfg: &RepeaterConfig, lambda: f64, table: &ErrorDistribution, kmax: usize) -> Result<Self> {
        let (n0, n1) = match table.shape.as_slice() {
            [n0] => (*n0, 1),
            [n0, n1] => (*n0, *n1),
            _ => return Err(Error::InvalidConfig("error table must have one or two axes".into())),
        };
        let rows = n0.min(kmax.saturating_add(1));
        let kept = &table.probs[..rows * n1];
        if kept.iter().sum::<f64>() < MIN_MASS {
            return Err(Error::ZeroMass(table.t));
        }
        let marginal = cumulative((0..rows).map(|k| kept[k * n1..(k + 1) * n1].iter().sum()));
        Ok(Self {
            q0: cfg.q0,
            f_init: cfg.f_init,
            eps_w0: cfg.eps_w0(),
            eps_w1: cfg.eps_w1(),
            eps_l: cfg.eps_l,
            strategy: cfg.strategy,
            q1_cdf: cumulative(q1_distribution(cfg.q0, lambda)),
            marginal,
            joint: cumulative(kept.iter().copied()),
            n1,
        })
    }

    fn state(&self, k: usize) -> BellDiagonalState {
        werner_state(self.f_init).decay(heralded_error(k, self.eps_w0))
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let flat = draw(&self.joint, rng);
        let (k0, k1) = (flat / self.n1, flat % self.n1);
        let mut a = Vec::with_capacity(self.q0);
        a.push(self.state(k0));
        for _ in 1..self.q0 {
            a.push(self.state(draw(&self.marginal, rng)));
        }
        let b: Vec<_> = (0..self.q0).map(|_| self.state(draw(&self.marginal, rng))).collect();
        let q1 = draw(&self.q1_cdf, rng);
        pipeline(a, b, k1, q1, self.eps_w1, self.eps_l, self.strategy, rng)
    }
}

/// First round on one side: pair states best-first and distill each pair;
/// with an odd count a randomly chosen state passes through untouched.
fn distill_side(mut states: Vec<BellDiagonalState>, eps_l: f64, rng: &mut impl Rng) -> Vec<BellDiagonalState> {
    let mut out = Vec::with_capacity(states.len() / 2 + 1);
    if states.len() % 2 == 1 {
        let i = rng.gen_range(0..states.len());
        out.push(states.swap_remove(i));
    }
    sort_best_first(&mut states);
    for pair in states.chunks_exact(2) {
        if let Ok((s, _)) = dejmps(&pair[0], &pair[1]) {
            out.push(s.decay(eps_l));
        }
    }
    out
}

fn sort_best_first(states: &mut [BellDiagonalState]) {
    states.sort_by(|x, y| y.fidelity().total_cmp(&x.fidelity()));
}

#[allow(clippy::too_many_arguments)]
fn pipeline(
    a: Vec<BellDiagonalState>,
    b: Vec<BellDiagonalState>,
    k1: usize,
    q1: usize,
    eps_w1: f64,
    eps_l: f64,
    strategy: FinalDistillation,
    rng: &mut impl Rng,
) -> f64 {
    if q1 == 0 {
        return 0.0;
    }
    let mut a = distill_side(a, eps_l, rng);
    let mut b = distill_side(b, eps_l, rng);
    sort_best_first(&mut a);
    sort_best_first(&mut b);
    a.truncate(q1);
    b.truncate(q1);
    let wait = heralded_error(k1, eps_w1);
    let swapped: Vec<_> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| swap(&x.decay(wait), y).decay(eps_l))
        .collect();
    final_distillation_score(&swapped, strategy, eps_l)
}

/// Best total key fraction over the final distillation choices: an
/// exhaustive search over matchings up to [`EXHAUSTIVE_LIMIT`] pairs,
/// greedy best-first pairing above.
pub fn final_distillation_score(states: &[BellDiagonalState], strategy: FinalDistillation, eps_l: f64) -> f64 {
    let distilled = |x: &BellDiagonalState, y: &BellDiagonalState| {
        dejmps(x, y).map(|(s, _)| key_fraction(&s.decay(eps_l))).unwrap_or(0.0)
    };
    if states.len() <= EXHAUSTIVE_LIMIT {
        return exhaustive(states, strategy, states.len() % 2, &distilled);
    }
    let mut sorted = states.to_vec();
    sort_best_first(&mut sorted);
    let mut total = 0.0;
    for pair in sorted.chunks(2) {
        total += match (pair, strategy) {
            ([x], FinalDistillation::Optional) => key_fraction(x),
            ([_], FinalDistillation::Mandatory) => 0.0,
            ([x, y], FinalDistillation::Optional) => distilled(x, y).max(key_fraction(x) + key_fraction(y)),
            ([x, y], FinalDistillation::Mandatory) => distilled(x, y),
            _ => unreachable!(),
        };
    }
    total
}

fn exhaustive(
    states: &[BellDiagonalState],
    strategy: FinalDistillation,
    drops: usize,
    distilled: &dyn Fn(&BellDiagonalState, &BellDiagonalState) -> f64,
) -> f64 {
    let Some((first, rest)) = states.split_first() else {
        return 0.0;
    };
    let mut best = f64::NEG_INFINITY;
    match strategy {
        FinalDistillation::Optional => {
            best = key_fraction(first) + exhaustive(rest, strategy, drops, distilled);
        }
        FinalDistillation::Mandatory if drops > 0 => {
            best = exhaustive(rest, strategy, drops - 1, distilled);
        }
        FinalDistillation::Mandatory => {}
    }
    for j in 0..rest.len() {
        let mut others = rest.to_vec();
        let partner = others.remove(j);
        let v = distilled(first, &partner) + exhaustive(&others, strategy, drops, distilled);
        best = best.max(v);
    }
    best.max(0.0)
}

fn estimate(sampler: &Sampler, seed: u64, t: usize, n: usize) -> KeyEstimate {
    let xs: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| sampler.sample(&mut sample_rng(seed, t, i)))
        .collect();
    KeyEstimate::from_samples(&xs)
}

/// Monte Carlo estimate of the key per completed attempt at time `t`, given
/// the conditional joint table `p(k0, k1 | t)`, using `cfg.samples` samples
/// at `cfg.lambda`.
pub fn conditional_key_rate(cfg: &RepeaterConfig, t: usize, table: &ErrorDistribution) -> Result<KeyEstimate> {
    cfg.validate()?;
    let k = kmax(cfg.lambda, cfg.f_init, cfg.eps_w0())?;
    let sampler = Sampler::new(cfg, cfg.lambda, table, k)?;
    Ok(estimate(&sampler, cfg.seed, t, cfg.samples))
}

/// Split `total` samples across times in proportion to `weights`, at least
/// two per time with positive weight.
fn allocate(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    weights
        .iter()
        .map(|&w| {
            if w <= 0.0 {
                0
            } else {
                ((total as f64 * w / sum).round() as usize).max(2)
            }
        })
        .collect()
}

/// Normalised key rate at one `lambda`.
pub fn normalized_key_rate_at(cfg: &RepeaterConfig, lambda: f64) -> Result<RateEstimate> {
    cfg.validate()?;
    let k = kmax(lambda, cfg.f_init, cfg.eps_w0())?;
    let tables = RepeaterTables::new(cfg.q0, cfg.p, lambda, k)?;
    let pmf = postselect_pmf(&tables.pmf(), &tables.within_cap(), cfg.q0);
    let weights: Vec<f64> = pmf
        .iter()
        .enumerate()
        .map(|(t, &p)| if t == 0 || p < MIN_MASS { 0.0 } else { p / t as f64 })
        .collect();
    let counts = allocate(&weights, cfg.samples);
    let per_t: Vec<Option<KeyEstimate>> = (0..pmf.len())
        .into_par_iter()
        .map(|t| -> Result<Option<KeyEstimate>> {
            if counts[t] == 0 {
                return Ok(None);
            }
            let sampler = Sampler::new(cfg, lambda, &tables.joint(t)?, k)?;
            Ok(Some(estimate(&sampler, cfg.seed, t, counts[t])))
        })
        .collect::<Result<_>>()?;
    let q0 = cfg.q0 as f64;
    let mut rate = 0.0;
    let mut var = 0.0;
    for (w, e) in weights.iter().zip(&per_t) {
        if let Some(e) = e {
            rate += w * e.mean / q0;
            var += (w * e.stderr / q0).powi(2);
        }
    }
    Ok(RateEstimate {
        lambda,
        rate,
        stderr: var.sqrt(),
        t_truncation: tables.t_max(),
        samples: counts.iter().sum(),
    })
}

fn best_over_grid(cfg: &RepeaterConfig, f: impl Fn(f64) -> Result<RateEstimate> + Sync) -> Result<RateEstimate> {
    let results: Vec<RateEstimate> = cfg.lambdas().par_iter().map(|&l| f(l)).collect::<Result<_>>()?;
    let mut best = results[0];
    for r in &results[1..] {
        if r.rate > best.rate {
            best = *r;
        }
    }
    Ok(best)
}

/// Normalised key rate, maximised over the configured `lambda` values.
pub fn normalized_key_rate(cfg: &RepeaterConfig) -> Result<RateEstimate> {
    best_over_grid(cfg, |l| normalized_key_rate_at(cfg, l))
}

/// Key per completed attempt when no state waits: every link connects
/// together, so only the first-round success count is random.
pub fn zero_wait_key(cfg: &RepeaterConfig, lambda: f64) -> f64 {
    let states = vec![werner_state(cfg.f_init); cfg.q0];
    // With identical inputs the pass-through choice is immaterial.
    let mut rng = sample_rng(cfg.seed, 0, 0);
    q1_distribution(cfg.q0, lambda)
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(q1, &p)| {
            p * pipeline(states.clone(), states.clone(), 0, q1, 0.0, cfg.eps_l, cfg.strategy, &mut rng)
        })
        .sum()
}

/// Simplified rate at one `lambda`: every completion time is shifted by the
/// mean link time `1/p` and states accrue no waiting error.
pub fn simplified_key_rate_at(cfg: &RepeaterConfig, lambda: f64) -> Result<RateEstimate> {
    cfg.validate()?;
    let tables = RepeaterTables::new(cfg.q0, cfg.p, lambda, 0)?;
    let shift = 1.0 / cfg.p;
    let time_weight: f64 = tables
        .pmf()
        .iter()
        .enumerate()
        .map(|(t, &p)| p / (t as f64 + shift))
        .sum();
    Ok(RateEstimate {
        lambda,
        rate: time_weight * zero_wait_key(cfg, lambda) / cfg.q0 as f64,
        stderr: 0.0,
        t_truncation: tables.t_max(),
        samples: 0,
    })
}

/// Simplified rate, maximised over the configured `lambda` values.
pub fn simplified_key_rate(cfg: &RepeaterConfig) -> Result<RateEstimate> {
    best_over_grid(cfg, |l| simplified_key_rate_at(cfg, l))
}
