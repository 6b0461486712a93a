//! Analytic fidelity and memory-lifetime bounds for multi-section repeaters
//! built from Werner-twirled states, with waiting times bounded by order
//! statistics of geometric link times.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::innsbruck::{h2, FIBRE_LIGHT_SPEED};

/// Fidelity below which distillation stops improving Werner states.
pub const COLLAPSE_FIDELITY: f64 = 0.5;
/// Relative tolerance of the memory-error bisection.
pub const BISECTION_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundsConfig {
    /// Number of elementary sections, a power of two.
    pub n_sections: usize,
    pub p: f64,
    pub f_init: f64,
    pub eps_l: f64,
    pub length_km: f64,
    pub c_km_per_s: f64,
    /// Bound waiting times by order statistics; otherwise the level-`l`
    /// wait is `2^l` steps.
    pub statistical: bool,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            n_sections: 8,
            p: 0.5,
            f_init: 0.95,
            eps_l: 1e-3,
            length_km: 25.0,
            c_km_per_s: FIBRE_LIGHT_SPEED,
            statistical: true,
        }
    }
}

impl BoundsConfig {
    /// Connection levels, `log2(n_sections)`.
    pub fn levels(&self) -> usize {
        self.n_sections.trailing_zeros() as usize
    }

    /// Pairs per elementary section in the minimum-resource repeater: one
    /// halving by distillation per level plus the first round.
    pub fn q0(&self) -> usize {
        1 << (self.levels() + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sections == 0 || !self.n_sections.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "n_sections = {} must be a power of two",
                self.n_sections
            )));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidProbability(self.p));
        }
        if !(0.25..=1.0).contains(&self.f_init) {
            return Err(Error::InvalidConfig(format!("f_init = {} outside [0.25, 1]", self.f_init)));
        }
        if !(0.0..1.0).contains(&self.eps_l) {
            return Err(Error::InvalidProbability(self.eps_l));
        }
        if !(self.length_km > 0.0 && self.c_km_per_s > 0.0) {
            return Err(Error::InvalidConfig("length and signal speed must be positive".into()));
        }
        Ok(())
    }
}

pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|m| 1.0 / m as f64).sum()
}

fn inv_log(p: f64) -> f64 {
    1.0 / (-p).ln_1p().abs()
}

/// Bound on the expected last of `q` geometric link times.
pub fn k_last(q: usize, p: f64) -> f64 {
    let q = q as f64;
    ((q - 1.0) / (2.0 * q - 1.0).sqrt() + 1.0) * inv_log(p) + 1.0
}

/// Bound on the wait between two adjacent sections at level `l`:
/// `2^l [H(2^(n-l+1)) / |log(1-p)| + 1]` where `2^n` is the number of
/// elementary pairs per section.
pub fn k_adjacent(l: usize, n_sections: usize, p: f64) -> f64 {
    let n = n_sections.trailing_zeros() as usize + 1;
    let pow = 2f64.powi(l as i32);
    let h = if l > n + 1 { 0.0 } else { harmonic(1 << (n + 1 - l)) };
    pow * (h * inv_log(p) + 1.0)
}

/// Bound on `E|x - y|` for two independent draws from the distribution of
/// the last of `q` geometric link times.
pub fn expected_gap_bound(q: usize, p: f64) -> f64 {
    harmonic(2 * q) * inv_log(p)
}

/// Werner fidelity after `k` steps of memory error `eps`.
pub fn decay_fidelity(f: f64, eps: f64, k: f64) -> f64 {
    let s = (1.0 - eps).powf(k);
    s * f + (1.0 - s) / 4.0
}

/// Fidelity of DEJMPS on two Werner states, re-twirled.
pub fn dejmps_werner(f: f64) -> f64 {
    (10.0 * f * f - 2.0 * f + 1.0) / (8.0 * f * f - 4.0 * f + 5.0)
}

/// Fidelity after swapping two Werner states with one step of gate error.
pub fn connect_fidelity(fa: f64, fb: f64, eps_l: f64) -> f64 {
    decay_fidelity((1.0 - fa) * (1.0 - fb) / 3.0 + fa * fb, eps_l, 1.0)
}

/// Fidelity at which a Werner state's key fraction `1 - 2 h2(2(1-F)/3)`
/// vanishes.
pub fn secure_fidelity() -> f64 {
    let g = |f: f64| 1.0 - 2.0 * h2(2.0 * (1.0 - f) / 3.0);
    let (mut lo, mut hi) = (0.75, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn collapse_check(level: usize, f: f64) -> Result<f64> {
    if f < COLLAPSE_FIDELITY {
        Err(Error::FidelityCollapse { level, fidelity: f })
    } else {
        Ok(f)
    }
}

/// Fidelity of the end-to-end pair for a memory error `eps_w` per step.
pub fn final_fidelity(cfg: &BoundsConfig, eps_w: f64) -> Result<f64> {
    cfg.validate()?;
    if !(0.0..1.0).contains(&eps_w) {
        return Err(Error::InvalidProbability(eps_w));
    }
    let mut f = dejmps_werner(decay_fidelity(cfg.f_init, eps_w, k_last(cfg.q0(), cfg.p)));
    f = collapse_check(0, f)?;
    for l in 1..=cfg.levels() {
        let wait = if cfg.statistical {
            k_adjacent(l - 1, cfg.n_sections, cfg.p)
        } else {
            2f64.powi(l as i32 - 1)
        };
        let waited = decay_fidelity(f, eps_w, wait);
        f = collapse_check(l, dejmps_werner(connect_fidelity(f, waited, cfg.eps_l)))?;
    }
    Ok(f)
}

fn secure(cfg: &BoundsConfig, eps_w: f64, target: f64) -> bool {
    matches!(final_fidelity(cfg, eps_w), Ok(f) if f > target)
}

/// Largest memory error per step that still ends above the secure
/// fidelity. `None` if every error below one is secure.
pub fn max_memory_error(cfg: &BoundsConfig) -> Result<Option<f64>> {
    cfg.validate()?;
    let target = secure_fidelity();
    if !secure(cfg, 0.0, target) {
        return Err(Error::NeverSecure);
    }
    let top = 1.0 - f64::EPSILON;
    if secure(cfg, top, target) {
        return Ok(None);
    }
    // Bisect on log(eps); errors below 1e-300 are reported as the floor.
    let (mut lo, mut hi) = (1e-300f64, top);
    if !secure(cfg, lo, target) {
        return Ok(Some(lo));
    }
    while hi / lo - 1.0 > BISECTION_TOL {
        let mid = (lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp();
        if secure(cfg, mid, target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Shortest memory lifetime in seconds that keeps the final pair secure;
/// zero if any memory will do.
pub fn min_memory_lifetime(cfg: &BoundsConfig) -> Result<f64> {
    Ok(match max_memory_error(cfg)? {
        None => 0.0,
        Some(eps) => crate::innsbruck::lifetime_from_eps_w(cfg.length_km, cfg.c_km_per_s, eps),
    })
}

/// One row of a threshold sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdPoint {
    pub p: f64,
    pub statistical: bool,
    pub tau_seconds: f64,
}

/// Minimum lifetimes over a grid of link probabilities, in grid order.
/// Points that are never secure report an infinite lifetime.
pub fn threshold_sweep(cfg: &BoundsConfig, p_grid: &[f64]) -> Result<Vec<ThresholdPoint>> {
    p_grid
        .par_iter()
        .map(|&p| {
            let c = BoundsConfig { p, ..cfg.clone() };
            let tau_seconds = match min_memory_lifetime(&c) {
                Err(Error::NeverSecure) => f64::INFINITY,
                other => other?,
            };
            Ok(ThresholdPoint {
                p,
                statistical: cfg.statistical,
                tau_seconds,
            })
        })
        .collect()
}
