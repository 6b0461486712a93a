//! Two-section Innsbruck-style repeater with bunched pairs: the counted
//! process, state evolution and secret key rates.

mod chain;
mod keyrate;
mod states;

pub use chain::{
    distillation_matrix, distillation_success, full_matrix, kmax, postselect_pmf, q1_distribution,
    section_matrix, RepeaterTables, MAX_STEPS, TAIL_MASS, W0, W1,
};
pub use keyrate::{
    conditional_key_rate, final_distillation_score, normalized_key_rate, normalized_key_rate_at,
    simplified_key_rate, simplified_key_rate_at, zero_wait_key, KeyEstimate, RateEstimate,
};
pub use states::{
    bit_error, decay_state, dejmps, h2, key_fraction, swap, werner_state, BellDiagonalState,
    MIN_DISTILL_SUCCESS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in fibre, km/s.
pub const FIBRE_LIGHT_SPEED: f64 = 2.0e5;

/// Whether the last distillation round may leave pairs undistilled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalDistillation {
    /// Any partial matching of the swapped pairs; unmatched pairs are kept.
    #[default]
    Optional,
    /// Every pair is distilled; with an odd count one pair is discarded.
    Mandatory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepeaterConfig {
    /// Pairs per bunch.
    pub q0: usize,
    /// Per-attempt link success probability.
    pub p: f64,
    /// Floor on the first-round distillation success probability.
    pub lambda: f64,
    /// Values of `lambda` searched by the rate functions. Empty means
    /// `[lambda]`.
    pub lambda_grid: Vec<f64>,
    pub f_init: f64,
    /// Memory error per time step while a section is connecting.
    pub eps_w: f64,
    /// Memory error per time step while a distilled section waits for the
    /// other; `eps_w` when absent.
    pub eps_w1: Option<f64>,
    /// Depolarising error applied after every two-qubit operation.
    pub eps_l: f64,
    /// Section length in km.
    pub length_km: f64,
    /// Signal speed in km/s.
    pub c_km_per_s: f64,
    pub samples: usize,
    pub seed: u64,
    pub strategy: FinalDistillation,
}

impl Default for RepeaterConfig {
    fn default() -> Self {
        Self {
            q0: 4,
            p: 0.1,
            lambda: 0.8,
            lambda_grid: default_lambda_grid(),
            f_init: 0.95,
            eps_w: 1e-4,
            eps_w1: None,
            eps_l: 0.0,
            length_km: 25.0,
            c_km_per_s: FIBRE_LIGHT_SPEED,
            samples: 100_000,
            seed: 0,
            strategy: FinalDistillation::Optional,
        }
    }
}

/// `{0.55, 0.60, ..., 0.90}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..8).map(|i| (55 + 5 * i) as f64 / 100.0).collect()
}

/// Memory error per time step `2L/c` for a memory with lifetime `tau`
/// seconds: `1 - exp(-4L / (c tau))`.
pub fn eps_w_from_lifetime(length_km: f64, c_km_per_s: f64, tau: f64) -> f64 {
    -(-4.0 * length_km / (c_km_per_s * tau)).exp_m1()
}

/// Inverse of [`eps_w_from_lifetime`].
pub fn lifetime_from_eps_w(length_km: f64, c_km_per_s: f64, eps_w: f64) -> f64 {
    -4.0 * length_km / (c_km_per_s * (-eps_w).ln_1p())
}

impl RepeaterConfig {
    pub fn eps_w0(&self) -> f64 {
        self.eps_w
    }

    pub fn eps_w1(&self) -> f64 {
        self.eps_w1.unwrap_or(self.eps_w)
    }

    /// Duration of one time step in seconds.
    pub fn time_step(&self) -> f64 {
        2.0 * self.length_km / self.c_km_per_s
    }

    /// Set the memory error from a lifetime in seconds.
    pub fn with_lifetime(mut self, tau: f64) -> Self {
        self.eps_w = eps_w_from_lifetime(self.length_km, self.c_km_per_s, tau);
        self
    }

    pub fn lambdas(&self) -> Vec<f64> {
        if self.lambda_grid.is_empty() {
            vec![self.lambda]
        } else {
            self.lambda_grid.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.q0 < 2 {
            return bad(format!("q0 = {} must be at least 2", self.q0));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidProbability(self.p));
        }
        for &l in self.lambdas().iter().chain(std::iter::once(&self.lambda)) {
            if !(l > 0.5 && l <= 1.0) {
                return Err(Error::LambdaOutOfRange(l));
            }
        }
        if !(self.f_init > 0.25 && self.f_init <= 1.0) {
            return bad(format!("f_init = {} outside (0.25, 1]", self.f_init));
        }
        for e in [self.eps_w, self.eps_w1(), self.eps_l] {
            if !(0.0..1.0).contains(&e) {
                return Err(Error::InvalidProbability(e));
            }
        }
        if !(self.length_km > 0.0 && self.c_km_per_s > 0.0) {
            return bad("length and signal speed must be positive".into());
        }
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        Ok(())
    }
}
