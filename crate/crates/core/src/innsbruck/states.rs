//! Bell-diagonal two-qubit states and the operations the repeater applies.
//!
//! Coefficients are ordered `(a, b, c, d)` on `Phi+, Psi-, Psi+, Phi-`; the
//! fidelity is `a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonalState {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl BellDiagonalState {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn perfect() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    pub fn maximally_mixed() -> Self {
        Self::new(0.25, 0.25, 0.25, 0.25)
    }

    pub fn fidelity(&self) -> f64 {
        self.a
    }

    pub fn trace(&self) -> f64 {
        self.a + self.b + self.c + self.d
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Map to the Werner state of equal fidelity.
    pub fn twirl(&self) -> Self {
        werner_state(self.a)
    }

    /// Mix with the maximally mixed state: each coefficient becomes
    /// `(1 - eps) x + eps / 4`.
    pub fn decay(&self, eps: f64) -> Self {
        let f = |x: f64| (1.0 - eps) * x + eps / 4.0;
        Self::new(f(self.a), f(self.b), f(self.c), f(self.d))
    }

    /// Bit error averaged over Z and X measurements. Z outcomes disagree on
    /// `Psi+-`, X outcomes on `Psi-` and `Phi-`.
    pub fn bit_error(&self) -> f64 {
        let e_z = self.b + self.c;
        let e_x = self.b + self.d;
        0.5 * (e_z + e_x)
    }
}

/// `(F, (1-F)/3, (1-F)/3, (1-F)/3)`.
pub fn werner_state(f: f64) -> BellDiagonalState {
    let r = (1.0 - f) / 3.0;
    BellDiagonalState::new(f, r, r, r)
}

pub fn decay_state(rho: &BellDiagonalState, eps: f64) -> BellDiagonalState {
    rho.decay(eps)
}

/// Smallest success probability treated as a usable distillation.
pub const MIN_DISTILL_SUCCESS: f64 = 1e-12;

/// DEJMPS distillation of two states: the post-selected output and the
/// probability of success.
pub fn dejmps(r1: &BellDiagonalState, r2: &BellDiagonalState) -> Result<(BellDiagonalState, f64)> {
    let n = (r1.a + r1.b) * (r2.a + r2.b) + (r1.c + r1.d) * (r2.c + r2.d);
    if n < MIN_DISTILL_SUCCESS {
        return Err(Error::DegenerateDistill(n));
    }
    let out = BellDiagonalState::new(
        (r1.a * r2.a + r1.b * r2.b) / n,
        (r2.c * r1.d + r1.c * r2.d) / n,
        (r1.c * r2.c + r1.d * r2.d) / n,
        (r1.a * r2.b + r2.a * r1.b) / n,
    );
    Ok((out, n))
}

/// Entanglement swapping by CNOT and X measurement in the repeater.
pub fn swap(r1: &BellDiagonalState, r2: &BellDiagonalState) -> BellDiagonalState {
    let (a1, b1, c1, d1) = (r1.a, r1.b, r1.c, r1.d);
    let (a2, b2, c2, d2) = (r2.a, r2.b, r2.c, r2.d);
    BellDiagonalState::new(
        a1 * a2 + b1 * b2 + c1 * c2 + d1 * d2,
        a1 * b2 + a2 * b1 + c1 * d2 + c2 * d1,
        a1 * c2 + a2 * c1 + b1 * d2 + b2 * d1,
        a1 * d2 + a2 * d1 + b1 * c2 + b2 * c1,
    )
}

pub fn bit_error(rho: &BellDiagonalState) -> f64 {
    rho.bit_error()
}

/// Binary entropy in bits.
pub fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Secret key fraction `max(0, 1 - 2 h2(e))` of a state with bit error `e`.
pub fn key_fraction(rho: &BellDiagonalState) -> f64 {
    (1.0 - 2.0 * h2(rho.bit_error())).max(0.0)
}
