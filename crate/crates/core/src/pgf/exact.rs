//! Exact polynomial arithmetic for the generating-function solve.
//!
//! Real matrix entries are turned into rationals, rows are cleared of
//! denominators, and the linear system is reduced by fraction-free (Bareiss)
//! elimination over `Z[z]`. Every intermediate is a minor of the original
//! matrix, so each division is exact and coefficient growth stays linear.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Largest denominator accepted from the continued-fraction search.
const MAX_DENOMINATOR: u64 = 1 << 40;

/// Rational value of a double: the simplest fraction within a few ulps when
/// one with a modest denominator exists, otherwise the exact binary value.
pub fn rationalize(x: f64) -> BigRational {
    if x == 0.0 || !x.is_finite() {
        return BigRational::zero();
    }
    let tol = 8.0 * f64::EPSILON * x.abs();
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x.abs();
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e15 {
            break;
        }
        let ai = a as i128;
        let h = ai * h1 + h0;
        let k = ai * k1 + k0;
        if k as u64 > MAX_DENOMINATOR {
            break;
        }
        (h0, h1, k0, k1) = (h1, h, k1, k);
        if (h as f64 / k as f64 - x.abs()).abs() <= tol {
            let v = BigRational::new(BigInt::from(h), BigInt::from(k));
            return if x < 0.0 { -v } else { v };
        }
        let frac = r - a;
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    BigRational::from_float(x).expect("finite")
}

/// Polynomial with integer coefficients, lowest degree first, trimmed.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ZPoly(pub Vec<BigInt>);

impl ZPoly {
    pub fn new(mut c: Vec<BigInt>) -> Self {
        while c.last().is_some_and(|v| v.is_zero()) {
            c.pop();
        }
        Self(c)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn one() -> Self {
        Self(vec![BigInt::one()])
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::default();
        }
        let mut out = vec![BigInt::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn sub(&self, o: &Self) -> Self {
        let n = self.0.len().max(o.0.len());
        let zero = BigInt::zero();
        Self::new(
            (0..n)
                .map(|k| self.0.get(k).unwrap_or(&zero) - o.0.get(k).unwrap_or(&zero))
                .collect(),
        )
    }

    /// Exact quotient; panics if `d` does not divide `self`.
    pub fn div_exact(&self, d: &Self) -> Self {
        assert!(!d.is_zero(), "division by zero polynomial");
        if self.is_zero() {
            return Self::default();
        }
        let mut rem = self.0.clone();
        let dl = d.0.len();
        assert!(rem.len() >= dl, "inexact polynomial division");
        let lead = d.0.last().unwrap();
        let mut quot = vec![BigInt::zero(); rem.len() - dl + 1];
        for k in (0..quot.len()).rev() {
            let top = &rem[k + dl - 1];
            if top.is_zero() {
                continue;
            }
            let (c, r) = top.div_rem(lead);
            assert!(r.is_zero(), "inexact polynomial division");
            for (i, dc) in d.0.iter().enumerate() {
                rem[k + i] -= &c * dc;
            }
            quot[k] = c;
        }
        debug_assert!(rem.iter().all(|v| v.is_zero()));
        Self::new(quot)
    }

    pub fn to_q(&self) -> QPoly {
        QPoly::new(self.0.iter().map(|c| BigRational::from_integer(c.clone())).collect())
    }
}

/// Solve the `n x (n + 1)` augmented system over `Z[z]` by Bareiss
/// elimination and return `(det A_n, det A)`, where `A_n` is `A` with its
/// last column replaced by the right-hand side. The ratio is the last
/// unknown. Returns `None` if the matrix is singular.
pub fn bareiss_last_unknown(mut a: Vec<Vec<ZPoly>>) -> Option<(ZPoly, ZPoly)> {
    let n = a.len();
    let mut prev = ZPoly::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            let swap = (k + 1..n).find(|&i| !a[i][k].is_zero())?;
            a.swap(k, swap);
        }
        let pivot = a[k][k].clone();
        for i in k + 1..n {
            let aik = a[i][k].clone();
            for j in k + 1..=n {
                let v = pivot.mul(&a[i][j]).sub(&aik.mul(&a[k][j]));
                a[i][j] = v.div_exact(&prev);
            }
            a[i][k] = ZPoly::default();
        }
        prev = pivot;
    }
    // Row swaps change both determinants by the same sign.
    Some((a[n - 1][n].clone(), a[n - 1][n - 1].clone()))
}

/// Polynomial with rational coefficients, lowest degree first, trimmed.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct QPoly(pub Vec<BigRational>);

impl QPoly {
    pub fn new(mut c: Vec<BigRational>) -> Self {
        while c.last().is_some_and(|v| v.is_zero()) {
            c.pop();
        }
        Self(c)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "division by zero polynomial");
        if self.0.len() < d.0.len() {
            return (Self::default(), self.clone());
        }
        let mut rem = self.0.clone();
        let dl = d.0.len();
        let lead = d.0.last().unwrap().clone();
        let mut quot = vec![BigRational::zero(); rem.len() - dl + 1];
        for k in (0..quot.len()).rev() {
            let c = &rem[k + dl - 1] / &lead;
            if c.is_zero() {
                continue;
            }
            for (i, dc) in d.0.iter().enumerate() {
                rem[k + i] -= &c * dc;
            }
            quot[k] = c;
        }
        rem.truncate(dl - 1);
        (Self::new(quot), Self::new(rem))
    }

    fn monic(&self) -> Self {
        match self.0.last() {
            Some(l) => Self::new(self.0.iter().map(|c| c / l).collect()),
            None => Self::default(),
        }
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, o: &Self) -> Self {
        let (mut a, mut b) = (self.monic(), o.monic());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r.monic();
        }
        a
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        Self::new(self.0.iter().map(|c| c * s).collect())
    }

    pub fn coeff(&self, k: usize) -> BigRational {
        self.0.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(ratio_to_f64).collect()
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    // Shift both parts so the quotient is formed from two in-range doubles.
    let (n, d) = (r.numer(), r.denom());
    let shift = (n.bits().max(d.bits()) as i64 - 1000).max(0) as usize;
    let nf = (n.abs() >> shift).to_f64().unwrap_or(f64::INFINITY);
    let df = (d >> shift).to_f64().unwrap_or(f64::INFINITY);
    let v = if df == 0.0 { f64::INFINITY } else { nf / df };
    if n.is_negative() {
        -v
    } else {
        v
    }
}

/// Clear the denominators of a row of rational polynomials.
pub fn clear_row(row: &[Vec<BigRational>]) -> Vec<ZPoly> {
    let mut lcm = BigInt::one();
    for p in row {
        for c in p {
            lcm = lcm.lcm(c.denom());
        }
    }
    row.iter()
        .map(|p| ZPoly::new(p.iter().map(|c| (c * &lcm).to_integer()).collect()))
        .collect()
}
