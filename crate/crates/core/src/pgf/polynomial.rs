//! Dense univariate polynomials with complex coefficients.

use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::DMatrix;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Coefficients lowest degree first; the leading coefficient is nonzero
/// unless the polynomial is zero.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last() == Some(&ZERO) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::new(vec![ONE])
    }

    /// `prod (z - r)` over the given roots, scaled by `lead`.
    pub fn from_roots(roots: &[Complex64], lead: Complex64) -> Self {
        let mut c = vec![lead];
        for &r in roots {
            let mut next = vec![ZERO; c.len() + 1];
            for (k, &a) in c.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            c = next;
        }
        Self::new(c)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    pub fn lead(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// `sum |c_k| |z|^k`, the natural scale for rounding error in `eval`.
    pub fn eval_abs(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Quotient and remainder of polynomial long division.
    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "division by the zero polynomial");
        if self.coeffs.len() < d.coeffs.len() {
            return (Self::zero(), self.clone());
        }
        let mut rem = self.coeffs.clone();
        let dl = d.coeffs.len();
        let lead = d.lead();
        let mut quot = vec![ZERO; rem.len() - dl + 1];
        for k in (0..quot.len()).rev() {
            let c = rem[k + dl - 1] / lead;
            quot[k] = c;
            for (i, &dc) in d.coeffs.iter().enumerate() {
                rem[k + i] -= c * dc;
            }
        }
        rem.truncate(dl - 1);
        (Self::new(quot), Self::new(rem))
    }

    /// Divide out the factor `(z - r)`, discarding the remainder.
    pub fn deflate(&self, r: Complex64) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        let n = self.coeffs.len() - 1;
        let mut out = vec![ZERO; n];
        let mut acc = ZERO;
        for k in (0..n).rev() {
            acc = acc * r + self.coeffs[k + 1];
            out[k] = acc;
        }
        Self::new(out)
    }

    /// First `n` power-series coefficients of `self / den`; needs `den(0) != 0`.
    pub fn series_div(&self, den: &Self, n: usize) -> Vec<Complex64> {
        let d0 = den.coeff(0);
        assert!(d0 != ZERO, "series division needs a nonzero constant term");
        let mut out: Vec<Complex64> = Vec::with_capacity(n);
        for t in 0..n {
            let mut acc = self.coeff(t);
            for k in 1..=t.min(den.degree()) {
                acc -= den.coeff(k) * out[t - k];
            }
            out.push(acc / d0);
        }
        out
    }

    /// Newton iteration on `self` starting from `z`.
    pub fn polish(&self, mut z: Complex64) -> Complex64 {
        let d = self.derivative();
        let mut best = self.eval(z).norm();
        for _ in 0..50 {
            let dz = d.eval(z);
            if dz == ZERO {
                break;
            }
            let next = z - self.eval(z) / dz;
            let val = self.eval(next).norm();
            if !(val < best) {
                break;
            }
            best = val;
            z = next;
            if val == 0.0 {
                break;
            }
        }
        z
    }

    /// All roots: eigenvalues of the (balanced) companion matrix, refined
    /// together by Aberth iteration so that nearby estimates cannot collapse
    /// onto the same root. Returns `None` if the eigenvalue solver fails.
    pub fn roots(&self) -> Option<Vec<Complex64>> {
        if self.is_zero() || self.degree() == 0 {
            return Some(Vec::new());
        }
        let mut roots = Vec::with_capacity(self.degree());
        // Roots at the origin are split off exactly.
        let zeros = self.coeffs.iter().take_while(|&&c| c == ZERO).count();
        roots.extend(std::iter::repeat(ZERO).take(zeros));
        let reduced = Self::new(self.coeffs[zeros..].to_vec());
        let m = reduced.degree();
        if m == 1 {
            roots.push(-reduced.coeff(0) / reduced.coeff(1));
        } else if m > 1 {
            let start = reduced.companion_eigenvalues()?;
            roots.extend(reduced.aberth(start));
        }
        Some(roots)
    }

    fn companion_eigenvalues(&self) -> Option<Vec<Complex64>> {
        let m = self.degree();
        let lead = self.lead();
        if self.coeffs.iter().all(|c| c.im == 0.0) {
            let mut c = DMatrix::<f64>::zeros(m, m);
            for i in 1..m {
                c[(i, i - 1)] = 1.0;
            }
            for i in 0..m {
                c[(i, m - 1)] = -(self.coeff(i) / lead).re;
            }
            balance_parlett_reinsch(&mut c);
            let eig = c.complex_eigenvalues();
            if eig.iter().any(|z| !z.is_finite()) {
                return None;
            }
            Some(eig.iter().copied().collect())
        } else {
            let mut c = DMatrix::<Complex64>::zeros(m, m);
            for i in 1..m {
                c[(i, i - 1)] = ONE;
            }
            for i in 0..m {
                c[(i, m - 1)] = -self.coeff(i) / lead;
            }
            Some(c.eigenvalues()?.iter().copied().collect())
        }
    }

    /// Simultaneous Aberth-Ehrlich refinement of all root estimates.
    fn aberth(&self, mut z: Vec<Complex64>) -> Vec<Complex64> {
        let d = self.derivative();
        let n = z.len();
        for _ in 0..200 {
            let mut moved = 0.0f64;
            for i in 0..n {
                let p = self.eval(z[i]);
                if p == ZERO {
                    continue;
                }
                let ratio = p / d.eval(z[i]);
                let repel: Complex64 = (0..n)
                    .filter(|&j| j != i && z[j] != z[i])
                    .map(|j| ONE / (z[i] - z[j]))
                    .sum();
                let step = ratio / (ONE - ratio * repel);
                if step.is_finite() {
                    z[i] -= step;
                    moved = moved.max(step.norm() / z[i].norm().max(1.0));
                }
            }
            if moved < 1e-15 {
                break;
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn trims_leading_zeros() {
        let p = Polynomial::from_real(&[1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), 1);
        assert!(Polynomial::from_real(&[0.0]).is_zero());
    }

    #[test]
    fn roots_of_cubic() {
        let p = Polynomial::from_roots(&[c(1.5), c(-2.0), Complex64::new(0.0, 3.0)], c(2.0));
        let mut r = p.roots().unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((r[0] - c(-2.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(0.0, 3.0)).norm() < 1e-12);
        assert!((r[2] - c(1.5)).norm() < 1e-12);
    }

    #[test]
    fn deflation_and_division() {
        let p = Polynomial::from_roots(&[c(2.0), c(3.0)], c(1.0));
        let q = p.deflate(c(2.0));
        assert!((q.eval(c(0.0)) - c(-3.0)).norm() < 1e-15);
        let (quot, rem) = p.div_rem(&Polynomial::from_real(&[-3.0, 1.0]));
        assert!(rem.is_zero() || rem.coeff(0).norm() < 1e-15);
        assert!((quot.coeff(0) - c(-2.0)).norm() < 1e-15);
    }

    #[test]
    fn geometric_series() {
        // 0.5 z / (1 - 0.5 z) = sum 0.5^t z^t for t >= 1
        let n = Polynomial::from_real(&[0.0, 0.5]);
        let d = Polynomial::from_real(&[1.0, -0.5]);
        let s = n.series_div(&d, 5);
        assert_eq!(s[0], c(0.0));
        assert!((s[4] - c(0.0625)).norm() < 1e-16);
    }

    #[test]
    fn zero_roots_split_off() {
        let p = Polynomial::from_real(&[0.0, 0.0, -1.0, 1.0]);
        let r = p.roots().unwrap();
        assert_eq!(r.iter().filter(|z| z.norm() == 0.0).count(), 2);
        assert!(r.iter().any(|z| (z - c(1.0)).norm() < 1e-14));
    }
}
