//! Probability generating functions of completion times and closed-form
//! statistics from their poles.
//!
//! The PGF `f(z) = sum_t p_t z^t` of the absorption time solves
//! `(I - z Q^T) x = b(z)` on the transient states, with `Q` the transient
//! block of the process matrix and `b_j = z * (mass from j into terminals)`.
//! The start component of `x` is `f`. Once `f = N / D` is known, every
//! probability beyond `t0 = max(0, deg N - deg D)` is a sum over the poles
//! of `f`, so each additional time step costs one term per pole.

pub mod exact;
pub mod polynomial;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::process::CountedMatrix;
use exact::{bareiss_last_unknown, clear_row, rationalize, QPoly};
pub use polynomial::Polynomial;

/// Transient-state count above which the exact solve is replaced by
/// evaluation and interpolation in floating point.
pub const EXACT_LIMIT: usize = 48;

/// Bound on the bit length of the exact determinant (sum over rows of the
/// largest cleared coefficient). Entries with long binary expansions push
/// past it and take the floating-point route.
pub const EXACT_BITS: u64 = 512;
/// Relative distance under which two roots count as one.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Relative separation below which two poles count as one repeated pole.
pub const MULTIPLICITY_TOL: f64 = 1e-6;
/// Distance from `z = 1` at which a pole signals non-termination.
pub const UNIT_POLE_TOL: f64 = 1e-9;
/// Largest `sum |Res / z|` accepted. The pole expansion of `p_t` sums
/// terms of this size to a probability, so it bounds the digits lost.
pub const RESIDUE_CONDITION_LIMIT: f64 = 1e6;

/// Largest imaginary remainder accepted when reporting a real quantity.
pub const IMAG_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `numerator / denominator`, normalised so the denominator's constant term
/// is one.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalFunction {
    pub numerator: Polynomial,
    pub denominator: Polynomial,
}

impl RationalFunction {
    pub fn new(numerator: Polynomial, denominator: Polynomial) -> Self {
        assert!(!denominator.is_zero(), "zero denominator");
        let d0 = denominator.coeff(0);
        if d0 != ZERO {
            let s = ONE / d0;
            Self {
                numerator: numerator.scale(s),
                denominator: denominator.scale(s),
            }
        } else {
            Self { numerator, denominator }
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.numerator.eval(z) / self.denominator.eval(z)
    }

    /// Power-series coefficients `p_0 .. p_{n-1}`.
    pub fn series(&self, n: usize) -> Vec<Complex64> {
        self.numerator.series_div(&self.denominator, n)
    }

    /// Cancel numerator and denominator roots that coincide to `tol`
    /// (relative to `max(1, |z|)`).
    pub fn cancel_common_roots(&self, tol: f64) -> Self {
        if self.numerator.degree() == 0 || self.denominator.degree() == 0 {
            return self.clone();
        }
        let (Some(nr), Some(dr)) = (self.numerator.roots(), self.denominator.roots()) else {
            return self.clone();
        };
        let mut used = vec![false; nr.len()];
        let mut num = self.numerator.clone();
        let mut den = self.denominator.clone();
        for &d in &dr {
            let hit = nr
                .iter()
                .enumerate()
                .filter(|(k, _)| !used[*k])
                .map(|(k, &n)| (k, (n - d).norm()))
                .filter(|&(_, dist)| dist <= tol * d.norm().max(1.0))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((k, _)) = hit {
                used[k] = true;
                num = num.deflate(nr[k]);
                den = den.deflate(d);
            }
        }
        Self::new(num, den)
    }
}

/// Generating function of the completion time with counters bound to
/// `values` (missing counters are set to one).
pub fn pgf(m: &CountedMatrix, values: &[Complex64]) -> Result<RationalFunction> {
    Ok(pgf_parts(m, values)?.0)
}

/// Mean and variance straight from an exact fraction.
type ExactMoments = Option<(f64, f64)>;

fn pgf_parts(m: &CountedMatrix, values: &[Complex64]) -> Result<(RationalFunction, ExactMoments)> {
    let em = m.evaluate(values);
    let dim = m.dim();
    if m.terminals().is_empty() {
        return Err(Error::DegenerateNullSpace("process has no terminal node".into()));
    }
    if m.is_terminal(0) {
        return Ok((RationalFunction::new(Polynomial::one(), Polynomial::one()), Some((0.0, 0.0))));
    }
    // Transient states with the start last, so it is the final unknown.
    let mut order: Vec<usize> = (1..dim).filter(|&j| !m.is_terminal(j)).collect();
    order.push(0);
    let mut pos = vec![usize::MAX; dim];
    for (k, &j) in order.iter().enumerate() {
        pos[j] = k;
    }
    let real = (0..dim).all(|j| em.column(j).iter().all(|(_, v)| v.im == 0.0));
    let exact = if real && order.len() <= EXACT_LIMIT {
        exact_pgf(&em, &order, &pos)?
    } else {
        None
    };
    let (f, moments) = match exact {
        Some((f, moments)) => (f, moments),
        None => (interpolated_pgf(&em, &order, &pos)?, None),
    };
    Ok((f.cancel_common_roots(CLUSTER_TOL), moments))
}

/// Factorial moments from the Taylor expansion of `num / det` about
/// `z = 1`. `None` unless the fraction is exactly one there.
fn exact_moments(num: &QPoly, det: &QPoly) -> ExactMoments {
    // Coefficient of (z - 1)^k, k <= 2.
    let shifted = |p: &QPoly, k: usize| -> BigRational {
        (k..=p.degree())
            .map(|j| {
                let c = [1, j, j * j.saturating_sub(1) / 2][k];
                p.coeff(j) * BigRational::from_integer(c.into())
            })
            .sum()
    };
    let (n, d): (Vec<_>, Vec<_>) = (0..3).map(|k| (shifted(num, k), shifted(det, k))).unzip();
    if d[0].is_zero() || n[0] != d[0] {
        return None;
    }
    let c0 = BigRational::from_integer(1.into());
    let c1 = (&n[1] - &c0 * &d[1]) / &d[0];
    let c2 = (&n[2] - &c1 * &d[1] - &c0 * &d[2]) / &d[0];
    let two = BigRational::from_integer(2.into());
    let var = &two * &c2 + &c1 - &c1 * &c1;
    Some((c1.to_f64()?, var.to_f64()?))
}

/// Exact solve over the rationals; `None` when the coefficients are too
/// large for it to pay off.
fn exact_pgf(
    em: &crate::process::EvaluatedMatrix,
    order: &[usize],
    pos: &[usize],
) -> Result<Option<(RationalFunction, ExactMoments)>> {
    let n = order.len();
    let mut rows = Vec::with_capacity(n);
    for (r, &j) in order.iter().enumerate() {
        // Row r: the equation for x_j. Entries are [constant, z-coefficient].
        let mut row = vec![vec![BigRational::zero(), BigRational::zero()]; n + 1];
        row[r][0] = BigRational::from_integer(1.into());
        for &(i, v) in em.column(j) {
            let q = rationalize(v.re);
            if em.is_terminal(i) {
                row[n][1] += q;
            } else {
                row[pos[i]][1] -= q;
            }
        }
        rows.push(clear_row(&row));
    }
    let bits: u64 = rows
        .iter()
        .map(|row| row.iter().flat_map(|p| p.0.iter()).map(|c| c.bits()).max().unwrap_or(0))
        .sum();
    if bits > EXACT_BITS {
        return Ok(None);
    }
    let (num, det) = bareiss_last_unknown(rows)
        .ok_or_else(|| Error::DegenerateNullSpace("singular transient system".into()))?;
    if det.is_zero() {
        return Err(Error::DegenerateNullSpace("determinant vanishes".into()));
    }
    let (num, det) = (num.to_q(), det.to_q());
    let g = num.gcd(&det);
    let (num, det) = if g.degree() > 0 {
        (num.div_rem(&g).0, det.div_rem(&g).0)
    } else {
        (num, det)
    };
    let moments = exact_moments(&num, &det);
    let d0 = det.coeff(0);
    if d0.is_zero() {
        return Err(Error::DegenerateNullSpace("denominator vanishes at z = 0".into()));
    }
    let inv = BigRational::from_integer(1.into()) / d0;
    let to_poly = |p: &QPoly| Polynomial::from_real(&p.scale(&inv).to_f64());
    Ok(Some((RationalFunction::new(to_poly(&num), to_poly(&det)), moments)))
}

fn interpolated_pgf(
    em: &crate::process::EvaluatedMatrix,
    order: &[usize],
    pos: &[usize],
) -> Result<RationalFunction> {
    let n = order.len();
    let size = (n + 1).next_power_of_two().max(2);
    let mut det_vals = vec![ZERO; size];
    let mut num_vals = vec![ZERO; size];
    for k in 0..size {
        let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / size as f64);
        let mut a = nalgebra::DMatrix::<Complex64>::identity(n, n);
        let mut b = nalgebra::DVector::<Complex64>::zeros(n);
        for (r, &j) in order.iter().enumerate() {
            for &(i, v) in em.column(j) {
                if em.is_terminal(i) {
                    b[r] += z * v;
                } else {
                    a[(r, pos[i])] -= z * v;
                }
            }
        }
        det_vals[k] = a.clone().lu().determinant();
        a.set_column(n - 1, &b);
        num_vals[k] = a.lu().determinant();
    }
    let coeffs = |mut vals: Vec<Complex64>| {
        FftPlanner::new().plan_fft_forward(size).process(&mut vals);
        // Forward transform of samples at e^{2 pi i k/N} gives N * c_j.
        let mut c: Vec<Complex64> = vals.iter().map(|v| v / size as f64).collect();
        let scale = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for v in c.iter_mut() {
            if v.norm() <= 1e-13 * scale {
                *v = ZERO;
            }
        }
        Polynomial::new(c)
    };
    let den = coeffs(det_vals);
    if den.is_zero() || den.coeff(0) == ZERO {
        return Err(Error::DegenerateNullSpace("determinant vanishes".into()));
    }
    Ok(RationalFunction::new(coeffs(num_vals), den))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pole {
    pub z: Complex64,
    pub residue: Complex64,
}

/// Poles of a PGF with their residues, plus the exact head of the series
/// for the steps where the pole expansion does not yet hold.
#[derive(Clone, Debug)]
pub struct PoleSet {
    poles: Vec<Pole>,
    t0: usize,
    /// `p_t` for `t <= t0` from the power series.
    head: Vec<Complex64>,
    /// `p_t - r_t` for `t <= t0`, where `r_t` is the pole expansion.
    correction: Vec<Complex64>,
    /// Mean and variance from the exact fraction, when it was available.
    exact: ExactMoments,
}

/// Locate the poles of `f` and the residues there.
pub fn poles_and_residues(f: &RationalFunction) -> Result<PoleSet> {
    let den = &f.denominator;
    let roots = den
        .roots()
        .ok_or_else(|| Error::MultiplePoleDetected("eigenvalue solver failed".into()))?;
    for &z in &roots {
        if (z - ONE).norm() < UNIT_POLE_TOL {
            return Err(Error::NonTerminating(format!("{z}")));
        }
    }
    for &z in &roots {
        if z.norm() < 1.0 - UNIT_POLE_TOL {
            return Err(Error::PoleInsideUnitDisc(z.norm()));
        }
    }
    // A repeated root comes back from the eigenvalue solver split by about
    // the square root of the working precision.
    for (a, &za) in roots.iter().enumerate() {
        for &zb in &roots[a + 1..] {
            if (za - zb).norm() <= MULTIPLICITY_TOL * za.norm().max(1.0) {
                return Err(Error::MultiplePoleDetected(format!("{za}")));
            }
        }
    }
    let dprime = den.derivative();
    let mut poles = Vec::with_capacity(roots.len());
    for &z in &roots {
        let d = dprime.eval(z);
        if d == ZERO {
            return Err(Error::MultiplePoleDetected(format!("{z}")));
        }
        poles.push(Pole {
            z,
            residue: f.numerator.eval(z) / d,
        });
    }
    let condition: f64 = poles.iter().map(|p| (p.residue / p.z).norm()).sum();
    if !(condition <= RESIDUE_CONDITION_LIMIT) {
        return Err(Error::MultiplePoleDetected(format!(
            "near-repeated poles: residue magnitude {condition:e}"
        )));
    }
    let t0 = f.numerator.degree().saturating_sub(den.degree());
    let head = f.series(t0 + 1);
    let mut set = PoleSet {
        poles,
        t0,
        head,
        correction: Vec::new(),
        exact: None,
    };
    set.correction = (0..=t0).map(|t| set.head[t] - set.expansion(t)).collect();
    Ok(set)
}

/// PGF and pole set of a process with every counter set to one. Mass that
/// never reaches a terminal shows up as `f(1) < 1`, even when the trapping
/// states cancel out of the reduced fraction.
pub fn analyze(m: &CountedMatrix) -> Result<PoleSet> {
    let (f, exact) = pgf_parts(m, &[])?;
    let total = f.eval(ONE);
    if (total - ONE).norm() > UNIT_POLE_TOL {
        return Err(Error::NonTerminating(format!("f(1) = {}", total.re)));
    }
    let mut set = poles_and_residues(&f)?;
    set.exact = exact;
    Ok(set)
}

fn real(v: Complex64, scale: f64) -> Result<f64> {
    if v.im.abs() > IMAG_TOL * scale.max(1.0) {
        Err(Error::ResidualImaginary(v.im))
    } else {
        Ok(v.re)
    }
}

/// `z^{-(t+1)}` without forming large intermediate powers.
fn inv_pow(z: Complex64, t: usize) -> Complex64 {
    (-(t as f64 + 1.0) * z.ln()).exp()
}

impl PoleSet {
    pub fn poles(&self) -> &[Pole] {
        &self.poles
    }

    /// Last step at which the pole expansion needs the exact series head.
    pub fn t0(&self) -> usize {
        self.t0
    }

    /// Pole expansion `r_t = -sum Res / z^{t+1}`.
    fn expansion(&self, t: usize) -> Complex64 {
        -self.poles.iter().map(|p| p.residue * inv_pow(p.z, t)).sum::<Complex64>()
    }

    /// `p_t` without the imaginary-part check.
    pub fn pmf_complex(&self, t: usize) -> Complex64 {
        if t <= self.t0 {
            self.head[t]
        } else {
            self.expansion(t)
        }
    }

    pub fn pmf(&self, t: usize) -> Result<f64> {
        real(self.pmf_complex(t), 1.0)
    }

    /// `P(T <= t)`.
    pub fn cdf(&self, t: usize) -> Result<f64> {
        let tail: Complex64 = self
            .poles
            .iter()
            .map(|p| p.residue * (ONE - inv_pow(p.z, t)) / (ONE - p.z))
            .sum();
        let fix: Complex64 = self.correction.iter().take(t + 1).sum();
        real(tail + fix, 1.0)
    }

    pub fn mean(&self) -> Result<f64> {
        if let Some((mean, _)) = self.exact {
            return Ok(mean);
        }
        let m = self.mean_complex();
        real(m, m.norm())
    }

    fn mean_complex(&self) -> Complex64 {
        let tail: Complex64 = self
            .poles
            .iter()
            .map(|p| -p.residue / ((ONE - p.z) * (ONE - p.z)))
            .sum();
        let fix: Complex64 = self
            .correction
            .iter()
            .enumerate()
            .map(|(t, c)| c * t as f64)
            .sum();
        tail + fix
    }

    pub fn variance(&self) -> Result<f64> {
        if let Some((_, var)) = self.exact {
            return Ok(var);
        }
        let second: Complex64 = self
            .poles
            .iter()
            .map(|p| p.residue * (ONE + p.z) / ((ONE - p.z) * (ONE - p.z) * (ONE - p.z)))
            .sum::<Complex64>()
            + self
                .correction
                .iter()
                .enumerate()
                .map(|(t, c)| c * (t * t) as f64)
                .sum::<Complex64>();
        let mean = self.mean_complex();
        let var = second - mean * mean;
        let v = real(var, second.norm())?;
        // Cancellation between the two moments can leave a tiny negative.
        Ok(if v < 0.0 && v > -1e-9 * second.norm().max(1.0) { 0.0 } else { v })
    }
}
