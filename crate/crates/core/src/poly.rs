//! Multivariate polynomials in counting variables with real coefficients.
//!
//! Variables are identified by position in a counter registry owned by the
//! enclosing matrix. Exponent vectors are stored with trailing zeros trimmed,
//! so a monomial compares equal regardless of how many counters the registry
//! holds.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

/// Exponent vector of a monomial, trailing zeros trimmed.
pub type Monomial = Vec<u32>;

fn trim(mut m: Monomial) -> Monomial {
    while m.last() == Some(&0) {
        m.pop();
    }
    m
}

fn mono_mul(a: &[u32], b: &[u32]) -> Monomial {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0) + b.get(i).copied().unwrap_or(0))
        .collect();
    trim(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CounterPoly {
    terms: BTreeMap<Monomial, f64>,
}

impl CounterPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c);
        p
    }

    /// `coeff * w_var^power`.
    pub fn monomial(var: usize, power: u32, coeff: f64) -> Self {
        let mut m = vec![0; var + 1];
        m[var] = power;
        let mut p = Self::zero();
        p.add_term(m, coeff);
        p
    }

    pub fn var(var: usize) -> Self {
        Self::monomial(var, 1, 1.0)
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, f64)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, mono: Monomial, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let key = trim(mono);
        let slot = self.terms.entry(key.clone()).or_insert(0.0);
        *slot += coeff;
        if *slot == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// True when no counter appears with a nonzero exponent.
    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_empty())
    }

    pub fn constant_term(&self) -> f64 {
        self.terms.get(&Vec::new()).copied().unwrap_or(0.0)
    }

    /// Value with every counter set to one.
    pub fn at_ones(&self) -> f64 {
        self.terms.values().sum()
    }

    pub fn eval(&self, values: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(m, &c)| {
                m.iter().enumerate().fold(Complex64::new(c, 0.0), |acc, (i, &e)| {
                    if e == 0 {
                        acc
                    } else {
                        acc * values.get(i).copied().unwrap_or(Complex64::new(1.0, 0.0)).powu(e)
                    }
                })
            })
            .sum()
    }

    pub fn eval_real(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, &c)| {
                m.iter().enumerate().fold(c, |acc, (i, &e)| {
                    acc * values.get(i).copied().unwrap_or(1.0).powi(e as i32)
                })
            })
            .sum()
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|m| m.get(var).copied().unwrap_or(0)).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.iter().sum()).max().unwrap_or(0)
    }

    pub fn min_coefficient(&self) -> f64 {
        self.terms.values().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), c * s)))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), -c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                out.add_term(mono_mul(ma, mb), ca * cb);
            }
        }
        out
    }

    /// Renumber variables: variable `i` becomes `map[i]`.
    pub fn remap(&self, map: &[usize]) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, &c)| {
            let width = m.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, _)| map[i] + 1).max();
            let mut out = vec![0; width.unwrap_or(0)];
            for (i, &e) in m.iter().enumerate() {
                if e > 0 {
                    out[map[i]] += e;
                }
            }
            (out, c)
        }))
    }

    /// Substitute a real value for one variable.
    pub fn bind(&self, var: usize, value: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, &c)| {
            let mut m = m.clone();
            let mut c = c;
            if let Some(e) = m.get_mut(var) {
                c *= value.powi(*e as i32);
                *e = 0;
            }
            (m, c)
        }))
    }

    /// Coefficient-wise comparison.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let diff = self.sub(other);
        diff.terms.values().all(|c| c.abs() <= tol)
    }
}

impl fmt::Display for CounterPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let vars: Vec<String> = m
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| if e == 1 { format!("w{i}") } else { format!("w{i}^{e}") })
                    .collect();
                if vars.is_empty() {
                    format!("{c}")
                } else {
                    format!("{c}*{}", vars.join("*"))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}
