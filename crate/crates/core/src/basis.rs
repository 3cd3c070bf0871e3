//! Polynomials over a family of scalar basis variables.
//!
//! Both the dictionaries and the built-in models are expressed as sums of
//! monomials in a set of basis variables: either the state components
//! themselves or their sines. Keeping the symbolic form around lets the
//! library compute exact expansion coefficients of the true drift and of
//! `Σ = ½σσᵀ` in a given dictionary.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// The variables a monomial is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// `x1, x2, ...`
    Monomial,
    /// `sin(x1), sin(x2), ...`
    #[serde(alias = "sine")]
    Trig,
}

impl Basis {
    /// Maps a state to the basis variables.
    #[inline]
    pub fn vars_into(self, x: &[f64], out: &mut [f64]) {
        match self {
            Basis::Monomial => out.copy_from_slice(x),
            Basis::Trig => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = xi.sin();
                }
            }
        }
    }

    fn var_name(self, i: usize, dim: usize) -> String {
        let base = if dim == 1 {
            "x".to_string()
        } else {
            format!("x{}", i + 1)
        };
        match self {
            Basis::Monomial => base,
            Basis::Trig => format!("sin({base})"),
        }
    }

    /// Human-readable label, e.g. `x1^2*x3` or `sin(x1)^2`.
    pub fn label(self, exponents: &[u32]) -> String {
        let dim = exponents.len();
        let parts: Vec<String> = exponents
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| {
                let name = self.var_name(i, dim);
                if e == 1 {
                    name
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Monomial => f.write_str("monomial"),
            Basis::Trig => f.write_str("trig"),
        }
    }
}

/// A polynomial in `dim` basis variables, stored as exponent vector -> coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::monomial(dim, vec![0; dim], c)
    }

    pub fn monomial(dim: usize, exponents: Vec<u32>, coef: f64) -> Self {
        assert_eq!(
            exponents.len(),
            dim,
            "exponent vector length must equal dim"
        );
        let mut p = Self::zero(dim);
        p.add_term(exponents, coef);
        p
    }

    /// The single variable `v_i`.
    pub fn var(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        Self::monomial(dim, e, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add_term(&mut self, exponents: Vec<u32>, coef: f64) {
        assert_eq!(exponents.len(), self.dim);
        if coef == 0.0 {
            return;
        }
        let entry = self.terms.entry(exponents.clone()).or_insert(0.0);
        *entry += coef;
        if *entry == 0.0 {
            self.terms.remove(&exponents);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (e, c) in other.terms() {
            out.add_term(e.to_vec(), c);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.dim, other.dim);
        let mut out = Poly::zero(self.dim);
        for (ea, ca) in self.terms() {
            for (eb, cb) in other.terms() {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero(self.dim);
        for (e, c) in self.terms() {
            out.add_term(e.to_vec(), c * s);
        }
        out
    }

    /// Evaluates at the given basis variable values (not the raw state).
    #[inline]
    pub fn eval_vars(&self, vars: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, &c)| {
                e.iter().zip(vars).fold(
                    c,
                    |acc, (&p, &v)| if p == 0 { acc } else { acc * v.powi(p as i32) },
                )
            })
            .sum()
    }

    /// Coefficient of the given exponent vector (zero if absent).
    pub fn coefficient(&self, exponents: &[u32]) -> f64 {
        self.terms.get(exponents).copied().unwrap_or(0.0)
    }
}
