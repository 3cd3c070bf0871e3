//! Basis-function dictionaries and the delayed design matrices built from a
//! trajectory.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::sde_sim::{Trajectory, MAX_DIM};

/// Upper bound on dictionary size.
pub const MAX_DICTIONARY_SIZE: usize = 1_000_000;

/// All monomials of total degree `≤ max_degree` in the basis variables,
/// graded-lex ordered with the constant first.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    basis: Basis,
    dim: usize,
    max_degree: u32,
    exponents: Vec<Vec<u32>>,
    labels: Vec<String>,
}

fn binomial(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Exponent vectors of total degree `deg`, lexicographically descending.
fn exponents_of_degree(dim: usize, deg: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == dim {
        prefix.push(deg);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in (0..=deg).rev() {
        prefix.push(e);
        exponents_of_degree(dim, deg - e, prefix, out);
        prefix.pop();
    }
}

impl Dictionary {
    pub fn new(basis: Basis, dim: usize, max_degree: u32) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "dictionary dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        let size = binomial(dim as u64 + max_degree as u64, dim as u64);
        match size {
            Some(k) if k <= MAX_DICTIONARY_SIZE as u128 => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "dictionary of degree {max_degree} in {dim} variables exceeds {MAX_DICTIONARY_SIZE} functions"
                )))
            }
        }
        let mut exponents = Vec::new();
        for deg in 0..=max_degree {
            exponents_of_degree(dim, deg, &mut Vec::with_capacity(dim), &mut exponents);
        }
        let labels = exponents.iter().map(|e| basis.label(e)).collect();
        Ok(Self {
            basis,
            dim,
            max_degree,
            exponents,
            labels,
        })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.exponents.len()
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn index_of(&self, exponents: &[u32]) -> Option<usize> {
        if exponents.len() != self.dim || exponents.iter().sum::<u32>() > self.max_degree {
            return None;
        }
        self.exponents.iter().position(|e| e == exponents)
    }

    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// θ(x) written into `out` (length k). `scratch` must hold
    /// `dim * (max_degree + 1)` values.
    fn eval_with(&self, x: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        let stride = self.max_degree as usize + 1;
        let mut vars = [0.0; MAX_DIM];
        self.basis.vars_into(x, &mut vars[..self.dim]);
        for i in 0..self.dim {
            let mut acc = 1.0;
            for p in 0..stride {
                scratch[i * stride + p] = acc;
                acc *= vars[i];
            }
        }
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = e
                .iter()
                .enumerate()
                .fold(1.0, |acc, (i, &p)| acc * scratch[i * stride + p as usize]);
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut scratch = vec![0.0; self.dim * (self.max_degree as usize + 1)];
        let mut out = vec![0.0; self.size()];
        self.eval_with(x, &mut scratch, &mut out);
        out
    }

    /// Evaluates θ on every state of a trajectory: a `len × k` matrix.
    pub fn eval_trajectory(&self, traj: &Trajectory) -> DMatrix<f64> {
        let rows = traj.len();
        let k = self.size();
        let mut scratch = vec![0.0; self.dim * (self.max_degree as usize + 1)];
        let mut row = vec![0.0; k];
        let mut m = DMatrix::zeros(rows, k);
        for r in 0..rows {
            self.eval_with(traj.state(r), &mut scratch, &mut row);
            for (c, v) in row.iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        m
    }
}

pub fn monomial_dictionary(dim: usize, max_degree: u32) -> Result<Dictionary> {
    Dictionary::new(Basis::Monomial, dim, max_degree)
}

pub fn trig_monomial_dictionary(dim: usize, max_degree: u32) -> Result<Dictionary> {
    Dictionary::new(Basis::Trig, dim, max_degree)
}

/// Delayed dictionary matrices `Θ_n` and `n`-step increments `D^i_n` sharing a
/// common row count `N = len - max_delay`.
///
/// Row `m` of `Θ_n` is θ(X_{m+n}); entry `m` of `D^i_n` is `X^i_{m+n} - X^i_m`.
#[derive(Debug, Clone)]
pub struct DesignSet {
    /// θ on every sample, `len × k`; `Θ_n` is a row window into it.
    values: DMatrix<f64>,
    /// `diffs[n - 1]` is `N × d` with column `i` holding `D^i_n`.
    diffs: Vec<DMatrix<f64>>,
    /// Lazily computed owned `Θ_0ᵀ`, so products with it run as blocked GEMM.
    theta0_t: OnceLock<DMatrix<f64>>,
    /// Lazily computed `Θ_0ᵀ Θ_l`.
    grams: Vec<OnceLock<DMatrix<f64>>>,
    rows: usize,
    max_delay: usize,
    dt: f64,
}

impl DesignSet {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn max_delay(&self) -> usize {
        self.max_delay
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of dictionary functions.
    pub fn k(&self) -> usize {
        self.values.ncols()
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.diffs[0].ncols()
    }

    /// `Θ_n`, an `N × k` view.
    pub fn theta(&self, n: usize) -> DMatrixView<'_, f64> {
        assert!(
            n <= self.max_delay,
            "delay {n} exceeds max_delay {}",
            self.max_delay
        );
        self.values.rows(n, self.rows)
    }

    /// `D^i_n` for `n ≥ 1`.
    pub fn diff(&self, i: usize, n: usize) -> DVectorView<'_, f64> {
        assert!(
            (1..=self.max_delay).contains(&n),
            "span {n} outside 1..={}",
            self.max_delay
        );
        self.diffs[n - 1].column(i)
    }

    /// All components of `D_n` as an `N × d` matrix.
    pub fn diffs(&self, n: usize) -> &DMatrix<f64> {
        &self.diffs[n - 1]
    }

    /// `Θ_0ᵀ Θ_l`, computed once and shared by every estimator on this set.
    pub fn gram(&self, l: usize) -> &DMatrix<f64> {
        self.grams[l].get_or_init(|| self.theta0_transpose() * self.theta(l))
    }

    /// `Θ_0ᵀ` as an owned `k × N` matrix.
    pub fn theta0_transpose(&self) -> &DMatrix<f64> {
        self.theta0_t.get_or_init(|| self.theta(0).transpose())
    }

    /// `Θ_0ᵀ v` for a length-N vector.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        self.theta0_transpose() * v
    }

    /// `Θ_0ᵀ M` for an `N × c` matrix.
    pub fn project_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.theta0_transpose() * m
    }
}

pub fn build_design_set(
    dict: &Dictionary,
    traj: &Trajectory,
    max_delay: usize,
) -> Result<DesignSet> {
    if dict.dim() != traj.dim() {
        return Err(Error::ShapeMismatch(format!(
            "dictionary has {} variables, trajectory has dimension {}",
            dict.dim(),
            traj.dim()
        )));
    }
    if max_delay == 0 {
        return Err(Error::InvalidArgument(
            "max_delay must be at least 1".into(),
        ));
    }
    if traj.len() < max_delay + 1 {
        return Err(Error::TooShort {
            needed: max_delay + 1,
            available: traj.len(),
        });
    }
    let rows = traj.len() - max_delay;
    let d = traj.dim();
    let diffs = (1..=max_delay)
        .map(|n| DMatrix::from_fn(rows, d, |m, i| traj.state(m + n)[i] - traj.state(m)[i]))
        .collect();
    Ok(DesignSet {
        values: dict.eval_trajectory(traj),
        diffs,
        theta0_t: OnceLock::new(),
        grams: (0..=max_delay).map(|_| OnceLock::new()).collect(),
        rows,
        max_delay,
        dt: traj.dt(),
    })
}
