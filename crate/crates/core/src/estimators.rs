//! Assembly of the (generalized) normal systems for every drift and diffusion
//! estimator.
//!
//! Every system has the form `A v = b` with `A = Θ_0ᵀ M` for some combination
//! `M` of delayed dictionary matrices, and right-hand sides projected by
//! `Θ_0ᵀ`. Left-multiplying by the values at the start of each interval keeps
//! the increment sums converging to Itô integrals; see
//! [`central_difference_least_squares`] for what goes wrong otherwise.
//!
//! Solving is left to [`crate::sparse`], so any method composes with either
//! the dense or the thresholded solver.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionary::DesignSet;
use crate::error::{Error, Result};
use crate::sde_sim::diffusion_pairs;

/// `A v = B[:, c]` for each right-hand side column `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub name: String,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub target_labels: Vec<String>,
}

impl LinearSystem {
    pub fn k(&self) -> usize {
        self.a.nrows()
    }

    pub fn rhs_count(&self) -> usize {
        self.b.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    DriftFd1,
    DriftFd2,
    DriftTrap,
    DriftGeneral,
    DiffFd1,
    DiffDriftSub,
    DiffFd2,
    DiffTrap,
}

impl MethodKind {
    pub const ALL: [MethodKind; 8] = [
        MethodKind::DriftFd1,
        MethodKind::DriftFd2,
        MethodKind::DriftTrap,
        MethodKind::DriftGeneral,
        MethodKind::DiffFd1,
        MethodKind::DiffDriftSub,
        MethodKind::DiffFd2,
        MethodKind::DiffTrap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::DriftFd1 => "drift_fd1",
            MethodKind::DriftFd2 => "drift_fd2",
            MethodKind::DriftTrap => "drift_trap",
            MethodKind::DriftGeneral => "drift_general",
            MethodKind::DiffFd1 => "diff_fd1",
            MethodKind::DiffDriftSub => "diff_drift_sub",
            MethodKind::DiffFd2 => "diff_fd2",
            MethodKind::DiffTrap => "diff_trap",
        }
    }

    pub fn is_drift(self) -> bool {
        matches!(
            self,
            MethodKind::DriftFd1
                | MethodKind::DriftFd2
                | MethodKind::DriftTrap
                | MethodKind::DriftGeneral
        )
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = match s {
            "drift_trapezoidal" => "drift_trap",
            "diffusion_fd1" => "diff_fd1",
            "diffusion_drift_sub" => "diff_drift_sub",
            "diffusion_fd2" => "diff_fd2",
            "diffusion_trapezoidal" => "diff_trap",
            other => other,
        };
        MethodKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// A method, plus linear-multistep coefficients for [`MethodKind::DriftGeneral`].
///
/// `lmm_a[l]` multiplies `Θ_l` (l = 0, 1, ...); `lmm_b[l - 1]` multiplies
/// `D_l` (l = 1, 2, ...) and is given in units of `1/Δt`, so the same spec
/// can be applied across a sweep of sampling periods.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub lmm_a: Option<Vec<f64>>,
    pub lmm_b: Option<Vec<f64>>,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Result<Self> {
        if kind == MethodKind::DriftGeneral {
            return Err(Error::InvalidArgument(
                "drift_general needs coefficient lists; use MethodSpec::general".into(),
            ));
        }
        Ok(Self {
            kind,
            lmm_a: None,
            lmm_b: None,
        })
    }

    pub fn general(a: Vec<f64>, b: Vec<f64>) -> Self {
        Self {
            kind: MethodKind::DriftGeneral,
            lmm_a: Some(a),
            lmm_b: Some(b),
        }
    }

    /// Largest delay this method reads from a design set.
    pub fn max_delay(&self) -> usize {
        match self.kind {
            MethodKind::DriftFd1 | MethodKind::DiffFd1 | MethodKind::DiffDriftSub => 1,
            MethodKind::DriftTrap | MethodKind::DiffTrap => 1,
            MethodKind::DriftFd2 | MethodKind::DiffFd2 => 2,
            MethodKind::DriftGeneral => {
                let a = self.lmm_a.as_ref().map_or(1, |a| a.len().saturating_sub(1));
                let b = self.lmm_b.as_ref().map_or(1, Vec::len);
                a.max(b).max(1)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let has = self.lmm_a.is_some() || self.lmm_b.is_some();
        match (self.kind, has) {
            (MethodKind::DriftGeneral, _) => check_lmm(
                self.lmm_a.as_deref().unwrap_or(&[]),
                self.lmm_b.as_deref().unwrap_or(&[]),
            ),
            (_, true) => Err(Error::InvalidArgument(format!(
                "{} does not take multistep coefficients",
                self.kind
            ))),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match (self.kind, &self.lmm_a, &self.lmm_b) {
            (MethodKind::DriftGeneral, Some(a), Some(b)) => {
                let fmt = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
                format!("drift_general[a={};b={}]", fmt(a), fmt(b))
            }
            (k, _, _) => k.name().to_string(),
        }
    }
}

fn check_lmm(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "multistep coefficient lists must be non-empty".into(),
        ));
    }
    if a.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument(
            "all-zero left coefficients give a singular system".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "multistep coefficients must be finite".into(),
        ));
    }
    Ok(())
}

fn drift_labels(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("mu_{i}")).collect()
}

fn diffusion_labels(d: usize) -> Vec<String> {
    diffusion_pairs(d)
        .into_iter()
        .map(|(i, j)| format!("Sigma_{}{}", i + 1, j + 1))
        .collect()
}

/// General linear-multistep drift system:
/// `A = Σ_l a_l Θ_0ᵀΘ_l`, `B[:, i] = Θ_0ᵀ Σ_l b_l D^i_l`.
///
/// `a[l]` pairs with `Θ_l` starting at `l = 0`; `b[l - 1]` pairs with `D_l`
/// starting at `l = 1`. Both are absolute (already scaled by `Δt`).
pub fn drift_general(ds: &DesignSet, a: &[f64], b: &[f64]) -> Result<LinearSystem> {
    check_lmm(a, b)?;
    if a.len() - 1 > ds.max_delay() || b.len() > ds.max_delay() {
        return Err(Error::InvalidArgument(format!(
            "coefficients reach delay {} but design set stops at {}",
            (a.len() - 1).max(b.len()),
            ds.max_delay()
        )));
    }
    let k = ds.k();
    let mut lhs = DMatrix::zeros(k, k);
    for (l, &al) in a.iter().enumerate() {
        if al != 0.0 {
            lhs += ds.gram(l) * al;
        }
    }
    let mut combined = DMatrix::zeros(ds.rows(), ds.dim());
    for (l, &bl) in b.iter().enumerate() {
        if bl != 0.0 {
            combined += ds.diffs(l + 1) * bl;
        }
    }
    Ok(LinearSystem {
        name: "drift_general".into(),
        a: lhs,
        b: ds.project_columns(&combined),
        target_labels: drift_labels(ds.dim()),
    })
}

fn renamed(mut sys: LinearSystem, name: &str) -> LinearSystem {
    sys.name = name.to_string();
    sys
}

/// First-order forward difference: `Θ_0ᵀΘ_0 α = (1/Δt) Θ_0ᵀ D_1`.
pub fn drift_fd1(ds: &DesignSet) -> Result<LinearSystem> {
    let h = ds.dt();
    drift_general(ds, &[1.0], &[1.0 / h]).map(|s| renamed(s, "drift_fd1"))
}

/// Second-order forward difference:
/// `Θ_0ᵀΘ_0 α = (1/(2Δt)) Θ_0ᵀ (4 D_1 - D_2)`.
pub fn drift_fd2(ds: &DesignSet) -> Result<LinearSystem> {
    let h = ds.dt();
    drift_general(ds, &[1.0], &[2.0 / h, -0.5 / h]).map(|s| renamed(s, "drift_fd2"))
}

/// Trapezoidal rule: `½ Θ_0ᵀ(Θ_0 + Θ_1) α = (1/Δt) Θ_0ᵀ D_1`.
pub fn drift_trapezoidal(ds: &DesignSet) -> Result<LinearSystem> {
    let h = ds.dt();
    drift_general(ds, &[0.5, 0.5], &[1.0 / h]).map(|s| renamed(s, "drift_trap"))
}

/// Assembles any drift method from its spec.
pub fn assemble_drift(ds: &DesignSet, spec: &MethodSpec) -> Result<LinearSystem> {
    spec.validate()?;
    match spec.kind {
        MethodKind::DriftFd1 => drift_fd1(ds),
        MethodKind::DriftFd2 => drift_fd2(ds),
        MethodKind::DriftTrap => drift_trapezoidal(ds),
        MethodKind::DriftGeneral => {
            let h = ds.dt();
            let b: Vec<f64> = spec.lmm_b.as_ref().unwrap().iter().map(|v| v / h).collect();
            drift_general(ds, spec.lmm_a.as_ref().unwrap(), &b)
        }
        other => Err(Error::InvalidArgument(format!(
            "{other} is not a drift method"
        ))),
    }
}

/// The least-squares central-difference system
/// `Θ_1ᵀΘ_1 α = (1/(2Δt)) Θ_1ᵀ D_2`.
///
/// Its right-hand side converges to a Stratonovich rather than an Itô
/// integral, so the estimate is biased. Kept only to demonstrate the bias;
/// the instrumental-variable form is `drift_general(ds, &[0, 1], &[0, 1/(2Δt)])`.
pub fn central_difference_least_squares(ds: &DesignSet) -> Result<LinearSystem> {
    if ds.max_delay() < 2 {
        return Err(Error::InvalidArgument(
            "central difference needs max_delay ≥ 2".into(),
        ));
    }
    let t1 = ds.theta(1);
    let scale = 0.5 / ds.dt();
    Ok(LinearSystem {
        name: "central_difference_ls".into(),
        a: t1.tr_mul(&t1),
        b: t1.tr_mul(ds.diffs(2)) * scale,
        target_labels: drift_labels(ds.dim()),
    })
}

/// `Θ_n α` for each drift component: an `N × d` matrix of drift samples.
pub fn drift_samples(ds: &DesignSet, alpha: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    if alpha.nrows() != ds.k() || alpha.ncols() != ds.dim() {
        return Err(Error::ShapeMismatch(format!(
            "drift coefficients are {}×{}, expected {}×{}",
            alpha.nrows(),
            alpha.ncols(),
            ds.k(),
            ds.dim()
        )));
    }
    Ok(ds.theta(n) * alpha)
}

/// `Θ_0ᵀ (r_i ⊙ r_j) · scale` for every pair `i ≥ j` of the columns of `residual`.
fn pair_rhs(ds: &DesignSet, residual: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let pairs = diffusion_pairs(ds.dim());
    let mut products = DMatrix::zeros(ds.rows(), pairs.len());
    for (c, &(i, j)) in pairs.iter().enumerate() {
        products.set_column(
            c,
            &(residual.column(i).component_mul(&residual.column(j)) * scale),
        );
    }
    ds.project_columns(&products)
}

/// Right-hand side for one ordered pair `(i, j)` of a first-order diffusion
/// system; exposes the Hadamard symmetry `(i, j) ↔ (j, i)`.
pub fn diffusion_fd1_rhs(ds: &DesignSet, i: usize, j: usize) -> DVector<f64> {
    let p = ds.diff(i, 1).component_mul(&ds.diff(j, 1)) * (0.5 / ds.dt());
    ds.project(&p)
}

fn check_drift_samples(ds: &DesignSet, samples: &DMatrix<f64>) -> Result<()> {
    if samples.nrows() != ds.rows() || samples.ncols() != ds.dim() {
        return Err(Error::ShapeMismatch(format!(
            "drift samples are {}×{}, expected {}×{}",
            samples.nrows(),
            samples.ncols(),
            ds.rows(),
            ds.dim()
        )));
    }
    Ok(())
}

/// `Θ_0ᵀΘ_0 β = (1/(2Δt)) Θ_0ᵀ (D^i_1 ⊙ D^j_1)`.
pub fn diffusion_fd1(ds: &DesignSet) -> Result<LinearSystem> {
    Ok(LinearSystem {
        name: "diff_fd1".into(),
        a: ds.gram(0).clone(),
        b: pair_rhs(ds, ds.diffs(1), 0.5 / ds.dt()),
        target_labels: diffusion_labels(ds.dim()),
    })
}

/// Drift-subtracted first-order diffusion, with drift samples `μ(X_m)` given
/// directly as an `N × d` matrix (possibly from a different dictionary).
pub fn diffusion_drift_sub_from_samples(
    ds: &DesignSet,
    drift_start: &DMatrix<f64>,
) -> Result<LinearSystem> {
    check_drift_samples(ds, drift_start)?;
    let residual = ds.diffs(1) - drift_start * ds.dt();
    Ok(LinearSystem {
        name: "diff_drift_sub".into(),
        a: ds.gram(0).clone(),
        b: pair_rhs(ds, &residual, 0.5 / ds.dt()),
        target_labels: diffusion_labels(ds.dim()),
    })
}

/// `Θ_0ᵀΘ_0 β = (1/(2Δt)) Θ_0ᵀ[(D^i_1 − Δt Θ_0 α^i) ⊙ (D^j_1 − Δt Θ_0 α^j)]`,
/// with `alpha` (k × d) a drift estimate in the same dictionary.
pub fn diffusion_drift_sub(ds: &DesignSet, alpha: &DMatrix<f64>) -> Result<LinearSystem> {
    let drift = drift_samples(ds, alpha, 0)?;
    diffusion_drift_sub_from_samples(ds, &drift)
}

/// `Θ_0ᵀΘ_0 β = (1/(4Δt)) Θ_0ᵀ (4 D^i_1⊙D^j_1 − D^i_2⊙D^j_2)`.
pub fn diffusion_fd2(ds: &DesignSet) -> Result<LinearSystem> {
    if ds.max_delay() < 2 {
        return Err(Error::InvalidArgument(
            "diff_fd2 needs max_delay ≥ 2".into(),
        ));
    }
    let pairs = diffusion_pairs(ds.dim());
    let scale = 0.25 / ds.dt();
    let mut products = DMatrix::zeros(ds.rows(), pairs.len());
    for (c, &(i, j)) in pairs.iter().enumerate() {
        let one = ds.diff(i, 1).component_mul(&ds.diff(j, 1)) * 4.0;
        let two = ds.diff(i, 2).component_mul(&ds.diff(j, 2));
        products.set_column(c, &((one - two) * scale));
    }
    Ok(LinearSystem {
        name: "diff_fd2".into(),
        a: ds.gram(0).clone(),
        b: ds.project_columns(&products),
        target_labels: diffusion_labels(ds.dim()),
    })
}

/// Trapezoidal diffusion with the drift at both interval ends supplied as
/// `N × d` sample matrices.
pub fn diffusion_trapezoidal_from_samples(
    ds: &DesignSet,
    drift_start: &DMatrix<f64>,
    drift_end: &DMatrix<f64>,
) -> Result<LinearSystem> {
    check_drift_samples(ds, drift_start)?;
    check_drift_samples(ds, drift_end)?;
    let h = ds.dt();
    let residual = ds.diffs(1) - (drift_start + drift_end) * (0.5 * h);
    Ok(LinearSystem {
        name: "diff_trap".into(),
        a: ds.gram(0) + ds.gram(1),
        b: pair_rhs(ds, &residual, 1.0 / h),
        target_labels: diffusion_labels(ds.dim()),
    })
}

/// `Θ_0ᵀ(Θ_0+Θ_1) β = (1/Δt) Θ_0ᵀ[(D^i_1 − (Δt/2)(Θ_0+Θ_1)α^i) ⊙ (D^j_1 − (Δt/2)(Θ_0+Θ_1)α^j)]`.
pub fn diffusion_trapezoidal(ds: &DesignSet, alpha: &DMatrix<f64>) -> Result<LinearSystem> {
    let start = drift_samples(ds, alpha, 0)?;
    let end = drift_samples(ds, alpha, 1)?;
    diffusion_trapezoidal_from_samples(ds, &start, &end)
}
