//! Normalized error statistics over ensembles of trials, convergence-order
//! fits, and exact expansion coefficients of the true model.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, Poly};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::sde_sim::SdeModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Drift,
    Diffusion,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Drift => "drift",
            Target::Diffusion => "diffusion",
        })
    }
}

/// Estimates from independent trials of one (method, Δt, T) cell.
///
/// Each estimate and the truth are `k × c` with one column per drift
/// component or per diffusion pair `i ≥ j`.
#[derive(Debug, Clone)]
pub struct TrialEnsemble {
    pub estimates: Vec<DMatrix<f64>>,
    pub truth: DMatrix<f64>,
    pub method: String,
    pub target: Target,
    pub dt: f64,
    pub t_len: f64,
    pub diverged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub method: String,
    pub target: Target,
    pub dt: f64,
    pub t_len: f64,
    pub trials: usize,
    pub diverged: usize,
    pub err_mean: f64,
    pub err_var: f64,
}

impl ErrorReport {
    /// Rough standard error of `err_mean`: the spread of the ensemble mean.
    pub fn mean_standard_error(&self) -> f64 {
        (self.err_var / self.trials as f64).sqrt()
    }
}

/// `Err_m = ‖mean(est) − truth‖ / ‖truth‖` and
/// `Err_var = mean(‖est − mean(est)‖²) / ‖truth‖²`, norms taken over all
/// coefficients of all components (population variance).
pub fn aggregate(ens: &TrialEnsemble) -> Result<ErrorReport> {
    let n = ens.estimates.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 trials to aggregate, have {n}"
        )));
    }
    let shape = ens.truth.shape();
    if let Some(bad) = ens.estimates.iter().find(|e| e.shape() != shape) {
        return Err(Error::ShapeMismatch(format!(
            "estimate is {:?}, truth is {shape:?}",
            bad.shape()
        )));
    }
    let truth_sq = ens.truth.norm_squared();
    if truth_sq == 0.0 {
        return Err(Error::ZeroTruth);
    }
    let mut mean = DMatrix::zeros(shape.0, shape.1);
    for e in &ens.estimates {
        mean += e;
    }
    mean /= n as f64;
    let bias_sq = (&mean - &ens.truth).norm_squared();
    let spread: f64 = ens
        .estimates
        .iter()
        .map(|e| (e - &mean).norm_squared())
        .sum::<f64>()
        / n as f64;
    Ok(ErrorReport {
        method: ens.method.clone(),
        target: ens.target,
        dt: ens.dt,
        t_len: ens.t_len,
        trials: n,
        diverged: ens.diverged,
        err_mean: (bias_sq / truth_sq).sqrt(),
        err_var: spread / truth_sq,
    })
}

/// Least-squares slope of `ln err` against `ln dt`.
pub fn fit_order(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 points to fit an order, have {}",
            points.len()
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::InvalidArgument(format!(
            "order fit needs positive finite values, got ({}, {})",
            p.0, p.1
        )));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "order fit needs distinct abscissae".into(),
        ));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

fn project_poly(poly: &Poly, basis: Basis, dict: &Dictionary, what: &str) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dict.size()];
    for (e, c) in poly.terms() {
        let is_constant = e.iter().all(|&p| p == 0);
        if basis != dict.basis() && !is_constant {
            return Err(Error::NotRepresentable(format!(
                "{what} is a {basis} polynomial; the dictionary is {}",
                dict.basis()
            )));
        }
        let idx = dict.index_of(e).ok_or_else(|| {
            Error::NotRepresentable(format!(
                "{what} term `{}` is not in the degree-{} {} dictionary",
                basis.label(e),
                dict.max_degree(),
                dict.basis()
            ))
        })?;
        out[idx] += c;
    }
    Ok(out)
}

/// True drift coefficients `α` as a `k × d` matrix.
pub fn true_drift_coefficients(model: &SdeModel, dict: &Dictionary) -> Result<DMatrix<f64>> {
    let d = model.drift_polys().len();
    check_dim(model, dict)?;
    let mut m = DMatrix::zeros(dict.size(), d);
    for (i, p) in model.drift_polys().iter().enumerate() {
        let col = project_poly(
            p,
            model.drift_basis(),
            dict,
            &format!("drift component {}", i + 1),
        )?;
        m.set_column(i, &nalgebra::DVector::from_vec(col));
    }
    Ok(m)
}

/// True diffusion coefficients `β` for `Σ = ½σσᵀ` as a `k × d(d+1)/2` matrix.
pub fn true_diffusion_coefficients(model: &SdeModel, dict: &Dictionary) -> Result<DMatrix<f64>> {
    check_dim(model, dict)?;
    let polys = model.sigma_polys();
    let mut m = DMatrix::zeros(dict.size(), polys.len());
    for (c, p) in polys.iter().enumerate() {
        let col = project_poly(p, model.diffusion_basis(), dict, "diffusion")?;
        m.set_column(c, &nalgebra::DVector::from_vec(col));
    }
    Ok(m)
}

fn check_dim(model: &SdeModel, dict: &Dictionary) -> Result<()> {
    use crate::sde_sim::Sde;
    if model.dim() != dict.dim() {
        return Err(Error::ShapeMismatch(format!(
            "model dimension {} but dictionary has {} variables",
            model.dim(),
            dict.dim()
        )));
    }
    Ok(())
}
