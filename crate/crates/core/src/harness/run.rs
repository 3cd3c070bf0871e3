//! Seeded Monte Carlo sweeps over (method, Δt, T).

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::config::{integer_ratio, ExperimentConfig, SolverKind};
use crate::dictionary::{build_design_set, DesignSet, Dictionary};
use crate::error::{Error, Result};
use crate::estimators::{self, LinearSystem, MethodKind, MethodSpec};
use crate::metrics::{
    aggregate, true_diffusion_coefficients, true_drift_coefficients, ErrorReport, Target,
    TrialEnsemble,
};
use crate::sde_sim::{
    euler_maruyama_recorded, initial_condition, subsample, trial_seed, Sde, SdeModel,
};
use crate::sparse::{solve_dense, stls};

/// Result of one trial: either the trajectory diverged, or every
/// `(cell, method)` pair holds an estimate or the reason it failed.
#[derive(Debug, Clone)]
pub enum TrialOutcome {
    Diverged { step: usize },
    Completed(Vec<Vec<std::result::Result<DMatrix<f64>, String>>>),
}

/// Per-trial estimates of a whole sweep, before aggregation.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub methods: Vec<MethodSpec>,
    /// `(dt, T)` pairs, indexed like the inner vectors of [`TrialOutcome::Completed`].
    pub cells: Vec<(f64, f64)>,
    pub drift_truth: DMatrix<f64>,
    pub diffusion_truth: DMatrix<f64>,
    pub trials: Vec<TrialOutcome>,
}

fn target_of(kind: MethodKind) -> Target {
    if kind.is_drift() {
        Target::Drift
    } else {
        Target::Diffusion
    }
}

impl SweepResult {
    pub fn cell_index(&self, dt: f64, t_len: f64) -> Option<usize> {
        self.cells.iter().position(|&(a, b)| a == dt && b == t_len)
    }

    pub fn method_index(&self, kind: MethodKind) -> Option<usize> {
        self.methods.iter().position(|m| m.kind == kind)
    }

    /// Successful estimates for one method and cell, plus the number of
    /// trials excluded (diverged or failed to solve).
    pub fn estimates(&self, method: usize, cell: usize) -> (Vec<DMatrix<f64>>, usize) {
        let mut ok = Vec::new();
        let mut excluded = 0;
        for t in &self.trials {
            match t {
                TrialOutcome::Diverged { .. } => excluded += 1,
                TrialOutcome::Completed(cells) => match &cells[cell][method] {
                    Ok(e) => ok.push(e.clone()),
                    Err(_) => excluded += 1,
                },
            }
        }
        (ok, excluded)
    }

    pub fn ensemble(&self, method: usize, cell: usize) -> TrialEnsemble {
        let spec = &self.methods[method];
        let target = target_of(spec.kind);
        let (estimates, diverged) = self.estimates(method, cell);
        TrialEnsemble {
            estimates,
            truth: match target {
                Target::Drift => self.drift_truth.clone(),
                Target::Diffusion => self.diffusion_truth.clone(),
            },
            method: spec.label(),
            target,
            dt: self.cells[cell].0,
            t_len: self.cells[cell].1,
            diverged,
        }
    }

    /// One report per (method, cell), in config method order then by `dt`, `T`.
    ///
    /// Cells with fewer than two usable trials report `NaN` errors.
    pub fn reports(&self) -> Vec<ErrorReport> {
        let mut out = Vec::new();
        for m in 0..self.methods.len() {
            for c in 0..self.cells.len() {
                let ens = self.ensemble(m, c);
                let report = aggregate(&ens).unwrap_or_else(|_| ErrorReport {
                    method: ens.method.clone(),
                    target: ens.target,
                    dt: ens.dt,
                    t_len: ens.t_len,
                    trials: ens.estimates.len(),
                    diverged: ens.diverged,
                    err_mean: f64::NAN,
                    err_var: f64::NAN,
                });
                out.push(report);
            }
        }
        out
    }

    pub fn diverged_trials(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| matches!(t, TrialOutcome::Diverged { .. }))
            .count()
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    model: SdeModel,
    drift_dict: Dictionary,
    diffusion_dict: Dictionary,
    cells: Vec<(f64, f64)>,
    record_every: usize,
    n_steps: usize,
    max_delay: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let model = cfg.model.build()?;
        let d = model.dim();
        let drift_dict = cfg.drift_dictionary.build(d)?;
        let diffusion_dict = cfg.diffusion_dictionary.build(d)?;
        let strides: Vec<usize> = cfg
            .dt_values
            .iter()
            .map(|&dt| integer_ratio(dt, cfg.sim_dt).expect("validated"))
            .collect();
        let record_every = strides.iter().copied().fold(0, gcd);
        let (max_stride, max_dt) = strides
            .iter()
            .zip(&cfg.dt_values)
            .max_by_key(|(s, _)| **s)
            .map(|(s, dt)| (*s, *dt))
            .unwrap();
        let n_steps = integer_ratio(cfg.t_max(), max_dt).expect("validated") * max_stride;
        let max_delay = cfg
            .methods
            .iter()
            .map(MethodSpec::max_delay)
            .max()
            .unwrap_or(1)
            .max(2);
        Ok(Self {
            cfg,
            model,
            drift_dict,
            diffusion_dict,
            cells: cfg.cells(),
            record_every,
            n_steps,
            max_delay,
        })
    }

    fn solve(&self, sys: &LinearSystem, lambda: f64) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(sys.k(), sys.rhs_count());
        for c in 0..sys.rhs_count() {
            let v = match self.cfg.solver {
                SolverKind::Dense => solve_dense(sys, c)?,
                SolverKind::Stls => stls(sys, c, lambda, self.cfg.max_iter)?.coeffs,
            };
            out.set_column(c, &v);
        }
        Ok(out)
    }

    fn drift_estimate(&self, ds: &DesignSet, spec: &MethodSpec) -> Result<DMatrix<f64>> {
        let sys = estimators::assemble_drift(ds, spec)?;
        self.solve(&sys, self.cfg.lambda_drift)
    }

    fn run_cell(
        &self,
        drift_ds: &DesignSet,
        diff_ds: &DesignSet,
    ) -> Vec<std::result::Result<DMatrix<f64>, String>> {
        // drift estimates are reused by the drift-corrected diffusion methods
        let mut cache: Vec<(MethodKind, std::result::Result<DMatrix<f64>, String>)> = Vec::new();
        let mut drift_for = |kind: MethodKind| -> std::result::Result<DMatrix<f64>, String> {
            if let Some((_, r)) = cache.iter().find(|(k, _)| *k == kind) {
                return r.clone();
            }
            let spec = MethodSpec::new(kind).map_err(|e| e.to_string())?;
            let r = self
                .drift_estimate(drift_ds, &spec)
                .map_err(|e| e.to_string());
            cache.push((kind, r.clone()));
            r
        };
        let lambda = self.cfg.lambda_diffusion;
        self.cfg
            .methods
            .iter()
            .map(|spec| -> std::result::Result<DMatrix<f64>, String> {
                let run = |sys: Result<LinearSystem>| {
                    sys.and_then(|s| self.solve(&s, lambda))
                        .map_err(|e| e.to_string())
                };
                match spec.kind {
                    MethodKind::DriftGeneral => self
                        .drift_estimate(drift_ds, spec)
                        .map_err(|e| e.to_string()),
                    k if k.is_drift() => drift_for(k),
                    MethodKind::DiffFd1 => run(estimators::diffusion_fd1(diff_ds)),
                    MethodKind::DiffFd2 => run(estimators::diffusion_fd2(diff_ds)),
                    MethodKind::DiffDriftSub => {
                        let alpha = drift_for(self.cfg.drift_sub_source)?;
                        let start = drift_ds.theta(0) * &alpha;
                        run(estimators::diffusion_drift_sub_from_samples(
                            diff_ds, &start,
                        ))
                    }
                    MethodKind::DiffTrap => {
                        let alpha = drift_for(self.cfg.trap_diffusion_source)?;
                        let start = drift_ds.theta(0) * &alpha;
                        let end = drift_ds.theta(1) * &alpha;
                        run(estimators::diffusion_trapezoidal_from_samples(
                            diff_ds, &start, &end,
                        ))
                    }
                    _ => unreachable!("all method kinds covered"),
                }
            })
            .collect()
    }

    fn run_trial(&self, trial: usize) -> Result<TrialOutcome> {
        let seed = trial_seed(self.cfg.base_seed, trial as u64);
        let x0 = initial_condition(self.model.dim(), seed);
        let traj = match euler_maruyama_recorded(
            &self.model,
            &x0,
            self.cfg.sim_dt,
            self.n_steps,
            self.record_every,
            seed,
        ) {
            Ok(t) => t,
            Err(Error::Divergence { step }) => return Ok(TrialOutcome::Diverged { step }),
            Err(e) => return Err(e),
        };
        let mut per_cell = Vec::with_capacity(self.cells.len());
        for &(dt, t_len) in &self.cells {
            let stride = integer_ratio(dt, self.cfg.sim_dt).expect("validated") / self.record_every;
            let samples = integer_ratio(t_len, dt).expect("validated") + 1;
            let sub = subsample(&traj, stride)?.truncate(samples)?;
            let drift_ds = build_design_set(&self.drift_dict, &sub, self.max_delay)?;
            let diff_ds = if self.cfg.diffusion_dictionary == self.cfg.drift_dictionary {
                None
            } else {
                Some(build_design_set(
                    &self.diffusion_dict,
                    &sub,
                    self.max_delay,
                )?)
            };
            per_cell.push(self.run_cell(&drift_ds, diff_ds.as_ref().unwrap_or(&drift_ds)));
        }
        Ok(TrialOutcome::Completed(per_cell))
    }
}

/// Simulates every trial and records per-trial estimates for all cells.
///
/// Trial `t` depends only on `(base_seed, t)`; trials run in parallel and are
/// collected in index order, so results do not depend on scheduling.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_trials_with_progress(cfg, &|_| {})
}

/// As [`run_trials`], calling `progress(trial)` as each trial finishes.
pub fn run_trials_with_progress(
    cfg: &ExperimentConfig,
    progress: &(dyn Fn(usize) + Sync),
) -> Result<SweepResult> {
    let ctx = Context::new(cfg)?;
    let drift_truth = true_drift_coefficients(&ctx.model, &ctx.drift_dict)
        .map_err(|e| Error::Config(format!("drift truth: {e}")))?;
    let diffusion_truth = true_diffusion_coefficients(&ctx.model, &ctx.diffusion_dict)
        .map_err(|e| Error::Config(format!("diffusion truth: {e}")))?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let r = ctx.run_trial(t);
            progress(t);
            r
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        methods: cfg.methods.clone(),
        cells: ctx.cells.clone(),
        drift_truth,
        diffusion_truth,
        trials,
    })
}

/// Runs the sweep and aggregates every (method, dt, T) cell.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ErrorReport>> {
    Ok(run_trials(cfg)?.reports())
}
