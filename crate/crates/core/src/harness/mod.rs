//! Experiment harness: configuration, Monte Carlo sweeps and output files.

pub mod config;
pub mod output;
pub mod run;

pub use config::{DictSpec, ExperimentConfig, ModelConfig, SolverKind};
pub use output::{convergence_orders, emit_csv, emit_plot_data, read_csv, PlotOutput};
pub use run::{run_experiment, run_trials, run_trials_with_progress, SweepResult, TrialOutcome};

use crate::basis::Basis;
use crate::sde_sim::ZooModel;

/// Published simulation settings for a built-in model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSettings {
    pub model: ZooModel,
    pub drift_dictionary: DictSpec,
    pub diffusion_dictionary: DictSpec,
    pub lambda_drift: f64,
    pub lambda_diffusion: f64,
    pub t_len: f64,
    pub sim_dt: f64,
    pub trials: usize,
    /// `dt` of the variance-vs-`T` panels (drift, diffusion).
    pub fixed_dt: (f64, f64),
}

pub fn reference_settings(model: ZooModel) -> ReferenceSettings {
    let dict = |family, max_degree| DictSpec { family, max_degree };
    match model {
        ZooModel::DoubleWell => ReferenceSettings {
            model,
            drift_dictionary: dict(Basis::Monomial, 14),
            diffusion_dictionary: dict(Basis::Monomial, 14),
            lambda_drift: 0.005,
            lambda_diffusion: 0.001,
            t_len: 20000.0,
            sim_dt: 2e-4,
            trials: 1000,
            fixed_dt: (0.004, 0.004),
        },
        ZooModel::VanDerPol => ReferenceSettings {
            model,
            drift_dictionary: dict(Basis::Monomial, 6),
            diffusion_dictionary: dict(Basis::Monomial, 6),
            lambda_drift: 0.05,
            lambda_diffusion: 0.02,
            t_len: 1000.0,
            sim_dt: 2e-5,
            trials: 1000,
            fixed_dt: (0.008, 0.008),
        },
        ZooModel::Lorenz => ReferenceSettings {
            model,
            drift_dictionary: dict(Basis::Monomial, 4),
            diffusion_dictionary: dict(Basis::Trig, 4),
            lambda_drift: 0.05,
            lambda_diffusion: 0.02,
            t_len: 1000.0,
            sim_dt: 2e-5,
            trials: 1000,
            fixed_dt: (0.08, 0.02),
        },
    }
}

impl std::fmt::Display for ReferenceSettings {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "drift_dict={}, diffusion_dict={}, λ_drift={}, λ_diff={}, T={}, sim_dt={:e}, trials={}",
            self.drift_dictionary,
            self.diffusion_dictionary,
            self.lambda_drift,
            self.lambda_diffusion,
            self.t_len,
            self.sim_dt,
            self.trials
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_well_listing() {
        let s = reference_settings(ZooModel::DoubleWell).to_string();
        assert!(
            s.contains("λ_drift=0.005, λ_diff=0.001, T=20000, sim_dt=2e-4"),
            "{s}"
        );
    }

    #[test]
    fn lorenz_uses_trig_diffusion() {
        let s = reference_settings(ZooModel::Lorenz);
        assert_eq!(s.diffusion_dictionary.to_string(), "trig:4");
        assert_eq!(s.drift_dictionary.to_string(), "monomial:4");
    }
}
