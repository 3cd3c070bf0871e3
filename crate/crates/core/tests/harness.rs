use std::path::PathBuf;

use stochastic_sindy::estimators::MethodKind;
use stochastic_sindy::harness::{run_experiment, run_trials, ExperimentConfig, TrialOutcome};
use stochastic_sindy::metrics::Target;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const ZERO_NOISE: &str = r#"
    sim_dt = 1e-3
    dt_values = [0.01]
    T_values = [10]
    trials = 2
    base_seed = 1
    methods = ["drift_fd1"]
    solver = "dense"
    lambda_drift = 0.0
    lambda_diffusion = 0.0
    [model]
    dim = 1
    drift_basis = "monomial"
    diffusion_basis = "monomial"
    drift = [{ component = 1, exponents = [1], coef = -1.0 }]
    [drift_dictionary]
    family = "monomial"
    max_degree = 1
    [diffusion_dictionary]
    family = "monomial"
    max_degree = 0
"#;

#[test]
fn zero_noise_trials_agree() {
    let cfg = ExperimentConfig::from_toml_str(ZERO_NOISE).unwrap();
    let reports = run_experiment(&cfg).unwrap();
    assert_eq!(reports.len(), 1);
    let r = &reports[0];
    assert_eq!(r.trials, 2);
    assert!(r.err_var < 1e-24, "err_var {}", r.err_var);
    // forward-Euler path sampled every 10 steps: bias of (1 - 1e-3)^10 - 1 over dt
    let expected = (((1.0f64 - 1e-3).powi(10) - 1.0) / 0.01 + 1.0).abs();
    assert!(
        (r.err_mean - expected).abs() < 1e-9,
        "{} vs {expected}",
        r.err_mean
    );
}

#[test]
fn ou_sanity() {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        sim_dt = 1e-3
        dt_values = [0.01]
        T_values = [5000]
        trials = 100
        base_seed = 12
        methods = ["drift_fd1"]
        solver = "dense"
        lambda_drift = 0.0
        lambda_diffusion = 0.0
        [model]
        dim = 1
        drift_basis = "monomial"
        diffusion_basis = "monomial"
        drift = [{ component = 1, exponents = [1], coef = -1.0 }]
        diffusion = [{ row = 1, col = 1, exponents = [0], coef = 1.0 }]
        [drift_dictionary]
        family = "monomial"
        max_degree = 1
        [diffusion_dictionary]
        family = "monomial"
        max_degree = 0
        "#,
    )
    .unwrap();
    let r = run_experiment(&cfg).unwrap();
    assert!(r[0].err_mean <= 0.05, "err_mean {}", r[0].err_mean);
}

fn small_double_well(trials: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str(
        r#"
        sim_dt = 1e-3
        dt_values = [0.01, 0.02]
        T_values = [20, 40]
        trials = 2
        base_seed = 77
        methods = ["drift_fd1", "drift_trap", "diff_fd1", "diff_drift_sub", "diff_trap"]
        solver = "stls"
        lambda_drift = 0.01
        lambda_diffusion = 0.01
        [model]
        zoo = "double_well"
        [drift_dictionary]
        family = "monomial"
        max_degree = 4
        [diffusion_dictionary]
        family = "monomial"
        max_degree = 4
        "#,
    )
    .unwrap();
    cfg.trials = trials;
    cfg
}

#[test]
fn trials_are_independent_of_each_other() {
    let few = run_trials(&small_double_well(3)).unwrap();
    let many = run_trials(&small_double_well(6)).unwrap();
    for t in 0..3 {
        match (&few.trials[t], &many.trials[t]) {
            (TrialOutcome::Completed(a), TrialOutcome::Completed(b)) => {
                assert_eq!(a, b, "trial {t}")
            }
            (TrialOutcome::Diverged { step: a }, TrialOutcome::Diverged { step: b }) => {
                assert_eq!(a, b)
            }
            _ => panic!("trial {t} changed outcome"),
        }
    }
}

#[test]
fn sweep_is_repeatable_and_ordered() {
    let cfg = small_double_well(4);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 5 * 4);
    let methods: Vec<&str> = a.iter().step_by(4).map(|r| r.method.as_str()).collect();
    assert_eq!(
        methods,
        [
            "drift_fd1",
            "drift_trap",
            "diff_fd1",
            "diff_drift_sub",
            "diff_trap"
        ]
    );
    assert!(a.iter().all(|r| r.trials + r.diverged == 4));
    assert_eq!(a[0].target, Target::Drift);
    assert_eq!(a[19].target, Target::Diffusion);
}

#[test]
fn fixed_dt_restricts_the_grid() {
    let mut cfg = small_double_well(2);
    cfg.fixed_dt = Some(0.02);
    assert_eq!(cfg.cells(), vec![(0.01, 40.0), (0.02, 20.0), (0.02, 40.0)]);
    let sweep = run_trials(&cfg).unwrap();
    assert_eq!(sweep.cells.len(), 3);
    assert!(sweep.cell_index(0.01, 20.0).is_none());
    assert!(sweep.method_index(MethodKind::DiffTrap).is_some());
}

#[test]
fn divergent_trials_are_excluded() {
    let mut cfg = ExperimentConfig::from_toml_str(
        r#"
        sim_dt = 1e-2
        dt_values = [0.1]
        T_values = [50]
        trials = 3
        base_seed = 1
        methods = ["drift_fd1"]
        solver = "dense"
        lambda_drift = 0.0
        lambda_diffusion = 0.0
        [model]
        dim = 1
        drift_basis = "monomial"
        diffusion_basis = "monomial"
        drift = [{ component = 1, exponents = [3], coef = 1.0 }]
        diffusion = [{ row = 1, col = 1, exponents = [0], coef = 1.0 }]
        [drift_dictionary]
        family = "monomial"
        max_degree = 3
        [diffusion_dictionary]
        family = "monomial"
        max_degree = 0
        "#,
    )
    .unwrap();
    cfg.trials = 3;
    let sweep = run_trials(&cfg).unwrap();
    assert_eq!(sweep.diverged_trials(), 3);
    let r = &sweep.reports()[0];
    assert_eq!(r.diverged, 3);
    assert_eq!(r.trials, 0);
    assert!(r.err_mean.is_nan());
}

#[test]
fn shipped_configs_parse() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}

#[test]
fn full_scale_double_well_settings_accepted() {
    let cfg = ExperimentConfig::load(&configs_dir().join("double_well_full.toml")).unwrap();
    assert_eq!(cfg.drift_dictionary.max_degree, 14);
    assert_eq!(cfg.lambda_drift, 0.005);
    assert_eq!(cfg.lambda_diffusion, 0.001);
    assert_eq!(cfg.sim_dt, 2e-4);
    assert_eq!(cfg.t_max(), 20000.0);
}
