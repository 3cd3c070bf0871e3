//! Experiment configuration files (TOML).
//!
//! ```toml
//! name = "double_well_desk"
//! sim_dt = 2e-4
//! dt_values = [0.002, 0.004, 0.008]
//! T_values = [500, 1000, 2000]
//! fixed_dt = 0.004          # optional: dt of the variance-vs-T panel
//! trials = 100
//! base_seed = 7
//! methods = ["drift_fd1", "drift_trap", { kind = "drift_general", a = [1.0], b = [1.0] }, "diff_fd1"]
//! solver = "stls"           # or "dense"
//! lambda_drift = 0.005
//! lambda_diffusion = 0.001
//!
//! [model]
//! zoo = "double_well"
//!
//! [drift_dictionary]
//! family = "monomial"
//! max_degree = 5
//!
//! [diffusion_dictionary]
//! family = "monomial"
//! max_degree = 5
//! ```
//!
//! Inline models replace `zoo` with coefficient tables:
//!
//! ```toml
//! [model]
//! dim = 1
//! drift_basis = "monomial"
//! diffusion_basis = "monomial"
//! drift = [{ component = 1, exponents = [1], coef = -1.0 }]
//! diffusion = [{ row = 1, col = 1, exponents = [0], coef = 1.0 }]
//! ```
//!
//! Component, row and column indices are 1-based.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::basis::{Basis, Poly};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::estimators::{MethodKind, MethodSpec};
use crate::sde_sim::{model_zoo, SdeModel, ZooModel};
use crate::sparse::DEFAULT_MAX_ITER;

/// Environment variable overriding `base_seed`.
pub const SEED_ENV: &str = "SINDY_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Dense,
    Stls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictSpec {
    pub family: Basis,
    pub max_degree: u32,
}

impl DictSpec {
    pub fn build(&self, dim: usize) -> Result<Dictionary> {
        Dictionary::new(self.family, dim, self.max_degree)
    }
}

impl fmt::Display for DictSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.family, self.max_degree)
    }
}

/// Parses `monomial:4` or `trig:4`.
impl FromStr for DictSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, degree) = s.split_once(':').ok_or_else(|| {
            Error::Config(format!("dictionary spec `{s}` must look like monomial:4"))
        })?;
        let family = match family {
            "monomial" => Basis::Monomial,
            "trig" | "sine" => Basis::Trig,
            other => {
                return Err(Error::Config(format!(
                    "unknown dictionary family `{other}`"
                )))
            }
        };
        let max_degree = degree
            .parse()
            .map_err(|_| Error::Config(format!("bad dictionary degree `{degree}`")))?;
        Ok(Self { family, max_degree })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftTerm {
    pub component: usize,
    pub exponents: Vec<u32>,
    pub coef: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionTerm {
    pub row: usize,
    pub col: usize,
    pub exponents: Vec<u32>,
    pub coef: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModelConfig {
    Zoo {
        zoo: String,
    },
    Inline {
        #[serde(default)]
        name: Option<String>,
        dim: usize,
        drift_basis: Basis,
        diffusion_basis: Basis,
        #[serde(default)]
        drift: Vec<DriftTerm>,
        #[serde(default)]
        diffusion: Vec<DiffusionTerm>,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<SdeModel> {
        match self {
            ModelConfig::Zoo { zoo } => Ok(model_zoo(
                zoo.parse::<ZooModel>()
                    .map_err(|e| Error::Config(e.to_string()))?,
            )),
            ModelConfig::Inline {
                name,
                dim,
                drift_basis,
                diffusion_basis,
                drift,
                diffusion,
            } => {
                let d = *dim;
                if d == 0 {
                    return Err(Error::Config("model dim must be positive".into()));
                }
                let mut mu = vec![Poly::zero(d); d];
                for t in drift {
                    if !(1..=d).contains(&t.component) || t.exponents.len() != d {
                        return Err(Error::Config(format!(
                            "drift term {t:?} does not fit a {d}-dimensional model"
                        )));
                    }
                    mu[t.component - 1].add_term(t.exponents.clone(), t.coef);
                }
                let mut sigma = vec![Poly::zero(d); d * d];
                for t in diffusion {
                    if !(1..=d).contains(&t.row)
                        || !(1..=d).contains(&t.col)
                        || t.exponents.len() != d
                    {
                        return Err(Error::Config(format!(
                            "diffusion term {t:?} does not fit a {d}-dimensional model"
                        )));
                    }
                    sigma[(t.row - 1) * d + t.col - 1].add_term(t.exponents.clone(), t.coef);
                }
                SdeModel::new(
                    name.clone().unwrap_or_else(|| "inline".into()),
                    d,
                    *drift_basis,
                    mu,
                    *diffusion_basis,
                    sigma,
                )
                .map_err(|e| Error::Config(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum MethodEntry {
    Name(String),
    General {
        kind: String,
        #[serde(default)]
        a: Option<Vec<f64>>,
        #[serde(default)]
        b: Option<Vec<f64>>,
    },
}

impl MethodEntry {
    fn into_spec(self) -> Result<MethodSpec> {
        let (kind, a, b) = match self {
            MethodEntry::Name(n) => (n, None, None),
            MethodEntry::General { kind, a, b } => (kind, a, b),
        };
        let kind: MethodKind = kind
            .parse()
            .map_err(|e: Error| Error::Config(e.to_string()))?;
        let spec = MethodSpec {
            kind,
            lmm_a: a,
            lmm_b: b,
        };
        if kind == MethodKind::DriftGeneral && (spec.lmm_a.is_none() || spec.lmm_b.is_none()) {
            return Err(Error::Config(
                "drift_general needs both `a` and `b` lists".into(),
            ));
        }
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    name: Option<String>,
    model: ModelConfig,
    drift_dictionary: DictSpec,
    diffusion_dictionary: DictSpec,
    sim_dt: f64,
    #[serde(rename = "T_values")]
    t_values: Vec<f64>,
    dt_values: Vec<f64>,
    #[serde(default)]
    fixed_dt: Option<f64>,
    trials: usize,
    base_seed: u64,
    methods: Vec<MethodEntry>,
    lambda_drift: f64,
    lambda_diffusion: f64,
    solver: SolverKind,
    #[serde(default)]
    max_iter: Option<usize>,
    #[serde(default)]
    drift_sub_source: Option<String>,
    #[serde(default)]
    trap_diffusion_source: Option<String>,
}

/// A validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelConfig,
    pub drift_dictionary: DictSpec,
    pub diffusion_dictionary: DictSpec,
    pub sim_dt: f64,
    pub t_values: Vec<f64>,
    pub dt_values: Vec<f64>,
    /// When set, the `T` sweep runs only at this `dt` and the `dt` sweep only
    /// at the largest `T`; otherwise the full grid is evaluated.
    pub fixed_dt: Option<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub methods: Vec<MethodSpec>,
    pub lambda_drift: f64,
    pub lambda_diffusion: f64,
    pub solver: SolverKind,
    pub max_iter: usize,
    /// Drift estimate subtracted by `diff_drift_sub` (default `drift_fd1`).
    pub drift_sub_source: MethodKind,
    /// Drift estimate used by `diff_trap` (default `drift_trap`).
    pub trap_diffusion_source: MethodKind,
}

/// `value / unit` when it is (numerically) a positive integer.
pub(crate) fn integer_ratio(value: f64, unit: f64) -> Option<usize> {
    let r = value / unit;
    let n = r.round();
    if n >= 1.0 && (r - n).abs() <= 1e-9 * n {
        Some(n as usize)
    } else {
        None
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let parse_source = |s: Option<String>, default: MethodKind| -> Result<MethodKind> {
            match s {
                None => Ok(default),
                Some(s) => {
                    let k: MethodKind =
                        s.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
                    if !k.is_drift() || k == MethodKind::DriftGeneral {
                        return Err(Error::Config(format!(
                            "`{s}` cannot supply the drift estimate"
                        )));
                    }
                    Ok(k)
                }
            }
        };
        let cfg = Self {
            name: raw.name.unwrap_or_else(|| "experiment".into()),
            model: raw.model,
            drift_dictionary: raw.drift_dictionary,
            diffusion_dictionary: raw.diffusion_dictionary,
            sim_dt: raw.sim_dt,
            t_values: raw.t_values,
            dt_values: raw.dt_values,
            fixed_dt: raw.fixed_dt,
            trials: raw.trials,
            base_seed: raw.base_seed,
            methods: raw
                .methods
                .into_iter()
                .map(MethodEntry::into_spec)
                .collect::<Result<_>>()?,
            lambda_drift: raw.lambda_drift,
            lambda_diffusion: raw.lambda_diffusion,
            solver: raw.solver,
            max_iter: raw.max_iter.unwrap_or(DEFAULT_MAX_ITER),
            drift_sub_source: parse_source(raw.drift_sub_source, MethodKind::DriftFd1)?,
            trap_diffusion_source: parse_source(raw.trap_diffusion_source, MethodKind::DriftTrap)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies the `SINDY_SEED` override.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Ok(seed) = std::env::var(SEED_ENV) {
            cfg.base_seed = seed.trim().parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV}=`{seed}` is not an unsigned integer"))
            })?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.sim_dt > 0.0 && self.sim_dt.is_finite()) {
            return bad(format!("sim_dt must be positive, got {}", self.sim_dt));
        }
        if self.dt_values.is_empty() || self.t_values.is_empty() {
            return bad("dt_values and T_values must be non-empty".into());
        }
        if self.trials < 2 {
            return bad(format!("need at least 2 trials, got {}", self.trials));
        }
        if self.methods.is_empty() {
            return bad("no methods configured".into());
        }
        if !(self.lambda_drift >= 0.0 && self.lambda_diffusion >= 0.0) {
            return bad("lambda values must be non-negative".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        for &dt in &self.dt_values {
            match integer_ratio(dt, self.sim_dt) {
                Some(r) if r >= 10 => {}
                Some(r) => {
                    return bad(format!(
                        "dt={dt} is only {r} simulation steps; at least 10 are required"
                    ))
                }
                None => {
                    return bad(format!(
                        "dt={dt} is not an integer multiple of sim_dt={}",
                        self.sim_dt
                    ))
                }
            }
        }
        if let Some(f) = self.fixed_dt {
            if !self.dt_values.contains(&f) {
                return bad(format!("fixed_dt={f} must be one of dt_values"));
            }
        }
        let max_dt = self.dt_values.iter().copied().fold(0.0, f64::max);
        for &t in &self.t_values {
            if integer_ratio(t, max_dt).is_none() {
                return bad(format!(
                    "T={t} is not an integer multiple of the largest dt {max_dt}"
                ));
            }
            for (dt, _) in self.cells().iter().filter(|(_, tt)| *tt == t) {
                if integer_ratio(t, *dt).is_none_or(|n| n < 3) {
                    return bad(format!("T={t} does not hold at least 3 samples of dt={dt}"));
                }
            }
        }
        let model = self.model.build()?;
        let d = crate::sde_sim::Sde::dim(&model);
        self.drift_dictionary
            .build(d)
            .map_err(|e| Error::Config(e.to_string()))?;
        self.diffusion_dictionary
            .build(d)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn t_max(&self) -> f64 {
        self.t_values.iter().copied().fold(0.0, f64::max)
    }

    /// The `(dt, T)` pairs to evaluate, sorted by `dt` then `T`.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let mut cells: Vec<(f64, f64)> = match self.fixed_dt {
            Some(fixed) => {
                let tmax = self.t_max();
                let mut c: Vec<_> = self.dt_values.iter().map(|&dt| (dt, tmax)).collect();
                c.extend(self.t_values.iter().map(|&t| (fixed, t)));
                c
            }
            None => self
                .dt_values
                .iter()
                .flat_map(|&dt| self.t_values.iter().map(move |&t| (dt, t)))
                .collect(),
        };
        cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        cells.dedup();
        cells
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        sim_dt = 2e-4
        dt_values = [0.002, 0.004]
        T_values = [100, 200]
        trials = 4
        base_seed = 1
        methods = ["drift_fd1", "diff_trap", { kind = "drift_general", a = [0.5, 0.5], b = [1.0] }]
        solver = "dense"
        lambda_drift = 0.005
        lambda_diffusion = 0.001

        [model]
        zoo = "double_well"

        [drift_dictionary]
        family = "monomial"
        max_degree = 14

        [diffusion_dictionary]
        family = "monomial"
        max_degree = 14
    "#;

    #[test]
    fn full_scale_settings_accepted() {
        let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(cfg.methods.len(), 3);
        assert_eq!(cfg.methods[2].lmm_a.as_deref(), Some(&[0.5, 0.5][..]));
        assert_eq!(cfg.max_iter, 20);
        assert_eq!(cfg.drift_sub_source, MethodKind::DriftFd1);
        assert_eq!(cfg.trap_diffusion_source, MethodKind::DriftTrap);
        assert_eq!(cfg.cells().len(), 4);
    }

    #[test]
    fn resolution_rule() {
        let text = BASE.replace("[0.002, 0.004]", "[0.001, 0.004]");
        let err = ExperimentConfig::from_toml_str(&text)
            .unwrap_err()
            .to_string();
        assert!(err.contains("at least 10"), "{err}");
        let text = BASE.replace("[0.002, 0.004]", "[0.0021, 0.004]");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = BASE.replace("[100, 200]", "[100.001]");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn rejects_unknown_things() {
        assert!(ExperimentConfig::from_toml_str(&BASE.replace("drift_fd1", "drift_fd9")).is_err());
        assert!(ExperimentConfig::from_toml_str(&BASE.replace("double_well", "duffing")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("bogus = 1\n{BASE}")).is_err());
        assert!(ExperimentConfig::from_toml_str(&BASE.replace("b = [1.0]", "b = []")).is_err());
    }

    #[test]
    fn fixed_dt_cells() {
        let text = format!("fixed_dt = 0.002\n{BASE}");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(
            cfg.cells(),
            vec![(0.002, 100.0), (0.002, 200.0), (0.004, 200.0)]
        );
        let text = format!("fixed_dt = 0.003\n{BASE}");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn inline_model() {
        let text = BASE.replace(
            "zoo = \"double_well\"",
            r#"dim = 1
            drift_basis = "monomial"
            diffusion_basis = "monomial"
            drift = [{ component = 1, exponents = [1], coef = -1.0 }]
            diffusion = [{ row = 1, col = 1, exponents = [0], coef = 1.0 }]"#,
        );
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let m = cfg.model.build().unwrap();
        assert_eq!(m.drift(&[2.0]), vec![-2.0]);
        let bad = text.replace("component = 1", "component = 2");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn dict_spec_parsing() {
        let d: DictSpec = "monomial:4".parse().unwrap();
        assert_eq!(
            d,
            DictSpec {
                family: Basis::Monomial,
                max_degree: 4
            }
        );
        let t: DictSpec = "trig:3".parse().unwrap();
        assert_eq!(t.family, Basis::Trig);
        assert!("poly:3".parse::<DictSpec>().is_err());
        assert!("monomial".parse::<DictSpec>().is_err());
    }
}
