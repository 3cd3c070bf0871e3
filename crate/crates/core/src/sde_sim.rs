//! SDE models, Euler-Maruyama simulation and subsampling.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::{Basis, Poly};
use crate::error::{Error, Result};

/// Largest state dimension supported by the allocation-free stepping path.
pub const MAX_DIM: usize = 16;

/// Any state component beyond this magnitude counts as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e9;

/// An Itô SDE `dX = μ(X) dt + σ(X) dW` that can be stepped without allocation.
pub trait Sde: Sync {
    fn dim(&self) -> usize;
    fn drift_into(&self, x: &[f64], out: &mut [f64]);
    /// Writes σ(x) in row-major order (`out[i * d + j] = σ_ij`).
    fn diffusion_into(&self, x: &[f64], out: &mut [f64]);
}

/// Flattened list of polynomials for fast evaluation in the stepping loop.
#[derive(Debug, Clone)]
struct CompiledPolys {
    dim: usize,
    max_pow: usize,
    // term t of poly p lives in offsets[p]..offsets[p+1]
    offsets: Vec<usize>,
    coefs: Vec<f64>,
    exps: Vec<u32>,
}

impl CompiledPolys {
    fn new(dim: usize, polys: &[Poly]) -> Self {
        let mut offsets = vec![0];
        let mut coefs = Vec::new();
        let mut exps = Vec::new();
        let mut max_pow = 0;
        for p in polys {
            for (e, c) in p.terms() {
                coefs.push(c);
                exps.extend_from_slice(e);
                max_pow = max_pow.max(e.iter().copied().max().unwrap_or(0) as usize);
            }
            offsets.push(coefs.len());
        }
        Self {
            dim,
            max_pow,
            offsets,
            coefs,
            exps,
        }
    }

    #[inline]
    fn eval_into(&self, basis: Basis, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let stride = self.max_pow + 1;
        let mut vars = [0.0; MAX_DIM];
        basis.vars_into(x, &mut vars[..d]);
        // powers[i * stride + p] = vars[i]^p
        let mut powers = [0.0; MAX_DIM * 8];
        let use_table = stride <= 8;
        if use_table {
            for i in 0..d {
                let mut acc = 1.0;
                for p in 0..stride {
                    powers[i * stride + p] = acc;
                    acc *= vars[i];
                }
            }
        }
        for (o, w) in out.iter_mut().zip(self.offsets.windows(2)) {
            let mut sum = 0.0;
            for t in w[0]..w[1] {
                let e = &self.exps[t * d..(t + 1) * d];
                let mut term = self.coefs[t];
                for i in 0..d {
                    if e[i] != 0 {
                        term *= if use_table {
                            powers[i * stride + e[i] as usize]
                        } else {
                            vars[i].powi(e[i] as i32)
                        };
                    }
                }
                sum += term;
            }
            *o = sum;
        }
    }
}

/// An SDE whose drift components and diffusion entries are polynomials in
/// monomial or sine basis variables.
#[derive(Debug, Clone)]
pub struct SdeModel {
    name: String,
    dim: usize,
    labels: Vec<String>,
    drift_basis: Basis,
    drift: Vec<Poly>,
    diffusion_basis: Basis,
    diffusion: Vec<Poly>,
    drift_c: CompiledPolys,
    diffusion_c: CompiledPolys,
}

impl SdeModel {
    /// `diffusion` holds the d×d entries of σ in row-major order.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        drift_basis: Basis,
        drift: Vec<Poly>,
        diffusion_basis: Basis,
        diffusion: Vec<Poly>,
    ) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "model dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if drift.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "drift has {} components, expected {dim}",
                drift.len()
            )));
        }
        if diffusion.len() != dim * dim {
            return Err(Error::ShapeMismatch(format!(
                "diffusion has {} entries, expected {}",
                diffusion.len(),
                dim * dim
            )));
        }
        if drift.iter().chain(&diffusion).any(|p| p.dim() != dim) {
            return Err(Error::ShapeMismatch(
                "polynomial variable count differs from model dimension".into(),
            ));
        }
        let labels = (0..dim)
            .map(|i| {
                if dim == 1 {
                    "x".to_string()
                } else {
                    format!("x{}", i + 1)
                }
            })
            .collect();
        Ok(Self {
            name: name.into(),
            dim,
            labels,
            drift_c: CompiledPolys::new(dim, &drift),
            diffusion_c: CompiledPolys::new(dim, &diffusion),
            drift_basis,
            drift,
            diffusion_basis,
            diffusion,
        })
    }

    /// `dX = -θ X dt + s dW` in one dimension.
    pub fn ornstein_uhlenbeck(theta: f64, s: f64) -> Self {
        Self::new(
            "ornstein_uhlenbeck",
            1,
            Basis::Monomial,
            vec![Poly::monomial(1, vec![1], -theta)],
            Basis::Monomial,
            vec![Poly::constant(1, s)],
        )
        .expect("valid 1-d model")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn drift_basis(&self) -> Basis {
        self.drift_basis
    }

    pub fn diffusion_basis(&self) -> Basis {
        self.diffusion_basis
    }

    pub fn drift_polys(&self) -> &[Poly] {
        &self.drift
    }

    /// σ entries, row-major.
    pub fn diffusion_polys(&self) -> &[Poly] {
        &self.diffusion
    }

    /// Symbolic `Σ^{i,j} = ½ Σ_m σ^{i,m} σ^{j,m}` for the pairs `i ≥ j`, in
    /// the order (0,0), (1,0), (1,1), (2,0), ...
    pub fn sigma_polys(&self) -> Vec<Poly> {
        let d = self.dim;
        diffusion_pairs(d)
            .into_iter()
            .map(|(i, j)| {
                (0..d)
                    .map(|m| self.diffusion[i * d + m].mul(&self.diffusion[j * d + m]))
                    .fold(Poly::zero(d), |acc, p| acc.add(&p))
                    .scale(0.5)
            })
            .collect()
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(x, &mut out);
        out
    }

    pub fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.diffusion_into(x, &mut out);
        DMatrix::from_row_slice(self.dim, self.dim, &out)
    }
}

impl Sde for SdeModel {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        self.drift_c.eval_into(self.drift_basis, x, out);
    }

    #[inline]
    fn diffusion_into(&self, x: &[f64], out: &mut [f64]) {
        self.diffusion_c.eval_into(self.diffusion_basis, x, out);
    }
}

/// Component pairs `(i, j)` with `i ≥ j`, row by row.
pub fn diffusion_pairs(dim: usize) -> Vec<(usize, usize)> {
    (0..dim)
        .flat_map(|i| (0..=i).map(move |j| (i, j)))
        .collect()
}

/// `Σ(x) = ½ σ(x) σ(x)ᵀ`.
pub fn true_sigma_matrix(model: &impl Sde, x: &[f64]) -> DMatrix<f64> {
    let d = model.dim();
    let mut s = vec![0.0; d * d];
    model.diffusion_into(x, &mut s);
    let sigma = DMatrix::from_row_slice(d, d, &s);
    (&sigma * sigma.transpose()) * 0.5
}

/// The models used in the numerical experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZooModel {
    DoubleWell,
    VanDerPol,
    Lorenz,
}

impl ZooModel {
    pub const ALL: [ZooModel; 3] = [ZooModel::DoubleWell, ZooModel::VanDerPol, ZooModel::Lorenz];

    pub fn name(self) -> &'static str {
        match self {
            ZooModel::DoubleWell => "double_well",
            ZooModel::VanDerPol => "van_der_pol",
            ZooModel::Lorenz => "lorenz",
        }
    }
}

impl fmt::Display for ZooModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ZooModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double_well" => Ok(ZooModel::DoubleWell),
            "van_der_pol" => Ok(ZooModel::VanDerPol),
            "lorenz" => Ok(ZooModel::Lorenz),
            other => Err(Error::InvalidArgument(format!(
                "unknown model `{other}` (expected double_well, van_der_pol or lorenz)"
            ))),
        }
    }
}

pub fn model_zoo(which: ZooModel) -> SdeModel {
    let c = Poly::constant;
    let m = Poly::monomial;
    match which {
        ZooModel::DoubleWell => {
            // μ = -x³ + x/2, σ = 1 + x²/4
            let drift = m(1, vec![3], -1.0).add(&m(1, vec![1], 0.5));
            let sigma = c(1, 1.0).add(&m(1, vec![2], 0.25));
            SdeModel::new(
                which.name(),
                1,
                Basis::Monomial,
                vec![drift],
                Basis::Monomial,
                vec![sigma],
            )
        }
        ZooModel::VanDerPol => {
            let drift = vec![
                m(2, vec![0, 1], 1.0),
                m(2, vec![0, 1], 1.0)
                    .add(&m(2, vec![2, 1], -1.0))
                    .add(&m(2, vec![1, 0], -1.0)),
            ];
            let sigma = vec![
                c(2, 0.5).add(&m(2, vec![0, 1], 0.15)),
                Poly::zero(2),
                Poly::zero(2),
                c(2, 0.25).add(&m(2, vec![1, 0], 0.1)),
            ];
            SdeModel::new(
                which.name(),
                2,
                Basis::Monomial,
                drift,
                Basis::Monomial,
                sigma,
            )
        }
        ZooModel::Lorenz => {
            let drift = vec![
                m(3, vec![0, 1, 0], 10.0).add(&m(3, vec![1, 0, 0], -10.0)),
                m(3, vec![1, 0, 0], 28.0)
                    .add(&m(3, vec![1, 0, 1], -1.0))
                    .add(&m(3, vec![0, 1, 0], -1.0)),
                m(3, vec![1, 1, 0], 1.0).add(&m(3, vec![0, 0, 1], -8.0 / 3.0)),
            ];
            let s = |i: usize| Poly::var(3, i);
            let one = c(3, 1.0);
            let sigma = vec![
                one.add(&s(1)),
                Poly::zero(3),
                s(0),
                Poly::zero(3),
                one.add(&s(2)),
                Poly::zero(3),
                s(0),
                Poly::zero(3),
                one.add(&s(1).scale(-1.0)),
            ];
            SdeModel::new(which.name(), 3, Basis::Monomial, drift, Basis::Trig, sigma)
        }
    }
    .expect("zoo models are well formed")
}

/// A uniformly sampled path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    /// Row-major `len × dim`.
    states: Vec<f64>,
    dt: f64,
    sim_dt: f64,
    seed: u64,
}

impl Trajectory {
    pub fn new(dim: usize, states: Vec<f64>, dt: f64, sim_dt: f64, seed: u64) -> Result<Self> {
        if dim == 0 || !states.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not form rows of length {dim}",
                states.len()
            )));
        }
        if states.len() / dim < 2 {
            return Err(Error::TooShort {
                needed: 2,
                available: states.len() / dim,
            });
        }
        if !(dt > 0.0) || !(sim_dt > 0.0) {
            return Err(Error::InvalidArgument(
                "sampling periods must be positive".into(),
            ));
        }
        Ok(Self {
            dim,
            states,
            dt,
            sim_dt,
            seed,
        })
    }

    /// Convenience constructor for a scalar path sampled at `dt`.
    pub fn from_scalar(values: &[f64], dt: f64) -> Result<Self> {
        Self::new(1, values.to_vec(), dt, dt, 0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sim_dt(&self) -> f64 {
        self.sim_dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Time span `(len - 1) · dt`.
    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    pub fn state(&self, m: usize) -> &[f64] {
        &self.states[m * self.dim..(m + 1) * self.dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn component(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().skip(i).step_by(self.dim).copied()
    }

    /// Keeps the first `samples` states.
    pub fn truncate(&self, samples: usize) -> Result<Trajectory> {
        if samples < 2 || samples > self.len() {
            return Err(Error::TooShort {
                needed: samples.max(2),
                available: self.len(),
            });
        }
        Ok(Trajectory {
            states: self.states[..samples * self.dim].to_vec(),
            ..self.clone()
        })
    }
}

/// Deterministic per-trial RNG seed derived from an experiment seed.
///
/// Each trial's seed depends only on `(base, trial)`, so trials can be run in
/// any order or subset.
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    fn splitmix64(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix64(base ^ splitmix64(trial))
}

/// Initial condition with independent standard normal components, drawn from
/// a stream separate from the one driving the Brownian increments.
pub fn initial_condition(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Euler-Maruyama integration returning all `n_steps + 1` states.
pub fn euler_maruyama(
    model: &impl Sde,
    x0: &[f64],
    sim_dt: f64,
    n_steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    euler_maruyama_recorded(model, x0, sim_dt, n_steps, 1, seed)
}

/// Euler-Maruyama integration keeping every `record_every`-th state.
///
/// Produces exactly `subsample(euler_maruyama(..), record_every)` without
/// holding the fine path in memory. `n_steps` must be a multiple of
/// `record_every`.
pub fn euler_maruyama_recorded(
    model: &impl Sde,
    x0: &[f64],
    sim_dt: f64,
    n_steps: usize,
    record_every: usize,
    seed: u64,
) -> Result<Trajectory> {
    let d = model.dim();
    if x0.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "initial state has length {}, model dimension is {d}",
            x0.len()
        )));
    }
    if d > MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "dimension {d} exceeds {MAX_DIM}"
        )));
    }
    if !(sim_dt > 0.0) || !sim_dt.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sim_dt must be positive, got {sim_dt}"
        )));
    }
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    if record_every == 0 || !n_steps.is_multiple_of(record_every) {
        return Err(Error::InvalidArgument(format!(
            "n_steps {n_steps} is not a multiple of record stride {record_every}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt_dt = sim_dt.sqrt();
    let mut states = Vec::with_capacity((n_steps / record_every + 1) * d);
    states.extend_from_slice(x0);

    let mut x = [0.0; MAX_DIM];
    x[..d].copy_from_slice(x0);
    let mut mu = [0.0; MAX_DIM];
    let mut sig = [0.0; MAX_DIM * MAX_DIM];
    let mut dw = [0.0; MAX_DIM];

    for step in 1..=n_steps {
        model.drift_into(&x[..d], &mut mu[..d]);
        model.diffusion_into(&x[..d], &mut sig[..d * d]);
        for w in dw[..d].iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *w = sqrt_dt * z;
        }
        let mut ok = true;
        for i in 0..d {
            let row = &sig[i * d..(i + 1) * d];
            let noise: f64 = row.iter().zip(&dw[..d]).map(|(s, w)| s * w).sum();
            let xi = x[i] + mu[i] * sim_dt + noise;
            ok &= xi.is_finite() && xi.abs() <= DIVERGENCE_BOUND;
            x[i] = xi;
        }
        if !ok {
            return Err(Error::Divergence { step });
        }
        if step % record_every == 0 {
            states.extend_from_slice(&x[..d]);
        }
    }
    Trajectory::new(d, states, sim_dt * record_every as f64, sim_dt, seed)
}

/// Every `stride`-th state; the sampling period grows accordingly.
pub fn subsample(traj: &Trajectory, stride: usize) -> Result<Trajectory> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    if traj.len() < stride + 1 {
        return Err(Error::TooShort {
            needed: stride + 1,
            available: traj.len(),
        });
    }
    let d = traj.dim;
    let states: Vec<f64> = traj
        .states
        .chunks_exact(d)
        .step_by(stride)
        .flatten()
        .copied()
        .collect();
    Ok(Trajectory {
        dim: d,
        states,
        dt: traj.dt * stride as f64,
        sim_dt: traj.sim_dt,
        seed: traj.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scalar_model(drift: Poly, sigma: Poly) -> SdeModel {
        SdeModel::new(
            "t",
            1,
            Basis::Monomial,
            vec![drift],
            Basis::Monomial,
            vec![sigma],
        )
        .unwrap()
    }

    #[test]
    fn zero_dynamics_is_constant() {
        let m = scalar_model(Poly::zero(1), Poly::zero(1));
        let t = euler_maruyama(&m, &[1.0], 0.01, 50, 7).unwrap();
        assert_eq!(t.len(), 51);
        assert!(t.component(0).all(|v| v == 1.0));
    }

    #[test]
    fn unit_drift_integrates_linearly() {
        let m = scalar_model(Poly::constant(1, 1.0), Poly::zero(1));
        let t = euler_maruyama(&m, &[0.0], 0.1, 10, 0).unwrap();
        // ten additions of 0.1 are within one ulp of 1
        assert_relative_eq!(t.state(10)[0], 1.0, max_relative = 4.0 * f64::EPSILON);
    }

    #[test]
    fn brownian_increment_statistics() {
        let m = scalar_model(Poly::zero(1), Poly::constant(1, 1.0));
        let n = 100_000;
        let t = euler_maruyama(&m, &[0.0], 0.01, n, 42).unwrap();
        let inc: Vec<f64> = t.states().windows(2).map(|w| w[1] - w[0]).collect();
        let mean = inc.iter().sum::<f64>() / n as f64;
        let var = inc.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let se = (0.01 / n as f64).sqrt();
        assert!(mean.abs() < 4.0 * se, "mean {mean}");
        assert!((var / 0.01 - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn deterministic_for_seed() {
        let m = model_zoo(ZooModel::Lorenz);
        let a = euler_maruyama(&m, &[1.0, 2.0, 3.0], 1e-3, 2000, 99).unwrap();
        let b = euler_maruyama(&m, &[1.0, 2.0, 3.0], 1e-3, 2000, 99).unwrap();
        assert_eq!(a, b);
        let c = euler_maruyama(&m, &[1.0, 2.0, 3.0], 1e-3, 2000, 100).unwrap();
        assert_ne!(a.states(), c.states());
    }

    #[test]
    fn drift_only_matches_forward_euler() {
        let m = model_zoo(ZooModel::VanDerPol);
        let noiseless = SdeModel::new(
            "vdp_ode",
            2,
            Basis::Monomial,
            m.drift_polys().to_vec(),
            Basis::Monomial,
            vec![Poly::zero(2); 4],
        )
        .unwrap();
        let h = 0.01;
        let t = euler_maruyama(&noiseless, &[0.5, -0.3], h, 500, 3).unwrap();
        let mut x = [0.5, -0.3];
        for k in 1..=500 {
            let f = noiseless.drift(&x);
            x = [x[0] + f[0] * h, x[1] + f[1] * h];
            assert_eq!(t.state(k), &x[..], "step {k}");
        }
    }

    #[test]
    fn divergence_is_reported() {
        // dx = x^3 dt blows up in finite time
        let m = scalar_model(Poly::monomial(1, vec![3], 1.0), Poly::zero(1));
        match euler_maruyama(&m, &[2.0], 0.1, 1000, 0) {
            Err(Error::Divergence { step }) => assert!(step > 0 && step < 1000),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn recorded_equals_subsampled() {
        let m = model_zoo(ZooModel::DoubleWell);
        let full = euler_maruyama(&m, &[0.3], 1e-3, 1000, 5).unwrap();
        let rec = euler_maruyama_recorded(&m, &[0.3], 1e-3, 1000, 10, 5).unwrap();
        assert_eq!(subsample(&full, 10).unwrap(), rec);
    }

    #[test]
    fn subsample_examples() {
        let v: Vec<f64> = (0..11).map(f64::from).collect();
        let t = Trajectory::from_scalar(&v, 1.0).unwrap();
        assert_eq!(subsample(&t, 1).unwrap(), t);
        let s = subsample(&t, 5).unwrap();
        assert_eq!(s.states(), &[0.0, 5.0, 10.0]);
        assert_eq!(s.dt(), 5.0);
        assert!(subsample(&t, 11).is_err());

        let v: Vec<f64> = (0..21).map(f64::from).collect();
        let t = Trajectory::new(1, v, 0.002, 0.002, 9).unwrap();
        let s = subsample(&t, 10).unwrap();
        assert_eq!(s.len(), 3);
        assert_relative_eq!(s.dt(), 0.02, max_relative = 1e-15);
        assert_eq!(s.seed(), 9);
        assert_eq!(s.sim_dt(), 0.002);
    }

    #[test]
    fn zoo_values() {
        let dw = model_zoo(ZooModel::DoubleWell);
        assert_eq!(dw.drift(&[1.0]), vec![-0.5]);
        let vdp = model_zoo(ZooModel::VanDerPol);
        let s = vdp.diffusion(&[0.0, 0.0]);
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]));
        let lz = model_zoo(ZooModel::Lorenz);
        let f = lz.drift(&[1.0, 1.0, 1.0]);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 26.0);
        assert_relative_eq!(f[2], 1.0 - 8.0 / 3.0, max_relative = 1e-15);
        let x = [0.3, -1.2, 2.0];
        let s = lz.diffusion(&x);
        let (s1, s2, s3) = (x[0].sin(), x[1].sin(), x[2].sin());
        let expect = DMatrix::from_row_slice(
            3,
            3,
            &[1.0 + s2, 0.0, s1, 0.0, 1.0 + s3, 0.0, s1, 0.0, 1.0 - s2],
        );
        assert_relative_eq!(s, expect, max_relative = 1e-15);
    }

    #[test]
    fn sigma_matrix() {
        let m = SdeModel::new(
            "id",
            2,
            Basis::Monomial,
            vec![Poly::zero(2); 2],
            Basis::Monomial,
            vec![
                Poly::constant(2, 1.0),
                Poly::zero(2),
                Poly::zero(2),
                Poly::constant(2, 1.0),
            ],
        )
        .unwrap();
        assert_eq!(
            true_sigma_matrix(&m, &[0.0, 0.0]),
            DMatrix::identity(2, 2) * 0.5
        );
        let dw = model_zoo(ZooModel::DoubleWell);
        assert_eq!(true_sigma_matrix(&dw, &[0.0])[(0, 0)], 0.5);
        assert_eq!(true_sigma_matrix(&dw, &[2.0])[(0, 0)], 2.0);
    }

    #[test]
    fn symbolic_sigma_matches_numeric() {
        let lz = model_zoo(ZooModel::Lorenz);
        let polys = lz.sigma_polys();
        let x = [0.7f64, -0.4, 1.9];
        let vars: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let num = true_sigma_matrix(&lz, &x);
        for (p, (i, j)) in polys.iter().zip(diffusion_pairs(3)) {
            assert_relative_eq!(p.eval_vars(&vars), num[(i, j)], epsilon = 1e-14);
        }
    }

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        assert_eq!(trial_seed(1, 5), trial_seed(1, 5));
        assert_ne!(trial_seed(1, 5), trial_seed(1, 6));
        assert_ne!(trial_seed(1, 5), trial_seed(2, 5));
    }

    proptest! {
        #[test]
        fn subsample_composes(len in 2usize..200, a in 1usize..6, b in 1usize..6) {
            prop_assume!(len > a * b);
            let v: Vec<f64> = (0..len).map(|i| i as f64 * 0.5).collect();
            let t = Trajectory::from_scalar(&v, 0.1).unwrap();
            let ab = subsample(&subsample(&t, a).unwrap(), b).unwrap();
            let direct = subsample(&t, a * b).unwrap();
            prop_assert_eq!(ab.states(), direct.states());
        }
    }
}
