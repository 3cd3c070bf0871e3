//! Dense and sequentially thresholded solvers for the assembled systems.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::LinearSystem;

/// Systems whose equilibrated 1-norm condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

pub const DEFAULT_MAX_ITER: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub coeffs: DVector<f64>,
    pub support: BTreeSet<usize>,
    pub iterations: usize,
    pub converged: bool,
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `A v = b` by LU with partial pivoting after row and column
/// equilibration, followed by one step of iterative refinement.
///
/// Fails with [`Error::Singular`] when the reciprocal condition number of the
/// equilibrated matrix is below `1 / MAX_CONDITION`.
pub fn solve_square(a: &DMatrix<f64>, b: &DVector<f64>, name: &str) -> Result<DVector<f64>> {
    let k = a.nrows();
    if a.ncols() != k || b.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "system `{name}` is {}×{} with {} right-hand side entries",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let singular = |rcond: f64| Error::Singular {
        system: name.to_string(),
        rcond,
    };
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(singular(0.0));
    }

    let row_scale: Vec<f64> = a
        .row_iter()
        .map(|r| {
            let m = r.amax();
            if m > 0.0 {
                1.0 / m
            } else {
                0.0
            }
        })
        .collect();
    if row_scale.contains(&0.0) {
        return Err(singular(0.0));
    }
    let mut scaled = DMatrix::from_fn(k, k, |i, j| a[(i, j)] * row_scale[i]);
    let col_scale: Vec<f64> = scaled
        .column_iter()
        .map(|c| {
            let m = c.amax();
            if m > 0.0 {
                1.0 / m
            } else {
                0.0
            }
        })
        .collect();
    if col_scale.contains(&0.0) {
        return Err(singular(0.0));
    }
    for (j, s) in col_scale.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }

    let norm = one_norm(&scaled);
    let lu = scaled.clone().lu();
    let inverse = lu.try_inverse().ok_or_else(|| singular(0.0))?;
    let rcond = 1.0 / (norm * one_norm(&inverse));
    if !(rcond.is_finite() && rcond >= 1.0 / MAX_CONDITION) {
        return Err(singular(if rcond.is_finite() { rcond } else { 0.0 }));
    }

    let rhs = DVector::from_fn(k, |i, _| b[i] * row_scale[i]);
    let mut y = lu.solve(&rhs).ok_or_else(|| singular(rcond))?;
    let residual = &rhs - &scaled * &y;
    if let Some(dy) = lu.solve(&residual) {
        y += dy;
    }
    Ok(DVector::from_fn(k, |j, _| y[j] * col_scale[j]))
}

/// Dense solve of one right-hand side of a system.
pub fn solve_dense(sys: &LinearSystem, rhs_index: usize) -> Result<DVector<f64>> {
    if rhs_index >= sys.rhs_count() {
        return Err(Error::InvalidArgument(format!(
            "right-hand side {rhs_index} out of range ({} available)",
            sys.rhs_count()
        )));
    }
    solve_square(&sys.a, &sys.b.column(rhs_index).into_owned(), &sys.name)
}

/// Sequentially thresholded least squares on a (possibly non-symmetric)
/// normal system.
///
/// Restricting to a support selects the matching rows and columns of `A` and
/// rows of `b`. Coefficients with `|v_j| < lambda` are zeroed and dropped
/// until the support stops changing.
pub fn stls(
    sys: &LinearSystem,
    rhs_index: usize,
    lambda: f64,
    max_iter: usize,
) -> Result<SparseSolution> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    if rhs_index >= sys.rhs_count() {
        return Err(Error::InvalidArgument(format!(
            "right-hand side {rhs_index} out of range ({} available)",
            sys.rhs_count()
        )));
    }
    let k = sys.k();
    let b = sys.b.column(rhs_index).into_owned();
    let mut support: Vec<usize> = (0..k).collect();
    let mut coeffs = DVector::zeros(k);

    for iteration in 1..=max_iter {
        let n = support.len();
        let sub_a = DMatrix::from_fn(n, n, |r, c| sys.a[(support[r], support[c])]);
        let sub_b = DVector::from_fn(n, |r, _| b[support[r]]);
        let v = solve_square(&sub_a, &sub_b, &sys.name)?;

        coeffs.fill(0.0);
        let mut kept = Vec::with_capacity(n);
        for (&j, &vj) in support.iter().zip(v.iter()) {
            if vj.abs() >= lambda {
                coeffs[j] = vj;
                kept.push(j);
            }
        }
        let unchanged = kept.len() == n;
        if kept.is_empty() || unchanged {
            return Ok(SparseSolution {
                coeffs,
                support: kept.into_iter().collect(),
                iterations: iteration,
                converged: true,
            });
        }
        support = kept;
    }
    Ok(SparseSolution {
        coeffs,
        support: support.into_iter().collect(),
        iterations: max_iter,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn system(a: DMatrix<f64>, b: DVector<f64>) -> LinearSystem {
        let m = 1;
        LinearSystem {
            name: "test".into(),
            a,
            b: DMatrix::from_column_slice(b.len(), m, b.as_slice()),
            target_labels: vec!["t".into()],
        }
    }

    fn random_system(k: usize, seed: u64) -> LinearSystem {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // diagonally dominant keeps it well conditioned
        let a = DMatrix::from_fn(k, k, |i, j| {
            let v: f64 = rng.gen_range(-1.0..1.0);
            if i == j {
                v + k as f64 * 2.0
            } else {
                v
            }
        });
        let b = DVector::from_fn(k, |_, _| rng.gen_range(-5.0..5.0));
        system(a, b)
    }

    #[test]
    fn trivial_dense() {
        let s = system(DMatrix::identity(2, 2), DVector::from_vec(vec![3.0, -2.0]));
        assert_eq!(
            solve_dense(&s, 0).unwrap(),
            DVector::from_vec(vec![3.0, -2.0])
        );
        let s = system(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]),
            DVector::from_vec(vec![2.0, 8.0]),
        );
        assert_eq!(
            solve_dense(&s, 0).unwrap(),
            DVector::from_vec(vec![1.0, 2.0])
        );
        assert!(solve_dense(&s, 1).is_err());
    }

    #[test]
    fn dense_matches_explicit_inverse() {
        let s = random_system(10, 17);
        // Gauss-Jordan inverse as an independent oracle
        let mut aug = DMatrix::zeros(10, 20);
        aug.view_mut((0, 0), (10, 10)).copy_from(&s.a);
        aug.view_mut((0, 10), (10, 10)).fill_with_identity();
        for c in 0..10 {
            let p = (c..10)
                .max_by(|&x, &y| aug[(x, c)].abs().total_cmp(&aug[(y, c)].abs()))
                .unwrap();
            aug.swap_rows(c, p);
            let piv = aug[(c, c)];
            aug.row_mut(c).scale_mut(1.0 / piv);
            for r in 0..10 {
                if r != c {
                    let f = aug[(r, c)];
                    let row_c = aug.row(c).into_owned();
                    let mut row_r = aug.row_mut(r);
                    row_r -= row_c * f;
                }
            }
        }
        let inv = aug.view((0, 10), (10, 10)).into_owned();
        let oracle = inv * s.b.column(0);
        let got = solve_dense(&s, 0).unwrap();
        assert_relative_eq!(got, oracle, max_relative = 1e-10);
        let resid = (&s.a * &got - s.b.column(0)).norm();
        assert!(resid <= 1e-8 * (s.a.norm() * got.norm() + s.b.norm()));
    }

    #[test]
    fn singular_is_rejected() {
        let s = system(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        );
        assert!(matches!(solve_dense(&s, 0), Err(Error::Singular { .. })));
        let s = system(
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-14]),
            DVector::from_vec(vec![1.0, 1.0]),
        );
        assert!(matches!(solve_dense(&s, 0), Err(Error::Singular { .. })));
    }

    #[test]
    fn badly_scaled_but_regular_is_accepted() {
        let s = system(
            DMatrix::from_row_slice(2, 2, &[1e-9, 0.0, 0.0, 1e9]),
            DVector::from_vec(vec![1e-9, 2e9]),
        );
        assert_relative_eq!(
            solve_dense(&s, 0).unwrap(),
            DVector::from_vec(vec![1.0, 2.0]),
            max_relative = 1e-14
        );
    }

    #[test]
    fn stls_thresholds() {
        let s = system(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 0.001]));
        let sol = stls(&s, 0, 0.005, 20).unwrap();
        assert_eq!(sol.coeffs, DVector::from_vec(vec![1.0, 0.0]));
        assert_eq!(sol.support, BTreeSet::from([0]));
        assert_eq!(sol.iterations, 2);
        assert!(sol.converged);
    }

    #[test]
    fn stls_empty_support() {
        let s = system(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1e-4, -1e-4]),
        );
        let sol = stls(&s, 0, 0.1, 20).unwrap();
        assert!(sol.support.is_empty());
        assert!(sol.converged);
        assert!(sol.coeffs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stls_iteration_cap() {
        // each solve drops exactly one coefficient
        let s = system(
            DMatrix::identity(3, 3),
            DVector::from_vec(vec![1.0, 0.5, 0.01]),
        );
        let sol = stls(&s, 0, 0.1, 1).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.coeffs[2], 0.0);
        assert!(stls(&s, 0, -1.0, 5).is_err());
        assert!(stls(&s, 0, 0.1, 0).is_err());
    }

    proptest! {
        #[test]
        fn lambda_zero_equals_dense(seed in 0u64..500, k in 1usize..12) {
            let s = random_system(k, seed);
            let dense = solve_dense(&s, 0).unwrap();
            let sp = stls(&s, 0, 0.0, 20).unwrap();
            for (a, b) in dense.iter().zip(sp.coeffs.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
        }

        #[test]
        fn stls_invariants(seed in 0u64..500, k in 2usize..10, lambda in 0.0f64..0.5) {
            let s = random_system(k, seed);
            let sol = stls(&s, 0, lambda, 50).unwrap();
            for j in 0..k {
                if !sol.support.contains(&j) {
                    prop_assert_eq!(sol.coeffs[j], 0.0);
                }
            }
            prop_assert!(sol.converged);
            // one more iteration from the fixed point changes nothing
            let support: Vec<usize> = sol.support.iter().copied().collect();
            if !support.is_empty() {
                let n = support.len();
                let sub_a = DMatrix::from_fn(n, n, |r, c| s.a[(support[r], support[c])]);
                let sub_b = DVector::from_fn(n, |r, _| s.b[(support[r], 0)]);
                let v = solve_square(&sub_a, &sub_b, "check").unwrap();
                for (r, &j) in support.iter().enumerate() {
                    prop_assert_eq!(v[r], sol.coeffs[j]);
                    prop_assert!(v[r].abs() >= lambda);
                }
            }
        }

        #[test]
        fn support_never_grows(seed in 0u64..300, k in 2usize..10, lambda in 0.0f64..0.5) {
            let s = random_system(k, seed);
            let mut prev = k;
            for it in 1..=k + 1 {
                let sol = stls(&s, 0, lambda, it).unwrap();
                prop_assert!(sol.support.len() <= prev);
                prev = sol.support.len();
            }
        }
    }
}
