//! Maximum likelihood fitting by per-category iteratively re-weighted least
//! squares.
//!
//! Each pass updates every non-reference category `j` with its own diagonal
//! weights `W_j = diag(π_ij (1 − π_ij))`:
//!
//! ```text
//! z_j   = η_j + (y_j − π_j) / w_j
//! β_j  ← (Xᵀ W_j X)⁻¹ Xᵀ W_j z_j
//! ```
//!
//! By default probabilities are refreshed jointly after the whole pass, since
//! all categories share the softmax denominator. [`SweepOrder::Sequential`]
//! refreshes them after every category instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, inverse_spd, Cholesky, SymmetricMatrix};
use crate::model::{score, softmax_probabilities, weight_vector, CoefficientSet, Dataset, ProbabilityMatrix};

/// Any coefficient beyond this magnitude is treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// When probabilities are recomputed within a pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    /// Once per pass, after every category has been updated.
    #[default]
    Joint,
    /// After each category update, so later categories see fresh values.
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrlsOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub sweep: SweepOrder,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-6, sweep: SweepOrder::Joint }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub coeffs: CoefficientSet,
    /// `C_j = Xᵀ W_j X` evaluated at `coeffs`, one per non-reference category.
    pub weighted_crossprods: Vec<SymmetricMatrix>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest absolute coefficient change in the last pass.
    pub final_delta: f64,
}

impl MleFit {
    pub fn num_categories(&self) -> usize {
        self.coeffs.num_categories()
    }
}

fn crossprods(data: &Dataset, pi: &ProbabilityMatrix) -> Result<Vec<SymmetricMatrix>> {
    (0..data.num_levels() - 1)
        .map(|j| data.x().weighted_crossprod(&weight_vector(pi, j)?))
        .collect()
}

fn singular(data: &Dataset, j: usize, e: Error) -> Error {
    Error::Multicollinearity { category: data.category_order()[j].clone(), source: Box::new(e) }
}

/// Fits the multinomial MLE starting from zero coefficients.
///
/// Hitting `max_iter` is not an error: the fit comes back with
/// `converged == false`. A singular `C_j` and divergence are errors.
pub fn fit_mle(data: &Dataset, options: &IrlsOptions) -> Result<MleFit> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", options.tol)));
    }
    if options.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let x = data.x();
    let n = data.n();
    let k = data.num_levels() - 1;
    let mut coeffs = CoefficientSet::zeros(data.category_order().to_vec(), data.num_columns());

    let mut iterations = 0;
    let mut converged = false;
    let mut final_delta = f64::INFINITY;

    while iterations < options.max_iter {
        iterations += 1;
        let mut pi = softmax_probabilities(x, &coeffs)?;
        let mut next = coeffs.clone();
        let mut delta = 0.0_f64;
        for j in 0..k {
            if options.sweep == SweepOrder::Sequential && j > 0 {
                pi = softmax_probabilities(x, &next)?;
            }
            let w = weight_vector(&pi, j)?;
            let c = x.weighted_crossprod(&w)?;
            let beta = &coeffs.betas[j];
            // W z = W η + (y − π)
            let wz: Vec<f64> = (0..n)
                .map(|i| {
                    let eta = dot(x.row(i), beta);
                    let y = f64::from(u8::from(data.codes()[i] == j));
                    let z = eta + (y - pi.get(i, j)) / w[i];
                    w[i] * z
                })
                .collect();
            let rhs = x.tr_matvec(&wz)?;
            let updated = Cholesky::factor(&c).and_then(|f| f.solve_vec(&rhs)).map_err(|e| singular(data, j, e))?;
            for (new, old) in updated.iter().zip(beta) {
                delta = delta.max((new - old).abs());
            }
            next.betas[j] = updated;
        }
        coeffs = next;
        final_delta = delta;

        if !final_delta.is_finite() || coeffs.max_abs() > DIVERGENCE_LIMIT {
            return Err(Error::Separation { iteration: iterations, limit: DIVERGENCE_LIMIT });
        }
        if final_delta < options.tol {
            converged = true;
            break;
        }
    }

    let pi = softmax_probabilities(x, &coeffs)?;
    let weighted_crossprods = crossprods(data, &pi)?;
    Ok(MleFit { coeffs, weighted_crossprods, iterations, converged, final_delta })
}

/// Score of the fitted coefficients, for convergence checks.
pub fn score_at(data: &Dataset, coeffs: &CoefficientSet) -> Result<Vec<Vec<f64>>> {
    let pi = softmax_probabilities(data.x(), coeffs)?;
    score(data.x(), data.codes(), &pi)
}

/// Asymptotic covariance `C_j⁻¹` for every category.
pub fn mle_covariance(fit: &MleFit) -> Result<Vec<SymmetricMatrix>> {
    fit.weighted_crossprods
        .iter()
        .enumerate()
        .map(|(j, c)| {
            inverse_spd(c).map_err(|e| Error::Multicollinearity {
                category: fit.coeffs.category_order[j].clone(),
                source: Box::new(e),
            })
        })
        .collect()
}

/// Scalar MSE of the MLE, `Σ_i 1/λ_i`.
pub fn mle_scalar_mse(eigenvalues: &[f64]) -> Result<f64> {
    if eigenvalues.is_empty() {
        return Err(Error::InvalidArgument("empty spectrum".into()));
    }
    eigenvalues.iter().try_fold(0.0, |acc, &l| {
        if l > 0.0 {
            Ok(acc + 1.0 / l)
        } else {
            Err(Error::NonPositiveEigenvalue { value: l })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn no_association_gives_zero_slope() {
        // binary covariate, outcomes balanced within each covariate value
        let x = Matrix::from_fn(8, 2, |i, j| if j == 0 { 1.0 } else { (i % 2) as f64 });
        let codes = vec![0, 0, 1, 1, 0, 0, 1, 1];
        let data = Dataset::from_codes(x, codes, 2).unwrap();
        let fit = fit_mle(&data, &IrlsOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.coeffs.betas[0][1].abs() < 1e-4);
        assert!(fit.coeffs.betas[0][0].abs() < 1e-4);
    }

    #[test]
    fn scalar_mse_examples() {
        assert_eq!(mle_scalar_mse(&[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(mle_scalar_mse(&[2.0, 4.0]).unwrap(), 0.75);
        assert!(matches!(mle_scalar_mse(&[1.0, 0.0]), Err(Error::NonPositiveEigenvalue { .. })));
        assert!(mle_scalar_mse(&[]).is_err());
    }

    #[test]
    fn covariance_of_simple_crossprods() {
        let fit = MleFit {
            coeffs: CoefficientSet::zeros(vec!["a".into(), "b".into()], 1),
            weighted_crossprods: vec![SymmetricMatrix::identity(1), SymmetricMatrix::from_diagonal(&[4.0])],
            iterations: 1,
            converged: true,
            final_delta: 0.0,
        };
        let cov = mle_covariance(&fit).unwrap();
        assert_eq!(cov[0][(0, 0)], 1.0);
        assert_eq!(cov[1][(0, 0)], 0.25);
        assert_eq!(cov[1][(0, 0)].sqrt(), 0.5);
    }

    #[test]
    fn separated_data_never_yields_a_moderate_fit() {
        // weights hit their floor long before 1e8, so the iteration stalls
        // rather than diverging; either outcome leaves a huge slope
        let x = Matrix::from_fn(6, 1, |i, _| i as f64 - 2.5);
        let data = Dataset::from_codes(x, vec![1, 1, 1, 0, 0, 0], 2).unwrap();
        match fit_mle(&data, &IrlsOptions { max_iter: 10_000, tol: 1e-12, ..Default::default() }) {
            Err(Error::Separation { .. }) => {}
            Ok(fit) => assert!(fit.coeffs.betas[0][0] > 20.0, "{fit:?}"),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn iteration_cap_returns_unconverged_fit() {
        let x = Matrix::from_fn(40, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let codes = (0..40).map(|i| (i * 5 % 3) as usize).collect();
        let data = Dataset::from_codes(x, codes, 3).unwrap();
        let fit = fit_mle(&data, &IrlsOptions { max_iter: 1, ..Default::default() }).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
        assert!(fit.final_delta >= 1e-6);
    }

    #[test]
    fn collinear_columns_are_a_multicollinearity_failure() {
        let x = Matrix::from_fn(10, 2, |i, _| i as f64);
        let codes = (0..10).map(|i| i % 2).collect();
        let data = Dataset::from_codes(x, codes, 2).unwrap();
        let res = fit_mle(&data, &IrlsOptions::default());
        assert!(matches!(res, Err(Error::Multicollinearity { .. })), "{res:?}");
    }

    #[test]
    fn sweep_orders_reach_the_same_solution() {
        let x = Matrix::from_fn(60, 2, |i, j| ((i * 7 + j * 5) % 13) as f64 / 6.0 - 1.0);
        let codes = (0..60).map(|i| (i * i + i / 3) % 3).collect();
        let data = Dataset::from_codes(x, codes, 3).unwrap();
        let tight = |sweep| IrlsOptions { tol: 1e-10, max_iter: 10_000, sweep };
        let joint = fit_mle(&data, &tight(SweepOrder::Joint)).unwrap();
        let seq = fit_mle(&data, &tight(SweepOrder::Sequential)).unwrap();
        assert!(joint.converged && seq.converged);
        assert!(seq.iterations <= joint.iterations);
        for (a, b) in joint.coeffs.betas.iter().flatten().zip(seq.coeffs.betas.iter().flatten()) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_options() {
        let x = Matrix::from_fn(4, 1, |i, _| i as f64);
        let data = Dataset::from_codes(x, vec![0, 1, 0, 1], 2).unwrap();
        assert!(fit_mle(&data, &IrlsOptions { tol: 0.0, ..Default::default() }).is_err());
        assert!(fit_mle(&data, &IrlsOptions { max_iter: 0, ..Default::default() }).is_err());
    }
}
