//! Multinomial logistic Liu estimator.
//!
//! For each non-reference category with weighted cross-product `C` and MLE
//! `β̂`, the shrunken estimate is `(C + I)⁻¹ (C + d I) β̂` for a biasing
//! parameter `d ∈ [0, 1]`. `d = 1` gives back the MLE.
//!
//! The biasing parameter is chosen per category from the eigen-decomposition
//! `C = T Λ Tᵀ` and the rotated MLE `α̂ = Tᵀ β̂`: each component has the
//! individual minimizer `λ (α² − 1) / (1 + λ α²)` of the scalar MSE, and the
//! rules `d1`, `d2`, `d3` take the mean, median and minimum of those,
//! floored at 0 and capped at 1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irls::{mle_scalar_mse, MleFit};
use crate::linalg::{inverse_spd, symmetric_eigen, Cholesky, Matrix, SymmetricMatrix};
use crate::model::CoefficientSet;

/// Eigenvalues, eigenvectors and rotated coefficients of one category.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors, paired with `eigenvalues`.
    pub rotation: Matrix,
    /// `Tᵀ β̂`.
    pub alpha: Vec<f64>,
}

impl SpectralSummary {
    pub fn alpha_sq(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a * a).collect()
    }

    /// The individual parameters `d_i`, one per eigen-component.
    pub fn individual_ds(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .zip(&self.alpha)
            .map(|(&l, &a)| d_individual(l, a * a))
            .collect()
    }
}

pub fn spectral_summary(c: &SymmetricMatrix, beta_mle: &[f64]) -> Result<SpectralSummary> {
    if c.dim() != beta_mle.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} cross-product for coefficients of length {}",
            c.dim(),
            c.dim(),
            beta_mle.len()
        )));
    }
    let eig = symmetric_eigen(c)?;
    let alpha = eig.eigenvectors.tr_matvec(beta_mle)?;
    Ok(SpectralSummary { eigenvalues: eig.eigenvalues, rotation: eig.eigenvectors, alpha })
}

fn check_d(d: f64) -> Result<()> {
    if (0.0..=1.0).contains(&d) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("biasing parameter must lie in [0, 1], got {d}")))
    }
}

/// `(C + I)⁻¹ (C + d I) β̂`.
///
/// Evaluated as `β̂ − (1 − d)(C + I)⁻¹ β̂`, which is the same matrix since
/// `C + dI = (C + I) − (1 − d) I`; at `d = 1` the MLE comes back untouched.
pub fn liu_estimate(beta_mle: &[f64], c: &SymmetricMatrix, d: f64) -> Result<Vec<f64>> {
    check_d(d)?;
    if c.dim() != beta_mle.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} cross-product for coefficients of length {}",
            c.dim(),
            c.dim(),
            beta_mle.len()
        )));
    }
    let shrink = Cholesky::factor(&c.shifted(1.0))?.solve_vec(beta_mle)?;
    Ok(beta_mle.iter().zip(&shrink).map(|(b, s)| b - (1.0 - d) * s).collect())
}

/// Covariance, bias and matrix MSE of the Liu estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct LiuMoments {
    pub covariance: SymmetricMatrix,
    pub bias: Vec<f64>,
    pub mmse: SymmetricMatrix,
}

/// Moments of the Liu estimator at `d` for coefficients `beta`:
///
/// * covariance `(C+I)⁻¹(C+dI) C⁻¹ (C+dI)(C+I)⁻¹`
/// * bias `−(1−d)(C+I)⁻¹ β`
/// * MMSE `covariance + bias biasᵀ`
pub fn liu_moments(c: &SymmetricMatrix, d: f64, beta: &[f64]) -> Result<LiuMoments> {
    check_d(d)?;
    let q = c.dim();
    if q != beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "{q}x{q} cross-product for coefficients of length {}",
            beta.len()
        )));
    }
    let c_inv = inverse_spd(c)?;
    let shifted_inv = inverse_spd(&c.shifted(1.0))?;
    // A = (C+I)⁻¹(C+dI) = I − (1−d)(C+I)⁻¹, symmetric since the factors commute
    let a = Matrix::identity(q).sub(&shifted_inv.matrix().scale(1.0 - d))?;
    let cov = a.matmul(c_inv.matrix())?.matmul(&a)?;
    let covariance = SymmetricMatrix::symmetrize(&cov)?;

    let bias: Vec<f64> = shifted_inv.matrix().matvec(beta)?.into_iter().map(|v| -(1.0 - d) * v).collect();
    let outer = Matrix::from_fn(q, q, |i, j| bias[i] * bias[j]);
    let mmse = SymmetricMatrix::symmetrize(&covariance.matrix().add(&outer)?)?;
    Ok(LiuMoments { covariance, bias, mmse })
}

fn check_spectrum(lambda: &[f64], alpha: &[f64]) -> Result<()> {
    if lambda.len() != alpha.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} eigenvalues for {} rotated coefficients",
            lambda.len(),
            alpha.len()
        )));
    }
    if lambda.is_empty() {
        return Err(Error::InvalidArgument("empty spectrum".into()));
    }
    match lambda.iter().find(|l| !(**l > 0.0)) {
        Some(&value) => Err(Error::NonPositiveEigenvalue { value }),
        None => Ok(()),
    }
}

/// Scalar MSE `Σ (λ+d)² / (λ(λ+1)²) + (1−d)² Σ α² / (λ+1)²`.
pub fn liu_scalar_mse(lambda: &[f64], alpha: &[f64], d: f64) -> Result<f64> {
    check_spectrum(lambda, alpha)?;
    Ok(lambda
        .iter()
        .zip(alpha)
        .map(|(&l, &a)| {
            let r = (l + d) / (l + 1.0);
            let b = (1.0 - d) * a / (l + 1.0);
            r * r / l + b * b
        })
        .sum())
}

/// Derivative of [`liu_scalar_mse`] with respect to `d`.
pub fn mse_gradient(lambda: &[f64], alpha: &[f64], d: f64) -> Result<f64> {
    check_spectrum(lambda, alpha)?;
    Ok(lambda
        .iter()
        .zip(alpha)
        .map(|(&l, &a)| {
            let denom = (l + 1.0) * (l + 1.0);
            2.0 * (l + d) / (l * denom) - 2.0 * (1.0 - d) * a * a / denom
        })
        .sum())
}

/// Per-component minimizer `λ(α² − 1) / (1 + λα²)`. May be negative.
pub fn d_individual(lambda: f64, alpha_sq: f64) -> f64 {
    lambda * (alpha_sq - 1.0) / (1.0 + lambda * alpha_sq)
}

/// Biasing-parameter selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DRule {
    /// Mean of the individual parameters.
    D1,
    /// Median.
    D2,
    /// Minimum.
    D3,
}

impl DRule {
    pub const ALL: [DRule; 3] = [DRule::D1, DRule::D2, DRule::D3];

    pub fn name(self) -> &'static str {
        match self {
            DRule::D1 => "d1",
            DRule::D2 => "d2",
            DRule::D3 => "d3",
        }
    }
}

impl fmt::Display for DRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "d1" => Ok(DRule::D1),
            "d2" => Ok(DRule::D2),
            "d3" => Ok(DRule::D3),
            other => Err(Error::InvalidArgument(format!("unknown d rule `{other}`"))),
        }
    }
}

/// Median with the even-length case taken as the midpoint of the two central
/// order statistics.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 0 { 0.5 * (sorted[mid - 1] + sorted[mid]) } else { sorted[mid] })
}

/// Applies `rule` to a set of individual parameters, clipped into `[0, 1]`.
pub fn select_from_individual(ds: &[f64], rule: DRule) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("empty spectrum".into()));
    }
    let raw = match rule {
        DRule::D1 => ds.iter().sum::<f64>() / ds.len() as f64,
        DRule::D2 => median(ds).expect("non-empty"),
        DRule::D3 => ds.iter().copied().fold(f64::INFINITY, f64::min),
    };
    Ok(raw.max(0.0).min(1.0))
}

pub fn select_d(summary: &SpectralSummary, rule: DRule) -> Result<f64> {
    check_spectrum(&summary.eigenvalues, &summary.alpha)?;
    select_from_individual(&summary.individual_ds(), rule)
}

/// How the biasing parameter is chosen for a fit. Serialized as `d1`,
/// `d2`, `d3` or `fixed:<value>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DChoice {
    Rule(DRule),
    Fixed(f64),
}

impl fmt::Display for DChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DChoice::Rule(r) => write!(f, "{r}"),
            DChoice::Fixed(d) => write!(f, "fixed:{d}"),
        }
    }
}

impl FromStr for DChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(v) = s.strip_prefix("fixed:") {
            let d: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("cannot parse fixed d `{v}`")))?;
            check_d(d)?;
            Ok(DChoice::Fixed(d))
        } else {
            s.parse().map(DChoice::Rule)
        }
    }
}

impl Serialize for DChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Liu estimates for every category of a fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct LiuFit {
    pub coeffs: CoefficientSet,
    pub d_values: Vec<f64>,
    pub choice: DChoice,
    pub spectra: Vec<SpectralSummary>,
    /// Moments with the MLE plugged in for the unknown true coefficients.
    pub moments: Vec<LiuMoments>,
    /// Scalar MSE per category with plug-in `λ̂`, `α̂`.
    pub scalar_mse: Vec<f64>,
}

/// Spectral summaries of every category of an MLE fit.
pub fn spectra(fit: &MleFit) -> Result<Vec<SpectralSummary>> {
    fit.weighted_crossprods
        .iter()
        .zip(&fit.coeffs.betas)
        .map(|(c, b)| spectral_summary(c, b))
        .collect()
}

/// Shrinks every category of `fit` with the chosen biasing parameter.
pub fn fit_liu(fit: &MleFit, choice: DChoice) -> Result<LiuFit> {
    let spectra = spectra(fit)?;
    let mut betas = Vec::with_capacity(fit.num_categories());
    let mut d_values = Vec::with_capacity(fit.num_categories());
    let mut moments = Vec::with_capacity(fit.num_categories());
    let mut scalar_mse = Vec::with_capacity(fit.num_categories());
    for ((c, beta), spectrum) in fit.weighted_crossprods.iter().zip(&fit.coeffs.betas).zip(&spectra) {
        let d = match choice {
            DChoice::Rule(rule) => select_d(spectrum, rule)?,
            DChoice::Fixed(d) => {
                check_d(d)?;
                d
            }
        };
        betas.push(liu_estimate(beta, c, d)?);
        moments.push(liu_moments(c, d, beta)?);
        scalar_mse.push(liu_scalar_mse(&spectrum.eigenvalues, &spectrum.alpha, d)?);
        d_values.push(d);
    }
    let coeffs = CoefficientSet::new(betas, fit.coeffs.category_order.clone())?;
    Ok(LiuFit { coeffs, d_values, choice, spectra, moments, scalar_mse })
}

/// MLE scalar MSE per category from the plug-in spectra.
pub fn mle_scalar_mse_per_category(spectra: &[SpectralSummary]) -> Result<Vec<f64>> {
    spectra.iter().map(|s| mle_scalar_mse(&s.eigenvalues)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: &[Vec<f64>]) -> SymmetricMatrix {
        SymmetricMatrix::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn spectral_summary_identity() {
        let s = spectral_summary(&SymmetricMatrix::identity(2), &[0.6, 0.8]).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 1.0]);
        let norm = s.alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_summary_axis_vectors() {
        let s = spectral_summary(&SymmetricMatrix::from_diagonal(&[3.0, 1.0]), &[1.0, 0.0]).unwrap();
        assert_eq!(s.eigenvalues, vec![3.0, 1.0]);
        assert!((s.alpha[0].abs() - 1.0).abs() < 1e-15);
        assert_eq!(s.alpha[1], 0.0);
    }

    #[test]
    fn liu_estimate_endpoints() {
        let c = sym(&[vec![2.0, 0.5], vec![0.5, 1.0]]);
        let beta = [1.5, -0.3];
        assert_eq!(liu_estimate(&beta, &c, 1.0).unwrap(), beta.to_vec());
        let half = liu_estimate(&[2.0, -1.0], &SymmetricMatrix::identity(2), 0.0).unwrap();
        assert_eq!(half, vec![1.0, -0.5]);
    }

    #[test]
    fn liu_estimate_rejects_bad_input() {
        let c = SymmetricMatrix::identity(2);
        assert!(liu_estimate(&[1.0, 2.0], &c, 1.5).is_err());
        assert!(liu_estimate(&[1.0, 2.0], &c, -0.1).is_err());
        assert!(matches!(liu_estimate(&[1.0], &c, 0.5), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn moments_at_d_one_are_unbiased() {
        let c = sym(&[vec![2.0, 0.5], vec![0.5, 1.0]]);
        let m = liu_moments(&c, 1.0, &[1.0, 2.0]).unwrap();
        assert_eq!(m.bias, vec![0.0, 0.0]);
        let c_inv = inverse_spd(&c).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((m.covariance[(i, j)] - c_inv[(i, j)]).abs() < 1e-14);
                assert!((m.mmse[(i, j)] - c_inv[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn moments_scalar_case() {
        let m = liu_moments(&SymmetricMatrix::identity(2), 0.0, &[1.0, 0.0]).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
        let cov = m.covariance.matrix();
        assert!(close(cov[(0, 0)], 0.25) && close(cov[(1, 1)], 0.25) && close(cov[(0, 1)], 0.0));
        assert!(close(m.bias[0], -0.5) && close(m.bias[1], 0.0));
        let mmse = m.mmse.matrix().diagonal();
        assert!(close(mmse[0], 0.5) && close(mmse[1], 0.25));
    }

    #[test]
    fn moments_require_invertible_c() {
        let c = SymmetricMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(matches!(liu_moments(&c, 0.5, &[1.0, 1.0]), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn scalar_mse_examples() {
        let lambda = [0.5, 2.0, 7.0];
        let alpha = [0.3, -1.2, 2.0];
        let at_one = liu_scalar_mse(&lambda, &alpha, 1.0).unwrap();
        assert!((at_one - mle_scalar_mse(&lambda).unwrap()).abs() < 1e-15);
        assert_eq!(liu_scalar_mse(&[1.0], &[1.0], 0.0).unwrap(), 0.5);
        assert!(matches!(liu_scalar_mse(&[0.0], &[1.0], 0.5), Err(Error::NonPositiveEigenvalue { .. })));
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(mse_gradient(&[1.0], &[1.0], 0.0).unwrap(), 0.0);
        let (l, a2) = (2.0, 3.0);
        let d = d_individual(l, a2);
        assert!(mse_gradient(&[l], &[a2.sqrt()], d).unwrap().abs() < 1e-10);
    }

    #[test]
    fn individual_examples() {
        assert_eq!(d_individual(1.0, 1.0), 0.0);
        assert!((d_individual(2.0, 3.0) - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(d_individual(2.0, 0.0), -2.0);
    }

    #[test]
    fn selection_rules() {
        let ds = [0.2, 0.4, 0.9];
        assert!((select_from_individual(&ds, DRule::D1).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(select_from_individual(&ds, DRule::D2).unwrap(), 0.4);
        assert_eq!(select_from_individual(&ds, DRule::D3).unwrap(), 0.2);

        let neg = [-0.3, -2.0, -0.01];
        for rule in DRule::ALL {
            assert_eq!(select_from_individual(&neg, rule).unwrap(), 0.0);
        }
        assert_eq!(select_from_individual(&[3.0, 5.0], DRule::D3).unwrap(), 1.0);
        assert!(select_from_individual(&[], DRule::D1).is_err());
    }

    #[test]
    fn even_median_is_midpoint() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn parse_choices() {
        assert_eq!("d2".parse::<DChoice>().unwrap(), DChoice::Rule(DRule::D2));
        assert_eq!("fixed:0.25".parse::<DChoice>().unwrap(), DChoice::Fixed(0.25));
        assert!("fixed:2".parse::<DChoice>().is_err());
        assert!("d4".parse::<DChoice>().is_err());
        assert_eq!(DChoice::Fixed(1.0).to_string(), "fixed:1");
    }
}
