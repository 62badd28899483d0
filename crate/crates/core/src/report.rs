//! Fit report: coefficient tables with standard errors, biasing parameters,
//! plug-in scalar MSEs and per-category condition numbers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::irls::{mle_covariance, mle_scalar_mse, IrlsOptions, MleFit};
use crate::linalg::condition_number_from_eigenvalues;
use crate::liu::{fit_liu, liu_scalar_mse, select_d, spectra, DChoice, DRule};
use crate::model::Dataset;

pub const PLUG_IN_NOTE: &str =
    "Liu covariance, bias and scalar MSE use the MLE in place of the unknown coefficients";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Mle,
    Liu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    pub final_delta: f64,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
}

/// Plug-in scalar MSE of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorMse {
    pub estimator: String,
    /// Biasing parameter, absent for the MLE.
    pub d: Option<f64>,
    pub scalar_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub level: String,
    /// `d` used for `coefficients` (absent when reporting the MLE).
    pub d: Option<f64>,
    pub coefficients: Vec<CoefficientRow>,
    /// MLE, then every selection rule (and the fixed `d` if one was given).
    pub scalar_mse: Vec<EstimatorMse>,
    pub eigenvalues: Vec<f64>,
    pub condition_number: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub response: String,
    pub reference: String,
    pub levels: Vec<String>,
    pub intercept: bool,
    pub n: usize,
    pub estimator: EstimatorKind,
    pub d_rule: Option<DChoice>,
    pub convergence: Convergence,
    pub categories: Vec<CategoryReport>,
    /// Scalar MSE summed over categories, per estimator.
    pub total_scalar_mse: Vec<EstimatorMse>,
    pub notes: Vec<String>,
}

impl FitReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Plain-text rendering: one block per category.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let est = match (self.estimator, self.d_rule) {
            (EstimatorKind::Mle, _) => "MLE".to_string(),
            (EstimatorKind::Liu, Some(c)) => format!("Liu ({c})"),
            (EstimatorKind::Liu, None) => "Liu".to_string(),
        };
        let _ = writeln!(
            out,
            "{est} fit of `{}` (reference `{}`, n = {}), {} after {} iterations",
            self.response,
            self.reference,
            self.n,
            if self.convergence.converged { "converged" } else { "NOT converged" },
            self.convergence.iterations
        );
        for cat in &self.categories {
            let _ = writeln!(out);
            let d = cat.d.map(|d| format!("  d = {d:.4}")).unwrap_or_default();
            let _ = writeln!(out, "Level: {}  (CN = {:.3}){d}", cat.level, cat.condition_number);
            let _ = writeln!(out, "  {:<16} {:>14} {:>14}", "term", "estimate", "std. error");
            for row in &cat.coefficients {
                let _ = writeln!(out, "  {:<16} {:>14.4} {:>14.4}", row.name, row.estimate, row.std_error);
            }
            let _ = writeln!(out, "  scalar MSE:");
            for m in &cat.scalar_mse {
                let d = m.d.map(|d| format!(" (d = {d:.4})")).unwrap_or_default();
                let _ = writeln!(out, "    {:<10} {:>16.4}{d}", m.estimator, m.scalar_mse);
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "Total scalar MSE:");
        for m in &self.total_scalar_mse {
            let _ = writeln!(out, "  {:<10} {:>16.4}", m.estimator, m.scalar_mse);
        }
        out
    }
}

/// Settings that shape a report.
#[derive(Debug, Clone)]
pub struct FitRequest {
    pub response: String,
    pub estimator: EstimatorKind,
    pub d_rule: DChoice,
    pub intercept: bool,
    pub options: IrlsOptions,
}

/// Builds the report from a finished MLE fit.
pub fn build_report(data: &Dataset, fit: &MleFit, req: &FitRequest) -> Result<FitReport> {
    let spectra = spectra(fit)?;
    let mle_cov = mle_covariance(fit)?;
    let liu = match req.estimator {
        EstimatorKind::Liu => Some(fit_liu(fit, req.d_rule)?),
        EstimatorKind::Mle => None,
    };

    let mut categories = Vec::with_capacity(fit.num_categories());
    for (j, level) in fit.coeffs.category_order.iter().enumerate() {
        let spectrum = &spectra[j];
        let (estimates, variances, d) = match &liu {
            Some(l) => (
                l.coeffs.betas[j].clone(),
                l.moments[j].covariance.matrix().diagonal(),
                Some(l.d_values[j]),
            ),
            None => (fit.coeffs.betas[j].clone(), mle_cov[j].matrix().diagonal(), None),
        };
        let coefficients = data
            .column_names()
            .iter()
            .zip(estimates.iter().zip(&variances))
            .map(|(name, (&estimate, &var))| CoefficientRow {
                name: name.clone(),
                estimate,
                std_error: var.max(0.0).sqrt(),
            })
            .collect();

        let mut scalar_mse = vec![EstimatorMse {
            estimator: "MLE".into(),
            d: None,
            scalar_mse: mle_scalar_mse(&spectrum.eigenvalues)?,
        }];
        for rule in DRule::ALL {
            let d = select_d(spectrum, rule)?;
            scalar_mse.push(EstimatorMse {
                estimator: rule.name().into(),
                d: Some(d),
                scalar_mse: liu_scalar_mse(&spectrum.eigenvalues, &spectrum.alpha, d)?,
            });
        }
        if let (EstimatorKind::Liu, DChoice::Fixed(d)) = (req.estimator, req.d_rule) {
            scalar_mse.push(EstimatorMse {
                estimator: DChoice::Fixed(d).to_string(),
                d: Some(d),
                scalar_mse: liu_scalar_mse(&spectrum.eigenvalues, &spectrum.alpha, d)?,
            });
        }

        categories.push(CategoryReport {
            level: level.clone(),
            d,
            coefficients,
            scalar_mse,
            eigenvalues: spectrum.eigenvalues.clone(),
            condition_number: condition_number_from_eigenvalues(&spectrum.eigenvalues)?,
        });
    }

    let total_scalar_mse = categories[0]
        .scalar_mse
        .iter()
        .enumerate()
        .map(|(k, first)| EstimatorMse {
            estimator: first.estimator.clone(),
            d: None,
            scalar_mse: categories.iter().map(|c| c.scalar_mse[k].scalar_mse).sum(),
        })
        .collect();

    Ok(FitReport {
        response: req.response.clone(),
        reference: data.reference().to_string(),
        levels: data.levels().to_vec(),
        intercept: req.intercept,
        n: data.n(),
        estimator: req.estimator,
        d_rule: match req.estimator {
            EstimatorKind::Liu => Some(req.d_rule),
            EstimatorKind::Mle => None,
        },
        convergence: Convergence {
            converged: fit.converged,
            iterations: fit.iterations,
            final_delta: fit.final_delta,
            tol: req.options.tol,
            max_iter: req.options.max_iter,
        },
        categories,
        total_scalar_mse,
        notes: vec![PLUG_IN_NOTE.to_string()],
    })
}
