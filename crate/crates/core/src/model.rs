//! Multinomial logit model under the reference-category parametrization.
//!
//! Categories are held in "model order": the non-reference levels first, the
//! reference level last. Category `j < m - 1` owns coefficient vector
//! `betas[j]`; the reference category's coefficients are fixed at zero.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Lower clamp for probabilities inside the logarithm.
pub const LOG_PROB_FLOOR: f64 = 1e-12;
/// Lower clamp for IRLS weights `pi (1 - pi)`.
pub const WEIGHT_FLOOR: f64 = 1e-10;

pub const INTERCEPT_NAME: &str = "(Intercept)";

/// Covariates plus a categorical response with a designated reference level.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    codes: Vec<usize>,
    levels: Vec<String>,
    column_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from raw string labels.
    ///
    /// Labels are trimmed, levels are ordered lexicographically and the
    /// reference defaults to the lexicographically last level.
    pub fn new<S: AsRef<str>>(x: Matrix, labels: &[S], reference: Option<&str>) -> Result<Self> {
        let trimmed: Vec<&str> = labels.iter().map(|l| l.as_ref().trim()).collect();
        let observed: BTreeSet<&str> = trimmed.iter().copied().collect();
        let reference = match reference.map(str::trim) {
            Some(r) => {
                if !observed.contains(r) {
                    return Err(Error::InvalidDataset(format!(
                        "reference level `{r}` does not occur in the response"
                    )));
                }
                r
            }
            None => *observed
                .iter()
                .next_back()
                .ok_or_else(|| Error::InvalidDataset("empty response".into()))?,
        };
        let mut levels: Vec<String> =
            observed.iter().filter(|l| **l != reference).map(|l| l.to_string()).collect();
        levels.push(reference.to_string());
        let codes = trimmed
            .iter()
            .map(|l| levels.iter().position(|lv| lv == l).expect("level collected above"))
            .collect();
        let names = default_column_names(x.cols());
        Self::from_parts(x, codes, levels, names)
    }

    /// Builds a dataset from category codes in model order (`m - 1` is the
    /// reference). Levels are named `"1"..="m"`.
    pub fn from_codes(x: Matrix, codes: Vec<usize>, m: usize) -> Result<Self> {
        let levels = (1..=m).map(|k| k.to_string()).collect();
        let names = default_column_names(x.cols());
        Self::from_parts(x, codes, levels, names)
    }

    fn from_parts(x: Matrix, codes: Vec<usize>, levels: Vec<String>, column_names: Vec<String>) -> Result<Self> {
        let (n, p) = (x.rows(), x.cols());
        let m = levels.len();
        if codes.len() != n {
            return Err(Error::DimensionMismatch(format!("{} labels for {n} rows", codes.len())));
        }
        if m < 2 {
            return Err(Error::InvalidDataset(format!("response needs at least 2 levels, found {m}")));
        }
        if p == 0 {
            return Err(Error::InvalidDataset("no covariate columns".into()));
        }
        if n <= p {
            return Err(Error::InvalidDataset(format!(
                "need more observations than model columns (n = {n}, columns = {p})"
            )));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("covariate matrix".into()));
        }
        let mut seen = vec![false; m];
        for &c in &codes {
            if c >= m {
                return Err(Error::InvalidDataset(format!("category code {c} out of range for m = {m}")));
            }
            seen[c] = true;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidDataset(format!("level `{}` never occurs", levels[k])));
        }
        Ok(Self { x, codes, levels, column_names })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.x.cols() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} columns",
                names.len(),
                self.x.cols()
            )));
        }
        self.column_names = names;
        Ok(self)
    }

    /// Prepends a column of ones.
    pub fn with_intercept(self) -> Result<Self> {
        let (n, p) = (self.x.rows(), self.x.cols());
        let x = Matrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { self.x[(i, j - 1)] });
        let mut names = vec![INTERCEPT_NAME.to_string()];
        names.extend(self.column_names);
        Self::from_parts(x, self.codes, self.levels, names)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    /// Category codes in model order.
    pub fn codes(&self) -> &[usize] {
        &self.codes
    }

    /// All levels in model order (reference last).
    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn reference(&self) -> &str {
        self.levels.last().expect("at least two levels")
    }

    /// Non-reference levels, in coefficient order.
    pub fn category_order(&self) -> &[String] {
        &self.levels[..self.levels.len() - 1]
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn num_columns(&self) -> usize {
        self.x.cols()
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }
}

fn default_column_names(p: usize) -> Vec<String> {
    (1..=p).map(|k| format!("X{k}")).collect()
}

/// One coefficient vector per non-reference category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub betas: Vec<Vec<f64>>,
    pub category_order: Vec<String>,
}

impl CoefficientSet {
    pub fn new(betas: Vec<Vec<f64>>, category_order: Vec<String>) -> Result<Self> {
        if betas.len() != category_order.len() || betas.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficient vectors for {} categories",
                betas.len(),
                category_order.len()
            )));
        }
        let q = betas[0].len();
        if betas.iter().any(|b| b.len() != q) {
            return Err(Error::DimensionMismatch("coefficient vectors differ in length".into()));
        }
        if betas.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficients".into()));
        }
        Ok(Self { betas, category_order })
    }

    pub fn zeros(category_order: Vec<String>, dim: usize) -> Self {
        Self { betas: vec![vec![0.0; dim]; category_order.len()], category_order }
    }

    pub fn num_categories(&self) -> usize {
        self.betas.len()
    }

    pub fn dim(&self) -> usize {
        self.betas.first().map_or(0, Vec::len)
    }

    /// `Σ_j ‖β_j − other_j‖²`.
    pub fn squared_error(&self, truth: &CoefficientSet) -> Result<f64> {
        if self.num_categories() != truth.num_categories() || self.dim() != truth.dim() {
            return Err(Error::DimensionMismatch("coefficient sets differ in shape".into()));
        }
        Ok(self
            .betas
            .iter()
            .flatten()
            .zip(truth.betas.iter().flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.betas.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// `n × m` matrix of category probabilities, reference category last.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    values: Matrix,
}

impl ProbabilityMatrix {
    /// Wraps raw probabilities; rows must sum to one within `1e-12`.
    pub fn new(values: Matrix) -> Result<Self> {
        if values.cols() < 2 {
            return Err(Error::DimensionMismatch("need at least two categories".into()));
        }
        for i in 0..values.rows() {
            let row = values.row(i);
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::NonFinite(format!("probability row {i}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("probability row {i} sums to {s}")));
            }
        }
        Ok(Self { values })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn num_levels(&self) -> usize {
        self.values.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// The probability for row `i` clamped to `[1e-12, 1 - 1e-12]`.
    pub fn clamped(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)].clamp(LOG_PROB_FLOOR, 1.0 - LOG_PROB_FLOOR)
    }
}

/// Linear predictors `x_i β_j` for every row and non-reference category.
pub fn linear_predictors(x: &Matrix, coeffs: &CoefficientSet) -> Result<Matrix> {
    if x.cols() != coeffs.dim() {
        return Err(Error::DimensionMismatch(format!(
            "covariate matrix has {} columns but coefficients have length {}",
            x.cols(),
            coeffs.dim()
        )));
    }
    let k = coeffs.num_categories();
    Ok(Matrix::from_fn(x.rows(), k, |i, j| dot(x.row(i), &coeffs.betas[j])))
}

/// Category probabilities `exp(x_i β_j) / (1 + Σ_k exp(x_i β_k))`, with the
/// row maximum subtracted before exponentiation.
pub fn softmax_probabilities(x: &Matrix, coeffs: &CoefficientSet) -> Result<ProbabilityMatrix> {
    if !x.is_finite() {
        return Err(Error::NonFinite("covariate matrix".into()));
    }
    if coeffs.betas.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coefficients".into()));
    }
    let eta = linear_predictors(x, coeffs)?;
    let (n, k) = (eta.rows(), eta.cols());
    let m = k + 1;
    let mut pi = Matrix::zeros(n, m);
    let mut row = vec![0.0; m];
    for i in 0..n {
        row[..k].copy_from_slice(eta.row(i));
        row[k] = 0.0;
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for j in 0..m {
            pi[(i, j)] = row[j] / total;
        }
    }
    Ok(ProbabilityMatrix { values: pi })
}

fn check_labels(pi: &ProbabilityMatrix, codes: &[usize]) -> Result<()> {
    if codes.len() != pi.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} probability rows",
            codes.len(),
            pi.n()
        )));
    }
    if let Some(c) = codes.iter().find(|&&c| c >= pi.num_levels()) {
        return Err(Error::DimensionMismatch(format!(
            "label code {c} out of range for {} categories",
            pi.num_levels()
        )));
    }
    Ok(())
}

/// `Σ_i Σ_j y_ij log(π_ij)` with clamped probabilities.
pub fn log_likelihood(pi: &ProbabilityMatrix, codes: &[usize]) -> Result<f64> {
    check_labels(pi, codes)?;
    Ok(codes.iter().enumerate().map(|(i, &c)| pi.clamped(i, c).ln()).sum())
}

/// Gradient of the log-likelihood: `Σ_i (y_ij − π_ij) x_i` for each
/// non-reference category.
pub fn score(x: &Matrix, codes: &[usize], pi: &ProbabilityMatrix) -> Result<Vec<Vec<f64>>> {
    check_labels(pi, codes)?;
    if x.rows() != pi.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariate rows for {} probability rows",
            x.rows(),
            pi.n()
        )));
    }
    let k = pi.num_levels() - 1;
    (0..k)
        .map(|j| {
            let resid: Vec<f64> = codes
                .iter()
                .enumerate()
                .map(|(i, &c)| f64::from(u8::from(c == j)) - pi.get(i, j))
                .collect();
            x.tr_matvec(&resid)
        })
        .collect()
}

/// IRLS weights `π_ij (1 − π_ij)` for category `j`, floored at `1e-10`.
pub fn weight_vector(pi: &ProbabilityMatrix, j: usize) -> Result<Vec<f64>> {
    if j >= pi.num_levels() {
        return Err(Error::InvalidArgument(format!(
            "category index {j} out of range for {} categories",
            pi.num_levels()
        )));
    }
    Ok((0..pi.n())
        .map(|i| {
            let p = pi.get(i, j);
            (p * (1.0 - p)).max(WEIGHT_FLOOR)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(k: usize) -> Vec<String> {
        (1..=k).map(|i| i.to_string()).collect()
    }

    #[test]
    fn zero_coefficients_give_uniform_probabilities() {
        let x = Matrix::from_fn(4, 2, |i, j| (i + j) as f64 - 1.5);
        let pi = softmax_probabilities(&x, &CoefficientSet::zeros(order(2), 2)).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                assert!((pi.get(i, j) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn binary_case_matches_hand_value() {
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let coeffs = CoefficientSet::new(vec![vec![2.0_f64.ln()]], order(1)).unwrap();
        let pi = softmax_probabilities(&x, &coeffs).unwrap();
        assert!((pi.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((pi.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn huge_predictors_do_not_overflow() {
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let coeffs = CoefficientSet::new(vec![vec![800.0], vec![799.0]], order(2)).unwrap();
        let pi = softmax_probabilities(&x, &coeffs).unwrap();
        let e = (-1.0_f64).exp();
        assert!((pi.get(0, 0) - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!(pi.get(1, 2) >= 1.0 - 1e-15);
        assert!(pi.matrix().is_finite());
    }

    #[test]
    fn softmax_rejects_mismatch_and_nan() {
        let x = Matrix::zeros(3, 2);
        assert!(matches!(
            softmax_probabilities(&x, &CoefficientSet::zeros(order(2), 3)),
            Err(Error::DimensionMismatch(_))
        ));
        let mut bad = Matrix::zeros(3, 2);
        bad[(1, 1)] = f64::NAN;
        assert!(matches!(
            softmax_probabilities(&bad, &CoefficientSet::zeros(order(2), 2)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn log_likelihood_examples() {
        let certain = ProbabilityMatrix::new(Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap())
            .unwrap();
        let ll = log_likelihood(&certain, &[0, 1]).unwrap();
        assert!(ll.abs() < 1e-11);

        let uniform = ProbabilityMatrix::new(Matrix::from_fn(6, 3, |_, _| 1.0 / 3.0)).unwrap();
        let ll = log_likelihood(&uniform, &[0, 1, 2, 0, 1, 2]).unwrap();
        assert!((ll + 6.0 * 3.0_f64.ln()).abs() < 1e-12);

        assert!(matches!(log_likelihood(&uniform, &[0, 1]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn clamped_log_of_zero_probability_is_finite() {
        let pi = ProbabilityMatrix::new(Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap()).unwrap();
        let ll = log_likelihood(&pi, &[1]).unwrap();
        assert!((ll - LOG_PROB_FLOOR.ln()).abs() < 1e-12);
    }

    #[test]
    fn score_vanishes_when_labels_match_probabilities() {
        // one-hot probabilities equal to the labels
        let pi = ProbabilityMatrix::new(Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap())
        .unwrap();
        let x = Matrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let g = score(&x, &[0, 1, 2], &pi).unwrap();
        assert_eq!(g, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn weights_and_clamp() {
        let pi = ProbabilityMatrix::new(Matrix::from_rows(&[vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap())
            .unwrap();
        assert_eq!(weight_vector(&pi, 0).unwrap(), vec![0.25, WEIGHT_FLOOR]);
        assert!(matches!(weight_vector(&pi, 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn dataset_orders_levels_and_defaults_reference() {
        let x = Matrix::from_fn(5, 1, |i, _| i as f64);
        let ds = Dataset::new(x.clone(), &["b", " a", "c ", "a", "b"], None).unwrap();
        assert_eq!(ds.levels(), &["a", "b", "c"]);
        assert_eq!(ds.reference(), "c");
        assert_eq!(ds.codes(), &[1, 0, 2, 0, 1]);

        let ds = Dataset::new(x, &["b", "a", "c", "a", "b"], Some("a")).unwrap();
        assert_eq!(ds.levels(), &["b", "c", "a"]);
        assert_eq!(ds.codes(), &[0, 2, 1, 2, 0]);
    }

    #[test]
    fn dataset_invariants() {
        let x = Matrix::from_fn(3, 1, |i, _| i as f64);
        assert!(Dataset::new(x.clone(), &["a", "b", "a"], Some("z")).is_err());
        assert!(Dataset::new(x.clone(), &["a", "a", "a"], None).is_err());
        assert!(Dataset::from_codes(x.clone(), vec![0, 1, 1], 3).is_err());
        assert!(Dataset::from_codes(Matrix::zeros(2, 2), vec![0, 1], 2).is_err());
        let mut bad = x;
        bad[(0, 0)] = f64::INFINITY;
        assert!(matches!(Dataset::from_codes(bad, vec![0, 1, 1], 2), Err(Error::NonFinite(_))));
    }

    #[test]
    fn intercept_is_prepended() {
        let x = Matrix::from_fn(4, 1, |i, _| i as f64);
        let ds = Dataset::from_codes(x, vec![0, 1, 0, 1], 2).unwrap().with_intercept().unwrap();
        assert_eq!(ds.column_names(), &[INTERCEPT_NAME, "X1"]);
        assert_eq!(ds.x().row(2), &[1.0, 2.0]);
    }
}
