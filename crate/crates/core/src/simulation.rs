//! Monte Carlo study of the MLE and Liu estimators.
//!
//! # Reproducibility
//!
//! Every random draw is a pure function of `(master_seed, cell_index,
//! replication)`. The replication seed is
//!
//! ```text
//! stable_mix(s, c, r) = splitmix64(splitmix64(splitmix64(s) ^ c) ^ r)
//! ```
//!
//! where `splitmix64` is the standard SplitMix64 finalizer (golden-gamma
//! increment, multipliers `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`).
//! That seed keys a ChaCha8 generator: stream 0 draws the covariates
//! (standard normals via the ziggurat sampler), stream 1 draws the uniforms
//! used to sample responses. Results are merged by cell and replication
//! index, so the thread count never changes an output bit.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irls::{fit_mle, IrlsOptions, SweepOrder};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::liu::{liu_estimate, select_d, spectra, DRule};
use crate::model::{softmax_probabilities, CoefficientSet, Dataset};

const DESIGN_STREAM: u64 = 0;
const RESPONSE_STREAM: u64 = 1;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Replication seed for `(master_seed, cell_index, replication)`.
pub fn stable_mix(master_seed: u64, cell_index: u64, replication: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ cell_index) ^ replication)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How the shared component of the correlated design is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignMode {
    /// An extra standard-normal column `z_{p+1}` is shared by all `p`
    /// covariates; every pair of columns has correlation `ρ²`.
    #[default]
    Auxiliary,
    /// The last drawn column `z_p` is itself the shared component, so column
    /// `p` is a rescaled copy of it.
    SharedLast,
}

/// Construction of the true coefficient vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientMode {
    /// All entries `1/√p`.
    Equal,
    /// Unit eigenvector of `XᵀX` for its largest eigenvalue.
    #[default]
    PrincipalEigenvector,
}

/// Correlated covariates `x_li = √(1−ρ²) z_li + ρ z_shared`.
pub fn generate_design(n: usize, p: usize, rho: f64, mode: DesignMode, seed: u64) -> Result<Matrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho must lie in [0, 1), got {rho}")));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    let width = match mode {
        DesignMode::Auxiliary => p + 1,
        DesignMode::SharedLast => p,
    };
    let mut rng = rng_for(seed, DESIGN_STREAM);
    let z = Matrix::from_fn(n, width, |_, _| rng.sample(StandardNormal));
    let scale = (1.0 - rho * rho).sqrt();
    Ok(Matrix::from_fn(n, p, |l, i| scale * z[(l, i)] + rho * z[(l, width - 1)]))
}

fn category_names(m: usize) -> Vec<String> {
    (1..m).map(|k| k.to_string()).collect()
}

/// Unit-norm true coefficients, identical across the `m − 1` categories.
pub fn make_coefficients(p: usize, m: usize, mode: CoefficientMode, x: Option<&Matrix>) -> Result<CoefficientSet> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    if m < 2 {
        return Err(Error::InvalidArgument(format!("m must be at least 2, got {m}")));
    }
    let beta = match mode {
        CoefficientMode::Equal => vec![1.0 / (p as f64).sqrt(); p],
        CoefficientMode::PrincipalEigenvector => {
            let x = x.ok_or_else(|| {
                Error::InvalidArgument("principal_eigenvector mode needs the design matrix".into())
            })?;
            if x.cols() != p {
                return Err(Error::DimensionMismatch(format!("design has {} columns, p = {p}", x.cols())));
            }
            let xtx = x.weighted_crossprod(&vec![1.0; x.rows()])?;
            let v = symmetric_eigen(&xtx)?.eigenvectors.column(0);
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.into_iter().map(|a| a / norm).collect()
        }
    };
    CoefficientSet::new(vec![beta; m - 1], category_names(m))
}

/// Samples one category code per row by inverse CDF on a single uniform.
pub fn generate_responses(x: &Matrix, coeffs: &CoefficientSet, seed: u64) -> Result<Vec<usize>> {
    let pi = softmax_probabilities(x, coeffs)?;
    if !pi.matrix().is_finite() {
        return Err(Error::NonFinite("response probabilities".into()));
    }
    let m = pi.num_levels();
    let mut rng = rng_for(seed, RESPONSE_STREAM);
    Ok((0..pi.n())
        .map(|i| {
            let u: f64 = rng.random();
            let mut cum = 0.0;
            for j in 0..m - 1 {
                cum += pi.get(i, j);
                if u < cum {
                    return j;
                }
            }
            m - 1
        })
        .collect())
}

/// An estimator compared in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    Mle,
    Liu(DRule),
}

impl Estimator {
    pub const ALL: [Estimator; 4] =
        [Estimator::Mle, Estimator::Liu(DRule::D1), Estimator::Liu(DRule::D2), Estimator::Liu(DRule::D3)];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mle => "MLE",
            Estimator::Liu(r) => r.name(),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("mle") {
            Ok(Estimator::Mle)
        } else {
            s.parse().map(Estimator::Liu)
        }
    }
}

impl Serialize for Estimator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Estimator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Factor grid and run settings. Missing fields take the default study design:
/// `ρ ∈ {0.9, 0.99, 0.999}`, `p ∈ {4, 8, 12, 20}`, `n ∈ {100, 200, 500,
/// 1000}`, 2000 replications, tolerance `1e-6`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationGrid {
    pub rhos: Vec<f64>,
    pub ps: Vec<usize>,
    pub ns: Vec<usize>,
    pub m: usize,
    pub estimators: Vec<Estimator>,
    pub replications: usize,
    pub master_seed: u64,
    pub coefficient_mode: CoefficientMode,
    pub design_mode: DesignMode,
    pub tol: f64,
    pub max_iter: usize,
    pub sweep: SweepOrder,
}

impl Default for SimulationGrid {
    fn default() -> Self {
        Self {
            rhos: vec![0.9, 0.99, 0.999],
            ps: vec![4, 8, 12, 20],
            ns: vec![100, 200, 500, 1000],
            m: 3,
            estimators: Estimator::ALL.to_vec(),
            replications: 2000,
            master_seed: 20_240_607,
            coefficient_mode: CoefficientMode::default(),
            design_mode: DesignMode::default(),
            tol: 1e-6,
            max_iter: 1000,
            sweep: SweepOrder::Joint,
        }
    }
}

/// One `(ρ, p, n)` combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub rho: f64,
    pub p: usize,
    pub n: usize,
}

impl SimulationGrid {
    /// Checks the grid invariants, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::InvalidArgument(format!("{field}: {why}")));
        if self.rhos.is_empty() || self.ps.is_empty() || self.ns.is_empty() {
            return bad("rhos/ps/ns", "every factor needs at least one level".into());
        }
        if let Some(r) = self.rhos.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return bad("rhos", format!("{r} is outside [0, 1)"));
        }
        if let Some(p) = self.ps.iter().find(|p| **p == 0) {
            return bad("ps", format!("{p} is not a positive covariate count"));
        }
        let max_p = *self.ps.iter().max().expect("non-empty");
        if let Some(n) = self.ns.iter().find(|n| **n <= max_p + 5) {
            return bad("ns", format!("n = {n} must exceed p + 5 = {}", max_p + 5));
        }
        if self.m < 2 {
            return bad("m", format!("{} categories; need at least 2", self.m));
        }
        if self.replications == 0 {
            return bad("replications", "must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("estimators", "at least one estimator is required".into());
        }
        if !(self.tol > 0.0) {
            return bad("tol", format!("{} is not positive", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be at least 1".into());
        }
        Ok(())
    }

    /// Cells in ρ-major, then p, then n order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.rhos.len() * self.ps.len() * self.ns.len());
        for &rho in &self.rhos {
            for &p in &self.ps {
                for &n in &self.ns {
                    out.push(Cell { rho, p, n });
                }
            }
        }
        out
    }

    fn irls_options(&self) -> IrlsOptions {
        IrlsOptions { max_iter: self.max_iter, tol: self.tol, sweep: self.sweep }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTrace {
    pub master_seed: u64,
    pub cell_index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    /// Average of `Σ_j ‖β̂_j − β_j‖²` over successful replications, in the
    /// grid's estimator order.
    pub mse: Vec<(Estimator, f64)>,
    /// Successful replications (the denominator).
    pub replications: usize,
    /// Replications whose fit failed or did not converge; excluded from every
    /// estimator's average.
    pub failed_replications: usize,
    pub seed_trace: SeedTrace,
}

impl CellResult {
    pub fn mse_of(&self, estimator: Estimator) -> Option<f64> {
        self.mse.iter().find(|(e, _)| *e == estimator).map(|(_, v)| *v)
    }
}

/// Squared-error sums of one replication, per requested estimator.
pub fn run_replication(cell: Cell, grid: &SimulationGrid, seed: u64) -> Result<Vec<f64>> {
    let x = generate_design(cell.n, cell.p, cell.rho, grid.design_mode, seed)?;
    let truth = make_coefficients(cell.p, grid.m, grid.coefficient_mode, Some(&x))?;
    let codes = generate_responses(&x, &truth, seed)?;
    let data = Dataset::from_codes(x, codes, grid.m)?;
    let fit = fit_mle(&data, &grid.irls_options())?;
    if !fit.converged {
        return Err(Error::NotConverged { iterations: fit.iterations });
    }
    let spectra = if grid.estimators.iter().any(|e| matches!(e, Estimator::Liu(_))) {
        spectra(&fit)?
    } else {
        Vec::new()
    };
    grid.estimators
        .iter()
        .map(|&est| match est {
            Estimator::Mle => fit.coeffs.squared_error(&truth),
            Estimator::Liu(rule) => {
                let mut total = 0.0;
                for (j, spectrum) in spectra.iter().enumerate() {
                    let d = select_d(spectrum, rule)?;
                    let b = liu_estimate(&fit.coeffs.betas[j], &fit.weighted_crossprods[j], d)?;
                    total += b.iter().zip(&truth.betas[j]).map(|(a, t)| (a - t) * (a - t)).sum::<f64>();
                }
                Ok(total)
            }
        })
        .collect()
}

/// Runs all replications of one cell. Replications may execute on the
/// current rayon pool; sums are taken in replication order.
pub fn run_cell(cell_index: usize, cell: Cell, grid: &SimulationGrid) -> Result<CellResult> {
    let outcomes: Vec<Result<Vec<f64>>> = (0..grid.replications)
        .into_par_iter()
        .map(|r| run_replication(cell, grid, stable_mix(grid.master_seed, cell_index as u64, r as u64)))
        .collect();

    let mut sums = vec![0.0; grid.estimators.len()];
    let mut ok = 0usize;
    let mut failed = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(errs) => {
                ok += 1;
                for (s, e) in sums.iter_mut().zip(errs) {
                    *s += e;
                }
            }
            Err(_) => failed += 1,
        }
    }
    if ok == 0 {
        return Err(Error::CellFailed { rho: cell.rho, p: cell.p, n: cell.n, failed });
    }
    let mse = grid.estimators.iter().copied().zip(sums.into_iter().map(|s| s / ok as f64)).collect();
    Ok(CellResult {
        cell,
        mse,
        replications: ok,
        failed_replications: failed,
        seed_trace: SeedTrace { master_seed: grid.master_seed, cell_index: cell_index as u64 },
    })
}

/// Runs every cell of the grid on the current rayon pool, returning results
/// in cell order.
pub fn run_grid(grid: &SimulationGrid) -> Result<Vec<CellResult>> {
    grid.validate()?;
    grid.cells()
        .into_par_iter()
        .enumerate()
        .map(|(idx, cell)| run_cell(idx, cell, grid))
        .collect()
}

/// [`run_grid`] on a dedicated pool of `workers` threads.
pub fn run_grid_with_workers(grid: &SimulationGrid, workers: usize) -> Result<Vec<CellResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_grid(grid))
}
