//! Multinomial logistic regression fitted by iteratively re-weighted least
//! squares, the multinomial Liu shrinkage estimator with data-driven biasing
//! parameters, a seeded Monte Carlo MSE study and multicollinearity
//! diagnostics.

pub mod chart;
pub mod cli;
pub mod data;
pub mod error;
pub mod irls;
pub mod linalg;
pub mod liu;
pub mod model;
pub mod report;
pub mod simulation;

pub use error::{Error, Result};
