//! Change point detection for parametric families via the method-of-moments
//! Z-process.
//!
//! Given an ordered sample and a [`MomentModel`](models::MomentModel), the test
//! estimates `theta` by the method of moments, forms the partial-sum process
//! `Z_n(u, theta_hat)`, and rejects the no-change hypothesis when
//! `T_n = n sup_u Z_n^T Sigma_hat^-1 Z_n` exceeds a quantile of
//! `sup_u ||B(u) - u B(1)||^2`. The maximizing `u` estimates the change location.
//!
//! ```
//! use momcp::models::gamma_model;
//! use momcp::zprocess::run_test;
//!
//! let data: Vec<f64> = (1..=40).map(|k| 1.0 + (k as f64 * 0.37).sin().abs()).collect();
//! let report = run_test(&data, &gamma_model(), 0.05).unwrap();
//! assert!(report.t_stat() >= 0.0);
//! ```

pub mod cli;
pub mod error;
pub mod estimator;
pub mod limits;
pub mod models;
pub mod montecarlo;
pub mod rng;
pub mod zprocess;

pub use error::{Error, Result};
pub use estimator::{mme, newton_solve, MmeResult};
pub use limits::{critical_value, CriticalValueTable};
pub use models::{model_by_name, MomentModel, ParamVector};
pub use montecarlo::{run_experiment, ExperimentConfig, ExperimentResult};
pub use zprocess::{run_test, TestReport, ZProcessState};
