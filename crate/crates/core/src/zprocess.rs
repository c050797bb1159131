//! The partial-sum Z-process, the plug-in covariance, the statistic path
//! `T_n(k/n)` and the sup test built on it.
//!
//! `Z_n(u, theta) = (1/n) sum_{k <= floor(u n)} (psi(X_k) - e(theta))` is a step
//! function of `u` that only jumps at `u = k/n`, so everything here is
//! evaluated on that grid.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{mme_with, EstimatorOptions, MmeResult};
use crate::limits::{self, CriticalValueTable};
use crate::models::{MomentModel, MomentVector, ParamVector};

/// Largest condition number accepted for the plug-in covariance.
pub const MAX_CONDITION: f64 = 1e12;

/// Prefix sums `S_k = sum_{j <= k} psi(X_j)`, `S_0 = 0`, stored row-major.
#[derive(Clone, Debug)]
pub struct ZProcessState {
    n: usize,
    d: usize,
    prefix: Vec<f64>,
}

impl ZProcessState {
    pub fn build(data: &[f64], model: &dyn MomentModel) -> Self {
        let d = model.dim();
        let n = data.len();
        let mut prefix = vec![0.0; (n + 1) * d];
        let mut psi = vec![0.0; d];
        for (k, &x) in data.iter().enumerate() {
            model.psi(x, &mut psi);
            let (done, rest) = prefix.split_at_mut((k + 1) * d);
            let prev = &done[k * d..];
            for ((s, p), v) in rest[..d].iter_mut().zip(prev).zip(&psi) {
                *s = p + v;
            }
        }
        Self { n, d, prefix }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `S_k`.
    pub fn prefix(&self, k: usize) -> &[f64] {
        &self.prefix[k * self.d..(k + 1) * self.d]
    }

    /// Grid index `floor(u n)`.
    pub fn index_of(&self, u: f64) -> usize {
        ((u * self.n as f64).floor().max(0.0) as usize).min(self.n)
    }

    /// `Z_n(k/n, theta)` given `e(theta)`.
    pub fn z_index(&self, k: usize, e_theta: &[f64]) -> MomentVector {
        let n = self.n as f64;
        let kf = k as f64;
        DVector::from_iterator(
            self.d,
            self.prefix(k)
                .iter()
                .zip(e_theta)
                .map(|(s, e)| (s - kf * e) / n),
        )
    }

    pub fn z_at(&self, u: f64, e_theta: &[f64]) -> MomentVector {
        self.z_index(self.index_of(u), e_theta)
    }
}

/// `Z_n(u, theta)` for `u` in `[0, 1]`.
pub fn z_at(
    state: &ZProcessState,
    u: f64,
    theta: &[f64],
    model: &dyn MomentModel,
) -> Result<MomentVector> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidArgument(format!("u = {u} is outside [0, 1]")));
    }
    Ok(state.z_at(u, model.moments(theta).as_slice()))
}

/// `(1/n) sum (psi(X_k) - e(theta)) (psi(X_k) - e(theta))^T`, not yet checked for rank.
pub fn centered_second_moment(data: &[f64], e_theta: &[f64], model: &dyn MomentModel) -> DMatrix<f64> {
    let d = model.dim();
    let mut acc = DMatrix::zeros(d, d);
    let mut psi = vec![0.0; d];
    for &x in data {
        model.psi(x, &mut psi);
        for (p, e) in psi.iter_mut().zip(e_theta) {
            *p -= e;
        }
        for i in 0..d {
            for j in 0..=i {
                acc[(i, j)] += psi[i] * psi[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            acc[(j, i)] = acc[(i, j)];
        }
    }
    acc / data.len().max(1) as f64
}

/// Plug-in covariance `Sigma_hat_n` at the full-sample estimate.
///
/// Fails with [`Error::SingularCovariance`] when the matrix is singular or its
/// condition number exceeds [`MAX_CONDITION`].
pub fn sigma_hat(data: &[f64], theta_hat: &[f64], model: &dyn MomentModel) -> Result<DMatrix<f64>> {
    let s = centered_second_moment(data, model.moments(theta_hat).as_slice(), model);
    Whitener::new(&s)?;
    Ok(s)
}

/// Linear map `W` with `z^T Sigma^-1 z = ||W z||^2`.
///
/// Built from the Cholesky factor (`W = L^-1`), or from the symmetric
/// eigendecomposition (`W = Lambda^-1/2 Q^T`) when Cholesky fails.
#[derive(Clone, Debug)]
pub struct Whitener {
    w: DMatrix<f64>,
    condition: f64,
}

impl Whitener {
    pub fn new(sigma: &DMatrix<f64>) -> Result<Self> {
        let eig = sigma.clone().symmetric_eigen();
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if condition.is_nan() || condition > MAX_CONDITION || !max.is_finite() {
            return Err(Error::SingularCovariance { condition });
        }
        let w = match sigma.clone().cholesky() {
            Some(chol) => chol
                .l()
                .solve_lower_triangular(&DMatrix::identity(sigma.nrows(), sigma.nrows()))
                .expect("positive diagonal after Cholesky"),
            None => {
                let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
                scale * eig.eigenvectors.transpose()
            }
        };
        Ok(Self { w, condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `z^T Sigma^-1 z`.
    pub fn quad_form(&self, z: &[f64]) -> f64 {
        let d = z.len();
        let mut total = 0.0;
        for i in 0..d {
            let y = z
                .iter()
                .enumerate()
                .fold(0.0, |acc, (j, &zj)| acc + self.w[(i, j)] * zj);
            total += y * y;
        }
        total
    }
}

/// `T_n(k/n) = n Z_n(k/n, theta)^T Sigma^-1 Z_n(k/n, theta)` for `k = 0..=n`.
pub fn t_path(state: &ZProcessState, e_theta: &[f64], whitener: &Whitener) -> Vec<f64> {
    let n = state.len() as f64;
    let d = state.dim();
    let mut z = vec![0.0; d];
    (0..=state.len())
        .map(|k| {
            let kf = k as f64;
            for ((zi, s), e) in z.iter_mut().zip(state.prefix(k)).zip(e_theta) {
                *zi = (s - kf * e) / n;
            }
            // The form is a sum of squares; the clamp only guards -0.0.
            (n * whitener.quad_form(&z)).max(0.0)
        })
        .collect()
}

/// Smallest index attaining the maximum of `path`, and `k_hat / n`.
pub fn change_point(path: &[f64]) -> (f64, usize) {
    let mut best = 0;
    for (k, &v) in path.iter().enumerate() {
        if v > path[best] {
            best = k;
        }
    }
    let n = path.len().saturating_sub(1).max(1);
    (best as f64 / n as f64, best)
}

#[derive(Clone, Debug, Default)]
pub struct TestOptions {
    /// Ridge added to the diagonal of `Sigma_hat`. Zero disables it.
    pub ridge: f64,
    /// Explicit critical value; overrides any table.
    pub critical_value: Option<f64>,
    /// Table consulted before the shipped default table.
    pub table: Option<CriticalValueTable>,
    pub estimator: EstimatorOptions,
}

/// Estimate, covariance and statistic path, without a decision.
#[derive(Clone, Debug, Serialize)]
pub struct PathAnalysis {
    pub n: usize,
    pub dim: usize,
    pub theta_hat: ParamVector,
    pub estimator: MmeResult,
    pub sigma_hat: Vec<Vec<f64>>,
    pub t_stat: f64,
    pub k_hat: usize,
    pub u_hat: f64,
    #[serde(skip)]
    pub t_path: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TestReport {
    #[serde(flatten)]
    pub analysis: PathAnalysis,
    pub level: f64,
    pub critical_value: f64,
    pub reject: bool,
}

impl TestReport {
    pub fn theta_hat(&self) -> &ParamVector {
        &self.analysis.theta_hat
    }

    pub fn t_stat(&self) -> f64 {
        self.analysis.t_stat
    }

    pub fn t_path(&self) -> &[f64] {
        &self.analysis.t_path
    }

    /// `(u_hat, k_hat)`; meaningful as an estimate only when `reject` holds.
    pub fn change_point(&self) -> (f64, usize) {
        (self.analysis.u_hat, self.analysis.k_hat)
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Runs estimation and builds the statistic path. Needs `n >= d + 1`.
pub fn analyze(data: &[f64], model: &dyn MomentModel, options: &TestOptions) -> Result<PathAnalysis> {
    let estimate = mme_with(data, model, &options.estimator)?;
    let e_hat = model.moments(&estimate.theta_hat);
    let mut sigma = centered_second_moment(data, e_hat.as_slice(), model);
    if options.ridge > 0.0 {
        for i in 0..sigma.nrows() {
            sigma[(i, i)] += options.ridge;
        }
    }
    let whitener = Whitener::new(&sigma)?;
    let state = ZProcessState::build(data, model);
    let path = t_path(&state, e_hat.as_slice(), &whitener);
    let (u_hat, k_hat) = change_point(&path);
    Ok(PathAnalysis {
        n: data.len(),
        dim: model.dim(),
        theta_hat: estimate.theta_hat.clone(),
        estimator: estimate,
        sigma_hat: to_rows(&sigma),
        t_stat: path[k_hat],
        k_hat,
        u_hat,
        t_path: path,
    })
}

/// Resolves the critical value for `(d, level)` from options or the shipped table.
pub fn resolve_critical_value(dim: usize, level: f64, options: &TestOptions) -> Result<f64> {
    if let Some(c) = options.critical_value {
        return Ok(c);
    }
    if let Some(v) = options.table.as_ref().and_then(|t| t.lookup(dim, level)) {
        return Ok(v.value);
    }
    limits::default_table()
        .lookup(dim, level)
        .map(|v| v.value)
        .ok_or(Error::MissingCriticalValue { dim, level })
}

pub fn run_test(data: &[f64], model: &dyn MomentModel, level: f64) -> Result<TestReport> {
    run_test_with(data, model, level, &TestOptions::default())
}

/// The sup test: rejects when `T_n` exceeds the critical value at `level`.
pub fn run_test_with(
    data: &[f64],
    model: &dyn MomentModel,
    level: f64,
    options: &TestOptions,
) -> Result<TestReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} is not in (0, 1)")));
    }
    let required = model.dim() + 2;
    if data.len() < required {
        return Err(Error::InsufficientData {
            required,
            found: data.len(),
        });
    }
    let critical_value = resolve_critical_value(model.dim(), level, options)?;
    let analysis = analyze(data, model, options)?;
    let reject = analysis.t_stat > critical_value;
    Ok(TestReport {
        analysis,
        level,
        critical_value,
        reject,
    })
}
