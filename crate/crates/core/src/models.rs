//! Parametric families and their moment machinery.
//!
//! A [`MomentModel`] bundles the moment map `psi`, its expectation curve
//! `e(theta)`, the Jacobian `V(theta)` of that curve, the covariance
//! `Sigma(theta)` of `psi(X)`, a sampler and, when available, the closed-form
//! inverse of `e`. All shipped families observe scalar reals.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Bernoulli, Distribution, Exp, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

pub type MomentVector = DVector<f64>;

/// A point `theta` in the parameter space of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        Self(coords.into())
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        Self(v.iter().copied().collect())
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl fmt::Display for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// An interval of admissible values for one parameter coordinate.
///
/// Membership is open at both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const POSITIVE: Interval = Interval::new(0.0, f64::INFINITY);
    pub const REAL: Interval = Interval::new(f64::NEG_INFINITY, f64::INFINITY);
    pub const UNIT: Interval = Interval::new(0.0, 1.0);

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    /// Midpoint, or a finite stand-in when an end is infinite.
    pub fn midpoint(&self) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => 0.5 * (self.lo + self.hi),
            (true, false) => self.lo + 1.0,
            (false, true) => self.hi - 1.0,
            (false, false) => 0.0,
        }
    }
}

/// Moment machinery of a parametric family with scalar observations.
pub trait MomentModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Dimension `d` of both the parameter and the moment map.
    fn dim(&self) -> usize;

    /// Open parameter domain, one interval per coordinate.
    fn domain(&self) -> Vec<Interval>;

    /// Box the Newton solver keeps its iterates in. Defaults to [`domain`](Self::domain).
    fn solver_bounds(&self) -> Vec<Interval> {
        self.domain()
    }

    /// Writes `psi(x)` into `out` (length `d`).
    fn psi(&self, x: f64, out: &mut [f64]);

    /// `e(theta) = E_theta psi(X)`.
    fn moments(&self, theta: &[f64]) -> MomentVector;

    /// `V(theta)`, the Jacobian of `e`; entry `(i, j)` is `d e_i / d theta_j`.
    fn jacobian(&self, theta: &[f64]) -> DMatrix<f64>;

    /// `Sigma(theta) = Cov_theta psi(X)`.
    fn covariance(&self, theta: &[f64]) -> DMatrix<f64>;

    /// Fills `out` with i.i.d. draws under `theta`.
    fn sample(&self, theta: &[f64], rng: &mut SimRng, out: &mut [f64]);

    /// Closed-form inverse of `e`, if the family has one.
    fn invert_moments(&self, _moments: &[f64]) -> Option<Result<ParamVector>> {
        None
    }

    /// Starting point for Newton iterations targeting `moments`.
    fn initial_guess(&self, moments: &[f64]) -> Option<ParamVector> {
        self.invert_moments(moments).and_then(Result::ok)
    }

    fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && self
                .domain()
                .iter()
                .zip(theta)
                .all(|(iv, &t)| iv.contains(t))
    }

    /// Checks dimension and domain membership of `theta`.
    fn check_param(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                model: self.name().to_owned(),
                expected: self.dim(),
                found: theta.len(),
            });
        }
        if !self.contains(theta) {
            return Err(Error::OutOfDomain(theta.to_vec()));
        }
        Ok(())
    }

    fn psi_vec(&self, x: f64) -> MomentVector {
        let mut out = DVector::zeros(self.dim());
        self.psi(x, out.as_mut_slice());
        out
    }
}

pub type SharedModel = Arc<dyn MomentModel>;

/// Names accepted by [`model_by_name`].
pub const MODEL_NAMES: [&str; 5] = ["gamma", "exponential", "normal", "poisson", "bernoulli"];

/// Looks up a shipped family by its CLI/config name.
pub fn model_by_name(name: &str) -> Result<SharedModel> {
    Ok(match name.trim().to_ascii_lowercase().as_str() {
        "gamma" => Arc::new(gamma_model()),
        "exponential" => Arc::new(exponential_model()),
        "normal" => Arc::new(normal_model()),
        "poisson" => Arc::new(poisson_model()),
        "bernoulli" => Arc::new(bernoulli_model()),
        _ => return Err(Error::UnknownModel(name.to_owned())),
    })
}

/// Gamma with shape `alpha` and rate `lambda`, `psi(x) = (x, x^2)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct GammaModel;

/// Exponential with rate `lambda`, `psi(x) = x`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExponentialModel;

/// Normal parameterized by `(mu, sigma^2)`, `psi(x) = (x, x^2)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct NormalModel;

/// Poisson with mean `lambda`, `psi(x) = x`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PoissonModel;

/// Bernoulli with success probability `p`, `psi(x) = x`.
#[derive(Clone, Copy, Debug, Default)]
pub struct BernoulliModel;

pub fn gamma_model() -> GammaModel {
    GammaModel
}

pub fn exponential_model() -> ExponentialModel {
    ExponentialModel
}

pub fn normal_model() -> NormalModel {
    NormalModel
}

pub fn poisson_model() -> PoissonModel {
    PoissonModel
}

pub fn bernoulli_model() -> BernoulliModel {
    BernoulliModel
}

fn degenerate_if_flat(variance: f64, what: &str) -> Result<()> {
    if variance == 0.0 {
        Err(Error::DegenerateSample(format!("{what} is zero")))
    } else {
        Ok(())
    }
}

impl GammaModel {
    /// Raw moment `E X^k = alpha (alpha+1) ... (alpha+k-1) / lambda^k`.
    pub fn raw_moment(alpha: f64, lambda: f64, k: u32) -> f64 {
        (0..k).map(|j| alpha + f64::from(j)).product::<f64>() / lambda.powi(k as i32)
    }
}

impl MomentModel for GammaModel {
    fn name(&self) -> &str {
        "gamma"
    }

    fn dim(&self) -> usize {
        2
    }

    fn domain(&self) -> Vec<Interval> {
        vec![Interval::POSITIVE; 2]
    }

    fn solver_bounds(&self) -> Vec<Interval> {
        vec![Interval::new(1e-8, 1e8); 2]
    }

    fn psi(&self, x: f64, out: &mut [f64]) {
        out[0] = x;
        out[1] = x * x;
    }

    fn moments(&self, theta: &[f64]) -> MomentVector {
        let (a, l) = (theta[0], theta[1]);
        DVector::from_column_slice(&[a / l, a * (a + 1.0) / (l * l)])
    }

    fn jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        let (a, l) = (theta[0], theta[1]);
        let l2 = l * l;
        DMatrix::from_row_slice(
            2,
            2,
            &[
                1.0 / l,
                -a / l2,
                (2.0 * a + 1.0) / l2,
                -2.0 * a * (a + 1.0) / (l2 * l),
            ],
        )
    }

    fn covariance(&self, theta: &[f64]) -> DMatrix<f64> {
        let (a, l) = (theta[0], theta[1]);
        let m1 = Self::raw_moment(a, l, 1);
        let m2 = Self::raw_moment(a, l, 2);
        let m3 = Self::raw_moment(a, l, 3);
        let m4 = Self::raw_moment(a, l, 4);
        let c11 = a / (l * l);
        let c12 = m3 - m1 * m2;
        let c22 = m4 - m2 * m2;
        DMatrix::from_row_slice(2, 2, &[c11, c12, c12, c22])
    }

    fn sample(&self, theta: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        let dist = Gamma::new(theta[0], 1.0 / theta[1]).expect("gamma parameters checked");
        out.iter_mut().for_each(|x| *x = dist.sample(rng));
    }

    fn invert_moments(&self, m: &[f64]) -> Option<Result<ParamVector>> {
        let (m1, m2) = (m[0], m[1]);
        let var = m2 - m1 * m1;
        Some(degenerate_if_flat(var, "sample variance").and_then(|_| {
            let alpha = m1 * m1 / var;
            let lambda = alpha / m1;
            let theta = ParamVector::new(vec![alpha, lambda]);
            if var > 0.0 && m1 > 0.0 && self.contains(&theta) {
                Ok(theta)
            } else {
                Err(Error::OutOfDomain(theta.into_inner()))
            }
        }))
    }
}

impl MomentModel for ExponentialModel {
    fn name(&self) -> &str {
        "exponential"
    }

    fn dim(&self) -> usize {
        1
    }

    fn domain(&self) -> Vec<Interval> {
        vec![Interval::POSITIVE]
    }

    fn psi(&self, x: f64, out: &mut [f64]) {
        out[0] = x;
    }

    fn moments(&self, theta: &[f64]) -> MomentVector {
        DVector::from_element(1, 1.0 / theta[0])
    }

    fn jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, -1.0 / (theta[0] * theta[0]))
    }

    fn covariance(&self, theta: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 1.0 / (theta[0] * theta[0]))
    }

    fn sample(&self, theta: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        let dist = Exp::new(theta[0]).expect("exponential rate checked");
        out.iter_mut().for_each(|x| *x = dist.sample(rng));
    }

    fn invert_moments(&self, m: &[f64]) -> Option<Result<ParamVector>> {
        let theta = ParamVector::new(vec![1.0 / m[0]]);
        Some(if self.contains(&theta) {
            Ok(theta)
        } else {
            Err(Error::OutOfDomain(theta.into_inner()))
        })
    }
}

impl MomentModel for NormalModel {
    fn name(&self) -> &str {
        "normal"
    }

    fn dim(&self) -> usize {
        2
    }

    fn domain(&self) -> Vec<Interval> {
        vec![Interval::REAL, Interval::POSITIVE]
    }

    fn psi(&self, x: f64, out: &mut [f64]) {
        out[0] = x;
        out[1] = x * x;
    }

    fn moments(&self, theta: &[f64]) -> MomentVector {
        let (mu, var) = (theta[0], theta[1]);
        DVector::from_column_slice(&[mu, mu * mu + var])
    }

    fn jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0 * theta[0], 1.0])
    }

    fn covariance(&self, theta: &[f64]) -> DMatrix<f64> {
        let (mu, var) = (theta[0], theta[1]);
        let c12 = 2.0 * mu * var;
        let c22 = 4.0 * mu * mu * var + 2.0 * var * var;
        DMatrix::from_row_slice(2, 2, &[var, c12, c12, c22])
    }

    fn sample(&self, theta: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        let dist = Normal::new(theta[0], theta[1].sqrt()).expect("normal parameters checked");
        out.iter_mut().for_each(|x| *x = dist.sample(rng));
    }

    fn invert_moments(&self, m: &[f64]) -> Option<Result<ParamVector>> {
        let var = m[1] - m[0] * m[0];
        Some(degenerate_if_flat(var, "sample variance").and_then(|_| {
            let theta = ParamVector::new(vec![m[0], var]);
            if self.contains(&theta) {
                Ok(theta)
            } else {
                Err(Error::OutOfDomain(theta.into_inner()))
            }
        }))
    }
}

impl MomentModel for PoissonModel {
    fn name(&self) -> &str {
        "poisson"
    }

    fn dim(&self) -> usize {
        1
    }

    fn domain(&self) -> Vec<Interval> {
        vec![Interval::POSITIVE]
    }

    fn psi(&self, x: f64, out: &mut [f64]) {
        out[0] = x;
    }

    fn moments(&self, theta: &[f64]) -> MomentVector {
        DVector::from_element(1, theta[0])
    }

    fn jacobian(&self, _theta: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn covariance(&self, theta: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, theta[0])
    }

    fn sample(&self, theta: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        let dist = Poisson::new(theta[0]).expect("poisson mean checked");
        out.iter_mut().for_each(|x| *x = dist.sample(rng));
    }

    fn invert_moments(&self, m: &[f64]) -> Option<Result<ParamVector>> {
        let theta = ParamVector::new(vec![m[0]]);
        Some(if self.contains(&theta) {
            Ok(theta)
        } else {
            Err(Error::OutOfDomain(theta.into_inner()))
        })
    }
}

impl MomentModel for BernoulliModel {
    fn name(&self) -> &str {
        "bernoulli"
    }

    fn dim(&self) -> usize {
        1
    }

    fn domain(&self) -> Vec<Interval> {
        vec![Interval::UNIT]
    }

    fn psi(&self, x: f64, out: &mut [f64]) {
        out[0] = x;
    }

    fn moments(&self, theta: &[f64]) -> MomentVector {
        DVector::from_element(1, theta[0])
    }

    fn jacobian(&self, _theta: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn covariance(&self, theta: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, theta[0] * (1.0 - theta[0]))
    }

    fn sample(&self, theta: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        let dist = Bernoulli::new(theta[0]).expect("bernoulli probability checked");
        out.iter_mut()
            .for_each(|x| *x = if dist.sample(rng) { 1.0 } else { 0.0 });
    }

    fn invert_moments(&self, m: &[f64]) -> Option<Result<ParamVector>> {
        let theta = ParamVector::new(vec![m[0]]);
        Some(if self.contains(&theta) {
            Ok(theta)
        } else {
            Err(Error::OutOfDomain(theta.into_inner()))
        })
    }
}

/// A model whose moment map is `x -> A psi(x) + b` for an invertible `A`.
///
/// `e`, `V`, `Sigma` and the inverse of `e` are transformed consistently, so
/// the estimator and the test statistic are unchanged.
#[derive(Debug, Clone)]
pub struct AffineModel {
    inner: SharedModel,
    name: String,
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    b: DVector<f64>,
}

impl AffineModel {
    pub fn new(inner: SharedModel, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let d = inner.dim();
        if a.shape() != (d, d) || b.len() != d {
            return Err(Error::InvalidArgument(format!(
                "affine transform must be {d}x{d} with a length-{d} shift"
            )));
        }
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("affine matrix is singular".into()))?;
        let name = format!("affine({})", inner.name());
        Ok(Self {
            inner,
            name,
            a,
            a_inv,
            b,
        })
    }

    fn untransform(&self, m: &[f64]) -> Vec<f64> {
        let v = &self.a_inv * (DVector::from_column_slice(m) - &self.b);
        v.iter().copied().collect()
    }
}

impl MomentModel for AffineModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn domain(&self) -> Vec<Interval> {
        self.inner.domain()
    }

    fn solver_bounds(&self) -> Vec<Interval> {
        self.inner.solver_bounds()
    }

    fn psi(&self, x: f64, out: &mut [f64]) {
        let raw = self.inner.psi_vec(x);
        let t = &self.a * raw + &self.b;
        out.copy_from_slice(t.as_slice());
    }

    fn moments(&self, theta: &[f64]) -> MomentVector {
        &self.a * self.inner.moments(theta) + &self.b
    }

    fn jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        &self.a * self.inner.jacobian(theta)
    }

    fn covariance(&self, theta: &[f64]) -> DMatrix<f64> {
        &self.a * self.inner.covariance(theta) * self.a.transpose()
    }

    fn sample(&self, theta: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        self.inner.sample(theta, rng, out)
    }

    fn invert_moments(&self, m: &[f64]) -> Option<Result<ParamVector>> {
        self.inner.invert_moments(&self.untransform(m))
    }

    fn initial_guess(&self, m: &[f64]) -> Option<ParamVector> {
        self.inner.initial_guess(&self.untransform(m))
    }
}

/// Covariance `V^-1 Sigma V^-T` of the normal limit of `sqrt(n) (theta_hat - theta)`.
pub fn asymptotic_covariance(model: &dyn MomentModel, theta: &[f64]) -> Result<DMatrix<f64>> {
    model.check_param(theta)?;
    let v = model.jacobian(theta);
    let d = model.dim() as i32;
    let scale = v.norm().powi(d);
    let det = v.determinant();
    if det.is_nan() || scale.is_nan() || det.abs() < 1e-12 * scale || scale == 0.0 {
        return Err(Error::SingularJacobian(theta.to_vec()));
    }
    let v_inv = v
        .try_inverse()
        .ok_or_else(|| Error::SingularJacobian(theta.to_vec()))?;
    let cov = &v_inv * model.covariance(theta) * v_inv.transpose();
    Ok((&cov + cov.transpose()) * 0.5)
}
