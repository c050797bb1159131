//! Method-of-moments estimation: `theta_hat` solves `e(theta) = mean psi(X_k)`.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{Interval, MomentModel, MomentVector, ParamVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Newton,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MmeResult {
    pub theta_hat: ParamVector,
    /// `|| e(theta_hat) - mean psi ||`, i.e. `|| Z_n(1, theta_hat) ||`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub method: Method,
}

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Relative tolerance; the absolute target is `tol * (1 + ||target||)`.
    pub tolerance: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            max_halvings: 30,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct EstimatorOptions {
    /// Skip the closed-form inverse even when the model has one.
    pub force_newton: bool,
    /// Bracket whose midpoint seeds Newton when the model offers no guess.
    pub bracket: Option<Vec<Interval>>,
    pub newton: NewtonOptions,
}

/// Tolerance a successful estimate must meet, relative to the data scale.
pub fn estimating_tolerance(psi_mean: &MomentVector) -> f64 {
    1e-8 * (1.0 + psi_mean.norm())
}

/// Validates a sample and returns the mean of `psi` over it.
pub fn psi_mean(data: &[f64], model: &dyn MomentModel) -> Result<MomentVector> {
    if let Some(i) = data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let d = model.dim();
    let mut sum = DVector::zeros(d);
    let mut buf = vec![0.0; d];
    for &x in data {
        model.psi(x, &mut buf);
        for (s, v) in sum.iter_mut().zip(&buf) {
            *s += v;
        }
    }
    Ok(sum / data.len().max(1) as f64)
}

pub fn mme(data: &[f64], model: &dyn MomentModel) -> Result<MmeResult> {
    mme_with(data, model, &EstimatorOptions::default())
}

pub fn mme_with(
    data: &[f64],
    model: &dyn MomentModel,
    options: &EstimatorOptions,
) -> Result<MmeResult> {
    let d = model.dim();
    if data.len() < d + 1 {
        return Err(Error::InsufficientData {
            required: d + 1,
            found: data.len(),
        });
    }
    let target = psi_mean(data, model)?;
    if data.iter().all(|&x| x == data[0]) {
        return Err(Error::DegenerateSample(
            "all observations are equal, the sample psi-covariance is zero".into(),
        ));
    }
    let tol = estimating_tolerance(&target);

    if !options.force_newton {
        if let Some(closed) = model.invert_moments(target.as_slice()) {
            let theta = closed?;
            let residual = (model.moments(&theta) - &target).norm();
            if residual <= tol {
                return Ok(MmeResult {
                    theta_hat: theta,
                    residual_norm: residual,
                    iterations: 0,
                    method: Method::ClosedForm,
                });
            }
            // Round-off in the closed form; polish it.
            return newton_solve_with(&target, model, &theta, &options.newton);
        }
    }

    let init = options
        .bracket
        .as_ref()
        .map(|b| ParamVector::new(b.iter().map(Interval::midpoint).collect::<Vec<_>>()))
        .or_else(|| model.initial_guess(target.as_slice()))
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "model `{}` has no initial guess; pass a bracket",
                model.name()
            ))
        })?;
    newton_solve_with(&target, model, &init, &options.newton)
}

pub fn newton_solve(
    target: &MomentVector,
    model: &dyn MomentModel,
    init: &ParamVector,
) -> Result<MmeResult> {
    newton_solve_with(target, model, init, &NewtonOptions::default())
}

fn within(bounds: &[Interval], theta: &DVector<f64>) -> bool {
    bounds
        .iter()
        .zip(theta.iter())
        .all(|(b, &t)| t.is_finite() && t >= b.lo && t <= b.hi)
}

/// One extra undamped step once converged, kept only if it lowers the residual.
fn polish(
    model: &dyn MomentModel,
    target: &MomentVector,
    bounds: &[Interval],
    theta: &mut DVector<f64>,
    norm: &mut f64,
) {
    let residual = model.moments(theta.as_slice()) - target;
    let Some(step) = model.jacobian(theta.as_slice()).lu().solve(&residual) else {
        return;
    };
    let candidate = &*theta - step;
    if within(bounds, &candidate) && model.contains(candidate.as_slice()) {
        let n = (model.moments(candidate.as_slice()) - target).norm();
        if n < *norm {
            *theta = candidate;
            *norm = n;
        }
    }
}

/// Damped Newton iteration on `e(theta) = target` using `V(theta)` as Jacobian.
///
/// Each step is halved until the iterate stays inside the model's solver
/// bounds and the residual norm decreases.
pub fn newton_solve_with(
    target: &MomentVector,
    model: &dyn MomentModel,
    init: &ParamVector,
    options: &NewtonOptions,
) -> Result<MmeResult> {
    model.check_param(init)?;
    let bounds = model.solver_bounds();
    let domain = model.domain();
    let tol = options.tolerance * (1.0 + target.norm());

    let mut theta = init.to_vector();
    let mut residual = model.moments(theta.as_slice()) - target;
    let mut norm = residual.norm();

    for iteration in 0..=options.max_iterations {
        if norm <= tol {
            if iteration > 0 {
                polish(model, target, &bounds, &mut theta, &mut norm);
            }
            return Ok(MmeResult {
                theta_hat: ParamVector::from_vector(&theta),
                residual_norm: norm,
                iterations: iteration,
                method: Method::Newton,
            });
        }
        if iteration == options.max_iterations {
            break;
        }
        let jac = model.jacobian(theta.as_slice());
        let step = jac
            .lu()
            .solve(&residual)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::SingularJacobian(theta.iter().copied().collect()))?;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let candidate = &theta - &step * scale;
            if within(&bounds, &candidate)
                && domain
                    .iter()
                    .zip(candidate.iter())
                    .all(|(iv, &t)| iv.contains(t))
            {
                let r = model.moments(candidate.as_slice()) - target;
                let n = r.norm();
                if n < norm {
                    accepted = Some((candidate, r, n));
                    break;
                }
            }
            scale *= 0.5;
        }
        match accepted {
            Some((t, r, n)) => {
                theta = t;
                residual = r;
                norm = n;
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: iteration + 1,
                    residual: norm,
                })
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: options.max_iterations,
        residual: norm,
    })
}
