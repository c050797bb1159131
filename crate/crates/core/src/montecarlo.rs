//! Simulation studies: empirical size, power and change point accuracy of
//! the sup test, plus the limiting quantities under a single change.
//!
//! A replication simulates `n` observations where observation `k` (1-based) is
//! drawn under `theta0` iff `k <= floor(u* n)` and under `theta1` otherwise.
//! Replication `i` draws from `rng::stream(seed, i)`; per-replication records
//! are reduced in replication order with compensated sums, so results are
//! identical for any number of worker threads.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{mme, newton_solve};
use crate::models::{model_by_name, MomentModel, MomentVector, ParamVector, SharedModel};
use crate::rng::{self, DEFAULT_SEED};
use crate::zprocess::{analyze, resolve_critical_value, TestOptions, ZProcessState};

pub const DEFAULT_BINS: usize = 50;

/// A single change from `theta1` onward at fraction `ustar`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeSpec {
    pub ustar: f64,
    pub theta1: ParamVector,
}

/// One cell of a simulation study.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub model: String,
    pub theta0: ParamVector,
    pub change: Option<ChangeSpec>,
    pub n: usize,
    pub m: usize,
    pub level: f64,
    pub seed: u64,
    /// Fixed critical value; the shipped table is used when absent.
    pub critical_value: Option<f64>,
    pub bins: usize,
    pub keep_records: bool,
}

impl ExperimentConfig {
    pub fn new(model: &str, theta0: impl Into<Vec<f64>>, n: usize, m: usize) -> Self {
        Self {
            model: model.to_owned(),
            theta0: ParamVector::new(theta0),
            change: None,
            n,
            m,
            level: 0.05,
            seed: DEFAULT_SEED,
            critical_value: None,
            bins: DEFAULT_BINS,
            keep_records: false,
        }
    }

    pub fn with_change(mut self, ustar: f64, theta1: impl Into<Vec<f64>>) -> Self {
        self.change = Some(ChangeSpec {
            ustar,
            theta1: ParamVector::new(theta1),
        });
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_critical_value(mut self, c: f64) -> Self {
        self.critical_value = Some(c);
        self
    }

    /// Checks the configuration and resolves the model.
    pub fn validate(&self) -> Result<SharedModel> {
        let model = model_by_name(&self.model)?;
        model.check_param(&self.theta0)?;
        if let Some(change) = &self.change {
            model.check_param(&change.theta1)?;
            if !(change.ustar > 0.0 && change.ustar < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "ustar = {} is not in (0, 1)",
                    change.ustar
                )));
            }
            if change.theta1 == self.theta0 {
                return Err(Error::InvalidArgument(
                    "theta1 equals theta0; drop `theta1` for a no-change experiment".into(),
                ));
            }
        }
        if self.n < model.dim() + 2 {
            return Err(Error::InvalidArgument(format!(
                "n = {} is below the minimum {}",
                self.n,
                model.dim() + 2
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("m must be positive".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!("level {} is not in (0, 1)", self.level)));
        }
        if self.bins == 0 {
            return Err(Error::InvalidArgument("bins must be positive".into()));
        }
        Ok(model)
    }

    /// Number of leading observations drawn under `theta0`.
    pub fn pre_change_count(&self) -> usize {
        match &self.change {
            Some(c) => (c.ustar * self.n as f64).floor() as usize,
            None => self.n,
        }
    }

    fn theta1(&self) -> &ParamVector {
        self.change.as_ref().map_or(&self.theta0, |c| &c.theta1)
    }
}

/// Fills `out` with one simulated sample.
pub fn simulate_sample(
    model: &dyn MomentModel,
    theta0: &[f64],
    theta1: &[f64],
    pre_change: usize,
    rng: &mut rng::SimRng,
    out: &mut [f64],
) {
    let (head, tail) = out.split_at_mut(pre_change.min(out.len()));
    model.sample(theta0, rng, head);
    if !tail.is_empty() {
        model.sample(theta1, rng, tail);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub index: usize,
    pub t_stat: f64,
    pub reject: bool,
    pub k_hat: usize,
    pub u_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins on `[0, 1]`; the value 1 falls in the last bin.
    pub fn unit(bins: usize, values: impl IntoIterator<Item = f64>) -> Self {
        let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let b = ((v * bins as f64).floor() as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { edges, counts }
    }

    pub fn modal_bin(&self) -> (f64, f64) {
        let i = self
            .counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map_or(0, |(i, _)| i);
        (self.edges[i], self.edges[i + 1])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], c));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub critical_value: f64,
    /// Replications that produced a statistic.
    pub completed: usize,
    /// Replications dropped because estimation or the covariance failed.
    pub failed: usize,
    pub rejection_rate: f64,
    pub t_stat_mean: f64,
    pub u_hat_mean: Option<f64>,
    pub u_hat_sd: Option<f64>,
    pub u_hat_rmse: Option<f64>,
    pub histogram: Histogram,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<ReplicationRecord>>,
}

impl ExperimentResult {
    /// Binomial standard error of the rejection rate.
    pub fn rejection_se(&self) -> f64 {
        let p = self.rejection_rate;
        (p * (1.0 - p) / self.completed.max(1) as f64).sqrt()
    }
}

/// Neumaier-compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

fn run_replications(
    config: &ExperimentConfig,
    model: &dyn MomentModel,
    critical_value: f64,
) -> Vec<Option<ReplicationRecord>> {
    let pre = config.pre_change_count();
    let theta1 = config.theta1();
    let options = TestOptions::default();
    (0..config.m)
        .into_par_iter()
        .map_init(
            || vec![0.0; config.n],
            |buf, i| {
                let mut rng = rng::stream(config.seed, i as u64);
                simulate_sample(model, &config.theta0, theta1, pre, &mut rng, buf);
                analyze(buf, model, &options).ok().map(|a| ReplicationRecord {
                    index: i,
                    t_stat: a.t_stat,
                    reject: a.t_stat > critical_value,
                    k_hat: a.k_hat,
                    u_hat: a.u_hat,
                })
            },
        )
        .collect()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let model = config.validate()?;
    let critical_value = match config.critical_value {
        Some(c) => c,
        None => resolve_critical_value(model.dim(), config.level, &TestOptions::default())?,
    };
    let outcomes = run_replications(config, model.as_ref(), critical_value);
    let records: Vec<ReplicationRecord> = outcomes.into_iter().flatten().collect();
    let completed = records.len();
    let failed = config.m - completed;
    let denom = completed.max(1) as f64;

    let rejections = records.iter().filter(|r| r.reject).count();
    let t_sum: CompensatedSum = records.iter().map(|r| r.t_stat).collect();
    let histogram = Histogram::unit(config.bins, records.iter().map(|r| r.u_hat));

    let (u_hat_mean, u_hat_sd, u_hat_rmse) = match (&config.change, completed) {
        (Some(change), c) if c > 0 => {
            let mean = records.iter().map(|r| r.u_hat).collect::<CompensatedSum>().value() / denom;
            let ss = records
                .iter()
                .map(|r| (r.u_hat - mean).powi(2))
                .collect::<CompensatedSum>()
                .value();
            let sd = if c > 1 { (ss / (denom - 1.0)).sqrt() } else { 0.0 };
            let mse = records
                .iter()
                .map(|r| (r.u_hat - change.ustar).powi(2))
                .collect::<CompensatedSum>()
                .value()
                / denom;
            (Some(mean), Some(sd), Some(mse.sqrt()))
        }
        _ => (None, None, None),
    };

    Ok(ExperimentResult {
        config: config.clone(),
        critical_value,
        completed,
        failed,
        rejection_rate: rejections as f64 / denom,
        t_stat_mean: t_sum.value() / denom,
        u_hat_mean,
        u_hat_sd,
        u_hat_rmse,
        histogram,
        records: config.keep_records.then_some(records),
    })
}

/// Limiting quantities under a single change at `ustar`.
#[derive(Clone, Debug, Serialize)]
pub struct AlternativeOracle {
    pub ustar: f64,
    /// Pseudo-true parameter: `e(theta_star) = u* e(theta0) + (1 - u*) e(theta1)`.
    pub theta_star: ParamVector,
    /// `u* Sigma(theta0) + (1 - u*) Sigma(theta1)`.
    pub sigma_star: Vec<Vec<f64>>,
    /// Smallest eigenvalue of `sigma_star^-1`.
    pub lambda_star: f64,
    /// `e(theta0) - e(theta1)`.
    pub shift: Vec<f64>,
    #[serde(skip)]
    sigma_star_inv: DMatrix<f64>,
}

impl AlternativeOracle {
    /// `Z(u, theta_star)`, the tent `u (1-u*) delta` before `u*` and `u* (1-u) delta` after.
    pub fn drift(&self, u: f64) -> MomentVector {
        let w = if u <= self.ustar {
            u * (1.0 - self.ustar)
        } else {
            self.ustar * (1.0 - u)
        };
        DVector::from_iterator(self.shift.len(), self.shift.iter().map(|s| w * s))
    }

    /// `Z(u)^T Sigma_star^-1 Z(u)`, the limit of `T_n(u) / n`.
    pub fn criterion(&self, u: f64) -> f64 {
        let z = self.drift(u);
        (z.transpose() * &self.sigma_star_inv * &z)[(0, 0)]
    }

    pub fn shift_norm(&self) -> f64 {
        self.shift.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// `u*^2 (1-u*)^2 lambda* ||delta||^2`: lower bound for `lim T_n / n`.
    pub fn power_rate(&self) -> f64 {
        let u = self.ustar;
        u * u * (1.0 - u) * (1.0 - u) * self.lambda_star * self.shift_norm().powi(2)
    }
}

pub fn alternative_oracle(
    model: &dyn MomentModel,
    theta0: &[f64],
    theta1: &[f64],
    ustar: f64,
) -> Result<AlternativeOracle> {
    model.check_param(theta0)?;
    model.check_param(theta1)?;
    if !(0.0..=1.0).contains(&ustar) {
        return Err(Error::InvalidArgument(format!("ustar = {ustar} is not in [0, 1]")));
    }
    let e0 = model.moments(theta0);
    let e1 = model.moments(theta1);
    let mixed = &e0 * ustar + &e1 * (1.0 - ustar);
    let theta_star = match model.invert_moments(mixed.as_slice()) {
        Some(r) => r?,
        None => newton_solve(&mixed, model, &ParamVector::new(theta0.to_vec()))?.theta_hat,
    };
    let sigma_star = model.covariance(theta0) * ustar + model.covariance(theta1) * (1.0 - ustar);
    let sigma_star_inv = sigma_star
        .clone()
        .try_inverse()
        .ok_or(Error::SingularCovariance {
            condition: f64::INFINITY,
        })?;
    let lambda_star = 1.0 / sigma_star.clone().symmetric_eigenvalues().max();
    Ok(AlternativeOracle {
        ustar,
        theta_star,
        sigma_star: sigma_star
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
        lambda_star,
        shift: (e0 - e1).iter().copied().collect(),
        sigma_star_inv,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub completed: usize,
    /// `0.5 n u*^2 (1-u*)^2 lambda* ||delta||^2`.
    pub threshold: f64,
    /// Fraction of replications with `T_n` at or above `threshold`.
    pub above_threshold: f64,
    pub median_abs_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyDiagnostics {
    pub oracle: AlternativeOracle,
    pub rows: Vec<ConsistencyRow>,
}

pub const CONSISTENCY_SIZES: [usize; 3] = [100, 500, 2000];

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

/// Power lower bound and `u_hat` accuracy across sample sizes `ns`.
pub fn consistency_diagnostics(config: &ExperimentConfig, ns: &[usize]) -> Result<ConsistencyDiagnostics> {
    let change = config.change.as_ref().ok_or_else(|| {
        Error::InvalidArgument("consistency diagnostics need a configured change (theta1, ustar)".into())
    })?;
    let model = config.validate()?;
    let oracle = alternative_oracle(model.as_ref(), &config.theta0, &change.theta1, change.ustar)?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let cell = ExperimentConfig {
            n,
            keep_records: true,
            critical_value: Some(f64::INFINITY),
            ..config.clone()
        };
        cell.validate()?;
        let records: Vec<ReplicationRecord> =
            run_replications(&cell, model.as_ref(), f64::INFINITY).into_iter().flatten().collect();
        let threshold = 0.5 * n as f64 * oracle.power_rate();
        let above = records.iter().filter(|r| r.t_stat >= threshold).count();
        rows.push(ConsistencyRow {
            n,
            completed: records.len(),
            threshold,
            above_threshold: above as f64 / records.len().max(1) as f64,
            median_abs_error: median(records.iter().map(|r| (r.u_hat - change.ustar).abs()).collect()),
        });
    }
    Ok(ConsistencyDiagnostics { oracle, rows })
}

/// Mean over `m` replications of `sup_k || Z_n(k/n, theta_hat) - Z(k/n, theta_star) ||`.
///
/// `theta0 == theta1` is allowed and gives the no-change drift `Z = 0`.
pub fn sup_zn_deviation(
    model: &dyn MomentModel,
    theta0: &[f64],
    theta1: &[f64],
    ustar: f64,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<f64> {
    let oracle = alternative_oracle(model, theta0, theta1, ustar)?;
    let pre = (ustar * n as f64).floor() as usize;
    let sups: Vec<Option<f64>> = (0..m)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, i| {
                let mut rng = rng::stream(seed, i as u64);
                simulate_sample(model, theta0, theta1, pre, &mut rng, buf);
                let est = mme(buf, model).ok()?;
                let e_hat = model.moments(&est.theta_hat);
                let state = ZProcessState::build(buf, model);
                let sup = (0..=n)
                    .map(|k| {
                        let u = k as f64 / n as f64;
                        (state.z_index(k, e_hat.as_slice()) - oracle.drift(u)).norm()
                    })
                    .fold(0.0, f64::max);
                Some(sup)
            },
        )
        .collect();
    let ok: Vec<f64> = sups.into_iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::DegenerateSample("every replication failed".into()));
    }
    Ok(ok.iter().copied().collect::<CompensatedSum>().value() / ok.len() as f64)
}

/// [`sup_zn_deviation`] for a configured change at the config's `n`, `m` and seed.
pub fn sup_zn_convergence_check(config: &ExperimentConfig) -> Result<f64> {
    let change = config.change.as_ref().ok_or_else(|| {
        Error::InvalidArgument("the convergence check needs a configured change".into())
    })?;
    let model = config.validate()?;
    sup_zn_deviation(
        model.as_ref(),
        &config.theta0,
        &change.theta1,
        change.ustar,
        config.n,
        config.m,
        config.seed,
    )
}

/// Scalar or list, as accepted in study files.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(x) => vec![x.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

/// A study file: each of `theta0`, `ustar` and `n` may be a list, and the
/// study runs every combination.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub model: String,
    pub theta0: OneOrMany<Vec<f64>>,
    #[serde(default)]
    pub theta1: Option<Vec<f64>>,
    #[serde(default)]
    pub ustar: Option<OneOrMany<f64>>,
    pub n: OneOrMany<usize>,
    pub m: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub critical_value: Option<f64>,
    #[serde(default)]
    pub histogram_bins: Option<usize>,
}

fn default_level() -> f64 {
    0.05
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    /// Expands into cells ordered by `theta0`, then `ustar`, then `n`.
    pub fn cells(&self) -> Result<Vec<ExperimentConfig>> {
        let ustars = self.ustar.as_ref().map(OneOrMany::to_vec);
        match (&self.theta1, &ustars) {
            (Some(_), None) => {
                return Err(Error::InvalidArgument("config: `theta1` given without `ustar`".into()))
            }
            (None, Some(_)) => {
                return Err(Error::InvalidArgument("config: `ustar` given without `theta1`".into()))
            }
            _ => {}
        }
        let mut cells = Vec::new();
        for theta0 in self.theta0.to_vec() {
            let changes: Vec<Option<ChangeSpec>> = match (&self.theta1, &ustars) {
                (Some(t1), Some(us)) => us
                    .iter()
                    .map(|&ustar| {
                        Some(ChangeSpec {
                            ustar,
                            theta1: ParamVector::new(t1.clone()),
                        })
                    })
                    .collect(),
                _ => vec![None],
            };
            for change in changes {
                for n in self.n.to_vec() {
                    let cell = ExperimentConfig {
                        model: self.model.clone(),
                        theta0: ParamVector::new(theta0.clone()),
                        change: change.clone(),
                        n,
                        m: self.m,
                        level: self.level,
                        seed: self.seed,
                        critical_value: self.critical_value,
                        bins: self.histogram_bins.unwrap_or(DEFAULT_BINS),
                        keep_records: false,
                    };
                    cell.validate()
                        .map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
                    cells.push(cell);
                }
            }
        }
        Ok(cells)
    }
}

fn fmt_theta(t: &ParamVector) -> String {
    t.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.6}"))
}

/// Long-format CSV, one row per cell.
pub fn results_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::from(
        "model,theta0,theta1,ustar,n,m,level,critical_value,completed,failed,rejection_rate,u_hat_mean,u_hat_sd,u_hat_rmse\n",
    );
    for r in results {
        let c = &r.config;
        let (t1, us) = c.change.as_ref().map_or((String::new(), String::new()), |ch| {
            (fmt_theta(&ch.theta1), ch.ustar.to_string())
        });
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{:.6},{},{},{}\n",
            c.model,
            fmt_theta(&c.theta0),
            t1,
            us,
            c.n,
            c.m,
            c.level,
            r.critical_value,
            r.completed,
            r.failed,
            r.rejection_rate,
            fmt_opt(r.u_hat_mean),
            fmt_opt(r.u_hat_sd),
            fmt_opt(r.u_hat_rmse),
        ));
    }
    out
}

/// Wide CSV with one row per `(theta0, theta1, ustar)` and one rejection-rate
/// column per `n`, the layout of published size and power tables.
pub fn rejection_table_csv(results: &[ExperimentResult]) -> String {
    let mut ns: Vec<usize> = results.iter().map(|r| r.config.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut out = String::from("theta0,theta1,ustar");
    for n in &ns {
        out.push_str(&format!(",n={n}"));
    }
    out.push('\n');
    let mut keys: Vec<(String, String, String)> = Vec::new();
    for r in results {
        let key = row_key(&r.config);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for key in keys {
        out.push_str(&format!("{},{},{}", key.0, key.1, key.2));
        for n in &ns {
            let cell = results
                .iter()
                .find(|r| r.config.n == *n && row_key(&r.config) == key);
            out.push(',');
            if let Some(r) = cell {
                out.push_str(&format!("{:.4}", r.rejection_rate));
            }
        }
        out.push('\n');
    }
    out
}

fn row_key(c: &ExperimentConfig) -> (String, String, String) {
    let (t1, us) = c.change.as_ref().map_or((String::new(), String::new()), |ch| {
        (fmt_theta(&ch.theta1), ch.ustar.to_string())
    });
    (fmt_theta(&c.theta0), t1, us)
}

/// `ustar, mean, sd, rmse` rows for the change cells.
pub fn estimator_table_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::from("ustar,n,u_hat_mean,u_hat_sd,u_hat_rmse\n");
    for r in results {
        if let Some(ch) = &r.config.change {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                ch.ustar,
                r.config.n,
                fmt_opt(r.u_hat_mean),
                fmt_opt(r.u_hat_sd),
                fmt_opt(r.u_hat_rmse)
            ));
        }
    }
    out
}

/// Checks the reported `u_hat` aggregates against each other:
/// `rmse^2 = sd^2 (m-1)/m + (mean - u*)^2`.
pub fn rmse_identity_gap(result: &ExperimentResult) -> Option<f64> {
    let ustar = result.config.change.as_ref()?.ustar;
    let m = result.completed as f64;
    let (mean, sd, rmse) = (result.u_hat_mean?, result.u_hat_sd?, result.u_hat_rmse?);
    Some((rmse * rmse - (sd * sd * (m - 1.0) / m + (mean - ustar).powi(2))).abs())
}
