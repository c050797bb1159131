//! Gating checks. Each test prints one `PASS`/`FAIL` line to stderr before asserting.
//!
//! Set `MOMCP_FULL=1` to run the study checks at the replication counts in
//! the bundled configs instead of the scaled-down defaults.

mod common;

use common::{all_models, brute_force_path, fd_jacobian, interior_grid, max_abs_diff, random_data};
use momcp::estimator::{mme, psi_mean};
use momcp::limits::{critical_value, DEFAULT_GRID};
use momcp::models::AffineModel;
use momcp::montecarlo::{
    consistency_diagnostics, run_experiment, sup_zn_convergence_check, ExperimentConfig, ExperimentResult,
    StudyConfig,
};
use momcp::rng::{stream, DEFAULT_SEED};
use momcp::zprocess::{analyze, TestOptions};
use momcp::model_by_name;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use std::io::Write;

/// Written to the raw stderr handle so the line shows even when output is captured.
fn verdict(name: &str, pass: bool, detail: String) {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

fn full() -> bool {
    std::env::var_os("MOMCP_FULL").is_some_and(|v| v == "1")
}

fn study_cells(json: &str, scaled_m: usize) -> Vec<ExperimentConfig> {
    let mut study = StudyConfig::from_json(json).unwrap();
    if !full() {
        study.m = scaled_m;
    }
    study.cells().unwrap()
}

fn run_cells(cells: &[ExperimentConfig]) -> Vec<ExperimentResult> {
    cells.iter().map(|c| run_experiment(c).unwrap()).collect()
}

fn ustar(r: &ExperimentResult) -> f64 {
    r.config.change.as_ref().unwrap().ustar
}

#[test]
fn bridge_quantile_d2() {
    let cv = critical_value(2, 0.05, 200_000, DEFAULT_GRID, DEFAULT_SEED).unwrap();
    let pass = (2.37..=2.45).contains(&cv.value);
    verdict(
        "bridge_quantile_d2",
        pass,
        format!("q95 = {:.4} (se {:.4}), required in [2.37, 2.45]", cv.value, cv.stderr),
    );
}

#[test]
fn empirical_size_gamma() {
    let cells: Vec<_> = study_cells(include_str!("../configs/table1_gamma.json"), 2000)
        .into_iter()
        .filter(|c| c.theta0[0] == 1.0)
        .collect();
    let results = run_cells(&cells);
    let reference = [
        ([1.0, 1.0], [0.0233, 0.0276, 0.0429]),
        ([1.0, 0.01], [0.0217, 0.0291, 0.0374]),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for r in &results {
        let (_, row) = reference
            .iter()
            .find(|(t, _)| t[..] == r.config.theta0[..])
            .unwrap();
        let col = [50, 100, 500].iter().position(|&n| n == r.config.n).unwrap();
        let ok = (r.rejection_rate - row[col]).abs() <= 0.015 && r.rejection_rate <= 0.065;
        pass &= ok;
        detail.push(format!("{}@{}={:.4}/{:.4}", r.config.theta0, r.config.n, r.rejection_rate, row[col]));
    }
    verdict("empirical_size_gamma", pass, detail.join(" "));
}

#[test]
fn power_gamma_rate_change() {
    let results = run_cells(&study_cells(include_str!("../configs/table2_gamma.json"), 1000));
    let power = |u: f64, n: usize| {
        results
            .iter()
            .find(|r| ustar(r) == u && r.config.n == n)
            .unwrap()
            .rejection_rate
    };
    let cells = [
        (0.50, 100, power(0.50, 100), power(0.50, 100) >= 0.99),
        (0.75, 500, power(0.75, 500), power(0.75, 500) >= 0.99),
        (0.90, 50, power(0.90, 50), power(0.90, 50) <= 0.12),
        (0.90, 500, power(0.90, 500), power(0.90, 500) >= 0.99),
    ];
    let pass = cells.iter().all(|c| c.3);
    let detail = cells
        .iter()
        .map(|(u, n, p, _)| format!("u*={u} n={n}: {p:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict("power_gamma_rate_change", pass, detail);
}

#[test]
fn change_point_estimator_accuracy() {
    let results = run_cells(&study_cells(include_str!("../configs/table5.json"), 2000));
    let means = [0.497, 0.737, 0.831];
    let sds = [0.006, 0.022, 0.090];
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let (mean, sd) = (r.u_hat_mean.unwrap(), r.u_hat_sd.unwrap());
        pass &= (mean - means[i]).abs() <= 0.01;
        pass &= sd >= sds[i] / 2.0 && sd <= sds[i] * 2.0;
        detail.push(format!("u*={}: mean {mean:.4} sd {sd:.4}", ustar(r)));
    }
    verdict("change_point_estimator_accuracy", pass, detail.join(", "));
}

#[test]
fn path_matches_brute_force() {
    let models = all_models();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
    let mut worst = 0.0_f64;
    let mut done = 0;
    let mut attempts = 0;
    while done < 100 {
        attempts += 1;
        assert!(attempts < 1000, "too many degenerate draws");
        let model = &models[attempts % models.len()];
        let n = rng.gen_range(model.dim() + 2..=200);
        let data = random_data(model.name(), n, rng.gen());
        let Ok(analysis) = analyze(&data, model.as_ref(), &TestOptions::default()) else {
            continue;
        };
        let e_hat = model.moments(&analysis.theta_hat);
        let oracle = brute_force_path(model.name(), &data, e_hat.as_slice());
        let scale = oracle.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        worst = worst.max(max_abs_diff(&analysis.t_path, &oracle) / scale);
        done += 1;
    }
    verdict(
        "path_matches_brute_force",
        worst <= 1e-10,
        format!("{done} instances, worst scaled deviation {worst:.2e}"),
    );
}

#[test]
fn path_affine_invariance() {
    let gamma = model_by_name("gamma").unwrap();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(12);
    let mut worst = 0.0_f64;
    let mut done = 0;
    while done < 50 {
        let a: DMatrix<f64> = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-3.0..3.0));
        if a.determinant().abs() < 0.2 {
            continue;
        }
        let b = DVector::from_fn(2, |_, _| rng.gen_range(-10.0..10.0));
        let affine = AffineModel::new(gamma.clone(), a, b).unwrap();
        let n = rng.gen_range(20..=300);
        let data = random_data("gamma", n, rng.gen());
        let base = analyze(&data, gamma.as_ref(), &TestOptions::default()).unwrap();
        let moved = analyze(&data, &affine, &TestOptions::default()).unwrap();
        let scale = base.t_path.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        worst = worst.max(max_abs_diff(&base.t_path, &moved.t_path) / scale);
        done += 1;
    }
    verdict(
        "path_affine_invariance",
        worst <= 1e-9,
        format!("{done} transforms, worst scaled deviation {worst:.2e}"),
    );
}

fn identity_gap(name: &str, data: &[f64]) -> Option<(f64, f64)> {
    let model = model_by_name(name).unwrap();
    let est = mme(data, model.as_ref()).ok()?;
    let mean = psi_mean(data, model.as_ref()).unwrap();
    let z1 = (&mean - model.moments(&est.theta_hat)).norm();
    Some((z1, 1e-8 * (1.0 + mean.norm())))
}

#[test]
fn estimating_equation_identity() {
    let strategy = (0usize..5, 3usize..400, any::<u64>());
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(2000)
    });
    let successes = std::cell::Cell::new(0usize);
    let outcome = runner.run(&strategy, |(m, n, seed)| {
        let name = momcp::models::MODEL_NAMES[m];
        let data = random_data(name, n, seed);
        if let Some((gap, tol)) = identity_gap(name, &data) {
            successes.set(successes.get() + 1);
            prop_assert!(gap <= tol, "{name} n={n}: gap {gap:e} > {tol:e}");
        }
        Ok(())
    });
    let pass = outcome.is_ok();
    let detail = match outcome {
        Ok(()) => format!("{} successful estimates satisfy the bound", successes.get()),
        Err(e) => e.to_string(),
    };
    verdict("estimating_equation_identity", pass, detail);
}

#[test]
fn jacobians_and_samplers() {
    let mut worst_jac = 0.0_f64;
    let mut worst_z = 0.0_f64;
    const DRAWS: usize = 1_000_000;
    let mut buf = vec![0.0; DRAWS];
    for model in all_models() {
        let grid = interior_grid(model.name());
        assert!(grid.len() >= 10);
        for theta in &grid {
            let fd = fd_jacobian(model.as_ref(), theta);
            let v = model.jacobian(theta);
            for (i, row) in fd.iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    let denom = x.abs().max(v[(i, j)].abs()).max(1e-300);
                    if x != v[(i, j)] {
                        worst_jac = worst_jac.max((x - v[(i, j)]).abs() / denom);
                    }
                }
            }
        }
        for (k, theta) in grid.iter().step_by(3).enumerate() {
            let mut rng = stream(99, k as u64);
            model.sample(theta, &mut rng, &mut buf);
            let d = model.dim();
            let mut sums = vec![0.0; d];
            let mut p = vec![0.0; d];
            for &x in &buf {
                model.psi(x, &mut p);
                for (s, v) in sums.iter_mut().zip(&p) {
                    *s += v;
                }
            }
            let e = model.moments(theta);
            let sigma = model.covariance(theta);
            for i in 0..d {
                let se = (sigma[(i, i)] / DRAWS as f64).sqrt();
                worst_z = worst_z.max((sums[i] / DRAWS as f64 - e[i]).abs() / se);
            }
        }
    }
    verdict(
        "jacobians_and_samplers",
        worst_jac <= 1e-5 && worst_z <= 5.0,
        format!("worst Jacobian relative error {worst_jac:.2e}, worst sampler z {worst_z:.2}"),
    );
}

#[test]
fn bridge_quantile_d1() {
    let cv = critical_value(1, 0.05, 100_000, DEFAULT_GRID, DEFAULT_SEED).unwrap();
    let pass = (cv.value - 1.844).abs() <= 0.03;
    verdict(
        "bridge_quantile_d1",
        pass,
        format!("q95 = {:.4} (se {:.4}), anchor 1.844 +/- 0.03", cv.value, cv.stderr),
    );
}

#[test]
fn consistency_diagnostics_decrease() {
    let ns = [100, 500, 2000];
    let mut pass = true;
    let mut detail = Vec::new();
    for cell in study_cells(include_str!("../configs/table5.json"), 500) {
        let sups: Vec<f64> = ns
            .iter()
            .map(|&n| sup_zn_convergence_check(&ExperimentConfig { n, ..cell.clone() }).unwrap())
            .collect();
        let diag = consistency_diagnostics(&cell, &ns).unwrap();
        let errs: Vec<f64> = diag.rows.iter().map(|r| r.median_abs_error).collect();
        pass &= sups.windows(2).all(|w| w[1] < w[0]);
        pass &= errs.windows(2).all(|w| w[1] <= w[0]) && errs[2] < errs[0];
        detail.push(format!(
            "u*={}: sup {:.3e}/{:.3e}/{:.3e} median |u-u*| {:.4}/{:.4}/{:.4}",
            cell.change.as_ref().unwrap().ustar,
            sups[0],
            sups[1],
            sups[2],
            errs[0],
            errs[1],
            errs[2]
        ));
    }
    verdict("consistency_diagnostics_decrease", pass, detail.join("; "));
}
