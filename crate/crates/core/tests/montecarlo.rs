use momcp::models::model_by_name;
use momcp::montecarlo::{
    alternative_oracle, estimator_table_csv, rejection_table_csv, results_csv, rmse_identity_gap, run_experiment,
    sup_zn_deviation, ExperimentConfig, StudyConfig,
};
use serde_json::json;

fn study(json: &str, m: usize) -> Vec<ExperimentConfig> {
    let mut s = StudyConfig::from_json(json).unwrap();
    s.m = m;
    s.cells().unwrap()
}

#[test]
fn pseudo_true_parameter_matches_the_mixture_moments() {
    for (name, t0, t1) in [
        ("gamma", vec![1.0, 0.01], vec![1.0, 0.05]),
        ("gamma", vec![1.0, 1.0], vec![4.0, 1.0]),
        ("normal", vec![0.0, 1.0], vec![2.0, 3.0]),
        ("poisson", vec![1.0], vec![6.0]),
    ] {
        let model = model_by_name(name).unwrap();
        for u in [0.25, 0.5, 0.9] {
            let oracle = alternative_oracle(model.as_ref(), &t0, &t1, u).unwrap();
            let lhs = model.moments(&oracle.theta_star);
            let rhs = model.moments(&t0) * u + model.moments(&t1) * (1.0 - u);
            assert!((lhs - &rhs).norm() <= 1e-10 * (1.0 + rhs.norm()), "{name} u*={u}");
            assert!(oracle.drift(0.0).norm() == 0.0 && oracle.drift(1.0).norm() < 1e-15);
            let peak = oracle.drift(u).norm();
            assert!((peak - u * (1.0 - u) * oracle.shift_norm()).abs() < 1e-12 * (1.0 + peak));
        }
    }
}

#[test]
fn exponential_pseudo_true_rate() {
    let model = model_by_name("exponential").unwrap();
    let oracle = alternative_oracle(model.as_ref(), &[1.0], &[2.0], 0.5).unwrap();
    assert!((oracle.theta_star[0] - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn rmse_is_consistent_with_mean_and_sd() {
    for cell in study(include_str!("../configs/table5.json"), 300) {
        let r = run_experiment(&cell).unwrap();
        assert!(rmse_identity_gap(&r).unwrap() <= 1e-10);
    }
}

#[test]
fn power_grows_with_sample_size() {
    for json in [
        include_str!("../configs/table2_gamma.json"),
        include_str!("../configs/table3_gamma.json"),
        include_str!("../configs/table4_gamma.json"),
    ] {
        let results: Vec<_> = study(json, 400).iter().map(|c| run_experiment(c).unwrap()).collect();
        for w in results.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.config.change == b.config.change && a.config.n < b.config.n {
                let slack = 3.0 * a.rejection_se().hypot(b.rejection_se());
                assert!(b.rejection_rate + slack >= a.rejection_rate, "{:?} -> {:?}", a.config, b.config);
            }
        }
    }
}

#[test]
fn histogram_mode_contains_the_change_fraction() {
    for cell in study(include_str!("../configs/table5.json"), 2000) {
        let u = cell.change.as_ref().unwrap().ustar;
        let r = run_experiment(&cell).unwrap();
        let (lo, hi) = r.histogram.modal_bin();
        assert!(lo <= u && u <= hi, "u* = {u}, modal bin [{lo}, {hi}]");
        assert_eq!(r.histogram.counts.iter().sum::<u64>() as usize, r.completed);
    }
}

#[test]
fn size_respects_the_level_with_tabulated_values() {
    for theta in [vec![2.0, 1.0], vec![0.5, 3.0]] {
        let r = run_experiment(&ExperimentConfig::new("gamma", theta, 200, 2000).with_seed(8)).unwrap();
        assert!(r.rejection_rate <= 0.05 + 3.0 * r.rejection_se(), "{}", r.rejection_rate);
    }
}

#[test]
fn null_deviation_shrinks_at_root_n() {
    let model = model_by_name("gamma").unwrap();
    let a = sup_zn_deviation(model.as_ref(), &[2.0, 1.0], &[2.0, 1.0], 0.5, 500, 400, 1).unwrap();
    let b = sup_zn_deviation(model.as_ref(), &[2.0, 1.0], &[2.0, 1.0], 0.5, 2000, 400, 2).unwrap();
    let ratio = a / b;
    assert!((1.6..=2.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cell = ExperimentConfig::new("gamma", vec![1.0, 1.0], 100, 300)
        .with_change(0.5, vec![1.0, 2.0])
        .with_seed(3);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        serde_json::to_string(&pool.install(|| run_experiment(&cell).unwrap())).unwrap()
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn study_files_are_validated() {
    let ok = json!({"model": "gamma", "theta0": [1, 1], "n": 50, "m": 10});
    assert_eq!(StudyConfig::from_json(&ok.to_string()).unwrap().cells().unwrap().len(), 1);
    let unknown = json!({"model": "gamma", "theta0": [1, 1], "n": 50, "m": 10, "reps": 3});
    assert!(StudyConfig::from_json(&unknown.to_string()).is_err());
    let half = json!({"model": "gamma", "theta0": [1, 1], "theta1": [1, 2], "n": 50, "m": 10});
    assert!(StudyConfig::from_json(&half.to_string()).unwrap().cells().is_err());
    let bad = json!({"model": "gamma", "theta0": [1, -1], "n": 50, "m": 10});
    assert!(StudyConfig::from_json(&bad.to_string()).unwrap().cells().is_err());
}

#[test]
fn csv_tables_have_one_row_per_cell() {
    let results: Vec<_> = study(include_str!("../configs/table2_gamma.json"), 20)
        .iter()
        .map(|c| run_experiment(c).unwrap())
        .collect();
    assert_eq!(results_csv(&results).lines().count(), results.len() + 1);
    let wide = rejection_table_csv(&results);
    assert_eq!(wide.lines().next().unwrap(), "theta0,theta1,ustar,n=50,n=100,n=500");
    assert_eq!(wide.lines().count(), 4);
    assert_eq!(estimator_table_csv(&results).lines().count(), results.len() + 1);
}
