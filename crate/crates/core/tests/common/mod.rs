//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.
#![allow(dead_code)]

use momcp::models::{MomentModel, SharedModel, MODEL_NAMES};
use momcp::model_by_name;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn all_models() -> Vec<SharedModel> {
    MODEL_NAMES.iter().map(|n| model_by_name(n).unwrap()).collect()
}

/// Interior grid points of each shipped model's parameter space.
pub fn interior_grid(name: &str) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    match name {
        "gamma" => {
            for a in [0.3, 1.0, 2.0, 5.5] {
                for l in [0.01, 0.5, 1.0, 3.0] {
                    out.push(vec![a, l]);
                }
            }
        }
        "normal" => {
            for mu in [-3.0, -0.5, 0.0, 1.0, 4.0] {
                for v in [0.1, 1.0, 7.0] {
                    out.push(vec![mu, v]);
                }
            }
        }
        "exponential" | "poisson" => {
            for x in [0.05, 0.2, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 20.0] {
                out.push(vec![x]);
            }
        }
        "bernoulli" => {
            for k in 1..=11 {
                out.push(vec![k as f64 / 12.0]);
            }
        }
        _ => panic!("no grid for {name}"),
    }
    out
}

/// Central-difference Jacobian of `e` with a relative step.
pub fn fd_jacobian(model: &dyn MomentModel, theta: &[f64]) -> Vec<Vec<f64>> {
    let d = model.dim();
    let mut jac = vec![vec![0.0; d]; d];
    for j in 0..d {
        let h = 1e-5 * theta[j].abs().max(1e-3);
        let mut hi = theta.to_vec();
        let mut lo = theta.to_vec();
        hi[j] += h;
        lo[j] -= h;
        let (eh, el) = (model.moments(&hi), model.moments(&lo));
        for i in 0..d {
            jac[i][j] = (eh[i] - el[i]) / (2.0 * h);
        }
    }
    jac
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..d).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..d {
        let p = (c..d)
            .max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))
            .unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..d {
            if r != c {
                let f = m[r][c];
                let pivot_row = m[c].clone();
                for (v, pv) in m[r].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    m.into_iter().map(|r| r[d..].to_vec()).collect()
}

/// `psi(x)` written out per model name, independent of the library's `psi`.
pub fn psi_by_hand(name: &str, x: f64) -> Vec<f64> {
    match name {
        "gamma" | "normal" => vec![x, x * x],
        _ => vec![x],
    }
}

/// O(n^2 d^2) recomputation of `T_n(k/n)`: re-sums `psi` from scratch for
/// every `k`, estimates the plug-in covariance from `e_hat` and inverts it
/// directly.
pub fn brute_force_path(name: &str, data: &[f64], e_hat: &[f64]) -> Vec<f64> {
    let n = data.len();
    let d = e_hat.len();
    let mut sigma = vec![vec![0.0; d]; d];
    for &x in data {
        let p = psi_by_hand(name, x);
        for i in 0..d {
            for j in 0..d {
                sigma[i][j] += (p[i] - e_hat[i]) * (p[j] - e_hat[j]) / n as f64;
            }
        }
    }
    let inv = invert(&sigma);
    (0..=n)
        .map(|k| {
            let mut z = vec![0.0; d];
            for &x in &data[..k] {
                let p = psi_by_hand(name, x);
                for i in 0..d {
                    z[i] += (p[i] - e_hat[i]) / n as f64;
                }
            }
            let mut q = 0.0;
            for i in 0..d {
                for j in 0..d {
                    q += z[i] * inv[i][j] * z[j];
                }
            }
            n as f64 * q
        })
        .collect()
}

/// Random data that suits each model's support, drawn without the library sampler.
pub fn random_data(name: &str, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..n)
        .map(|_| match name {
            "gamma" | "exponential" => rng.gen_range(0.05..5.0) * rng.gen_range(0.2..1.0),
            "normal" => rng.gen_range(-3.0..3.0) + rng.gen_range(-1.0..1.0),
            "poisson" => rng.gen_range(0..9) as f64,
            "bernoulli" => f64::from(u8::from(rng.gen_bool(0.4))),
            _ => unreachable!(),
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
