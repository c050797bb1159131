//! Monte Carlo quantiles of `sup_{u in [0,1]} ||B(u) - u B(1)||^2` for a
//! `d`-dimensional standard Brownian motion `B`.
//!
//! The supremum is taken over the grid `u = k/G`. Replication `i` of a run
//! draws from [`rng::stream(seed, i)`](crate::rng::stream), so results do not
//! depend on the number of worker threads.

use std::fmt::Write as _;
use std::sync::OnceLock;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{self, SimRng};

pub const DEFAULT_GRID: usize = 10_000;
pub const DEFAULT_REPLICATIONS: usize = 100_000;
pub const MIN_REPLICATIONS: usize = 1_000;

/// Levels covered by the shipped table.
pub const SHIPPED_LEVELS: [f64; 3] = [0.10, 0.05, 0.01];

const SHIPPED_TABLE: &str = include_str!("../data/critical_values.txt");

/// One simulated quantile with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalValue {
    pub dim: usize,
    pub level: f64,
    pub value: f64,
    pub stderr: f64,
    pub replications: usize,
    pub grid: usize,
    pub seed: u64,
}

/// Draws one sup of a discretized Brownian bridge, reusing `buf` for the path.
pub fn simulate_bridge_sup_with(d: usize, grid: usize, rng: &mut SimRng, buf: &mut Vec<f64>) -> f64 {
    if grid <= 1 || d == 0 {
        return 0.0;
    }
    // Unit-variance increments; the 1/G scaling is applied to the squared norm.
    buf.clear();
    buf.resize(grid * d, 0.0);
    let mut walk = vec![0.0; d];
    for step in buf.chunks_exact_mut(d) {
        for (w, s) in walk.iter_mut().zip(step.iter_mut()) {
            let z: f64 = StandardNormal.sample(rng);
            *w += z;
            *s = *w;
        }
    }
    let end = &buf[(grid - 1) * d..];
    let g = grid as f64;
    let mut best = 0.0_f64;
    for (k, point) in buf.chunks_exact(d).enumerate() {
        let u = (k + 1) as f64 / g;
        let norm2: f64 = point
            .iter()
            .zip(end)
            .map(|(w, e)| {
                let b = w - u * e;
                b * b
            })
            .sum();
        best = best.max(norm2);
    }
    best / g
}

/// `max_{k=0..G} ||W_k - (k/G) W_G||^2` for a discretized `d`-dimensional Brownian motion.
pub fn simulate_bridge_sup(d: usize, grid: usize, rng: &mut SimRng) -> f64 {
    simulate_bridge_sup_with(d, grid, rng, &mut Vec::new())
}

/// `reps` independent draws of the bridge sup, in replication order.
pub fn simulate_bridge_sups(d: usize, grid: usize, reps: usize, seed: u64) -> Vec<f64> {
    (0..reps)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            let mut rng = rng::stream(seed, i as u64);
            simulate_bridge_sup_with(d, grid, &mut rng, buf)
        })
        .collect()
}

/// Empirical `(1 - level)` quantile of an ascending sample.
pub fn upper_quantile(sorted: &[f64], level: f64) -> f64 {
    let r = sorted.len();
    let idx = ((1.0 - level) * r as f64).ceil() as usize;
    sorted[idx.clamp(1, r) - 1]
}

/// Standard error of the `(1 - level)` quantile by the binomial method:
/// half the distance between the order statistics one binomial sd either side.
pub fn quantile_stderr(sorted: &[f64], level: f64) -> f64 {
    let r = sorted.len() as f64;
    let p = 1.0 - level;
    let spread = (r * p * (1.0 - p)).sqrt();
    let lo = ((r * p - spread).floor() as usize).clamp(1, sorted.len());
    let hi = ((r * p + spread).ceil() as usize).clamp(1, sorted.len());
    0.5 * (sorted[hi - 1] - sorted[lo - 1])
}

fn check_args(d: usize, levels: &[f64], reps: usize, grid: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if reps < MIN_REPLICATIONS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_REPLICATIONS} replications, got {reps}"
        )));
    }
    if grid < 1 {
        return Err(Error::InvalidArgument("grid must be at least 1".into()));
    }
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::InvalidArgument(format!("level {l} is not in (0, 1)")));
    }
    Ok(())
}

/// Simulated critical values for every level in `levels`, sharing one set of draws.
pub fn simulate_critical_values(
    d: usize,
    levels: &[f64],
    reps: usize,
    grid: usize,
    seed: u64,
) -> Result<CriticalValueTable> {
    check_args(d, levels, reps, grid)?;
    let mut draws = simulate_bridge_sups(d, grid, reps, seed);
    draws.sort_by(f64::total_cmp);
    let entries = levels
        .iter()
        .map(|&level| CriticalValue {
            dim: d,
            level,
            value: upper_quantile(&draws, level),
            stderr: quantile_stderr(&draws, level),
            replications: reps,
            grid,
            seed,
        })
        .collect();
    let mut table = CriticalValueTable { entries };
    table.sort();
    Ok(table)
}

pub fn critical_value(d: usize, level: f64, reps: usize, grid: usize, seed: u64) -> Result<CriticalValue> {
    let table = simulate_critical_values(d, &[level], reps, grid, seed)?;
    Ok(table.entries.into_iter().next().expect("one level requested"))
}

/// Critical values keyed by `(d, level)`.
///
/// Text form: one entry per line, `d level value stderr R G seed`; blank lines
/// and lines starting with `#` are ignored.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CriticalValueTable {
    pub entries: Vec<CriticalValue>,
}

fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

impl CriticalValueTable {
    pub fn lookup(&self, dim: usize, level: f64) -> Option<&CriticalValue> {
        self.entries
            .iter()
            .find(|e| e.dim == dim && same_level(e.level, level))
    }

    /// Inserts or replaces the entry for `(dim, level)`.
    pub fn upsert(&mut self, entry: CriticalValue) {
        match self
            .entries
            .iter_mut()
            .find(|e| e.dim == entry.dim && same_level(e.level, entry.level))
        {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
        self.sort();
    }

    pub fn merge(&mut self, other: CriticalValueTable) {
        for e in other.entries {
            self.upsert(e);
        }
    }

    fn sort(&mut self) {
        self.entries.sort_by(|a, b| {
            a.dim
                .cmp(&b.dim)
                .then(b.level.total_cmp(&a.level))
        });
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::InvalidArgument(format!("critical value table line {}: cannot parse `{line}`", i + 1));
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 7 {
                return Err(bad());
            }
            table.upsert(CriticalValue {
                dim: f[0].parse().map_err(|_| bad())?,
                level: f[1].parse().map_err(|_| bad())?,
                value: f[2].parse().map_err(|_| bad())?,
                stderr: f[3].parse().map_err(|_| bad())?,
                replications: f[4].parse().map_err(|_| bad())?,
                grid: f[5].parse().map_err(|_| bad())?,
                seed: f[6].parse().map_err(|_| bad())?,
            });
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# d level value stderr R G seed\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{} {} {:.6} {:.6} {} {} {}",
                e.dim, e.level, e.value, e.stderr, e.replications, e.grid, e.seed
            );
        }
        out
    }
}

/// The table bundled with the crate, for `d` in 1..=5 and the levels in [`SHIPPED_LEVELS`].
pub fn default_table() -> &'static CriticalValueTable {
    static TABLE: OnceLock<CriticalValueTable> = OnceLock::new();
    TABLE.get_or_init(|| CriticalValueTable::parse(SHIPPED_TABLE).expect("shipped table parses"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_grid_is_pinned() {
        let mut rng = rng::stream(1, 0);
        assert_eq!(simulate_bridge_sup(3, 1, &mut rng), 0.0);
    }

    #[test]
    fn two_point_grid_by_hand() {
        // G = 2: W_1 = z1, W_2 = z1 + z2; the bridge at k = 1 is (z1 - z2) / 2.
        let mut a = rng::stream(9, 0);
        let mut b = a.clone();
        let z1: f64 = StandardNormal.sample(&mut b);
        let z2: f64 = StandardNormal.sample(&mut b);
        let expected = (0.5 * (z1 - z2)).powi(2) / 2.0;
        assert!((simulate_bridge_sup(1, 2, &mut a) - expected).abs() < 1e-15);
    }

    #[test]
    fn draws_are_nonnegative_and_reproducible() {
        let a = simulate_bridge_sups(2, 50, 200, 3);
        assert!(a.iter().all(|&x| x >= 0.0));
        assert_eq!(a, simulate_bridge_sups(2, 50, 200, 3));
    }

    #[test]
    fn quantiles_by_hand() {
        let sorted: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(upper_quantile(&sorted, 0.05), 95.0);
        assert_eq!(upper_quantile(&sorted, 0.5), 50.0);
        // sd = sqrt(100 * .95 * .05) ~ 2.18 -> order statistics 92 and 98.
        assert_eq!(quantile_stderr(&sorted, 0.05), 3.0);
    }

    #[test]
    fn argument_checks() {
        assert!(critical_value(2, 0.05, 10, 100, 1).is_err());
        assert!(critical_value(2, 1.5, 1000, 100, 1).is_err());
        assert!(critical_value(0, 0.05, 1000, 100, 1).is_err());
    }

    #[test]
    fn table_text_round_trip_and_upsert() {
        let mut t = CriticalValueTable::parse("# hdr\n2 0.05 2.4 0.01 1000 100 7\n1 0.1 1.2 0.02 1000 100 7\n").unwrap();
        assert_eq!(t.entries[0].dim, 1);
        assert_eq!(CriticalValueTable::parse(&t.to_text()).unwrap(), t);
        t.upsert(CriticalValue {
            dim: 2,
            level: 0.05,
            value: 2.5,
            stderr: 0.0,
            replications: 1000,
            grid: 100,
            seed: 8,
        });
        assert_eq!(t.entries.len(), 2);
        assert_eq!(t.lookup(2, 0.05).unwrap().value, 2.5);
        assert!(CriticalValueTable::parse("2 0.05 x").is_err());
    }

    #[test]
    fn shipped_table_is_complete_and_monotone() {
        let t = default_table();
        for d in 1..=5 {
            let vals: Vec<f64> = SHIPPED_LEVELS
                .iter()
                .map(|&l| t.lookup(d, l).expect("entry present").value)
                .collect();
            assert!(vals.windows(2).all(|w| w[0] <= w[1]), "d={d}");
            if d > 1 {
                for &l in &SHIPPED_LEVELS {
                    assert!(t.lookup(d, l).unwrap().value >= t.lookup(d - 1, l).unwrap().value);
                }
            }
        }
        // 95% points of the continuous sup from Kiefer's Bessel-bridge series.
        // The grid of 10^4 steps biases the simulated sup down by about 0.02.
        for (d, exact) in [(1, 1.844432), (2, 2.508401), (4, 3.542921)] {
            let c = t.lookup(d, 0.05).unwrap();
            assert!(c.value <= exact + 3.0 * c.stderr, "{c:?}");
            assert!(c.value >= exact - 0.04, "{c:?}");
        }
    }
}
