//! Fuzzy c-means granulation of a single gene row (1-D data).
//!
//! Alternating optimization: memberships from prototypes, then prototypes
//! as membership-weighted means `v_j = sum_t u_jt^k g_t / sum_t u_jt^k`.
//! The prototype column is then sorted to give ascending granule labels.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::granule::{GranuleSet, PrototypeGranule, SortedDistinctSeries};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FcmConfig {
    /// Fuzziness coefficient, must exceed 1.
    pub kappa: f64,
    /// Stop once the largest prototype move falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Extra runs from seeded random starts, on top of the quantile start.
    /// The run with the lowest final objective wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FcmConfig {
    fn default() -> Self {
        FcmConfig {
            kappa: 2.0,
            tolerance: 1e-9,
            max_iterations: 500,
            restarts: 5,
            seed: 0,
        }
    }
}

impl FcmConfig {
    fn validate(&self) -> Result<()> {
        if !(self.kappa > 1.0) || !self.kappa.is_finite() {
            return Err(Error::Parameter(format!("kappa must be > 1, got {}", self.kappa)));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Parameter("tolerance must be non-negative".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Parameter("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcmState {
    /// `partition[j][t]`: membership of condition t in cluster j.
    pub partition: Vec<Vec<f64>>,
    pub prototypes: Vec<f64>,
    pub kappa: f64,
    /// Objective after every membership update.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl FcmState {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Number of granules for a series of `t` distinct values: `ceil(t / 2)`.
pub fn granule_count(series: &SortedDistinctSeries) -> usize {
    series.len().div_ceil(2)
}

/// Starting prototypes at the `(j - 0.5) / c` quantiles of the distinct values,
/// linearly interpolated.
pub fn quantile_init(distinct: &[f64], c: usize) -> Vec<f64> {
    let n = distinct.len();
    (0..c)
        .map(|j| {
            let q = (j as f64 + 0.5) / c as f64;
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = pos - lo as f64;
            distinct[lo] + frac * (distinct[hi] - distinct[lo])
        })
        .collect()
}

/// Fits `c` clusters to `row`. Runs from the quantile start plus
/// `config.restarts` seeded random starts and returns the lowest-objective run.
pub fn fcm_fit(row: &[f64], c: usize, config: &FcmConfig) -> Result<FcmState> {
    config.validate()?;
    let series = crate::granule::sort_dedupe(row)?;
    if c == 0 {
        return Err(Error::Parameter("cluster count must be positive".into()));
    }
    if c > series.len() {
        return Err(Error::Parameter(format!(
            "{c} clusters requested for {} distinct values",
            series.len()
        )));
    }

    let mut best = fcm_run(row, quantile_init(series.values(), c), config);
    if c > 1 && c < series.len() {
        let mut rng = seed::rng(config.seed, seed::STAGE_FCM, 0);
        for _ in 0..config.restarts {
            let mut picked = sample(&mut rng, series.len(), c).into_vec();
            picked.sort_unstable();
            let init = picked.iter().map(|&i| series.values()[i]).collect();
            let run = fcm_run(row, init, config);
            if run.objective() < best.objective() {
                best = run;
            }
        }
    }
    Ok(best)
}

/// One alternating-optimization run from the given prototypes.
pub fn fcm_run(row: &[f64], init: Vec<f64>, config: &FcmConfig) -> FcmState {
    let c = init.len();
    let m = row.len();
    let mut prototypes = init;
    let mut partition = vec![vec![0.0; m]; c];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    update_memberships(row, &prototypes, config.kappa, &mut partition);
    trace.push(objective(row, &prototypes, &partition, config.kappa));

    while iterations < config.max_iterations {
        iterations += 1;
        let next = update_prototypes(row, &partition, config.kappa, &prototypes);
        let shift = next
            .iter()
            .zip(&prototypes)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prototypes = next;
        update_memberships(row, &prototypes, config.kappa, &mut partition);
        trace.push(objective(row, &prototypes, &partition, config.kappa));
        if shift < config.tolerance {
            converged = true;
            break;
        }
    }

    FcmState {
        partition,
        prototypes,
        kappa: config.kappa,
        objective_trace: trace,
        iterations,
        converged,
    }
}

/// `sum_j sum_t u_jt^k (g_t - v_j)^2`
pub fn objective(row: &[f64], prototypes: &[f64], partition: &[Vec<f64>], kappa: f64) -> f64 {
    prototypes
        .iter()
        .zip(partition)
        .map(|(&v, u)| {
            row.iter()
                .zip(u)
                .map(|(&g, &mu)| mu.powf(kappa) * (g - v) * (g - v))
                .sum::<f64>()
        })
        .sum()
}

fn update_memberships(row: &[f64], prototypes: &[f64], kappa: f64, partition: &mut [Vec<f64>]) {
    let exponent = 2.0 / (kappa - 1.0);
    let c = prototypes.len();
    let mut dist = vec![0.0; c];
    for (t, &g) in row.iter().enumerate() {
        for (d, &v) in dist.iter_mut().zip(prototypes) {
            *d = (g - v).abs();
        }
        let d_min = dist.iter().copied().fold(f64::INFINITY, f64::min);
        if d_min == 0.0 {
            // the point sits on one or more prototypes: share membership among them
            let hits = dist.iter().filter(|&&d| d == 0.0).count() as f64;
            for (j, &d) in dist.iter().enumerate() {
                partition[j][t] = if d == 0.0 { 1.0 / hits } else { 0.0 };
            }
            continue;
        }
        // scale by the nearest distance so the powers stay in (0, 1]
        let mut total = 0.0;
        for (j, &d) in dist.iter().enumerate() {
            let w = (d_min / d).powf(exponent);
            partition[j][t] = w;
            total += w;
        }
        for u in partition.iter_mut() {
            u[t] /= total;
        }
    }
}

fn update_prototypes(row: &[f64], partition: &[Vec<f64>], kappa: f64, previous: &[f64]) -> Vec<f64> {
    partition
        .iter()
        .zip(previous)
        .map(|(u, &prev)| {
            let (num, den) = row.iter().zip(u).fold((0.0, 0.0), |(num, den), (&g, &mu)| {
                let w = mu.powf(kappa);
                (num + w * g, den + w)
            });
            if den > 0.0 {
                num / den
            } else {
                prev
            }
        })
        .collect()
}

/// Sorts clusters by prototype (stable, so equal prototypes keep their
/// original cluster order) and labels them 1..C in that order.
pub fn build_ordered_granules_fcm(state: &FcmState) -> GranuleSet {
    let mut order: Vec<usize> = (0..state.prototypes.len()).collect();
    order.sort_by(|&a, &b| state.prototypes[a].total_cmp(&state.prototypes[b]));
    GranuleSet::FcmPrototype(
        order
            .into_iter()
            .map(|j| PrototypeGranule {
                prototype: state.prototypes[j],
                memberships: state.partition[j].clone(),
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::granule::{label_series, sort_dedupe};

    fn quantile_only() -> FcmConfig {
        FcmConfig {
            restarts: 0,
            ..FcmConfig::default()
        }
    }

    #[test]
    fn granule_count_is_half_rounded_up() {
        let count = |n: usize| {
            let row: Vec<f64> = (0..n).map(|i| i as f64).collect();
            granule_count(&sort_dedupe(&row).unwrap())
        };
        assert_eq!(count(7), 4);
        assert_eq!(count(8), 4);
        assert_eq!(count(3), 2);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let s = fcm_fit(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 1, &FcmConfig::default()).unwrap();
        assert!((s.prototypes[0] - 3.5).abs() < 1e-12);
        assert!(s.partition[0].iter().all(|&u| u == 1.0));
    }

    #[test]
    fn too_many_clusters_is_rejected() {
        assert!(matches!(
            fcm_fit(&[1.0, 1.0, 2.0], 3, &FcmConfig::default()),
            Err(Error::Parameter(_))
        ));
        let bad_kappa = FcmConfig {
            kappa: 1.0,
            ..FcmConfig::default()
        };
        assert!(fcm_fit(&[1.0, 2.0, 3.0], 2, &bad_kappa).is_err());
    }

    #[test]
    fn ordering_sorts_by_prototype() {
        let state = FcmState {
            partition: vec![vec![0.2, 0.9], vec![0.8, 0.1]],
            prototypes: vec![9.0, 1.0],
            kappa: 2.0,
            objective_trace: vec![],
            iterations: 0,
            converged: true,
        };
        let g = build_ordered_granules_fcm(&state);
        let p = g.prototypes().unwrap();
        assert_eq!(p[0].prototype, 1.0);
        assert_eq!(p[0].memberships, vec![0.8, 0.1]);
        assert_eq!(p[1].prototype, 9.0);

        let sorted = FcmState {
            prototypes: vec![1.0, 9.0],
            ..state.clone()
        };
        let g = build_ordered_granules_fcm(&sorted);
        assert_eq!(g.prototypes().unwrap()[0].memberships, vec![0.2, 0.9]);

        let tied = FcmState {
            prototypes: vec![2.0, 2.0],
            ..state
        };
        let g = build_ordered_granules_fcm(&tied);
        assert_eq!(g.prototypes().unwrap()[0].memberships, vec![0.2, 0.9]);
        assert_eq!(g.prototypes().unwrap()[1].memberships, vec![0.8, 0.1]);
    }

    #[test]
    fn affine_map_keeps_labels() {
        let row = [3.1, -0.4, 7.7, 2.2, 2.9, 10.5, -3.0, 4.4, 6.1];
        let mapped: Vec<f64> = row.iter().map(|v| 2.5 * v + 40.0).collect();
        let labels = |r: &[f64]| {
            let c = granule_count(&sort_dedupe(r).unwrap());
            let s = fcm_fit(r, c, &quantile_only()).unwrap();
            label_series(r, &build_ordered_granules_fcm(&s)).unwrap()
        };
        assert_eq!(labels(&row), labels(&mapped));
    }

    #[test]
    fn memberships_handle_points_on_prototypes() {
        let s = fcm_run(&[0.0, 1.0, 2.0], vec![0.0, 2.0], &quantile_only());
        for t in 0..3 {
            let sum: f64 = s.partition.iter().map(|u| u[t]).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
