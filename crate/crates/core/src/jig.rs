//! Interval granules from the principle of justifiable granularity.
//!
//! The sorted distinct series is cut into `P` contiguous windows. Each window
//! gets an interval around its median whose bounds maximize coverage times
//! specificity, `card(...) * exp(-tau * distance)`. The cut points are chosen
//! to minimize the total granule volume (window length times interval
//! width), exactly for short series and by particle swarm otherwise. Labels
//! come from contiguous intervals split at the midpoints between windows.

use std::ops::Range;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::granule::{GranuleSet, Interval, SortedDistinctSeries};
use crate::pso::{self, PsoConfig};
use crate::seed;

/// Series with at most this many distinct values are partitioned by
/// exhaustive search.
pub const EXHAUSTIVE_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JustifiableInterval {
    pub alpha: f64,
    pub beta: f64,
    pub median: f64,
    pub coverage_lo: usize,
    pub coverage_hi: usize,
    pub score_lo: f64,
    pub score_hi: f64,
}

impl JustifiableInterval {
    pub fn width(&self) -> f64 {
        self.beta - self.alpha
    }
}

/// Median of an ascending slice; mean of the two middle values for even length.
pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Optimal interval for one window of ascending distinct values.
///
/// Both bounds are found by scanning the data points on their side of the
/// median; ties keep the point closest to the median.
pub fn optimize_interval(window: &[f64], tau: f64) -> JustifiableInterval {
    debug_assert!(!window.is_empty());
    let med = median(window);

    let (mut beta, mut score_hi, mut coverage_hi) = (med, 0.0, 0);
    let above = window.partition_point(|&x| x <= med);
    for (k, &x) in window[above..].iter().enumerate() {
        let count = k + 1;
        let v = count as f64 * (-tau * (x - med)).exp();
        if v > score_hi {
            beta = x;
            score_hi = v;
            coverage_hi = count;
        }
    }

    let (mut alpha, mut score_lo, mut coverage_lo) = (med, 0.0, 0);
    let below = window.partition_point(|&x| x < med);
    for (k, &x) in window[..below].iter().rev().enumerate() {
        let count = k + 1;
        let v = count as f64 * (-tau * (med - x)).exp();
        if v > score_lo {
            alpha = x;
            score_lo = v;
            coverage_lo = count;
        }
    }

    JustifiableInterval {
        alpha,
        beta,
        median: med,
        coverage_lo,
        coverage_hi,
        score_lo,
        score_hi,
    }
}

/// Volume of a window's granule: window length times interval width.
pub fn granule_volume(window_len: usize, interval: &JustifiableInterval) -> f64 {
    window_len as f64 * interval.width()
}

/// Cut points into a series of `len` values. A cut at `k` starts a new window
/// at index `k`, so windows are `[0, k1), [k1, k2), ..., [k_last, len)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPartition {
    cut_points: Vec<usize>,
    len: usize,
}

impl WindowPartition {
    pub fn new(cut_points: Vec<usize>, len: usize) -> Result<Self> {
        let valid = cut_points.windows(2).all(|w| w[0] < w[1])
            && cut_points.first().is_none_or(|&k| k >= 1)
            && cut_points.last().is_none_or(|&k| k < len);
        if !valid || len == 0 {
            return Err(Error::Parameter(format!(
                "cut points {cut_points:?} do not split {len} values into non-empty windows"
            )));
        }
        Ok(WindowPartition { cut_points, len })
    }

    /// Equal-count windows.
    pub fn uniform(len: usize, windows: usize) -> Self {
        let cut_points = (1..windows).map(|i| i * len / windows).collect();
        WindowPartition { cut_points, len }
    }

    pub fn cut_points(&self) -> &[usize] {
        &self.cut_points
    }

    pub fn window_count(&self) -> usize {
        self.cut_points.len() + 1
    }

    pub fn windows(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        let starts = std::iter::once(0).chain(self.cut_points.iter().copied());
        let ends = self.cut_points.iter().copied().chain(std::iter::once(self.len));
        starts.zip(ends).map(|(a, b)| a..b)
    }
}

/// Sum of granule volumes over the windows of `partition`.
pub fn partition_volume(values: &[f64], partition: &WindowPartition, tau: f64) -> f64 {
    partition
        .windows()
        .map(|w| {
            let window = &values[w];
            granule_volume(window.len(), &optimize_interval(window, tau))
        })
        .sum()
}

fn check_windows(series: &SortedDistinctSeries, windows: usize) -> Result<()> {
    if windows == 0 || windows > series.len() {
        return Err(Error::Parameter(format!(
            "{windows} windows requested for {} distinct values",
            series.len()
        )));
    }
    Ok(())
}

/// Volume-minimizing partition: exhaustive for short series, PSO otherwise.
pub fn optimize_partition(
    series: &SortedDistinctSeries,
    windows: usize,
    tau: f64,
    pso: &PsoConfig,
) -> Result<WindowPartition> {
    check_windows(series, windows)?;
    if series.len() <= EXHAUSTIVE_LIMIT {
        optimize_partition_exhaustive(series, windows, tau)
    } else {
        optimize_partition_pso(series, windows, tau, pso)
    }
}

/// Enumerates every partition. The first strict minimum in lexicographic
/// cut order wins.
pub fn optimize_partition_exhaustive(
    series: &SortedDistinctSeries,
    windows: usize,
    tau: f64,
) -> Result<WindowPartition> {
    check_windows(series, windows)?;
    let n = series.len();
    let k = windows - 1;
    let mut cuts: Vec<usize> = (1..=k).collect();
    let mut best = WindowPartition::new(cuts.clone(), n)?;
    let mut best_volume = partition_volume(series.values(), &best, tau);
    // next combination of k cuts from 1..n
    while let Some(i) = (0..k).rev().find(|&i| cuts[i] < n - k + i) {
        cuts[i] += 1;
        for j in i + 1..k {
            cuts[j] = cuts[j - 1] + 1;
        }
        let candidate = WindowPartition {
            cut_points: cuts.clone(),
            len: n,
        };
        let volume = partition_volume(series.values(), &candidate, tau);
        if volume < best_volume {
            best_volume = volume;
            best = candidate;
        }
    }
    Ok(best)
}

/// Decodes continuous particle coordinates into strictly increasing integer
/// cuts in `[1, len - 1]`, pushing collisions to the nearest free index.
pub fn decode_cuts(position: &[f64], len: usize) -> Vec<usize> {
    let k = position.len();
    let mut cuts: Vec<usize> = position
        .iter()
        .map(|&x| (x.round().max(1.0) as usize).min(len - 1))
        .collect();
    cuts.sort_unstable();
    for i in 1..k {
        if cuts[i] <= cuts[i - 1] {
            cuts[i] = cuts[i - 1] + 1;
        }
    }
    let mut ceiling = len;
    for c in cuts.iter_mut().rev() {
        if *c >= ceiling {
            *c = ceiling - 1;
        }
        ceiling = *c;
    }
    cuts
}

/// Granule volume of every window `start..end`, so a partition's volume is a
/// sum of lookups. Sums run in window order, matching [`partition_volume`].
struct VolumeTable {
    n: usize,
    volumes: Vec<f64>,
}

impl VolumeTable {
    fn new(values: &[f64], tau: f64) -> Self {
        let n = values.len();
        let mut volumes = vec![f64::NAN; (n + 1) * (n + 1)];
        for start in 0..n {
            for end in start + 1..=n {
                let window = &values[start..end];
                volumes[start * (n + 1) + end] = granule_volume(window.len(), &optimize_interval(window, tau));
            }
        }
        VolumeTable { n, volumes }
    }

    fn volume(&self, cuts: &[usize]) -> f64 {
        let mut start = 0;
        let mut total = 0.0;
        for &end in cuts.iter().chain(std::iter::once(&self.n)) {
            total += self.volumes[start * (self.n + 1) + end];
            start = end;
        }
        total
    }

    /// Local search over single-cut relocations: each sweep tries moving
    /// every cut to every free index and applies the best strict
    /// improvement, until no move lowers the total volume.
    fn relocate(&self, mut cuts: Vec<usize>) -> (f64, Vec<usize>) {
        let mut current = self.volume(&cuts);
        loop {
            let mut best: Option<(f64, Vec<usize>)> = None;
            for i in 0..cuts.len() {
                for free in (1..self.n).filter(|p| cuts.binary_search(p).is_err()) {
                    let mut candidate = cuts.clone();
                    candidate[i] = free;
                    candidate.sort_unstable();
                    let v = self.volume(&candidate);
                    if v < best.as_ref().map_or(current, |b| b.0) {
                        best = Some((v, candidate));
                    }
                }
            }
            match best {
                Some((v, next)) => {
                    current = v;
                    cuts = next;
                }
                None => return (current, cuts),
            }
        }
    }
}

/// PSO search over cut positions, then a local search over single-cut
/// relocations from every particle's best. The uniform partition is injected
/// as the first particle, so the result is never worse than it.
pub fn optimize_partition_pso(
    series: &SortedDistinctSeries,
    windows: usize,
    tau: f64,
    config: &PsoConfig,
) -> Result<WindowPartition> {
    check_windows(series, windows)?;
    config.validate()?;
    let n = series.len();
    if windows == 1 {
        return WindowPartition::new(Vec::new(), n);
    }
    if windows == n {
        return WindowPartition::new((1..n).collect(), n);
    }
    let dim = windows - 1;
    let lower = vec![1.0; dim];
    let upper = vec![(n - 1) as f64; dim];
    let uniform = WindowPartition::uniform(n, windows);
    let seed_particle: Vec<f64> = uniform.cut_points().iter().map(|&c| c as f64).collect();
    let table = VolumeTable::new(series.values(), tau);
    let objective = |x: &[f64]| table.volume(&decode_cuts(x, n));
    let mut rng = seed::rng(config.seed, seed::STAGE_PSO, 0);
    // half of the fresh particles are uniform over cut sets rather than over
    // the coordinate box, so clustered partitions are drawn often enough
    let sample_cuts = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        if rng.gen_bool(0.5) {
            return (0..dim).map(|_| rng.gen_range(1.0..=(n - 1) as f64)).collect();
        }
        let mut cuts = sample(rng, n - 1, dim).into_vec();
        cuts.sort_unstable();
        cuts.into_iter().map(|c| (c + 1) as f64).collect()
    };
    let out = pso::minimize_with_sampler(
        objective,
        &lower,
        &upper,
        &[seed_particle],
        0.5 * n as f64,
        config,
        &mut rng,
        sample_cuts,
    );
    let mut starts = vec![decode_cuts(&out.position, n)];
    for p in &out.particle_bests {
        let cuts = decode_cuts(p, n);
        if !starts.contains(&cuts) {
            starts.push(cuts);
        }
    }
    // the first strict minimum wins
    let mut best: Option<(f64, Vec<usize>)> = None;
    for start in starts {
        let (v, cuts) = table.relocate(start);
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, cuts));
        }
    }
    let (_, cuts) = best.expect("the global best is always polished");
    WindowPartition::new(cuts, n)
}

/// Contiguous intervals split at the midpoint between the last value of one
/// window and the first value of the next.
pub fn build_interval_granules(series: &SortedDistinctSeries, partition: &WindowPartition) -> GranuleSet {
    let v = series.values();
    let mut bounds = Vec::with_capacity(partition.window_count() + 1);
    bounds.push(series.min());
    bounds.extend(partition.cut_points().iter().map(|&k| (v[k - 1] + v[k]) / 2.0));
    bounds.push(series.max());
    GranuleSet::Interval(bounds.windows(2).map(|b| Interval::new(b[0], b[1])).collect())
}

/// How many windows to cut a row's distinct series into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowRule {
    /// `ceil(t / 2)`, matching the c-means granule count.
    Half,
    /// A fixed count, capped at the number of distinct values.
    Fixed(usize),
}

impl WindowRule {
    pub fn windows_for(&self, distinct: usize) -> usize {
        match *self {
            WindowRule::Half => distinct.div_ceil(2),
            WindowRule::Fixed(p) => p.clamp(1, distinct),
        }
    }
}
