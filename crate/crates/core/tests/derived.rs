//! Worked examples whose expected values come from independent oracles
//! computed here, not from the library.

use std::collections::BTreeSet;

use gbc_core::bicluster::{cell_jaccard, Bicluster, Provenance};
use gbc_core::cc::{cc_mine, CcConfig};
use gbc_core::fcm::{self, FcmConfig};
use gbc_core::granule::{sort_dedupe, GranuleSet, Interval};
use gbc_core::jig::{self, WindowPartition};
use gbc_core::pso::PsoConfig;
use gbc_core::refine::{self, RefineConfig};
use gbc_core::score;
use gbc_core::search::{self, SearchConfig};
use gbc_core::synth::{self, SynthSpec};
use gbc_core::trend::{self, GranulationConfig, GranulationMethod, LabelMatrix};
use gbc_core::{run_pipeline, ExpressionMatrix, RunConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------- fuzzy c-means ----------

/// Plain alternating optimization, run until prototypes move less than 1e-12.
fn reference_fcm(x: &[f64], init: &[f64], kappa: f64) -> (Vec<f64>, Vec<Vec<f64>>, f64) {
    let c = init.len();
    let mut v = init.to_vec();
    let mut u = vec![vec![0.0; x.len()]; c];
    for _ in 0..100_000 {
        for (t, &xt) in x.iter().enumerate() {
            let d: Vec<f64> = v.iter().map(|&vj| (xt - vj).abs()).collect();
            if let Some(hit) = d.iter().position(|&dj| dj == 0.0) {
                for (j, uj) in u.iter_mut().enumerate() {
                    uj[t] = if j == hit { 1.0 } else { 0.0 };
                }
                continue;
            }
            for j in 0..c {
                let s: f64 = (0..c).map(|k| (d[j] / d[k]).powf(2.0 / (kappa - 1.0))).sum();
                u[j][t] = 1.0 / s;
            }
        }
        let next: Vec<f64> = (0..c)
            .map(|j| {
                let w: Vec<f64> = u[j].iter().map(|m| m.powf(kappa)).collect();
                w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>()
            })
            .collect();
        let shift = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if shift < 1e-12 {
            break;
        }
    }
    let j: f64 = (0..c)
        .map(|k| x.iter().enumerate().map(|(t, &xt)| u[k][t].powf(kappa) * (xt - v[k]).powi(2)).sum::<f64>())
        .sum();
    (v, u, j)
}

fn best_reference(x: &[f64], c: usize, restarts: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut best: Option<(Vec<f64>, Vec<Vec<f64>>, f64)> = None;
    for _ in 0..restarts {
        let init: Vec<f64> = (0..c).map(|_| rng.gen_range(lo..=hi)).collect();
        let run = reference_fcm(x, &init, 2.0);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (v, u, _) = best.unwrap();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    (order.iter().map(|&j| v[j]).collect(), order.iter().map(|&j| u[j].clone()).collect())
}

fn sorted_prototypes(state: &fcm::FcmState) -> Vec<f64> {
    let mut p = state.prototypes.clone();
    p.sort_by(f64::total_cmp);
    p
}

#[test]
fn fcm_two_clusters_match_reference() {
    let row = [0.0, 0.0, 10.0, 10.0];
    let state = fcm::fcm_fit(&row, 2, &FcmConfig::default()).unwrap();
    let (v, u) = best_reference(&row, 2, 1);
    let got = sorted_prototypes(&state);
    for (a, b) in got.iter().zip(&v) {
        assert!((a - b).abs() < 1e-6, "{got:?} vs {v:?}");
    }
    assert!((v[0] - 0.0).abs() < 1e-6 && (v[1] - 10.0).abs() < 1e-6);
    // own-cluster memberships
    for t in 0..4 {
        let own = if row[t] < 5.0 { 0 } else { 1 };
        assert!(u[own][t] >= 0.99);
        let j = state.prototypes.iter().position(|&p| (p - v[own]).abs() < 1e-6).unwrap();
        assert!(state.partition[j][t] >= 0.99);
    }
}

#[test]
fn fcm_three_clusters_match_best_of_ten_reference() {
    let row = [0.0, 1.0, 10.0, 11.0, 20.0, 21.0];
    let state = fcm::fcm_fit(&row, 3, &FcmConfig::default()).unwrap();
    let (v, _) = best_reference(&row, 3, 10);
    let got = sorted_prototypes(&state);
    for (a, b) in got.iter().zip(&v) {
        assert!((a - b).abs() < 1e-6, "{got:?} vs {v:?}");
    }
    for (a, b) in v.iter().zip([0.5, 10.5, 20.5]) {
        assert!((a - b).abs() < 0.05, "{v:?}");
    }
}

// ---------- justifiable granularity ----------

/// Best upper and lower bounds by evaluating the score at every data point.
fn scan_interval(w: &[f64], tau: f64) -> (f64, f64) {
    let n = w.len();
    let med = if n % 2 == 1 { w[n / 2] } else { (w[n / 2 - 1] + w[n / 2]) / 2.0 };
    let mut beta = (med, 0.0);
    let mut alpha = (med, 0.0);
    for &b in w {
        if b > med {
            let s = w.iter().filter(|&&x| med < x && x <= b).count() as f64 * (-tau * (b - med)).exp();
            if s > beta.1 {
                beta = (b, s);
            }
        }
        if b < med {
            let s = w.iter().filter(|&&x| b <= x && x < med).count() as f64 * (-tau * (med - b)).exp();
            if s > alpha.1 || (s == alpha.1 && b > alpha.0) {
                alpha = (b, s);
            }
        }
    }
    (alpha.0, beta.0)
}

fn oracle_volume(values: &[f64], cuts: &[usize], tau: f64) -> f64 {
    let mut bounds = vec![0];
    bounds.extend_from_slice(cuts);
    bounds.push(values.len());
    bounds
        .windows(2)
        .map(|b| {
            let w = &values[b[0]..b[1]];
            let (a, z) = scan_interval(w, tau);
            w.len() as f64 * (z - a)
        })
        .sum()
}

#[test]
fn interval_with_outlier_matches_scan() {
    let w = [1.0, 2.0, 3.0, 4.0, 100.0];
    let got = jig::optimize_interval(&w, 0.1);
    let (alpha, beta) = scan_interval(&w, 0.1);
    assert_eq!((got.alpha, got.beta), (alpha, beta));
    assert_eq!((alpha, beta), (1.0, 4.0));
    assert!((got.score_hi - (-0.1f64).exp()).abs() < 1e-12);
    assert!((got.score_lo - 2.0 * (-0.2f64).exp()).abs() < 1e-12);
}

#[test]
fn two_cluster_series_takes_the_enumerated_optimum() {
    let values = [1.0, 2.0, 3.0, 101.0, 102.0, 103.0];
    let series = sort_dedupe(&values).unwrap();
    let volumes: Vec<f64> = (1..6).map(|k| oracle_volume(&values, &[k], 0.1)).collect();
    let best = (1..6).min_by(|&a, &b| volumes[a - 1].total_cmp(&volumes[b - 1])).unwrap();
    // an interval may leave a far point uncovered, so the cut between the two
    // clusters (volume 12) loses to peeling {1, 2} off the left (volume 10)
    assert_eq!(volumes[2], 12.0);
    assert_eq!(volumes[1], 10.0);
    assert_eq!(best, 2);

    let exact = jig::optimize_partition(&series, 2, 0.1, &PsoConfig::default()).unwrap();
    assert_eq!(exact.cut_points(), [best]);
    let swarm = jig::optimize_partition_pso(&series, 2, 0.1, &PsoConfig::default()).unwrap();
    assert_eq!(swarm.cut_points(), [best]);
    for (k, v) in volumes.iter().enumerate() {
        let p = WindowPartition::new(vec![k + 1], 6).unwrap();
        assert!((jig::partition_volume(&values, &p, 0.1) - v).abs() < 1e-12);
    }
}

#[test]
fn three_windows_match_enumeration_and_midpoints_split_clusters() {
    let values = [1.0, 2.0, 3.0, 101.0, 102.0, 103.0];
    let series = sort_dedupe(&values).unwrap();
    let mut best = (f64::INFINITY, vec![]);
    for a in 1..6 {
        for b in a + 1..6 {
            let v = oracle_volume(&values, &[a, b], 0.1);
            if v < best.0 {
                best = (v, vec![a, b]);
            }
        }
    }
    let got = jig::optimize_partition(&series, 3, 0.1, &PsoConfig::default()).unwrap();
    assert_eq!(got.cut_points(), best.1.as_slice());

    let split = WindowPartition::new(vec![3], 6).unwrap();
    let granules = jig::build_interval_granules(&series, &split);
    assert_eq!(
        granules,
        GranuleSet::Interval(vec![Interval::new(1.0, 52.0), Interval::new(52.0, 103.0)])
    );
}

#[test]
fn shifted_rows_share_labels_at_zero_tau() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let base: Vec<f64> = (0..9).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let shifted: Vec<f64> = base.iter().map(|v| v + 10.0).collect();
    let m = ExpressionMatrix::from_values(vec![base, shifted]).unwrap();
    let cfg = GranulationConfig {
        method: GranulationMethod::Jig,
        tau: 0.0,
        ..GranulationConfig::default()
    };
    let labels = trend::build_label_matrix(&m, &cfg).unwrap();
    assert_eq!(labels.row(0), labels.row(1));
}

// ---------- greedy chains ----------

/// Trend matrix of 0-based label rows (granule labels start at 1).
fn trend_of(rows: Vec<Vec<u32>>) -> trend::TrendMatrix {
    let shifted = rows.into_iter().map(|r| r.into_iter().map(|l| l + 1).collect()).collect();
    trend::build_trend_matrix(&LabelMatrix::from_rows(shifted).unwrap())
}

fn sign(a: u32, b: u32) -> i8 {
    (a as i64 - b as i64).signum() as i8
}

#[test]
fn second_rank_takes_second_best_candidate() {
    let rows = vec![vec![1, 2, 0], vec![1, 2, 0], vec![1, 0, 2], vec![1, 2, 2]];
    let t = trend_of(rows.clone());
    // brute-force score of each candidate column against column 0
    let mut scored: Vec<(usize, usize)> = (1..3)
        .map(|m| {
            let up = rows.iter().filter(|r| sign(r[m], r[0]) >= 0).count();
            let down = rows.iter().filter(|r| sign(r[m], r[0]) <= 0).count();
            (up.max(down), m)
        })
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let all: Vec<usize> = (0..4).collect();
    let second = search::next_condition(&t, &all, 0, 2, 2, 1).unwrap();
    assert_eq!(second.column, scored[1].1);
    assert_eq!(second.score, scored[1].0);
}

/// Largest row set sharing one direction per step over any increasing column
/// chain of at least `min_cond` columns: `(rows, cols)` of every maximum.
type Blocks = Vec<(Vec<usize>, Vec<usize>)>;

fn enumerate_best(labels: &[Vec<u32>], min_cond: usize) -> (usize, Blocks) {
    let n = labels.len();
    let m = labels[0].len();
    let mut best = (0, Vec::new());
    for mask in 0u32..(1 << m) {
        let cols: Vec<usize> = (0..m).filter(|j| mask >> j & 1 == 1).collect();
        if cols.len() < min_cond {
            continue;
        }
        let steps = cols.len() - 1;
        for dirs in 0u32..(1 << steps) {
            let rows: Vec<usize> = (0..n)
                .filter(|&i| {
                    cols.windows(2).enumerate().all(|(s, p)| {
                        let d = if dirs >> s & 1 == 1 { 1 } else { -1 };
                        let g = sign(labels[i][p[1]], labels[i][p[0]]);
                        g == 0 || g == d
                    })
                })
                .collect();
            if rows.len() > best.0 {
                best = (rows.len(), vec![(rows, cols.clone())]);
            } else if rows.len() == best.0 && !best.1.iter().any(|(r, c)| r == &rows && c == &cols) {
                best.1.push((rows, cols.clone()));
            }
        }
    }
    best
}

#[test]
fn planted_monotone_block_is_found() {
    let labels = vec![
        vec![3, 0, 1, 2, 3, 4],
        vec![0, 1, 2, 3, 4, 5],
        vec![5, 0, 2, 3, 4, 5],
        vec![2, 1, 2, 3, 4, 5],
        vec![1, 4, 0, 5, 3, 2],
        vec![3, 5, 4, 0, 2, 1],
    ];
    let (size, maxima) = enumerate_best(&labels, 4);
    assert_eq!(size, 4);
    assert!(maxima.iter().all(|(rows, _)| rows == &[0, 1, 2, 3]), "{maxima:?}");

    let config = SearchConfig {
        min_gene: 3,
        min_cond: 4,
        l0: 6,
        ..SearchConfig::default()
    };
    let chains = search::mine_chains(&trend_of(labels), &config).unwrap();
    let planted: BTreeSet<usize> = (1..6).collect();
    assert!(chains.iter().any(|ch| {
        ch.rows == [0, 1, 2, 3] && ch.cols.len() >= 4 && ch.cols.iter().filter(|c| planted.contains(c)).count() >= 4
    }));
}

#[test]
fn permutation_rows_with_full_floor_give_nothing() {
    let (n, m, min_cond) = (5, 6, 4);
    let mut empty_cases = 0;
    for seed in 0..40 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<Vec<u32>> = (0..n)
            .map(|_| {
                let mut p: Vec<u32> = (0..m as u32).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();
        let (size, _) = enumerate_best(&labels, min_cond);
        let config = SearchConfig {
            min_gene: n,
            min_cond,
            l0: m,
            ..SearchConfig::default()
        };
        let chains = search::mine_chains(&trend_of(labels), &config).unwrap();
        if size < n {
            assert!(chains.is_empty(), "seed {seed}");
            empty_cases += 1;
        }
        // anything the greedy search emits must exist in the enumeration
        assert!(chains.is_empty() || size == n);
    }
    assert!(empty_cases >= 20, "{empty_cases}");
}

// ---------- scores ----------

/// `(180 / pi) * atan(pinv(D) * X)` with `D = diag(range / (M - 1))` and `X`
/// the adjacent differences, written as explicit matrix products.
fn matrix_form_angles(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let m = rows[0].len();
    let mut d = vec![vec![0.0; n]; n];
    for (i, r) in rows.iter().enumerate() {
        let range = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - r.iter().cloned().fold(f64::INFINITY, f64::min);
        d[i][i] = range / (m - 1) as f64;
    }
    // pseudo-inverse of a diagonal matrix
    let pinv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|k| if i == k && d[i][i] != 0.0 { 1.0 / d[i][i] } else { 0.0 }).collect())
        .collect();
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.windows(2).map(|w| w[1] - w[0]).collect()).collect();
    (0..n)
        .map(|i| {
            (0..m - 1)
                .map(|j| (0..n).map(|k| pinv[i][k] * x[k][j]).sum::<f64>().atan().to_degrees())
                .collect()
        })
        .collect()
}

#[test]
fn slope_angles_match_matrix_form() {
    let m = ExpressionMatrix::from_values(vec![vec![0.0, 3.0, 1.0]]).unwrap();
    let a = score::slope_angles(&m);
    let oracle = matrix_form_angles(&[vec![0.0, 3.0, 1.0]]);
    assert!((a.angle(0, 0) - oracle[0][0]).abs() < 1e-12);
    assert!((a.angle(0, 1) - oracle[0][1]).abs() < 1e-12);
    assert!((a.angle(0, 0) - 63.434_948_822_922_01).abs() < 1e-9);
    assert!((a.angle(0, 1) + 53.130_102_354_155_98).abs() < 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..7).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
    let mut rows_with_flat = rows.clone();
    rows_with_flat.push(vec![2.0; 7]);
    let m = ExpressionMatrix::from_values(rows_with_flat.clone()).unwrap();
    let a = score::slope_angles(&m);
    for (i, r) in matrix_form_angles(&rows_with_flat).iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            assert!((a.angle(i, j) - v).abs() < 1e-12);
        }
    }
}

fn brute_msr(cells: &[Vec<f64>]) -> f64 {
    let (n, m) = (cells.len(), cells[0].len());
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            let row_mean = cells[i].iter().sum::<f64>() / m as f64;
            let col_mean = (0..n).map(|k| cells[k][j]).sum::<f64>() / n as f64;
            let all = cells.iter().flatten().sum::<f64>() / (n * m) as f64;
            total += (cells[i][j] - row_mean - col_mean + all).powi(2);
        }
    }
    total / (n * m) as f64
}

#[test]
fn residue_and_fluctuation_examples() {
    let cells = vec![vec![0.0, 0.0], vec![0.0, 4.0]];
    let m = ExpressionMatrix::from_values(cells.clone()).unwrap();
    assert_eq!(brute_msr(&cells), 1.0);
    assert_eq!(score::msr(&m, &[0, 1], &[0, 1]), 1.0);

    let angles = [30.0, 50.0];
    let mean = angles.iter().sum::<f64>() / 2.0;
    let oracle = (angles.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
    assert_eq!(oracle, 10.0);
    assert!((score::mfd_of_angles(&[vec![30.0], vec![50.0]]) - oracle).abs() < 1e-12);
}

#[test]
fn refinement_drops_an_injected_row() {
    let base = [0.0, 4.0, 1.0, 6.0, 2.0, 8.0];
    let mut cells: Vec<Vec<f64>> = (0..6).map(|i| base.iter().map(|b| b + 3.0 * i as f64).collect()).collect();
    cells.push(vec![9.0, -2.0, 7.0, 0.0, 11.0, -4.0]);
    let m = ExpressionMatrix::from_values(cells.clone()).unwrap();
    let angles = score::slope_angles(&m);
    let all_rows: Vec<usize> = (0..7).collect();
    let cols: Vec<usize> = (0..6).collect();

    // the injected row's mean squared residue within the whole block
    let row_means: Vec<f64> = cells.iter().map(|r| r.iter().sum::<f64>() / 6.0).collect();
    let col_means: Vec<f64> = (0..6).map(|j| cells.iter().map(|r| r[j]).sum::<f64>() / 7.0).collect();
    let grand = row_means.iter().sum::<f64>() / 7.0;
    let d_injected = (0..6).map(|j| (cells[6][j] - row_means[6] - col_means[j] + grand).powi(2)).sum::<f64>() / 6.0;
    let delta = 1.0;
    assert!(d_injected > delta, "{d_injected}");
    let with = score::mfd(&m, &angles, &all_rows, &cols);
    let without = score::mfd(&m, &angles, &all_rows[..6], &cols);
    assert!(without < with);

    let start = Bicluster::new(all_rows, cols, Provenance::Unknown);
    let cfg = RefineConfig {
        delta,
        min_gene: 3,
        min_cond: 3,
        ..RefineConfig::default()
    };
    let out = refine::refine(&m, &angles, &start, &cfg).unwrap();
    assert_eq!(out.rows, [0, 1, 2, 3, 4, 5]);
    assert!(out.mfd < 1e-12);
}

// ---------- planted data ----------

fn planted_instance(seed: u64) -> (ExpressionMatrix, Bicluster) {
    let spec = SynthSpec::single_block(200, 40, 20, 12, 30.0, 0.1, seed).unwrap();
    let (m, truth) = synth::generate(&spec).unwrap();
    (m, truth.into_iter().next().unwrap())
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, m: usize, rows: usize, cols: usize) -> (Vec<usize>, Vec<usize>) {
    let mut r = rand::seq::index::sample(rng, n, rows).into_vec();
    let mut c = rand::seq::index::sample(rng, m, cols).into_vec();
    r.sort_unstable();
    c.sort_unstable();
    (r, c)
}

#[test]
fn planted_block_residue_is_far_below_random_blocks() {
    let (m, truth) = planted_instance(8);
    let block: Vec<Vec<f64>> = truth.rows.iter().map(|&i| truth.cols.iter().map(|&j| m.get(i, j)).collect()).collect();
    let planted = brute_msr(&block);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let background: f64 = (0..100)
        .map(|_| {
            let (r, c) = random_block(&mut rng, 200, 40, 20, 12);
            brute_msr(&r.iter().map(|&i| c.iter().map(|&j| m.get(i, j)).collect()).collect::<Vec<_>>())
        })
        .sum::<f64>()
        / 100.0;
    assert!(planted < 0.02, "{planted}");
    assert!(planted * 50.0 < background, "{planted} vs {background}");
}

#[test]
fn cheng_church_first_bicluster_overlaps_planted_block() {
    // block values on the background's scale, so that deletion is driven by
    // coherence rather than by the planted rows' spread
    let delta = 0.03;
    for seed in 0..10 {
        let spec = SynthSpec::single_block(200, 40, 20, 12, 1.0, 0.1, seed).unwrap();
        let (m, truth) = synth::generate(&spec).unwrap();
        let truth = truth.into_iter().next().unwrap();
        let block: Vec<Vec<f64>> = truth.rows.iter().map(|&i| truth.cols.iter().map(|&j| m.get(i, j)).collect()).collect();
        let everything: Vec<Vec<f64>> = (0..200).map(|i| m.row(i).to_vec()).collect();
        assert!(brute_msr(&block) <= delta, "seed {seed}");
        assert!(brute_msr(&everything) > delta, "seed {seed}");

        let found = cc_mine(
            &m,
            &CcConfig {
                delta,
                n_biclusters: 1,
                mask_seed: seed,
                ..CcConfig::default()
            },
        )
        .unwrap();
        let j = cell_jaccard(&found[0], &truth);
        assert!(j >= 0.5, "seed {seed}: Jaccard {j}");
    }
}

#[test]
fn pipeline_finds_fluctuation_below_random_blocks() {
    let (m, _) = planted_instance(5);
    let config = RunConfig {
        search: SearchConfig {
            min_gene: 10,
            min_cond: 6,
            l0: 20,
            ..SearchConfig::default()
        },
        refine: RefineConfig {
            delta: 0.5,
            ..RefineConfig::default()
        },
        top_n: 10,
        ..RunConfig::default()
    };
    let bundle = run_pipeline(&config, &m).unwrap();
    let best = &bundle.biclusters[0];
    let angles = score::slope_angles(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let floor = (0..200)
        .map(|_| {
            let (r, c) = random_block(&mut rng, 200, 40, best.rows.len(), best.cols.len());
            score::mfd(&m, &angles, &r, &c)
        })
        .fold(f64::INFINITY, f64::min);
    assert!(best.mfd < floor, "{} vs {floor}", best.mfd);
}
