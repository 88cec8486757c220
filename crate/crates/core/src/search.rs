//! Initial biclusters by greedy maximum-same-trend column chaining.
//!
//! A chain starts at a condition `c` with every gene active. Among the next
//! `L` conditions it picks the one where the most active genes move the same
//! way relative to `c` (a zero trend counts for both directions), keeps only
//! those genes, and continues from the chosen condition. The lookahead `L`
//! shrinks near the right edge of the matrix.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bicluster::{cell_jaccard, Bicluster, Provenance};
use crate::error::{Error, Result};
use crate::matrix::ExpressionMatrix;
use crate::score::{self, SlopeAngleMatrix};
use crate::trend::TrendMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub min_gene: usize,
    pub min_cond: usize,
    pub l0: usize,
    /// Chains are run for every rank `1..=mst_rank`; rank r follows the r-th
    /// best candidate at every step.
    pub mst_rank: usize,
    /// 0-based start conditions; all conditions when `None`.
    pub start_columns: Option<Vec<usize>>,
    /// Lookahead values to sweep; `[l0]` when `None`.
    pub l0_sweep: Option<Vec<usize>>,
    /// Drop a bicluster whose cell Jaccard with a better-scoring one exceeds this.
    pub overlap_jaccard: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            min_gene: 15,
            min_cond: 10,
            l0: 30,
            mst_rank: 1,
            start_columns: None,
            l0_sweep: None,
            overlap_jaccard: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_gene < 1 {
            return Err(Error::Parameter("min_gene must be at least 1".into()));
        }
        if self.min_cond < 2 {
            return Err(Error::Parameter("min_cond must be at least 2".into()));
        }
        if self.mst_rank < 1 {
            return Err(Error::Parameter("mst_rank must be at least 1".into()));
        }
        if self.lookaheads().iter().any(|&l| l < 1) {
            return Err(Error::Parameter("L0 must be at least 1".into()));
        }
        Ok(())
    }

    pub fn lookaheads(&self) -> Vec<usize> {
        self.l0_sweep.clone().unwrap_or_else(|| vec![self.l0])
    }
}

/// Lookahead from the 0-based condition `current`: `min(l0, M - 1 - current)`.
pub fn adaptive_lookahead(l0: usize, current: usize, n_conditions: usize) -> usize {
    l0.min(n_conditions.saturating_sub(current + 1))
}

/// One accepted chain step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub column: usize,
    /// +1 rising, -1 falling.
    pub direction: i8,
    pub score: usize,
    pub rows: Vec<usize>,
}

/// Scores the candidates `current + 1 ..= current + lookahead` and returns
/// the `rank`-th best among those keeping at least `min_gene` rows, or
/// `None` when no such candidate exists.
///
/// A candidate's score is `max(up, down)` where `up` counts active rows with
/// a rising or flat trend from `current`, `down` a falling or flat one.
/// Ties go to the smaller column, then to the rising direction.
pub fn next_condition(
    trend: &TrendMatrix,
    active_rows: &[usize],
    current: usize,
    lookahead: usize,
    rank: usize,
    min_gene: usize,
) -> Option<Step> {
    let last = (current + lookahead).min(trend.n_conditions() - 1);
    let mut candidates: Vec<(usize, usize, i8)> = Vec::with_capacity(lookahead);
    for m in current + 1..=last {
        let (mut up, mut down) = (0, 0);
        for &n in active_rows {
            match trend.get(n, m, current) {
                1 => up += 1,
                -1 => down += 1,
                _ => {
                    up += 1;
                    down += 1;
                }
            }
        }
        let (score, dir) = if up >= down { (up, 1) } else { (down, -1) };
        if score >= min_gene {
            candidates.push((score, m, dir));
        }
    }
    // stable: equal scores stay in column order
    candidates.sort_by_key(|c| std::cmp::Reverse(c.0));
    let &(score, column, direction) = candidates.get(rank.checked_sub(1)?)?;
    let rows = active_rows
        .iter()
        .copied()
        .filter(|&n| {
            let s = trend.get(n, column, current);
            s == 0 || s == direction
        })
        .collect();
    Some(Step {
        column,
        direction,
        score,
        rows,
    })
}

/// A finished chain before scoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub start: usize,
    pub l0: usize,
    pub rank: usize,
    pub directions: Vec<i8>,
}

/// Runs one chain from `start` until no candidate keeps `min_gene` rows or
/// the last condition is reached.
pub fn run_chain(trend: &TrendMatrix, start: usize, l0: usize, rank: usize, min_gene: usize) -> Chain {
    let m = trend.n_conditions();
    let mut rows: Vec<usize> = (0..trend.n_genes()).collect();
    let mut cols = vec![start];
    let mut directions = Vec::new();
    let mut current = start;
    if rows.len() >= min_gene {
        loop {
            let lookahead = adaptive_lookahead(l0, current, m);
            if lookahead == 0 {
                break;
            }
            let Some(step) = next_condition(trend, &rows, current, lookahead, rank, min_gene) else {
                break;
            };
            debug_assert!(step.rows.len() <= rows.len());
            rows = step.rows;
            cols.push(step.column);
            directions.push(step.direction);
            current = step.column;
        }
    }
    Chain {
        rows,
        cols,
        start,
        l0,
        rank,
        directions,
    }
}

/// All chains over start columns x lookaheads x ranks that meet the size
/// bounds, in that sweep order with exact duplicates removed.
pub fn mine_chains(trend: &TrendMatrix, config: &SearchConfig) -> Result<Vec<Chain>> {
    config.validate()?;
    let m = trend.n_conditions();
    let starts: Vec<usize> = match &config.start_columns {
        Some(s) => {
            if let Some(&bad) = s.iter().find(|&&c| c >= m) {
                return Err(Error::Parameter(format!("start column {bad} out of range")));
            }
            s.clone()
        }
        None => (0..m).collect(),
    };
    let mut jobs = Vec::new();
    for &c in &starts {
        for l0 in config.lookaheads() {
            for rank in 1..=config.mst_rank {
                jobs.push((c, l0, rank));
            }
        }
    }
    let chains: Vec<Chain> = jobs
        .par_iter()
        .map(|&(c, l0, rank)| run_chain(trend, c, l0, rank, config.min_gene))
        .collect();

    let mut seen = HashSet::new();
    Ok(chains
        .into_iter()
        .filter(|ch| ch.rows.len() >= config.min_gene && ch.cols.len() >= config.min_cond)
        .filter(|ch| seen.insert((ch.rows.clone(), ch.cols.clone())))
        .collect())
}

/// Scores a bicluster in place.
pub fn score_bicluster(matrix: &ExpressionMatrix, angles: &SlopeAngleMatrix, b: &mut Bicluster) {
    b.msr = score::msr(matrix, &b.rows, &b.cols);
    b.mfd = if b.cols.len() >= 2 {
        score::mfd(matrix, angles, &b.rows, &b.cols)
    } else {
        0.0
    };
}

/// Sorts by MFD ascending (stable) and applies the optional overlap filter.
pub fn rank_biclusters(mut list: Vec<Bicluster>, overlap_jaccard: Option<f64>) -> Vec<Bicluster> {
    list.sort_by(|a, b| a.mfd.total_cmp(&b.mfd));
    match overlap_jaccard {
        None => list,
        Some(limit) => {
            let mut kept: Vec<Bicluster> = Vec::with_capacity(list.len());
            for b in list {
                if kept.iter().all(|k| cell_jaccard(k, &b) <= limit) {
                    kept.push(b);
                }
            }
            kept
        }
    }
}

/// Mines, scores and ranks the initial biclusters.
pub fn mine_initial(
    trend: &TrendMatrix,
    matrix: &ExpressionMatrix,
    angles: &SlopeAngleMatrix,
    method: &str,
    config: &SearchConfig,
) -> Result<Vec<Bicluster>> {
    if trend.n_genes() != matrix.n_genes() || trend.n_conditions() != matrix.n_conditions() {
        return Err(Error::Parameter("trend matrix and expression matrix differ in shape".into()));
    }
    let chains = mine_chains(trend, config)?;
    let list: Vec<Bicluster> = chains
        .into_par_iter()
        .map(|ch| {
            let mut b = Bicluster {
                rows: ch.rows,
                cols: ch.cols,
                msr: f64::NAN,
                mfd: f64::NAN,
                provenance: Provenance::Chain {
                    method: method.to_string(),
                    start: ch.start,
                    l0: ch.l0,
                    mst_rank: ch.rank,
                    directions: ch.directions,
                    refined: false,
                },
            };
            score_bicluster(matrix, angles, &mut b);
            b
        })
        .collect();
    Ok(rank_biclusters(list, config.overlap_jaccard))
}
