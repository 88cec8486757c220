//! Cheng-Church delta-biclustering baseline.
//!
//! Each round starts from the whole (masked) matrix, applies multiple node
//! deletion, single node deletion and node addition, and then overwrites the
//! found cells with uniform noise over the original value range so later
//! rounds look elsewhere.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bicluster::{Bicluster, Provenance};
use crate::error::{Error, Result};
use crate::matrix::ExpressionMatrix;
use crate::score::{self, residues};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CcConfig {
    pub delta: f64,
    /// Multiple deletion removes every node whose residue exceeds `alpha * H`.
    pub alpha: f64,
    pub n_biclusters: usize,
    pub mask_seed: u64,
    /// Multiple deletion only applies along a dimension larger than this.
    pub multiple_deletion_min: usize,
}

impl Default for CcConfig {
    fn default() -> Self {
        CcConfig {
            delta: 1200.0,
            alpha: 1.2,
            n_biclusters: 50,
            mask_seed: 0,
            multiple_deletion_min: 100,
        }
    }
}

impl CcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::Parameter(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.alpha >= 1.0) {
            return Err(Error::Parameter(format!("alpha must be >= 1, got {}", self.alpha)));
        }
        Ok(())
    }
}

fn keep_where<T: Copy>(items: &[T], keep: impl Fn(usize) -> bool) -> Vec<T> {
    items.iter().enumerate().filter(|&(p, _)| keep(p)).map(|(_, &x)| x).collect()
}

fn multiple_deletion(m: &ExpressionMatrix, rows: &mut Vec<usize>, cols: &mut Vec<usize>, cfg: &CcConfig) {
    loop {
        let res = residues(m, rows, cols);
        if res.msr <= cfg.delta {
            return;
        }
        let mut changed = false;
        if rows.len() > cfg.multiple_deletion_min {
            let limit = cfg.alpha * res.msr;
            let kept = keep_where(rows, |p| res.row_scores[p] <= limit);
            if !kept.is_empty() && kept.len() < rows.len() {
                *rows = kept;
                changed = true;
            }
        }
        if cols.len() > cfg.multiple_deletion_min {
            let res = residues(m, rows, cols);
            if res.msr <= cfg.delta {
                return;
            }
            let limit = cfg.alpha * res.msr;
            let kept = keep_where(cols, |p| res.col_scores[p] <= limit);
            if kept.len() >= 2 && kept.len() < cols.len() {
                *cols = kept;
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

fn single_deletion(m: &ExpressionMatrix, rows: &mut Vec<usize>, cols: &mut Vec<usize>, cfg: &CcConfig) -> Result<()> {
    let mut res = residues(m, rows, cols);
    while res.msr > cfg.delta {
        let (best_row, row_d) = argmax(&res.row_scores);
        let (best_col, col_d) = argmax(&res.col_scores);
        let drop_row = (row_d >= col_d && rows.len() > 1) || cols.len() <= 2;
        if drop_row {
            if rows.len() <= 1 {
                break;
            }
            rows.remove(best_row);
        } else {
            cols.remove(best_col);
        }
        let next = residues(m, rows, cols);
        if !(next.msr < res.msr) {
            return Err(Error::Invariant(format!(
                "single node deletion raised the residue from {} to {}",
                res.msr, next.msr
            )));
        }
        res = next;
    }
    Ok(())
}

fn argmax(xs: &[f64]) -> (usize, f64) {
    xs.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, x)| if x > best.1 { (i, x) } else { best })
}

fn node_addition(m: &ExpressionMatrix, rows: &mut Vec<usize>, cols: &mut Vec<usize>, cfg: &CcConfig) {
    let (n, mcols) = (m.n_genes(), m.n_conditions());
    let saved = (rows.clone(), cols.clone());

    // columns first, against the current row set
    let res = residues(m, rows, cols);
    let h = res.msr;
    let row_means: Vec<f64> = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| m.get(i, j)).sum::<f64>() / cols.len() as f64)
        .collect();
    let grand = row_means.iter().sum::<f64>() / rows.len() as f64;
    let mut add_cols = Vec::new();
    for j in (0..mcols).filter(|j| cols.binary_search(j).is_err()) {
        let col_mean = rows.iter().map(|&i| m.get(i, j)).sum::<f64>() / rows.len() as f64;
        let d = rows
            .iter()
            .zip(&row_means)
            .map(|(&i, &rm)| {
                let r = m.get(i, j) - rm - col_mean + grand;
                r * r
            })
            .sum::<f64>()
            / rows.len() as f64;
        if d <= h {
            add_cols.push(j);
        }
    }
    cols.extend(add_cols);
    cols.sort_unstable();

    let res = residues(m, rows, cols);
    let h = res.msr;
    let col_means: Vec<f64> = cols
        .iter()
        .map(|&j| rows.iter().map(|&i| m.get(i, j)).sum::<f64>() / rows.len() as f64)
        .collect();
    let grand = col_means.iter().sum::<f64>() / cols.len() as f64;
    let mut add_rows = Vec::new();
    for i in (0..n).filter(|i| rows.binary_search(i).is_err()) {
        let row_mean = cols.iter().map(|&j| m.get(i, j)).sum::<f64>() / cols.len() as f64;
        let d = cols
            .iter()
            .zip(&col_means)
            .map(|(&j, &cm)| {
                let r = m.get(i, j) - row_mean - cm + grand;
                r * r
            })
            .sum::<f64>()
            / cols.len() as f64;
        if d <= h {
            add_rows.push(i);
        }
    }
    rows.extend(add_rows);
    rows.sort_unstable();

    // rounding can push H a hair past delta; fall back to the pre-addition sets
    if score::msr(m, rows, cols) > cfg.delta {
        *rows = saved.0;
        *cols = saved.1;
    }
}

/// Finds `n_biclusters` delta-biclusters. Each bicluster's `msr` is its
/// residue in the masked matrix it was found in (always `<= delta`); `mfd`
/// is scored against the original matrix.
pub fn cc_mine(matrix: &ExpressionMatrix, config: &CcConfig) -> Result<Vec<Bicluster>> {
    config.validate()?;
    if matrix.n_genes() < 2 || matrix.n_conditions() < 2 {
        return Err(Error::Parameter("Cheng-Church needs at least a 2x2 matrix".into()));
    }
    let (lo, hi) = matrix.min_max();
    let angles = score::slope_angles(matrix);
    let mut work = matrix.clone();
    let mut rng = seed::rng(config.mask_seed, seed::STAGE_CC, 0);
    let mut out = Vec::with_capacity(config.n_biclusters);

    for round in 0..config.n_biclusters {
        let mut rows: Vec<usize> = (0..work.n_genes()).collect();
        let mut cols: Vec<usize> = (0..work.n_conditions()).collect();
        multiple_deletion(&work, &mut rows, &mut cols, config);
        single_deletion(&work, &mut rows, &mut cols, config)?;
        node_addition(&work, &mut rows, &mut cols, config);

        let h = score::msr(&work, &rows, &cols);
        if h > config.delta {
            return Err(Error::Invariant(format!("round {round} ended with H = {h} above delta")));
        }
        for &i in &rows {
            for &j in &cols {
                let v = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                work.set(i, j, v);
            }
        }
        let mut b = Bicluster::new(rows, cols, Provenance::ChengChurch { round });
        b.msr = h;
        b.mfd = if b.cols.len() >= 2 {
            score::mfd(matrix, &angles, &b.rows, &b.cols)
        } else {
            0.0
        };
        out.push(b);
    }
    Ok(out)
}
