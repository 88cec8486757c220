//! Delete/add refinement of a bicluster under MSR and MFD.
//!
//! Each pass first deletes, one at a time, the row or column with the largest
//! mean squared residue among those whose residue exceeds `delta` and whose
//! removal strictly lowers MFD. It then sweeps the absent rows and the absent
//! columns in index order and adds every one that does not raise MFD.

use serde::{Deserialize, Serialize};

use crate::bicluster::{Bicluster, Provenance};
use crate::error::{Error, Result};
use crate::matrix::ExpressionMatrix;
use crate::score::{self, SlopeAngleMatrix};

/// Slack allowed when an addition leaves MFD unchanged.
pub const MFD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    /// MSR threshold for deletion.
    pub delta: f64,
    pub max_passes: usize,
    /// Deletion never takes the bicluster below these sizes.
    pub min_gene: usize,
    pub min_cond: usize,
    /// Also require an added row/column's residue to stay within `delta`.
    pub gate_additions_on_delta: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            delta: 1200.0,
            max_passes: 10,
            min_gene: 15,
            min_cond: 10,
            gate_additions_on_delta: false,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::Parameter(format!("delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationKind {
    DeleteRow,
    DeleteColumn,
    AddRow,
    AddColumn,
}

/// One accepted change with the MFD before and after it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mutation {
    pub kind: MutationKind,
    pub index: usize,
    pub mfd_before: f64,
    pub mfd_after: f64,
}

fn without(list: &[usize], pos: usize) -> Vec<usize> {
    let mut v = list.to_vec();
    v.remove(pos);
    v
}

fn with(list: &[usize], item: usize) -> Vec<usize> {
    let mut v = list.to_vec();
    let at = v.partition_point(|&x| x < item);
    v.insert(at, item);
    v
}

struct Refiner<'a> {
    matrix: &'a ExpressionMatrix,
    angles: &'a SlopeAngleMatrix,
    config: &'a RefineConfig,
    rows: Vec<usize>,
    cols: Vec<usize>,
    mfd: f64,
    log: Vec<Mutation>,
}

impl Refiner<'_> {
    fn mfd_of(&self, rows: &[usize], cols: &[usize]) -> f64 {
        score::mfd(self.matrix, self.angles, rows, cols)
    }

    fn accept(&mut self, kind: MutationKind, index: usize, rows: Vec<usize>, cols: Vec<usize>, mfd: f64) {
        debug_assert!(mfd <= self.mfd + MFD_TOLERANCE, "MFD rose from {} to {mfd}", self.mfd);
        self.log.push(Mutation {
            kind,
            index,
            mfd_before: self.mfd,
            mfd_after: mfd,
        });
        self.rows = rows;
        self.cols = cols;
        self.mfd = mfd;
    }

    /// Deletes one qualifying row or column. Returns false when none qualifies.
    fn delete_one(&mut self) -> bool {
        let res = score::residues(self.matrix, &self.rows, &self.cols);
        // (score, is_column, position); rows before columns on equal scores
        let mut candidates: Vec<(f64, bool, usize)> = Vec::new();
        if self.rows.len() > self.config.min_gene.max(1) {
            candidates.extend(
                res.row_scores
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d > self.config.delta)
                    .map(|(p, &d)| (d, false, p)),
            );
        }
        if self.cols.len() > self.config.min_cond.max(2) {
            candidates.extend(
                res.col_scores
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d > self.config.delta)
                    .map(|(p, &d)| (d, true, p)),
            );
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        for (_, is_col, pos) in candidates {
            let (rows, cols) = if is_col {
                (self.rows.clone(), without(&self.cols, pos))
            } else {
                (without(&self.rows, pos), self.cols.clone())
            };
            let mfd = self.mfd_of(&rows, &cols);
            if mfd < self.mfd {
                let (kind, index) = if is_col {
                    (MutationKind::DeleteColumn, self.cols[pos])
                } else {
                    (MutationKind::DeleteRow, self.rows[pos])
                };
                self.accept(kind, index, rows, cols, mfd);
                return true;
            }
        }
        false
    }

    fn gate_ok(&self, rows: &[usize], cols: &[usize], added: usize, is_col: bool) -> bool {
        if !self.config.gate_additions_on_delta {
            return true;
        }
        let res = score::residues(self.matrix, rows, cols);
        let d = if is_col {
            res.col_scores[cols.binary_search(&added).unwrap()]
        } else {
            res.row_scores[rows.binary_search(&added).unwrap()]
        };
        d <= self.config.delta
    }

    fn add_sweep(&mut self) -> bool {
        let mut changed = false;
        for r in 0..self.matrix.n_genes() {
            if self.rows.binary_search(&r).is_ok() {
                continue;
            }
            let rows = with(&self.rows, r);
            let mfd = self.mfd_of(&rows, &self.cols);
            if mfd <= self.mfd + MFD_TOLERANCE && self.gate_ok(&rows, &self.cols, r, false) {
                let cols = self.cols.clone();
                self.accept(MutationKind::AddRow, r, rows, cols, mfd);
                changed = true;
            }
        }
        for c in 0..self.matrix.n_conditions() {
            if self.cols.binary_search(&c).is_ok() {
                continue;
            }
            let cols = with(&self.cols, c);
            let mfd = self.mfd_of(&self.rows, &cols);
            if mfd <= self.mfd + MFD_TOLERANCE && self.gate_ok(&self.rows, &cols, c, true) {
                let rows = self.rows.clone();
                self.accept(MutationKind::AddColumn, c, rows, cols, mfd);
                changed = true;
            }
        }
        changed
    }
}

/// Refines a bicluster and returns it rescored, together with every accepted
/// mutation in order.
pub fn refine_traced(
    matrix: &ExpressionMatrix,
    angles: &SlopeAngleMatrix,
    bicluster: &Bicluster,
    config: &RefineConfig,
) -> Result<(Bicluster, Vec<Mutation>)> {
    config.validate()?;
    if bicluster.rows.is_empty() || bicluster.cols.len() < 2 {
        return Err(Error::Parameter("refinement needs at least one row and two columns".into()));
    }
    let mut state = Refiner {
        matrix,
        angles,
        config,
        rows: bicluster.rows.clone(),
        cols: bicluster.cols.clone(),
        mfd: score::mfd(matrix, angles, &bicluster.rows, &bicluster.cols),
        log: Vec::new(),
    };
    for _ in 0..config.max_passes {
        let before = (state.rows.clone(), state.cols.clone());
        while state.delete_one() {}
        state.add_sweep();
        if (&state.rows, &state.cols) == (&before.0, &before.1) {
            break;
        }
    }

    let provenance = match &bicluster.provenance {
        Provenance::Chain {
            method,
            start,
            l0,
            mst_rank,
            directions,
            ..
        } => Provenance::Chain {
            method: method.clone(),
            start: *start,
            l0: *l0,
            mst_rank: *mst_rank,
            directions: directions.clone(),
            refined: true,
        },
        other => other.clone(),
    };
    let msr = score::msr(matrix, &state.rows, &state.cols);
    Ok((
        Bicluster {
            rows: state.rows,
            cols: state.cols,
            msr,
            mfd: state.mfd,
            provenance,
        },
        state.log,
    ))
}

pub fn refine(
    matrix: &ExpressionMatrix,
    angles: &SlopeAngleMatrix,
    bicluster: &Bicluster,
    config: &RefineConfig,
) -> Result<Bicluster> {
    refine_traced(matrix, angles, bicluster, config).map(|(b, _)| b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::slope_angles;

    fn bc(rows: &[usize], cols: &[usize]) -> Bicluster {
        Bicluster::new(rows.to_vec(), cols.to_vec(), Provenance::Unknown)
    }

    fn loose(delta: f64) -> RefineConfig {
        RefineConfig {
            delta,
            min_gene: 1,
            min_cond: 2,
            ..RefineConfig::default()
        }
    }

    /// Four shifted copies of one profile plus an unrelated row.
    fn coherent_plus_intruder() -> ExpressionMatrix {
        let base = [0.0, 8.0, 3.0, 10.0, 1.0];
        let mut rows: Vec<Vec<f64>> = [0.0, 5.0, -3.0, 12.0]
            .iter()
            .map(|o| base.iter().map(|b| b + o).collect())
            .collect();
        rows.push(vec![10.0, 0.0, 9.0, 1.0, 7.0]);
        ExpressionMatrix::from_values(rows).unwrap()
    }

    #[test]
    fn removes_injected_row() {
        let m = coherent_plus_intruder();
        let a = slope_angles(&m);
        let all = [0, 1, 2, 3, 4];
        let cols = [0, 1, 2, 3, 4];
        // computed before refining: the intruder's residue exceeds delta and
        // dropping it takes MFD to zero
        let res = score::residues(&m, &all, &cols);
        assert!(res.row_scores[4] > 5.0);
        assert!(res.row_scores[..4].iter().all(|&d| d < 5.0));
        let before = score::mfd(&m, &a, &all, &cols);
        let after = score::mfd(&m, &a, &all[..4], &cols);
        assert!(after < 1e-12 && before > 10.0);

        let (out, log) = refine_traced(&m, &a, &bc(&all, &cols), &loose(5.0)).unwrap();
        assert_eq!(out.rows, vec![0, 1, 2, 3]);
        assert_eq!(out.cols, cols.to_vec());
        assert_eq!(log[0].kind, MutationKind::DeleteRow);
        assert_eq!(log[0].index, 4);
        assert!(out.mfd < 1e-12);
    }

    #[test]
    fn coherent_block_is_a_fixpoint() {
        let m = coherent_plus_intruder();
        let a = slope_angles(&m);
        let b = bc(&[0, 1, 2, 3], &[0, 1, 2, 3, 4]);
        let (out, log) = refine_traced(&m, &a, &b, &loose(5.0)).unwrap();
        assert!(log.is_empty());
        assert_eq!((out.rows, out.cols), (b.rows, b.cols));
    }

    #[test]
    fn adds_coherent_row_left_outside() {
        let m = coherent_plus_intruder();
        let a = slope_angles(&m);
        let out = refine(&m, &a, &bc(&[0, 1, 3], &[0, 1, 2, 3, 4]), &loose(5.0)).unwrap();
        assert_eq!(out.rows, vec![0, 1, 2, 3]);
        assert!(out.mfd < 1e-12);
    }

    #[test]
    fn floors_stop_deletion() {
        let m = coherent_plus_intruder();
        let a = slope_angles(&m);
        let cfg = RefineConfig {
            delta: 5.0,
            min_gene: 5,
            min_cond: 2,
            ..RefineConfig::default()
        };
        let out = refine(&m, &a, &bc(&[0, 1, 2, 3, 4], &[0, 1, 2, 3, 4]), &cfg).unwrap();
        assert_eq!(out.rows.len(), 5);
    }

    #[test]
    fn rejects_bad_input() {
        let m = coherent_plus_intruder();
        let a = slope_angles(&m);
        assert!(refine(&m, &a, &bc(&[0], &[1]), &loose(1.0)).is_err());
        assert!(refine(&m, &a, &bc(&[0], &[0, 1]), &loose(0.0)).is_err());
    }
}
