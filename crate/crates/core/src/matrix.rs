use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense gene-by-condition expression matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct ExpressionMatrix {
    gene_ids: Vec<String>,
    condition_ids: Vec<String>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    gene_ids: Vec<String>,
    condition_ids: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<RawMatrix> for ExpressionMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        ExpressionMatrix::from_rows(raw.gene_ids, raw.condition_ids, raw.values)
    }
}

impl From<ExpressionMatrix> for RawMatrix {
    fn from(m: ExpressionMatrix) -> Self {
        let values = m.rows().map(<[f64]>::to_vec).collect();
        RawMatrix {
            gene_ids: m.gene_ids,
            condition_ids: m.condition_ids,
            values,
        }
    }
}

impl ExpressionMatrix {
    /// Builds a matrix from row-major values. Requires at least one gene, at
    /// least two conditions, unique identifiers and finite values.
    pub fn new(gene_ids: Vec<String>, condition_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = gene_ids.len();
        let m = condition_ids.len();
        if n < 1 {
            return Err(Error::InvalidMatrix("at least one gene is required".into()));
        }
        if m < 2 {
            return Err(Error::InvalidMatrix("at least two conditions are required".into()));
        }
        if values.len() != n * m {
            return Err(Error::InvalidMatrix(format!(
                "expected {} values for {n}x{m}, got {}",
                n * m,
                values.len()
            )));
        }
        check_unique("gene", &gene_ids)?;
        check_unique("condition", &condition_ids)?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / m,
                col: pos % m,
            });
        }
        Ok(ExpressionMatrix {
            gene_ids,
            condition_ids,
            values,
        })
    }

    pub fn from_rows(gene_ids: Vec<String>, condition_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = condition_ids.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(Error::InvalidMatrix(format!(
                "row {i} has {} values, expected {m}",
                r.len()
            )));
        }
        Self::new(gene_ids, condition_ids, rows.into_iter().flatten().collect())
    }

    /// Matrix with generated identifiers `g0..`, `c0..`.
    pub fn from_values(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let genes = (0..n).map(|i| format!("g{i}")).collect();
        let conds = (0..m).map(|j| format!("c{j}")).collect();
        Self::from_rows(genes, conds, rows)
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_conditions(&self) -> usize {
        self.condition_ids.len()
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn condition_ids(&self) -> &[String] {
        &self.condition_ids
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_conditions() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let m = self.n_conditions();
        &self.values[row * m..(row + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_conditions())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, value: f64) {
        let m = self.n_conditions();
        self.values[row * m + col] = value;
    }
}

fn check_unique(what: &str, ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidMatrix(format!("duplicate {what} identifier {id:?}")));
        }
    }
    Ok(())
}
