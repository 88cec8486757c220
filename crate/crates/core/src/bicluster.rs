use serde::{Deserialize, Serialize};

/// Where a bicluster came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum Provenance {
    /// Greedy trend chain, optionally refined afterwards.
    Chain {
        method: String,
        start: usize,
        l0: usize,
        mst_rank: usize,
        /// Direction (+1 rising, -1 falling) of every accepted step.
        directions: Vec<i8>,
        refined: bool,
    },
    ChengChurch { round: usize },
    Planted { index: usize },
    Unknown,
}

/// A set of genes (rows) and an ascending list of conditions (columns),
/// both 0-based, with their coherence scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bicluster {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// NaN until scored; serialized as null.
    #[serde(default = "unscored", deserialize_with = "score_or_nan")]
    pub msr: f64,
    #[serde(default = "unscored", deserialize_with = "score_or_nan")]
    pub mfd: f64,
    pub provenance: Provenance,
}

fn unscored() -> f64 {
    f64::NAN
}

fn score_or_nan<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl Bicluster {
    /// Unscored bicluster; rows and columns are sorted and deduplicated.
    pub fn new(mut rows: Vec<usize>, mut cols: Vec<usize>, provenance: Provenance) -> Self {
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        Bicluster {
            rows,
            cols,
            msr: f64::NAN,
            mfd: f64::NAN,
            provenance,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.rows.len() * self.cols.len()
    }

    pub fn same_cells(&self, other: &Bicluster) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Jaccard index of the two (row, column) cell sets.
pub fn cell_jaccard(a: &Bicluster, b: &Bicluster) -> f64 {
    let inter = sorted_intersection(&a.rows, &b.rows) * sorted_intersection(&a.cols, &b.cols);
    let union = a.n_cells() + b.n_cells() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}
