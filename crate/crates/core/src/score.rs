//! Coherence scores: mean squared residue and mean fluctuation degree.
//!
//! Slope angles normalize each gene's adjacent differences by the gene's
//! average step `range / (M - 1)` and map them to degrees with `atan`, so a
//! gene that climbs its whole range evenly has 45 degree transitions. Genes
//! with zero range get zero angles.

use serde::{Deserialize, Serialize};

use crate::matrix::ExpressionMatrix;

/// Slope angle in degrees of a difference `diff` on a gene with range
/// `range` over `n_conditions` conditions.
#[inline]
pub fn angle_degrees(diff: f64, range: f64, n_conditions: usize) -> f64 {
    if range == 0.0 {
        return 0.0;
    }
    (diff * (n_conditions - 1) as f64 / range).atan().to_degrees()
}

/// Angles for every adjacent transition, `N x (M - 1)`, in `[-90, 90]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeAngleMatrix {
    n_conditions: usize,
    angles: Vec<f64>,
    row_ranges: Vec<f64>,
}

impl SlopeAngleMatrix {
    /// Angle of the transition `j -> j + 1` of `gene`.
    #[inline]
    pub fn angle(&self, gene: usize, j: usize) -> f64 {
        self.angles[gene * (self.n_conditions - 1) + j]
    }

    pub fn row(&self, gene: usize) -> &[f64] {
        let w = self.n_conditions - 1;
        &self.angles[gene * w..(gene + 1) * w]
    }

    pub fn row_ranges(&self) -> &[f64] {
        &self.row_ranges
    }

    /// Angle between two selected conditions `from < to`. Adjacent pairs come
    /// from the table; gaps are recomputed with the gene's full-row range.
    #[inline]
    pub fn transition(&self, matrix: &ExpressionMatrix, gene: usize, from: usize, to: usize) -> f64 {
        if to == from + 1 {
            self.angle(gene, from)
        } else {
            angle_degrees(
                matrix.get(gene, to) - matrix.get(gene, from),
                self.row_ranges[gene],
                self.n_conditions,
            )
        }
    }
}

pub fn slope_angles(matrix: &ExpressionMatrix) -> SlopeAngleMatrix {
    let m = matrix.n_conditions();
    let mut angles = Vec::with_capacity(matrix.n_genes() * (m - 1));
    let mut row_ranges = Vec::with_capacity(matrix.n_genes());
    for row in matrix.rows() {
        let (lo, hi) = row
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        row_ranges.push(range);
        angles.extend(row.windows(2).map(|w| angle_degrees(w[1] - w[0], range, m)));
    }
    SlopeAngleMatrix {
        n_conditions: m,
        angles,
        row_ranges,
    }
}

/// Mean squared residue with its per-row and per-column mean squared residues.
#[derive(Debug, Clone, PartialEq)]
pub struct Residues {
    pub msr: f64,
    pub row_scores: Vec<f64>,
    pub col_scores: Vec<f64>,
}

/// Residue scores of the submatrix `rows x cols`.
///
/// # Panics
/// If `rows` or `cols` is empty.
pub fn residues(matrix: &ExpressionMatrix, rows: &[usize], cols: &[usize]) -> Residues {
    assert!(!rows.is_empty() && !cols.is_empty(), "residues of an empty submatrix");
    let (ni, nj) = (rows.len() as f64, cols.len() as f64);
    let row_means: Vec<f64> = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| matrix.get(i, j)).sum::<f64>() / nj)
        .collect();
    let col_means: Vec<f64> = cols
        .iter()
        .map(|&j| rows.iter().map(|&i| matrix.get(i, j)).sum::<f64>() / ni)
        .collect();
    let grand = row_means.iter().sum::<f64>() / ni;

    let mut row_scores = vec![0.0; rows.len()];
    let mut col_scores = vec![0.0; cols.len()];
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            let r = matrix.get(i, j) - row_means[a] - col_means[b] + grand;
            let r2 = r * r;
            row_scores[a] += r2;
            col_scores[b] += r2;
        }
    }
    let total: f64 = row_scores.iter().sum();
    row_scores.iter_mut().for_each(|s| *s /= nj);
    col_scores.iter_mut().for_each(|s| *s /= ni);
    Residues {
        msr: total / (ni * nj),
        row_scores,
        col_scores,
    }
}

pub fn msr(matrix: &ExpressionMatrix, rows: &[usize], cols: &[usize]) -> f64 {
    residues(matrix, rows, cols).msr
}

/// Mean fluctuation degree: root mean squared deviation of each gene's
/// transition angle from the mean angle of that transition over the genes.
///
/// # Panics
/// If `rows` is empty or fewer than two columns are selected.
pub fn mfd(matrix: &ExpressionMatrix, angles: &SlopeAngleMatrix, rows: &[usize], cols: &[usize]) -> f64 {
    assert!(!rows.is_empty(), "mfd of an empty row set");
    assert!(cols.len() >= 2, "mfd needs at least two conditions");
    let mut buf = Vec::with_capacity(rows.len());
    let mut total = 0.0;
    for p in cols.windows(2) {
        buf.clear();
        buf.extend(rows.iter().map(|&i| angles.transition(matrix, i, p[0], p[1])));
        total += squared_deviation(&buf);
    }
    (total / (rows.len() * (cols.len() - 1)) as f64).sqrt()
}

/// MFD of a table of angles, `angle_rows[gene][transition]`.
pub fn mfd_of_angles(angle_rows: &[Vec<f64>]) -> f64 {
    let n = angle_rows.len();
    let t = angle_rows.first().map_or(0, Vec::len);
    let mut total = 0.0;
    let mut buf = Vec::with_capacity(n);
    for p in 0..t {
        buf.clear();
        buf.extend(angle_rows.iter().map(|r| r[p]));
        total += squared_deviation(&buf);
    }
    (total / (n * t) as f64).sqrt()
}

fn squared_deviation(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum()
}
