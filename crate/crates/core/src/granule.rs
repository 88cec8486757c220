//! Ordered information granules for a single gene row.
//!
//! A row is first collapsed into its ascending distinct values. Rows with one
//! or two distinct values are granulated directly; longer rows go through
//! fuzzy c-means or justifiable-granularity intervals. Labels are 1-based and
//! ascend with the granule's position on the value axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ascending distinct values of a row, with the condition indices (0-based)
/// that share each value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortedDistinctSeries {
    values: Vec<f64>,
    positions: Vec<Vec<usize>>,
}

impl SortedDistinctSeries {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn positions(&self) -> &[Vec<usize>] {
        &self.positions
    }

    /// Number of distinct values.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Sorts a row ascending and merges exactly equal values into one datum.
pub fn sort_dedupe(row: &[f64]) -> Result<SortedDistinctSeries> {
    if let Some(col) = row.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: 0, col });
    }
    if row.is_empty() {
        return Err(Error::Parameter("cannot granulate an empty row".into()));
    }
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));

    let mut values: Vec<f64> = Vec::new();
    let mut positions: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        let v = row[idx];
        // -0.0 and 0.0 compare equal and sort adjacently
        match values.last() {
            Some(&last) if last == v => positions.last_mut().unwrap().push(idx),
            _ => {
                values.push(v);
                positions.push(vec![idx]);
            }
        }
    }
    Ok(SortedDistinctSeries { values, positions })
}

/// A closed interval `[lo, hi]` on the expression axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// One fuzzy c-means granule: a prototype and its membership degree for
/// every original condition of the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeGranule {
    pub prototype: f64,
    pub memberships: Vec<f64>,
}

/// Granules of one row, ordered so that granule `k` carries label `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "granules", rename_all = "kebab-case")]
pub enum GranuleSet {
    /// Contiguous intervals; granule k's upper bound is granule k+1's lower bound.
    Interval(Vec<Interval>),
    /// Prototypes in ascending order with their membership rows.
    FcmPrototype(Vec<PrototypeGranule>),
}

impl GranuleSet {
    pub fn len(&self) -> usize {
        match self {
            GranuleSet::Interval(v) => v.len(),
            GranuleSet::FcmPrototype(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn intervals(&self) -> Option<&[Interval]> {
        match self {
            GranuleSet::Interval(v) => Some(v),
            GranuleSet::FcmPrototype(_) => None,
        }
    }

    pub fn prototypes(&self) -> Option<&[PrototypeGranule]> {
        match self {
            GranuleSet::Interval(_) => None,
            GranuleSet::FcmPrototype(v) => Some(v),
        }
    }
}

/// Direct granulation for rows with one or two distinct values. Returns
/// `None` when the row needs a full granulation method.
pub fn degenerate_granules(series: &SortedDistinctSeries) -> Option<GranuleSet> {
    match series.len() {
        1 => {
            let g = series.min();
            Some(GranuleSet::Interval(vec![Interval::new(g, g)]))
        }
        2 => {
            let (lo, hi) = (series.min(), series.max());
            let mid = (hi + lo) / 2.0;
            Some(GranuleSet::Interval(vec![Interval::new(lo, mid), Interval::new(mid, hi)]))
        }
        _ => None,
    }
}

/// Assigns each condition of `row` the label of its granule.
///
/// Interval granules: the containing interval, with shared bounds going to
/// the lower label. Prototype granules: the granule of maximum membership,
/// ties going to the lower label.
pub fn label_series(row: &[f64], granules: &GranuleSet) -> Result<Vec<u32>> {
    match granules {
        GranuleSet::Interval(intervals) => row
            .iter()
            .enumerate()
            .map(|(t, &v)| {
                // first interval whose upper bound reaches v
                let k = intervals.partition_point(|iv| iv.hi < v);
                match intervals.get(k) {
                    Some(iv) if iv.contains(v) => Ok(k as u32 + 1),
                    _ => Err(Error::Invariant(format!(
                        "value {v} at condition {t} lies outside every granule"
                    ))),
                }
            })
            .collect(),
        GranuleSet::FcmPrototype(protos) => {
            if protos.is_empty() {
                return Err(Error::Invariant("empty prototype set".into()));
            }
            if let Some(p) = protos.iter().find(|p| p.memberships.len() != row.len()) {
                return Err(Error::Invariant(format!(
                    "membership vector has {} entries for a row of {}",
                    p.memberships.len(),
                    row.len()
                )));
            }
            Ok((0..row.len())
                .map(|t| {
                    let mut best = 0;
                    for (k, p) in protos.iter().enumerate().skip(1) {
                        if p.memberships[t] > protos[best].memberships[t] {
                            best = k;
                        }
                    }
                    best as u32 + 1
                })
                .collect())
        }
    }
}
