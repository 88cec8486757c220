//! Label matrix and trend matrix.
//!
//! Every gene row is granulated into ordered granules and each condition is
//! replaced by its granule label. The trend matrix records, for each gene and
//! each pair of conditions `k < m`, the sign of `label[m] - label[k]`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fcm::{self, FcmConfig};
use crate::granule::{self, GranuleSet};
use crate::jig::{self, WindowRule};
use crate::matrix::ExpressionMatrix;
use crate::pso::PsoConfig;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GranulationMethod {
    /// Fuzzy c-means prototypes.
    Fcm,
    /// Justifiable-granularity intervals.
    Jig,
}

impl std::fmt::Display for GranulationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GranulationMethod::Fcm => "fcm",
            GranulationMethod::Jig => "jig",
        })
    }
}

/// Per-row granulation settings. The `seed` fields of `fcm` and `pso` are
/// replaced per row by streams derived from `seed` and the row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GranulationConfig {
    pub method: GranulationMethod,
    pub fcm: FcmConfig,
    pub tau: f64,
    pub windows: WindowRule,
    pub pso: PsoConfig,
    pub seed: u64,
}

impl Default for GranulationConfig {
    fn default() -> Self {
        GranulationConfig {
            method: GranulationMethod::Fcm,
            fcm: FcmConfig::default(),
            tau: 0.5,
            windows: WindowRule::Half,
            pso: PsoConfig::default(),
            seed: 0,
        }
    }
}

/// Granulates one row and labels its conditions.
pub fn granulate_row(row: &[f64], config: &GranulationConfig, row_index: usize) -> Result<(GranuleSet, Vec<u32>)> {
    let series = granule::sort_dedupe(row)?;
    let granules = match granule::degenerate_granules(&series) {
        Some(g) => g,
        None => match config.method {
            GranulationMethod::Fcm => {
                let fcm_cfg = FcmConfig {
                    seed: seed::derive(config.seed, seed::STAGE_FCM, row_index as u64),
                    ..config.fcm.clone()
                };
                let state = fcm::fcm_fit(row, fcm::granule_count(&series), &fcm_cfg)?;
                fcm::build_ordered_granules_fcm(&state)
            }
            GranulationMethod::Jig => {
                if !(config.tau >= 0.0) {
                    return Err(Error::Parameter(format!("tau must be non-negative, got {}", config.tau)));
                }
                let pso_cfg = PsoConfig {
                    seed: seed::derive(config.seed, seed::STAGE_PSO, row_index as u64),
                    ..config.pso.clone()
                };
                let windows = config.windows.windows_for(series.len());
                let partition = jig::optimize_partition(&series, windows, config.tau, &pso_cfg)?;
                jig::build_interval_granules(&series, &partition)
            }
        },
    };
    let labels = granule::label_series(row, &granules)?;
    Ok((granules, labels))
}

/// Granule labels for every cell, `labels[i * M + j]`, each in `1..=K_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    n_genes: usize,
    n_conditions: usize,
    labels: Vec<u32>,
    granule_counts: Vec<u32>,
}

impl LabelMatrix {
    pub fn new(n_conditions: usize, rows: Vec<Vec<u32>>, granule_counts: Vec<u32>) -> Result<Self> {
        if rows.len() != granule_counts.len() {
            return Err(Error::Invariant("granule count per row missing".into()));
        }
        for (i, (r, &k)) in rows.iter().zip(&granule_counts).enumerate() {
            if r.len() != n_conditions {
                return Err(Error::Invariant(format!("label row {i} has {} entries", r.len())));
            }
            if r.iter().any(|&l| l < 1 || l > k) {
                return Err(Error::Invariant(format!("label row {i} leaves 1..={k}")));
            }
        }
        Ok(LabelMatrix {
            n_genes: rows.len(),
            n_conditions,
            labels: rows.into_iter().flatten().collect(),
            granule_counts,
        })
    }

    /// Label matrix whose granule count per row is its largest label.
    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let counts = rows.iter().map(|r| r.iter().copied().max().unwrap_or(1)).collect();
        Self::new(m, rows, counts)
    }

    pub fn n_genes(&self) -> usize {
        self.n_genes
    }

    pub fn n_conditions(&self) -> usize {
        self.n_conditions
    }

    #[inline]
    pub fn get(&self, gene: usize, cond: usize) -> u32 {
        self.labels[gene * self.n_conditions + cond]
    }

    pub fn row(&self, gene: usize) -> &[u32] {
        &self.labels[gene * self.n_conditions..(gene + 1) * self.n_conditions]
    }

    pub fn granule_counts(&self) -> &[u32] {
        &self.granule_counts
    }
}

/// Granulates every row (in parallel) and assembles the label matrix.
pub fn build_label_matrix(matrix: &ExpressionMatrix, config: &GranulationConfig) -> Result<LabelMatrix> {
    let per_row: Vec<Result<(u32, Vec<u32>)>> = (0..matrix.n_genes())
        .into_par_iter()
        .map(|i| {
            granulate_row(matrix.row(i), config, i)
                .map(|(g, labels)| (g.len() as u32, labels))
                .map_err(|e| e.in_row(&matrix.gene_ids()[i]))
        })
        .collect();
    let mut rows = Vec::with_capacity(per_row.len());
    let mut counts = Vec::with_capacity(per_row.len());
    for r in per_row {
        let (k, labels) = r?;
        rows.push(labels);
        counts.push(k);
    }
    LabelMatrix::new(matrix.n_conditions(), rows, counts)
}

/// Entry count above which [`TrendMode::Auto`] computes signs on demand.
pub const DEFAULT_ON_DEMAND_THRESHOLD: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrendMode {
    /// Packed storage unless `N * M^2` exceeds the threshold.
    Auto(u64),
    Packed,
    OnDemand,
}

impl Default for TrendMode {
    fn default() -> Self {
        TrendMode::Auto(DEFAULT_ON_DEMAND_THRESHOLD)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Storage {
    /// Two bits per `(m, k)` pair, `k < m`, lower-triangular order per gene.
    Packed { bytes_per_gene: usize, data: Vec<u8> },
    OnDemand { labels: LabelMatrix },
}

/// Signs `sign(label[m] - label[k])` for every gene and every `k < m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrendMatrix {
    n_genes: usize,
    n_conditions: usize,
    storage: Storage,
}

const CODE_ZERO: u8 = 0b00;
const CODE_UP: u8 = 0b01;
const CODE_DOWN: u8 = 0b10;

#[inline]
fn pair_index(later: usize, earlier: usize) -> usize {
    later * (later - 1) / 2 + earlier
}

#[inline]
fn sign(later: u32, earlier: u32) -> i8 {
    match later.cmp(&earlier) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
    }
}

fn encode(s: i8) -> u8 {
    match s {
        1 => CODE_UP,
        -1 => CODE_DOWN,
        _ => CODE_ZERO,
    }
}

fn decode(code: u8) -> i8 {
    match code {
        CODE_UP => 1,
        CODE_DOWN => -1,
        _ => 0,
    }
}

pub fn build_trend_matrix(labels: &LabelMatrix) -> TrendMatrix {
    build_trend_matrix_with(labels, TrendMode::default())
}

pub fn build_trend_matrix_with(labels: &LabelMatrix, mode: TrendMode) -> TrendMatrix {
    let n = labels.n_genes();
    let m = labels.n_conditions();
    let packed = match mode {
        TrendMode::Packed => true,
        TrendMode::OnDemand => false,
        TrendMode::Auto(threshold) => (n as u64) * (m as u64) * (m as u64) <= threshold,
    };
    let storage = if packed {
        let pairs = m * (m - 1) / 2;
        let bytes_per_gene = pairs.div_ceil(4);
        let mut data = vec![0u8; n * bytes_per_gene];
        data.par_chunks_mut(bytes_per_gene.max(1))
            .enumerate()
            .for_each(|(gene, chunk)| {
                let row = labels.row(gene);
                for later in 1..m {
                    for earlier in 0..later {
                        let idx = pair_index(later, earlier);
                        chunk[idx / 4] |= encode(sign(row[later], row[earlier])) << ((idx % 4) * 2);
                    }
                }
            });
        Storage::Packed { bytes_per_gene, data }
    } else {
        Storage::OnDemand { labels: labels.clone() }
    };
    TrendMatrix {
        n_genes: n,
        n_conditions: m,
        storage,
    }
}

impl TrendMatrix {
    pub fn n_genes(&self) -> usize {
        self.n_genes
    }

    pub fn n_conditions(&self) -> usize {
        self.n_conditions
    }

    pub fn is_packed(&self) -> bool {
        matches!(self.storage, Storage::Packed { .. })
    }

    /// `sign(label[later] - label[earlier])` for `earlier < later`.
    #[inline]
    pub fn get(&self, gene: usize, later: usize, earlier: usize) -> i8 {
        debug_assert!(earlier < later && later < self.n_conditions);
        match &self.storage {
            Storage::Packed { bytes_per_gene, data } => {
                let idx = pair_index(later, earlier);
                let byte = data[gene * bytes_per_gene + idx / 4];
                decode((byte >> ((idx % 4) * 2)) & 0b11)
            }
            Storage::OnDemand { labels } => sign(labels.get(gene, later), labels.get(gene, earlier)),
        }
    }

    /// The signs of column `cond` against every earlier column. Empty for the
    /// first column.
    pub fn column(&self, gene: usize, cond: usize) -> Vec<i8> {
        (0..cond).map(|k| self.get(gene, cond, k)).collect()
    }
}

/// Content hash of a matrix together with the granulation settings.
pub fn cache_key(matrix: &ExpressionMatrix, config: &GranulationConfig) -> Result<[u8; 32]> {
    let mut h = Sha256::new();
    h.update(b"gbc-trend-v1");
    h.update(serde_json::to_vec(config)?);
    h.update((matrix.n_genes() as u64).to_le_bytes());
    h.update((matrix.n_conditions() as u64).to_le_bytes());
    for id in matrix.gene_ids().iter().chain(matrix.condition_ids()) {
        h.update((id.len() as u64).to_le_bytes());
        h.update(id.as_bytes());
    }
    for v in matrix.values() {
        h.update(v.to_bits().to_le_bytes());
    }
    Ok(h.finalize().into())
}

const CACHE_MAGIC: &[u8; 8] = b"GBCTREND";
const CACHE_VERSION: u32 = 1;

/// Writes labels and trend matrix to a binary cache file.
///
/// Layout (little endian): magic, version `u32`, key `[u8; 32]`, `N u64`,
/// `M u64`, granule counts `N x u32`, labels `N*M x u32`, storage tag `u8`
/// (1 packed, 0 on demand), then for packed storage the byte length `u64`
/// followed by the packed signs.
pub fn write_cache(path: &Path, key: &[u8; 32], labels: &LabelMatrix, trend: &TrendMatrix) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(key);
    buf.extend_from_slice(&(labels.n_genes() as u64).to_le_bytes());
    buf.extend_from_slice(&(labels.n_conditions() as u64).to_le_bytes());
    for k in labels.granule_counts() {
        buf.extend_from_slice(&k.to_le_bytes());
    }
    for l in &labels.labels {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    match &trend.storage {
        Storage::Packed { data, .. } => {
            buf.push(1);
            buf.extend_from_slice(&(data.len() as u64).to_le_bytes());
            buf.extend_from_slice(data);
        }
        Storage::OnDemand { .. } => buf.push(0),
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Cache("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads a cache file. Returns `Ok(None)` when the file does not exist or
/// was written for a different key.
pub fn read_cache(path: &Path, key: &[u8; 32]) -> Result<Option<(LabelMatrix, TrendMatrix)>> {
    let mut buf = Vec::new();
    match fs::File::open(path) {
        Ok(mut f) => f.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(8)? != CACHE_MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    if cur.u32()? != CACHE_VERSION {
        return Err(Error::Cache("unsupported version".into()));
    }
    if cur.take(32)? != key {
        return Ok(None);
    }
    let n = cur.u64()? as usize;
    let m = cur.u64()? as usize;
    let counts = (0..n).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
    let flat = (0..n * m).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
    let rows = flat.chunks(m.max(1)).map(<[u32]>::to_vec).collect();
    let labels = LabelMatrix::new(m, rows, counts).map_err(|e| Error::Cache(e.to_string()))?;
    let storage = match cur.take(1)?[0] {
        1 => {
            let len = cur.u64()? as usize;
            let data = cur.take(len)?.to_vec();
            let bytes_per_gene = (m * m.saturating_sub(1) / 2).div_ceil(4);
            if data.len() != n * bytes_per_gene {
                return Err(Error::Cache("packed payload has the wrong size".into()));
            }
            Storage::Packed { bytes_per_gene, data }
        }
        0 => Storage::OnDemand { labels: labels.clone() },
        t => return Err(Error::Cache(format!("unknown storage tag {t}"))),
    };
    let trend = TrendMatrix {
        n_genes: n,
        n_conditions: m,
        storage,
    };
    Ok(Some((labels, trend)))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn labels_of(rows: &[&[f64]], config: &GranulationConfig) -> Vec<Vec<u32>> {
        let m = ExpressionMatrix::from_values(rows.iter().map(|r| r.to_vec()).collect()).unwrap();
        let lm = build_label_matrix(&m, config).unwrap();
        (0..lm.n_genes()).map(|i| lm.row(i).to_vec()).collect()
    }

    #[test]
    fn degenerate_rows_label_directly() {
        let cfg = GranulationConfig::default();
        assert_eq!(labels_of(&[&[5.0, 5.0, 5.0]], &cfg), vec![vec![1, 1, 1]]);
        assert_eq!(labels_of(&[&[2.0, 6.0, 2.0, 6.0]], &cfg), vec![vec![1, 2, 1, 2]]);
    }

    #[test]
    fn shifted_rows_get_identical_labels_at_zero_tau() {
        let base = [3.0, 9.0, 1.0, 4.0, 15.0, 2.0, 6.0, 22.0, 5.0];
        let shifted: Vec<f64> = base.iter().map(|v| v + 10.0).collect();
        let cfg = GranulationConfig {
            method: GranulationMethod::Jig,
            tau: 0.0,
            ..GranulationConfig::default()
        };
        let rows = labels_of(&[&base, &shifted], &cfg);
        assert_eq!(rows[0], rows[1]);
    }

    #[test]
    fn trend_examples() {
        let lm = LabelMatrix::from_rows(vec![vec![1, 2, 2, 3], vec![2, 2, 2, 2], vec![3, 1, 1, 1]]).unwrap();
        let t = build_trend_matrix(&lm);
        assert!(t.is_packed());
        assert!(t.column(0, 0).is_empty());
        assert_eq!(t.column(0, 1), vec![1]);
        assert_eq!(t.column(0, 2), vec![1, 0]);
        assert_eq!(t.column(0, 3), vec![1, 1, 1]);
        for m in 1..4 {
            assert!(t.column(1, m).iter().all(|&s| s == 0));
        }
        assert_eq!(t.column(2, 1), vec![-1]);
    }

    #[test]
    fn label_errors_carry_gene_name() {
        let m = ExpressionMatrix::from_values(vec![vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let cfg = GranulationConfig {
            method: GranulationMethod::Jig,
            tau: -1.0,
            ..GranulationConfig::default()
        };
        let err = build_label_matrix(&m, &cfg).unwrap_err();
        assert!(err.to_string().starts_with("gene g0:"), "{err}");
    }

    #[test]
    fn cache_round_trip_and_key_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let lm = LabelMatrix::from_rows(vec![vec![1, 3, 2, 2, 1], vec![2, 1, 1, 2, 2]]).unwrap();
        for mode in [TrendMode::Packed, TrendMode::OnDemand] {
            let t = build_trend_matrix_with(&lm, mode);
            let path = dir.path().join("trend.bin");
            write_cache(&path, &[7; 32], &lm, &t).unwrap();
            let (l2, t2) = read_cache(&path, &[7; 32]).unwrap().unwrap();
            assert_eq!(l2, lm);
            assert_eq!(t2, t);
            assert!(read_cache(&path, &[8; 32]).unwrap().is_none());
        }
        assert!(read_cache(&dir.path().join("missing"), &[0; 32]).unwrap().is_none());
    }

    #[test]
    fn cache_key_tracks_config_and_values() {
        let m = ExpressionMatrix::from_values(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let m2 = ExpressionMatrix::from_values(vec![vec![1.0, 2.0, 3.5]]).unwrap();
        let a = GranulationConfig::default();
        let b = GranulationConfig {
            method: GranulationMethod::Jig,
            ..GranulationConfig::default()
        };
        assert_ne!(cache_key(&m, &a).unwrap(), cache_key(&m, &b).unwrap());
        assert_ne!(cache_key(&m, &a).unwrap(), cache_key(&m2, &a).unwrap());
        assert_eq!(cache_key(&m, &a).unwrap(), cache_key(&m, &a).unwrap());
    }

    proptest! {
        #[test]
        fn stored_signs_match_recomputation(
            rows in (1usize..20, 2usize..15).prop_flat_map(|(n, m)| prop::collection::vec(prop::collection::vec(1u32..=5, m), n))
        ) {
            let lm = LabelMatrix::from_rows(rows.clone()).unwrap();
            let packed = build_trend_matrix_with(&lm, TrendMode::Packed);
            let lazy = build_trend_matrix_with(&lm, TrendMode::OnDemand);
            for (n, r) in rows.iter().enumerate() {
                for m in 1..r.len() {
                    for k in 0..m {
                        let expected = (r[m] as i64 - r[k] as i64).signum() as i8;
                        prop_assert_eq!(packed.get(n, m, k), expected);
                        prop_assert_eq!(lazy.get(n, m, k), expected);
                    }
                }
            }
        }
    }
}
