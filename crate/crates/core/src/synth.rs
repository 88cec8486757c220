//! Synthetic expression matrices with planted coherent blocks, and the
//! metrics used to score mined biclusters against them.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bicluster::{cell_jaccard, Bicluster, Provenance};
use crate::error::{Error, Result};
use crate::matrix::ExpressionMatrix;
use crate::score;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    /// `base[j] + factor[i]`: zero MSR and zero MFD when noise-free.
    Additive,
    /// `base[j] * factor[i]`: nonzero MSR, zero MFD when noise-free.
    Scaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedBlock {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub pattern: Pattern,
    /// One value per block column.
    pub base: Vec<f64>,
    /// One offset (additive) or scale (scaling) per block row.
    pub factors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_genes: usize,
    pub n_conds: usize,
    pub planted: Vec<PlantedBlock>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// One additive block on randomly chosen rows and columns. Base values are
    /// uniform in `[-amplitude, amplitude]`, row offsets standard normal.
    pub fn single_block(
        n_genes: usize,
        n_conds: usize,
        block_rows: usize,
        block_cols: usize,
        amplitude: f64,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        if block_rows > n_genes || block_cols > n_conds {
            return Err(Error::Parameter("planted block larger than the matrix".into()));
        }
        let mut rng = seed::rng(seed, seed::STAGE_SYNTH, 1);
        let mut rows = sample(&mut rng, n_genes, block_rows).into_vec();
        let mut cols = sample(&mut rng, n_conds, block_cols).into_vec();
        rows.sort_unstable();
        cols.sort_unstable();
        let base = (0..block_cols).map(|_| rng.gen_range(-amplitude..=amplitude)).collect();
        let factors = (0..block_rows).map(|_| rng.sample(StandardNormal)).collect();
        Ok(SynthSpec {
            n_genes,
            n_conds,
            planted: vec![PlantedBlock {
                rows,
                cols,
                pattern: Pattern::Additive,
                base,
                factors,
            }],
            noise_sigma,
            seed,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Parameter("noise_sigma must be non-negative".into()));
        }
        for (b, block) in self.planted.iter().enumerate() {
            if block.rows.is_empty() || block.cols.len() < 2 {
                return Err(Error::Parameter(format!("block {b} needs a row and two columns")));
            }
            if block.base.len() != block.cols.len() || block.factors.len() != block.rows.len() {
                return Err(Error::Parameter(format!("block {b} pattern does not match its shape")));
            }
            if block.rows.iter().any(|&i| i >= self.n_genes) || block.cols.iter().any(|&j| j >= self.n_conds) {
                return Err(Error::Parameter(format!("block {b} does not fit in the matrix")));
            }
            // blocks may not share rows: a planted row's range belongs to its block
            if block.rows.iter().any(|i| self.planted[..b].iter().any(|o| o.rows.contains(i))) {
                return Err(Error::Parameter(format!("block {b} overlaps an earlier block")));
            }
            if block.cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Parameter(format!("block {b} columns must be ascending")));
            }
        }
        Ok(())
    }
}

/// Builds the matrix and the ground-truth biclusters.
///
/// Background cells are standard normal. Planted cells follow the block
/// pattern plus `N(0, noise_sigma)` noise. The off-block cells of a planted
/// row are drawn uniformly from the span of that row's block cells, so the
/// block determines the row's range and its slope angles while the other
/// columns carry no shared trend.
pub fn generate(spec: &SynthSpec) -> Result<(ExpressionMatrix, Vec<Bicluster>)> {
    spec.validate()?;
    let (n, m) = (spec.n_genes, spec.n_conds);
    if n < 1 || m < 2 {
        return Err(Error::Parameter("matrix must be at least 1x2".into()));
    }
    let mut rng = seed::rng(spec.seed, seed::STAGE_SYNTH, 0);
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Parameter(e.to_string()))?;

    let mut truth = Vec::with_capacity(spec.planted.len());
    for (b, block) in spec.planted.iter().enumerate() {
        for (a, &i) in block.rows.iter().enumerate() {
            let row = &mut rows[i];
            let factor = block.factors[a];
            for (k, &j) in block.cols.iter().enumerate() {
                let clean = match block.pattern {
                    Pattern::Additive => block.base[k] + factor,
                    Pattern::Scaling => block.base[k] * factor,
                };
                row[j] = clean + noise.sample(&mut rng);
            }
            let (lo, hi) = block
                .cols
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &j| (lo.min(row[j]), hi.max(row[j])));
            for (j, cell) in row.iter_mut().enumerate() {
                if block.cols.binary_search(&j).is_err() {
                    *cell = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                }
            }
        }
        truth.push(Bicluster::new(
            block.rows.clone(),
            block.cols.clone(),
            Provenance::Planted { index: b },
        ));
    }

    let matrix = ExpressionMatrix::from_values(rows)?;
    let angles = score::slope_angles(&matrix);
    for t in truth.iter_mut() {
        t.msr = score::msr(&matrix, &t.rows, &t.cols);
        t.mfd = score::mfd(&matrix, &angles, &t.rows, &t.cols);
    }
    Ok((matrix, truth))
}

/// `(relevance, recovery)`: mean best cell-Jaccard of each found bicluster
/// against the truth, and of each true bicluster against the found ones.
pub fn recovery_score(found: &[Bicluster], truth: &[Bicluster]) -> Result<(f64, f64)> {
    if truth.is_empty() {
        return Err(Error::Parameter("ground truth is empty".into()));
    }
    if found.is_empty() {
        return Ok((0.0, 0.0));
    }
    let best = |x: &Bicluster, against: &[Bicluster]| {
        against.iter().map(|y| cell_jaccard(x, y)).fold(0.0, f64::max)
    };
    let relevance = found.iter().map(|f| best(f, truth)).sum::<f64>() / found.len() as f64;
    let recovery = truth.iter().map(|t| best(t, found)).sum::<f64>() / truth.len() as f64;
    Ok((relevance, recovery))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub name: String,
    pub mean_mfd: f64,
    pub stddev_mfd: f64,
    /// Number of biclusters actually summarized.
    pub used: usize,
    /// Set when the list was shorter than the requested `top_k`.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfdReport {
    pub top_k: usize,
    pub methods: Vec<MethodSummary>,
}

/// Mean and population standard deviation of the `top_k` lowest MFDs per
/// method, in the given method order.
pub fn compare_mfd(methods: &[(String, Vec<Bicluster>)], top_k: usize) -> Result<MfdReport> {
    if top_k == 0 {
        return Err(Error::Parameter("top_k must be positive".into()));
    }
    let mut summaries = Vec::with_capacity(methods.len());
    for (name, list) in methods {
        if list.is_empty() {
            return Err(Error::Parameter(format!("method {name} has no biclusters")));
        }
        let mut mfds: Vec<f64> = list.iter().map(|b| b.mfd).collect();
        mfds.sort_by(f64::total_cmp);
        let used = top_k.min(mfds.len());
        let top = &mfds[..used];
        let mean = top.iter().sum::<f64>() / used as f64;
        let var = top.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / used as f64;
        summaries.push(MethodSummary {
            name: name.clone(),
            mean_mfd: mean,
            stddev_mfd: var.sqrt(),
            used,
            truncated: used < top_k,
        });
    }
    Ok(MfdReport {
        top_k,
        methods: summaries,
    })
}
