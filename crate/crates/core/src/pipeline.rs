//! End-to-end run: granulate, build trends, mine chains, refine, rank.

use std::collections::HashSet;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bicluster::Bicluster;
use crate::error::{Error, Result};
use crate::matrix::ExpressionMatrix;
use crate::refine::{self, RefineConfig};
use crate::score::{self, SlopeAngleMatrix};
use crate::search::{self, SearchConfig};
use crate::trend::{self, GranulationConfig, LabelMatrix, TrendMatrix, TrendMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Root of every random stream in the run.
    pub seed: u64,
    pub granulation: GranulationConfig,
    pub search: SearchConfig,
    pub refine: RefineConfig,
    /// Number of biclusters kept after refinement.
    pub top_n: usize,
    pub trend_mode: TrendMode,
    /// Worker thread cap; results do not depend on it, so it is not serialized.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            granulation: GranulationConfig::default(),
            search: SearchConfig::default(),
            refine: RefineConfig::default(),
            top_n: 50,
            trend_mode: TrendMode::default(),
            threads: None,
        }
    }
}

impl RunConfig {
    /// Copies the root seed into the granulation stage and the search size
    /// floors into refinement.
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.clone();
        c.granulation.seed = c.seed;
        c.refine.min_gene = c.search.min_gene;
        c.refine.min_cond = c.search.min_cond;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        self.refine.validate()?;
        if self.top_n == 0 {
            return Err(Error::Parameter("top_n must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Parameter("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Everything a run produced. Timings vary between runs and are kept out of
/// the serialized form so that equal inputs give byte-identical bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunBundle {
    pub config: RunConfig,
    pub n_genes: usize,
    pub n_conditions: usize,
    pub initial_count: usize,
    pub biclusters: Vec<Bicluster>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

impl RunBundle {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Runs `f` on a pool capped at `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Parameter(format!("cannot build a {n}-thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Label and trend matrices, read from `cache` when it holds a matching entry
/// and written there otherwise.
pub fn granulate(
    matrix: &ExpressionMatrix,
    config: &GranulationConfig,
    mode: TrendMode,
    cache: Option<&Path>,
) -> Result<(LabelMatrix, TrendMatrix)> {
    let key = match cache {
        Some(path) => {
            let key = trend::cache_key(matrix, config)?;
            if let Some(hit) = trend::read_cache(path, &key)? {
                return Ok(hit);
            }
            Some((path, key))
        }
        None => None,
    };
    let labels = trend::build_label_matrix(matrix, config)?;
    let trends = trend::build_trend_matrix_with(&labels, mode);
    if let Some((path, key)) = key {
        trend::write_cache(path, &key, &labels, &trends)?;
    }
    Ok((labels, trends))
}

/// Refines every bicluster (in parallel, results in input order).
pub fn refine_all(
    matrix: &ExpressionMatrix,
    angles: &SlopeAngleMatrix,
    list: &[Bicluster],
    config: &RefineConfig,
) -> Result<Vec<Bicluster>> {
    list.par_iter()
        .map(|b| refine::refine(matrix, angles, b, config))
        .collect()
}

/// Drops repeated cell sets, ranks by MFD and keeps the best `top_n`.
pub fn finalize(list: Vec<Bicluster>, overlap_jaccard: Option<f64>, top_n: usize) -> Vec<Bicluster> {
    let mut seen = HashSet::new();
    let unique: Vec<Bicluster> = list
        .into_iter()
        .filter(|b| seen.insert((b.rows.clone(), b.cols.clone())))
        .collect();
    let mut ranked = search::rank_biclusters(unique, overlap_jaccard);
    ranked.truncate(top_n);
    ranked
}

fn timed<T>(timings: &mut Vec<StageTiming>, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage));
    timings.push(StageTiming {
        stage: stage.to_string(),
        seconds: Duration::as_secs_f64(&start.elapsed()),
    });
    out
}

pub fn run_pipeline(config: &RunConfig, matrix: &ExpressionMatrix) -> Result<RunBundle> {
    run_pipeline_cached(config, matrix, None)
}

pub fn run_pipeline_cached(config: &RunConfig, matrix: &ExpressionMatrix, cache: Option<&Path>) -> Result<RunBundle> {
    let config = config.resolved();
    config.validate().map_err(|e| e.in_stage("config"))?;
    with_threads(config.threads, || run_stages(&config, matrix, cache))?
}

fn run_stages(config: &RunConfig, matrix: &ExpressionMatrix, cache: Option<&Path>) -> Result<RunBundle> {
    let mut timings = Vec::new();
    let (_, trends) = timed(&mut timings, "granulate", || {
        granulate(matrix, &config.granulation, config.trend_mode, cache)
    })?;
    let angles = timed(&mut timings, "angles", || Ok(score::slope_angles(matrix)))?;
    let method = config.granulation.method.to_string();
    let initial = timed(&mut timings, "mine", || {
        search::mine_initial(&trends, matrix, &angles, &method, &config.search)
    })?;
    let refined = timed(&mut timings, "refine", || refine_all(matrix, &angles, &initial, &config.refine))?;
    let biclusters = timed(&mut timings, "rank", || {
        Ok(finalize(refined, config.search.overlap_jaccard, config.top_n))
    })?;

    let mut notes = Vec::new();
    if initial.is_empty() {
        notes.push(format!(
            "no chain reached min_gene = {} rows and min_cond = {} conditions; lower them to get results",
            config.search.min_gene, config.search.min_cond
        ));
    }
    Ok(RunBundle {
        config: config.clone(),
        n_genes: matrix.n_genes(),
        n_conditions: matrix.n_conditions(),
        initial_count: initial.len(),
        biclusters,
        notes,
        timings,
    })
}
