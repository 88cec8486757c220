//! `gbc`: granular biclustering of expression matrices from the command line.
//!
//! Every stage runs standalone on files: `granulate` writes the trend cache,
//! `mine` reads it and writes initial biclusters, `refine` ranks refined
//! ones. `run` does all of it in one go.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gbc_core::cc::{cc_mine, CcConfig};
use gbc_core::io::{self, LoadOptions, OutputFormat};
use gbc_core::jig::WindowRule;
use gbc_core::pipeline::{self, StageTiming};
use gbc_core::synth::{self, SynthSpec};
use gbc_core::trend::GranulationMethod;
use gbc_core::{score, search, Bicluster, ExpressionMatrix, RunConfig};

#[derive(Parser)]
#[command(name = "gbc", version, about = "Granular biclustering of gene expression matrices")]
struct Cli {
    /// Worker thread cap; results do not depend on it.
    #[arg(long, global = true, env = "GBC_THREADS")]
    threads: Option<usize>,
    /// Also write stage timings as JSON to this file (they always go to stderr).
    #[arg(long, global = true)]
    timings: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Granulate every row and write the label and trend matrices to a cache file.
    Granulate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        cache: PathBuf,
    },
    /// Mine initial biclusters from the trend cache (rebuilt on a miss).
    Mine {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Bicluster list (JSON) for `refine`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine a bicluster list, drop duplicates and keep the best by MFD.
    Refine {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Bicluster list written by `mine`.
        #[arg(long)]
        biclusters: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Full pipeline: granulate, mine, refine, rank.
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Run bundle (JSON): resolved config, counts, biclusters, notes.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Generate a matrix with one planted additive block.
    Synth {
        #[arg(long, default_value_t = 200)]
        genes: usize,
        #[arg(long, default_value_t = 40)]
        conditions: usize,
        #[arg(long, default_value_t = 20)]
        block_genes: usize,
        #[arg(long, default_value_t = 12)]
        block_conditions: usize,
        /// Block base values are uniform in [-amplitude, amplitude].
        #[arg(long, default_value_t = 30.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Full generator spec (JSON); overrides the shape flags.
        #[arg(long, conflicts_with_all = ["genes", "conditions", "block_genes", "block_conditions", "amplitude", "sigma", "seed"])]
        spec: Option<PathBuf>,
        /// Matrix output (CSV).
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth bicluster list (JSON).
        #[arg(long)]
        truth: PathBuf,
    },
    /// Score found biclusters against ground truth by cell Jaccard.
    Eval {
        #[arg(long)]
        found: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Score only the first k found biclusters.
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Cheng-Church delta-biclusters with random masking.
    BaselineCc {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 1200.0)]
        delta: f64,
        #[arg(long, default_value_t = 1.2)]
        alpha: f64,
        #[arg(long, default_value_t = 50)]
        n_biclusters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Mean and standard deviation of the top-k MFDs per method.
    Compare {
        /// `name=path` to a bicluster list or run bundle; repeat per method.
        #[arg(long = "method", value_name = "NAME=PATH", required = true)]
        methods: Vec<String>,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Expression matrix: header row of condition ids, first column gene ids.
    #[arg(long)]
    input: PathBuf,
    /// Force the field delimiter instead of detecting it.
    #[arg(long, value_enum)]
    delimiter: Option<Delimiter>,
    /// Replace missing cells with the row mean instead of failing.
    #[arg(long)]
    impute: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Delimiter {
    Comma,
    Tab,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Fcm,
    Jig,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct ReportArgs {
    /// Named results: bicluster records (json) or the long cell table (csv).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json, requires = "report")]
    format: Format,
}

/// Flags override fields of `--config`, which holds a run config or a run bundle.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Fuzziness coefficient for c-means.
    #[arg(long)]
    kappa: Option<f64>,
    /// Specificity decay for justifiable intervals.
    #[arg(long)]
    tau: Option<f64>,
    /// Window count per row; half the distinct values when unset.
    #[arg(long)]
    windows: Option<usize>,
    #[arg(long)]
    fcm_restarts: Option<usize>,
    #[arg(long)]
    pso_particles: Option<usize>,
    #[arg(long)]
    pso_iterations: Option<usize>,
    #[arg(long)]
    min_gene: Option<usize>,
    #[arg(long)]
    min_cond: Option<usize>,
    #[arg(long)]
    l0: Option<usize>,
    #[arg(long)]
    mst_rank: Option<usize>,
    #[arg(long)]
    overlap_jaccard: Option<f64>,
    /// MSR threshold for refinement deletions.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    max_passes: Option<usize>,
    #[arg(long)]
    top_n: Option<usize>,
}

impl ConfigArgs {
    fn build(&self, threads: Option<usize>) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => read_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(m) = self.method {
            c.granulation.method = match m {
                Method::Fcm => GranulationMethod::Fcm,
                Method::Jig => GranulationMethod::Jig,
            };
        }
        if let Some(v) = self.kappa {
            c.granulation.fcm.kappa = v;
        }
        if let Some(v) = self.tau {
            c.granulation.tau = v;
        }
        if let Some(v) = self.windows {
            c.granulation.windows = WindowRule::Fixed(v);
        }
        if let Some(v) = self.fcm_restarts {
            c.granulation.fcm.restarts = v;
        }
        if let Some(v) = self.pso_particles {
            c.granulation.pso.particles = v;
        }
        if let Some(v) = self.pso_iterations {
            c.granulation.pso.iterations = v;
        }
        if let Some(v) = self.min_gene {
            c.search.min_gene = v;
        }
        if let Some(v) = self.min_cond {
            c.search.min_cond = v;
        }
        if let Some(v) = self.l0 {
            c.search.l0 = v;
        }
        if let Some(v) = self.mst_rank {
            c.search.mst_rank = v;
        }
        if let Some(v) = self.overlap_jaccard {
            c.search.overlap_jaccard = Some(v);
        }
        if let Some(v) = self.delta {
            c.refine.delta = v;
        }
        if let Some(v) = self.max_passes {
            c.refine.max_passes = v;
        }
        if let Some(v) = self.top_n {
            c.top_n = v;
        }
        c.threads = threads;
        let c = c.resolved();
        c.validate()?;
        Ok(c)
    }
}

/// A run config, or the `config` block of a run bundle.
fn read_config(path: &Path) -> anyhow::Result<RunConfig> {
    let value: serde_json::Value = io::read_json(path)?;
    let block = match value.get("config") {
        Some(inner) if value.get("biclusters").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(block).with_context(|| format!("{}: not a run config", path.display()))
}

impl InputArgs {
    fn load(&self) -> anyhow::Result<ExpressionMatrix> {
        let options = LoadOptions {
            delimiter: self.delimiter.map(|d| match d {
                Delimiter::Comma => b',',
                Delimiter::Tab => b'\t',
            }),
            impute_row_mean: self.impute,
        };
        Ok(io::load_matrix(&self.input, options)?)
    }
}

impl ReportArgs {
    fn emit(&self, matrix: &ExpressionMatrix, list: &[Bicluster]) -> anyhow::Result<()> {
        if let Some(path) = &self.report {
            let format = match self.format {
                Format::Json => OutputFormat::Json,
                Format::Csv => OutputFormat::Csv,
            };
            io::emit_results(matrix, list, path, format)?;
        }
        Ok(())
    }
}

/// A bicluster list, or the biclusters of a run bundle.
fn read_biclusters(path: &Path) -> anyhow::Result<Vec<Bicluster>> {
    let value: serde_json::Value = io::read_json(path)?;
    let list = match value.get("biclusters") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(list).with_context(|| format!("{}: not a bicluster list", path.display()))
}

fn check_fits(list: &[Bicluster], matrix: &ExpressionMatrix, path: &Path) -> anyhow::Result<()> {
    for (k, b) in list.iter().enumerate() {
        let rows_ok = !b.rows.is_empty() && b.rows.iter().all(|&i| i < matrix.n_genes());
        let cols_ok = b.cols.len() >= 2 && b.cols.iter().all(|&j| j < matrix.n_conditions());
        let sorted = b.rows.windows(2).all(|w| w[0] < w[1]) && b.cols.windows(2).all(|w| w[0] < w[1]);
        if !(rows_ok && cols_ok && sorted) {
            bail!(
                "{}: bicluster {k} does not fit the {}x{} matrix",
                path.display(),
                matrix.n_genes(),
                matrix.n_conditions()
            );
        }
    }
    Ok(())
}

struct Timer {
    timings: Vec<StageTiming>,
}

impl Timer {
    fn stage<T>(&mut self, stage: &str, f: impl FnOnce() -> anyhow::Result<T>) -> anyhow::Result<T> {
        let start = Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

fn execute(cli: &Cli, timer: &mut Timer) -> anyhow::Result<()> {
    match &cli.command {
        Command::Granulate { input, config, cache } => {
            let cfg = config.build(cli.threads)?;
            let matrix = timer.stage("load", || input.load())?;
            let (labels, _) = timer.stage("granulate", || {
                Ok(pipeline::with_threads(cfg.threads, || {
                    pipeline::granulate(&matrix, &cfg.granulation, cfg.trend_mode, Some(cache))
                })??)
            })?;
            let granules: usize = labels.granule_counts().iter().map(|&c| c as usize).sum();
            println!(
                "granulated {} genes x {} conditions, {} granules, cache {}",
                labels.n_genes(),
                labels.n_conditions(),
                granules,
                cache.display()
            );
        }
        Command::Mine { input, config, cache, out } => {
            let cfg = config.build(cli.threads)?;
            let matrix = timer.stage("load", || input.load())?;
            let list = pipeline::with_threads(cfg.threads, || -> anyhow::Result<_> {
                let (_, trends) = timer.stage("granulate", || {
                    Ok(pipeline::granulate(&matrix, &cfg.granulation, cfg.trend_mode, cache.as_deref())?)
                })?;
                let angles = score::slope_angles(&matrix);
                let method = cfg.granulation.method.to_string();
                timer.stage("mine", || {
                    Ok(search::mine_initial(&trends, &matrix, &angles, &method, &cfg.search)?)
                })
            })??;
            io::write_json(out, &list)?;
            println!("{} initial biclusters", list.len());
        }
        Command::Refine {
            input,
            config,
            biclusters,
            out,
            report,
        } => {
            let cfg = config.build(cli.threads)?;
            let matrix = timer.stage("load", || input.load())?;
            let initial = read_biclusters(biclusters)?;
            check_fits(&initial, &matrix, biclusters)?;
            let angles = score::slope_angles(&matrix);
            let refined = timer.stage("refine", || {
                Ok(pipeline::with_threads(cfg.threads, || {
                    pipeline::refine_all(&matrix, &angles, &initial, &cfg.refine)
                })??)
            })?;
            let ranked = pipeline::finalize(refined, cfg.search.overlap_jaccard, cfg.top_n);
            io::write_json(out, &ranked)?;
            report.emit(&matrix, &ranked)?;
            println!("{} refined biclusters", ranked.len());
        }
        Command::Run {
            input,
            config,
            cache,
            out,
            report,
        } => {
            let cfg = config.build(cli.threads)?;
            let matrix = timer.stage("load", || input.load())?;
            let bundle = pipeline::run_pipeline_cached(&cfg, &matrix, cache.as_deref())?;
            timer.timings.extend(bundle.timings.iter().cloned());
            std::fs::write(out, bundle.to_json()?).with_context(|| format!("writing {}", out.display()))?;
            report.emit(&matrix, &bundle.biclusters)?;
            for note in &bundle.notes {
                eprintln!("note: {note}");
            }
            println!(
                "{} initial, {} kept; best mfd {}",
                bundle.initial_count,
                bundle.biclusters.len(),
                bundle.biclusters.first().map_or("-".to_string(), |b| format!("{:.6}", b.mfd))
            );
        }
        Command::Synth {
            genes,
            conditions,
            block_genes,
            block_conditions,
            amplitude,
            sigma,
            seed,
            spec,
            out,
            truth,
        } => {
            let spec: SynthSpec = match spec {
                Some(path) => io::read_json(path)?,
                None => SynthSpec::single_block(
                    *genes,
                    *conditions,
                    *block_genes,
                    *block_conditions,
                    *amplitude,
                    *sigma,
                    *seed,
                )?,
            };
            let (matrix, planted) = timer.stage("synth", || Ok(synth::generate(&spec)?))?;
            io::write_matrix(out, &matrix, b',')?;
            io::write_json(truth, &planted)?;
            println!(
                "{}x{} matrix, {} planted blocks",
                matrix.n_genes(),
                matrix.n_conditions(),
                planted.len()
            );
        }
        Command::Eval { found, truth, top_k } => {
            let mut found_list = read_biclusters(found)?;
            if let Some(k) = top_k {
                found_list.truncate(*k);
            }
            let truth_list = read_biclusters(truth)?;
            let (relevance, recovery) = synth::recovery_score(&found_list, &truth_list)?;
            println!(
                "{}",
                serde_json::json!({ "found": found_list.len(), "relevance": relevance, "recovery": recovery })
            );
        }
        Command::BaselineCc {
            input,
            delta,
            alpha,
            n_biclusters,
            seed,
            out,
            report,
        } => {
            let cfg = CcConfig {
                delta: *delta,
                alpha: *alpha,
                n_biclusters: *n_biclusters,
                mask_seed: *seed,
                ..CcConfig::default()
            };
            let matrix = timer.stage("load", || input.load())?;
            let list = timer.stage("cc", || {
                Ok(pipeline::with_threads(cli.threads, || cc_mine(&matrix, &cfg))??)
            })?;
            io::write_json(out, &list)?;
            report.emit(&matrix, &list)?;
            println!("{} cheng-church biclusters", list.len());
        }
        Command::Compare { methods, top_k } => {
            let mut lists = Vec::with_capacity(methods.len());
            for m in methods {
                let Some((name, path)) = m.split_once('=') else {
                    bail!("--method expects NAME=PATH, got {m:?}");
                };
                lists.push((name.to_string(), read_biclusters(Path::new(path))?));
            }
            let report = synth::compare_mfd(&lists, *top_k)?;
            for s in report.methods.iter().filter(|s| s.truncated) {
                eprintln!("warning: {} has only {} biclusters (top_k {})", s.name, s.used, report.top_k);
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

/// The context chain down to the first core error, whose message already
/// carries its own sources.
fn describe(err: &anyhow::Error) -> String {
    let mut parts = Vec::new();
    for e in err.chain() {
        parts.push(e.to_string());
        if e.downcast_ref::<gbc_core::Error>().is_some() {
            break;
        }
    }
    parts.join(": ")
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let invariant = err
        .chain()
        .filter_map(|e| e.downcast_ref::<gbc_core::Error>())
        .any(gbc_core::Error::is_invariant);
    if invariant {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let mut timer = Timer { timings: Vec::new() };
    let result = execute(&cli, &mut timer);
    for t in &timer.timings {
        eprintln!("timing {:<10} {:.3}s", t.stage, t.seconds);
    }
    let result = result.and_then(|()| match &cli.timings {
        Some(path) => Ok(io::write_json(path, &timer.timings)?),
        None => Ok(()),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
