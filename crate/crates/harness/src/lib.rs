//! Experiment runner for the `lowmem-experts` learners.
//!
//! Games are described by [`GameConfig`]; a run produces a [`GameTrace`]
//! that can be written as CSV plus a JSON sidecar with the configuration and
//! the effective parameters. [`run_suite`] plays many games in parallel and
//! reduces them to one [`SummaryRow`] per configuration.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use lowmem_experts::{ConfigError, GameConfig, GameTrace, Resolved, RunError};
use rayon::prelude::*;
use serde::Serialize;

mod stats;

pub use stats::{median, quantile};

/// Bumped whenever the CSV columns or the sidecar layout change.
pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 6] = [
    "day",
    "action",
    "alg_loss",
    "best_cum",
    "regret",
    "mem_words",
];

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("seed {seed} appears twice for the same configuration")]
    DuplicateSeed { seed: u64 },
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

impl HarnessError {
    /// The configuration was rejected before any day was played.
    pub fn config_error(&self) -> Option<&ConfigError> {
        match self {
            HarnessError::Run(RunError::Config(e)) => Some(e),
            _ => None,
        }
    }
}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Run(RunError::Config(e))
    }
}

/// One finished game.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub resolved: Resolved,
    pub trace: GameTrace,
}

pub fn run_one(config: &GameConfig, stride: u64) -> Result<RunOutput, HarnessError> {
    let (resolved, trace) = lowmem_experts::run_config(config, stride.max(1))?;
    log::debug!(
        "{} vs {} seed {}: regret {:.3}, peak {} words",
        config.algorithm,
        config.adversary,
        config.seed,
        trace.regret,
        trace.peak_words
    );
    Ok(RunOutput { resolved, trace })
}

fn float(x: f64) -> String {
    format!("{x:.6}")
}

/// Write the recorded rows as CSV with a header and LF line endings.
pub fn write_csv<W: Write>(trace: &GameTrace, out: W) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in &trace.rows {
        w.write_record([
            row.day.to_string(),
            row.action.to_string(),
            float(row.alg_loss),
            float(row.best_cum),
            float(row.regret),
            row.mem_words.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(trace: &GameTrace) -> String {
    let mut buf = Vec::new();
    write_csv(trace, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is ascii")
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub algo: String,
    pub adversary: String,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub epsilon: Option<f64>,
    pub space_budget: Option<usize>,
    pub mode: String,
    pub constants: Vec<String>,
    pub seed: u64,
    pub trace_stride: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveConstants {
    pub sample_rate: f64,
    pub size_threshold: f64,
    pub pool_cap: usize,
    pub merge_iters: usize,
    pub max_threads: usize,
    pub c_n: f64,
    pub c_adm: f64,
    pub squint_points: usize,
    pub gap: Option<f64>,
    pub noise: f64,
    pub bernoulli: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Effective {
    pub groups: usize,
    pub epoch_len: Option<u64>,
    pub threads: Option<usize>,
    pub epsilon: Option<f64>,
    pub block_size: Option<usize>,
    pub adversary_epsilon: Option<f64>,
    pub constants: EffectiveConstants,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    pub days: u64,
    pub recorded_rows: usize,
    pub cum_alg_loss: f64,
    pub best_expert_loss: f64,
    pub regret: f64,
    pub average_regret: f64,
    pub peak_words: usize,
    pub abstentions: u64,
    pub clamped_losses: u64,
}

impl RunStats {
    pub fn of(trace: &GameTrace) -> Self {
        RunStats {
            days: trace.days,
            recorded_rows: trace.rows.len(),
            cum_alg_loss: trace.cum_alg_loss,
            best_expert_loss: trace.best_expert_loss,
            regret: trace.regret,
            average_regret: trace.average_regret(),
            peak_words: trace.peak_words,
            abstentions: trace.abstentions,
            clamped_losses: trace.clamped_losses,
        }
    }
}

/// Sidecar written next to every CSV trace.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub schema_version: u32,
    pub generator: String,
    pub config: ConfigEcho,
    pub effective: Effective,
    pub summary: RunStats,
}

impl Meta {
    pub fn new(out: &RunOutput) -> Self {
        let r = &out.resolved;
        let c = &r.config;
        let k = &r.constants;
        Meta {
            schema_version: SCHEMA_VERSION,
            generator: concat!("lowmem ", env!("CARGO_PKG_VERSION")).to_owned(),
            config: ConfigEcho {
                algo: c.algorithm.to_string(),
                adversary: c.adversary.to_string(),
                n: c.n,
                horizon: c.horizon,
                epsilon: c.epsilon,
                space_budget: c.space_budget,
                mode: c.mode.to_string(),
                constants: c
                    .overrides
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect(),
                seed: c.seed,
                trace_stride: out.trace.stride,
            },
            effective: Effective {
                groups: r.groups,
                epoch_len: r.epoch_len,
                threads: r.threads,
                epsilon: r.epsilon,
                block_size: r.block_size,
                adversary_epsilon: r.adversary_epsilon(),
                constants: EffectiveConstants {
                    sample_rate: k.pool.sample_rate,
                    size_threshold: k.pool.size_threshold,
                    pool_cap: k.pool.pool_cap,
                    merge_iters: k.pool.merge_iters,
                    max_threads: k.max_threads,
                    c_n: k.adaptive.c_n,
                    c_adm: k.adaptive.c_adm,
                    squint_points: k.squint_points,
                    gap: k.gap,
                    noise: k.noise,
                    bernoulli: k.bernoulli,
                },
            },
            summary: RunStats::of(&out.trace),
        }
    }
}

/// `runs/a.csv` -> `runs/a.meta.json`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// Write the CSV to `path` and its sidecar next to it.
pub fn write_run(out: &RunOutput, path: &Path) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(&out.trace, BufWriter::new(File::create(path)?))?;
    let mut meta = BufWriter::new(File::create(meta_path(path))?);
    serde_json::to_writer_pretty(&mut meta, &Meta::new(out))?;
    meta.write_all(b"\n")?;
    meta.flush()?;
    Ok(())
}

/// Aggregate over all seeds of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: String,
    pub runs: usize,
    pub regret_median: f64,
    pub regret_q10: f64,
    pub regret_q90: f64,
    pub avg_regret_median: f64,
    pub avg_loss_median: f64,
    pub best_loss_median: f64,
    pub peak_words_median: f64,
    pub peak_words_max: usize,
}

/// Human-readable key of a configuration, seed excluded.
pub fn config_label(c: &GameConfig) -> String {
    let mut s = format!(
        "{}/{}/n={}/T={}/{}",
        c.algorithm, c.adversary, c.n, c.horizon, c.mode
    );
    if let Some(e) = c.epsilon {
        s.push_str(&format!("/eps={e}"));
    }
    if let Some(b) = c.space_budget {
        s.push_str(&format!("/S={b}"));
    }
    for (k, v) in &c.overrides {
        s.push_str(&format!("/{k}={v}"));
    }
    s
}

impl SummaryRow {
    pub fn of(label: String, runs: &[&RunStats]) -> Self {
        let pick = |f: fn(&RunStats) -> f64| runs.iter().map(|r| f(r)).collect::<Vec<_>>();
        let regret = pick(|r| r.regret);
        SummaryRow {
            label,
            runs: runs.len(),
            regret_median: median(&regret),
            regret_q10: quantile(&regret, 0.1),
            regret_q90: quantile(&regret, 0.9),
            avg_regret_median: median(&pick(|r| r.average_regret)),
            avg_loss_median: median(&pick(|r| r.cum_alg_loss / r.days as f64)),
            best_loss_median: median(&pick(|r| r.best_expert_loss / r.days as f64)),
            peak_words_median: median(&pick(|r| r.peak_words as f64)),
            peak_words_max: runs.iter().map(|r| r.peak_words).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    /// Per-game stats in input order.
    pub runs: Vec<(GameConfig, RunStats)>,
    /// One row per distinct configuration, in order of first appearance.
    pub summary: Vec<SummaryRow>,
}

impl SuiteReport {
    pub fn row(&self, label: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.label == label)
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        for row in &self.summary {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Play every configuration, `parallelism` games at a time (0 picks the
/// number of cores), keeping only the final row of each trace.
pub fn run_suite(configs: &[GameConfig], parallelism: usize) -> Result<SuiteReport, HarnessError> {
    run_suite_with(configs, parallelism, None, |_| Ok(()))
}

/// Like [`run_suite`], handing each finished game to `sink` first.
/// `stride` defaults to the horizon.
pub fn run_suite_with<F>(
    configs: &[GameConfig],
    parallelism: usize,
    stride: Option<u64>,
    sink: F,
) -> Result<SuiteReport, HarnessError>
where
    F: Fn(&RunOutput) -> Result<(), HarnessError> + Sync,
{
    let labels: Vec<String> = configs.iter().map(config_label).collect();
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        match groups.iter_mut().find(|(l, _)| l == label) {
            Some((_, members)) => {
                let seed = configs[i].seed;
                if members.iter().any(|&j| configs[j].seed == seed) {
                    return Err(HarnessError::DuplicateSeed { seed });
                }
                members.push(i);
            }
            None => groups.push((label.clone(), vec![i])),
        }
    }
    for c in configs {
        c.resolve()?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()?;
    let stats: Vec<RunStats> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| {
                let out = run_one(c, stride.unwrap_or(c.horizon))?;
                sink(&out)?;
                Ok(RunStats::of(&out.trace))
            })
            .collect::<Result<_, HarnessError>>()
    })?;

    let summary = groups
        .into_iter()
        .map(|(label, members)| {
            let runs: Vec<&RunStats> = members.iter().map(|&i| &stats[i]).collect();
            SummaryRow::of(label, &runs)
        })
        .collect();
    Ok(SuiteReport {
        runs: configs.iter().cloned().zip(stats).collect(),
        summary,
    })
}

/// `seeds` consecutive seeds starting at `config.seed`.
pub fn seed_sweep(config: &GameConfig, seeds: u64) -> Vec<GameConfig> {
    (0..seeds.max(1))
        .map(|k| config.clone().with_seed(config.seed.wrapping_add(k)))
        .collect()
}
