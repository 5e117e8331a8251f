use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use lowmem_experts::config::parse_override;
use lowmem_experts::{AdversaryKind, AlgorithmKind, ConstantMode, GameConfig};
use lowmem_harness::{
    run_one, run_suite_with, seed_sweep, write_csv, write_run, HarnessError, RunStats,
};

/// Play one learner against one adversary and write the trace as CSV.
///
/// With `--seeds k > 1` the games for seeds `seed..seed+k` run in parallel;
/// `--out` then names a directory that receives `seed_<s>.csv` per game and
/// `summary.csv`, and the summary is also printed to stdout.
#[derive(Debug, Parser)]
#[command(name = "lowmem", version)]
struct Cli {
    #[arg(long, value_name = "ALGO")]
    algo: AlgorithmKind,
    #[arg(long, value_name = "KIND")]
    adversary: AdversaryKind,
    /// Number of experts.
    #[arg(long)]
    n: usize,
    /// Horizon in days.
    #[arg(long = "T", alias = "horizon", value_name = "DAYS")]
    horizon: u64,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Memory budget in experts.
    #[arg(long = "space-budget", value_name = "S")]
    space_budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds to run.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value = "desk")]
    mode: ConstantMode,
    /// Constant overrides, e.g. `--constants pool_cap=32 gap=0.3`.
    #[arg(long, value_name = "KEY=VAL", num_args = 1.., value_parser = parse_kv)]
    constants: Vec<(String, String)>,
    /// CSV file (single seed) or directory (several seeds). Stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record every k-th day; the last day is always recorded.
    #[arg(long = "trace-stride", default_value_t = 1, value_name = "K")]
    trace_stride: u64,
    /// Concurrent games; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    parse_override(s).map_err(|e| e.to_string())
}

impl Cli {
    fn config(&self) -> GameConfig {
        let mut c =
            GameConfig::new(self.n, self.horizon, self.algo, self.adversary).with_seed(self.seed);
        c.epsilon = self.epsilon;
        c.space_budget = self.space_budget;
        c.mode = self.mode;
        c.overrides = self.constants.clone();
        c
    }
}

fn report(stats: &RunStats) {
    eprintln!(
        "days {} regret {:.4} avg_regret {:.6} peak_words {} abstentions {}",
        stats.days, stats.regret, stats.average_regret, stats.peak_words, stats.abstentions
    );
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let config = cli.config();
    let resolved = config.resolve()?;
    log::info!(
        "groups {} epoch {:?} threads {:?} eps {:?} block {:?}",
        resolved.groups,
        resolved.epoch_len,
        resolved.threads,
        resolved.epsilon,
        resolved.block_size
    );
    let stride = cli.trace_stride.max(1);

    if cli.seeds <= 1 {
        let out = run_one(&config, stride)?;
        match &cli.out {
            Some(path) => write_run(&out, path)?,
            None => write_csv(&out.trace, io::stdout().lock())?,
        }
        report(&RunStats::of(&out.trace));
        return Ok(());
    }

    let configs = seed_sweep(&config, cli.seeds);
    let dir = cli.out.clone();
    if let Some(d) = &dir {
        std::fs::create_dir_all(d)?;
    }
    let suite = run_suite_with(&configs, cli.jobs, Some(stride), |out| match &dir {
        Some(d) => write_run(
            out,
            &d.join(format!("seed_{}.csv", out.resolved.config.seed)),
        ),
        None => Ok(()),
    })?;
    if let Some(d) = &dir {
        suite.write_summary_csv(std::fs::File::create(d.join("summary.csv"))?)?;
    }
    let mut stdout = io::stdout().lock();
    suite.write_summary_csv(&mut stdout)?;
    stdout.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli).with_context(|| format!("{} vs {}", cli.algo, cli.adversary)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e
                .downcast_ref::<HarnessError>()
                .and_then(|h| h.config_error())
                .is_some();
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
