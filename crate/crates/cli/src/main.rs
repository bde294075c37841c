use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use codedmm::analysis::{analyze, computing_time};
use codedmm::selector::select;
use codedmm::sim::run_experiment;
use codedmm::{CodeChoice, Scheme};
use codedmm_cli::output::{csv_bytes, emit, json_bytes};
use codedmm_cli::sweep::run_sweep;
use codedmm_cli::table::table_rows;
use codedmm_cli::verify::run_verify;
use codedmm_cli::{ExperimentConfig, Format, Preset};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "codedmm", version, about = "Coded distributed matrix multiplication experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Built-in parameter set; the config file and flags override it.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// JSON file with any subset of the configuration fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Selection rounds per worker count.
    #[arg(long)]
    rounds: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for Monte Carlo trials; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fixed-p comparison of every scheme over the configured worker counts.
    Table(Common),
    /// Average computing time versus N for each scheme and the adaptive selector.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Also estimate each row's time by simulation.
        #[arg(long)]
        simulate: bool,
    },
    /// Run the built-in checks and print a JSON report.
    Verify(Common),
    /// Pick the best code for one worker count and straggling parameter.
    Select {
        #[command(flatten)]
        common: Common,
        #[arg(long, short = 'n')]
        workers: usize,
        #[arg(long)]
        lambda: f64,
    },
    /// Simulate one code and compare with its analytic time.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scheme: Scheme,
        #[arg(long, short = 'p')]
        partitions: usize,
        #[arg(long, short = 'n')]
        workers: usize,
        #[arg(long)]
        lambda: f64,
    },
}

impl Common {
    fn resolve(&self, fallback: Preset) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path, self.preset, fallback)?,
            None => ExperimentConfig::preset(self.preset.unwrap_or(fallback)),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(trials) = self.trials {
            config.trials = trials;
        }
        if let Some(rounds) = self.rounds {
            config.rounds = rounds;
        }
        if self.out.is_some() {
            config.out = self.out.clone();
        }
        config.validate()?;
        Ok(config)
    }

    fn install<T: Send>(&self, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        match self.threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building thread pool")?
                .install(job),
            None => job(),
        }
    }
}

fn render<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => csv_bytes(rows),
        Format::Json => json_bytes(rows),
    }
}

#[derive(Serialize)]
struct SelectionRow {
    #[serde(rename = "N")]
    workers: usize,
    lambda: f64,
    scheme: Scheme,
    p: usize,
    k: usize,
    #[serde(rename = "T_analytic")]
    t_analytic: f64,
    storage_master: f64,
    storage_worker: f64,
    rho: f64,
    feasible_set_size: usize,
}

#[derive(Serialize)]
struct SimulationReport {
    scheme: Scheme,
    p: usize,
    #[serde(rename = "N")]
    workers: usize,
    lambda: f64,
    phi: f64,
    trials: usize,
    seed: u64,
    mean_completion: Option<f64>,
    std_error: Option<f64>,
    p50: Option<f64>,
    p95: Option<f64>,
    undecodable_fraction: f64,
    analytic_time: f64,
    success_probability: f64,
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Table(common) => {
            let config = common.resolve(Preset::Table1)?;
            let bytes = render(&table_rows(&config)?, common.format)?;
            emit(&bytes, config.out.as_deref())?;
        }
        Command::Sweep { common, simulate } => {
            let config = common.resolve(Preset::Fig1)?;
            let sweep = common.install(|| run_sweep(&config, simulate))?;
            let bytes = match common.format {
                Format::Csv => csv_bytes(&sweep.rows)?,
                Format::Json => json_bytes(&sweep)?,
            };
            emit(&bytes, config.out.as_deref())?;
        }
        Command::Verify(common) => {
            let config = common.resolve(Preset::Fig1)?;
            let report = common.install(|| run_verify(&config))?;
            emit(&json_bytes(&report)?, config.out.as_deref())?;
            return Ok(report.fatal_failures == 0);
        }
        Command::Select { common, workers, lambda } => {
            let config = common.resolve(Preset::Fig1)?;
            let result = select(&config.constraints(workers), lambda)?;
            let bytes = match common.format {
                Format::Csv => csv_bytes(&[SelectionRow {
                    workers,
                    lambda,
                    scheme: result.choice.scheme,
                    p: result.choice.partitions,
                    k: result.row.recovery_threshold,
                    t_analytic: result.objective_time,
                    storage_master: result.row.storage_master,
                    storage_worker: result.row.storage_worker,
                    rho: result.row.success_probability,
                    feasible_set_size: result.feasible_set_size,
                }])?,
                Format::Json => json_bytes(&result)?,
            };
            emit(&bytes, config.out.as_deref())?;
        }
        Command::Simulate {
            common,
            scheme,
            partitions,
            workers,
            lambda,
        } => {
            let config = common.resolve(Preset::Fig1)?;
            let choice = CodeChoice::new(scheme, partitions);
            let stats = common.install(|| Ok(run_experiment(choice, workers, lambda, config.phi, config.trials, config.seed)?))?;
            let row = analyze(choice, workers, config.k_dim, config.l_dim, config.phi, lambda)?;
            let report = SimulationReport {
                scheme,
                p: partitions,
                workers,
                lambda,
                phi: config.phi,
                trials: stats.trials,
                seed: config.seed,
                mean_completion: stats.mean_completion,
                std_error: stats.std_error,
                p50: stats.p50,
                p95: stats.p95,
                undecodable_fraction: stats.undecodable_fraction,
                analytic_time: computing_time(choice, workers, lambda)?,
                success_probability: row.success_probability,
            };
            let bytes = match common.format {
                Format::Csv => csv_bytes(&[&report])?,
                Format::Json => json_bytes(&report)?,
            };
            emit(&bytes, config.out.as_deref())?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
