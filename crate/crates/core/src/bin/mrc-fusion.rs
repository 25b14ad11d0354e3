use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mrc_fusion::experiment::{self, ExperimentConfig, Outcome, DEFAULT_SEED};
use mrc_fusion::{validation, Error};

#[derive(Parser)]
#[command(name = "mrc-fusion", version, about = "Detection performance of MRC decision fusion over a multi-antenna fading channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Channel-averaged ROC by quadrature alongside simulation.
    Roc(RunArgs),
    /// Histogram of the realized false-alarm rate under per-channel thresholds.
    ThresholdHist(RunArgs),
    /// Detection rate at a fixed false-alarm rate versus network size.
    PdVsK(RunArgs),
    /// Gini index over a grid of sensor and antenna counts.
    GiniSurface(RunArgs),
    /// Deflection curves and deflection-optimized local thresholds.
    DeflectionOpt(RunArgs),
    /// Area under the ROC for a single configuration.
    Auc(RunArgs),
    /// Built-in analytic-versus-simulation checks.
    Validate {
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured quadrature node count.
    #[arg(long)]
    nu: Option<usize>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn load(args: &RunArgs) -> Result<ExperimentConfig, String> {
    let text = fs::read_to_string(&args.config).map_err(|e| format!("{}: {e}", args.config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        cfg.mc.seed = seed;
    }
    if let Some(nu) = args.nu {
        cfg.gc.nu = nu;
    }
    cfg.check().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn write_outputs(dir: &Path, command: &str, cfg: &ExperimentConfig, outcome: &Outcome) -> Result<(), Error> {
    let io = |e: std::io::Error| Error::Format(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for (stem, table) in &outcome.tables {
        let file = fs::File::create(dir.join(format!("{stem}.csv"))).map_err(io)?;
        table.write_csv(std::io::BufWriter::new(file))?;
    }
    let sidecar = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "snr_linear": experiment::db_to_linear(cfg.system.snr_db),
        "seed": cfg.mc.seed,
        "c": cfg.gc.c,
        "summary": outcome.summary,
    });
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join(format!("{command}.json")), text + "\n").map_err(io)
}

fn run(command: &str, args: &RunArgs, driver: fn(&ExperimentConfig) -> mrc_fusion::Result<Outcome>) -> ExitCode {
    let cfg = match load(args) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = match driver(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{command} failed: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    if let Err(e) = write_outputs(&args.out, command, &cfg, &outcome) {
        eprintln!("writing outputs: {e}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Roc(a) => run("roc", a, experiment::run_roc),
        Command::ThresholdHist(a) => run("threshold-hist", a, experiment::run_threshold_hist),
        Command::PdVsK(a) => run("pd-vs-k", a, experiment::run_pd_vs_k),
        Command::GiniSurface(a) => run("gini-surface", a, experiment::run_gini_surface),
        Command::DeflectionOpt(a) => run("deflection-opt", a, experiment::run_deflection_opt),
        Command::Auc(a) => run("auc", a, experiment::run_auc),
        Command::Validate { seed } => {
            let checks = validation::run_all(seed.unwrap_or(DEFAULT_SEED));
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NUMERICAL)
            }
        }
    }
}
