//! `phasekey` experiment runner.
//!
//! Exit status: 0 when every check of the experiment passes, 1 when an
//! acceptance check fails, 2 on usage or configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::LazyLock;

use clap::{Parser, Subcommand};
use phasekey::harness::{run_experiment, ExperimentConfig, ExperimentKind, CONFIG_KEYS};

static CONFIG_HELP: LazyLock<String> = LazyLock::new(|| {
    let width = CONFIG_KEYS.iter().map(|(k, ..)| k.len()).max().unwrap_or(0);
    let mut s = String::from(
        "Config file keys (flat `key = value`, strings quoted; unknown keys are rejected):\n",
    );
    for (key, default, meaning) in CONFIG_KEYS {
        s.push_str(&format!(
            "  {key:<width$}  {meaning} [default: {default}]\n"
        ));
    }
    s.push_str("\nThe subcommand overrides `kind`; --seed and --out override `seed` and `output`.");
    s
});

#[derive(Debug, Parser)]
#[command(
    name = "phasekey",
    version,
    about = "Phase-reciprocity key-exchange simulator"
)]
#[command(after_long_help = CONFIG_HELP.as_str(), after_help = CONFIG_HELP.as_str())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct Common {
    /// Experiment config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Report CSV path, overriding the config.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kuiper uniformity of masked symbols, shared phases and Eve's observations.
    Uniformity(Common),
    /// Mutual information between Eve's observations and the shared phase.
    Leakage(Common),
    /// End-to-end key exchanges at the configured SNR.
    Exchange(Common),
    /// Key exchanges over a range of SNR values.
    Sweep(Common),
    /// Uniformity of phases from a recorded I/Q trace.
    Replay(Common),
}

impl Command {
    fn split(&self) -> (ExperimentKind, &Common) {
        match self {
            Command::Uniformity(c) => (ExperimentKind::Uniformity, c),
            Command::Leakage(c) => (ExperimentKind::Leakage, c),
            Command::Exchange(c) => (ExperimentKind::Exchange, c),
            Command::Sweep(c) => (ExperimentKind::Sweep, c),
            Command::Replay(c) => (ExperimentKind::Replay, c),
        }
    }
}

fn load(kind: ExperimentKind, args: &Common) -> phasekey::Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let mut c = ExperimentConfig::from_file(path)?;
            // A relative trace path is taken relative to the config file.
            let base = path.parent().unwrap_or(Path::new(""));
            if let Some(trace) = c.trace.as_mut().filter(|t| t.is_relative()) {
                *trace = base.join(&*trace);
            }
            c
        }
        None => ExperimentConfig::default(),
    };
    config.kind = kind;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output = out.clone();
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    let result = load(kind, args).and_then(|c| run_experiment(&c).map(|r| (c, r)));
    match result {
        Ok((config, report)) => {
            println!("{} (report: {})", report.summary, config.output.display());
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("phasekey: {e}");
            ExitCode::from(2)
        }
    }
}
