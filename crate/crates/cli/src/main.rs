use std::path::PathBuf;
use std::process::ExitCode;

use autores_cli::{load_config, run, CliError, Command};
use autores_core::analysis::Engine;
use clap::{Parser, Subcommand};

/// Autoresonant readout simulations: spectra, nonlinearity, chirped
/// transients, S-curves, fidelity and threshold maps.
#[derive(Parser, Debug)]
#[command(name = "autores", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Run configuration (TOML), or a CSV file written by this tool.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir` (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Ensemble seed; overrides `ensemble.seed0`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Never changes the results.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Simulation engine; overrides `engine.kind`.
    #[arg(long, global = true)]
    engine: Option<Engine>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Dressed branches and avoided crossings over a detuning sweep.
    Spectrum,
    /// Effective nonlinearity λ over a detuning sweep.
    Nonlinearity,
    /// Single-shot and ensemble-averaged chirp transients.
    Chirp,
    /// Capture probability versus drive amplitude.
    Scurve,
    /// Ground and excited S-curves and their readout fidelity.
    Fidelity,
    /// State-dependent thresholds versus detuning.
    ThresholdMap,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Spectrum => Command::Spectrum,
            Sub::Nonlinearity => Command::Nonlinearity,
            Sub::Chirp => Command::Chirp,
            Sub::Scurve => Command::Scurve,
            Sub::Fidelity => Command::Fidelity,
            Sub::ThresholdMap => Command::ThresholdMap,
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let cmd = Command::from(cli.command);
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config {
        path: "--config".into(),
        reason: "a configuration file is required".into(),
    })?;
    let (recorded, mut cfg) = load_config(path)?;
    if let Some(r) = recorded {
        if r != cmd {
            return Err(CliError::Config {
                path: "--config".into(),
                reason: format!("file was produced by `{}`, not `{}`", r.name(), cmd.name()),
            });
        }
    }
    if let Some(seed) = cli.seed {
        cfg.ensemble.seed0 = seed;
    }
    if let Some(engine) = cli.engine {
        cfg.engine.kind = engine;
    }
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Config {
                path: "--jobs".into(),
                reason: "must be at least 1".into(),
            });
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Config {
        path: "--jobs".into(),
        reason: e.to_string(),
    })?;
    let outcome = pool.install(|| run(cmd, &cfg))?;
    for line in &outcome.summary {
        println!("{line}");
    }
    for p in outcome.files.write(&dir)? {
        println!("wrote {}", p.display());
    }
    Ok(outcome.partial)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("some sweep points failed; see the status column");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
