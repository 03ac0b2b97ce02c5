use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qrc_core::experiment::{
    characterize_to_dir, configure_threads, run, ExperimentConfig, Overrides, Suite, VERSION,
};

#[derive(Parser)]
#[command(name = "qrc", version, about = "Photonic quantum reservoir computing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results into the output directory.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run a parameter sweep and write sweep.csv.
    Characterize {
        /// memory, expressivity, task_sweep, counts_sweep, visibility_sweep, photon_sweep or feedback_sweep
        suite: String,
        config: PathBuf,
        /// Comma-separated grid values (use "inf" for exact probabilities).
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[command(flatten)]
        flags: Flags,
    },
    /// Check a configuration without running it and print it with defaults filled in.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Print the version string.
    Version,
}

#[derive(Args)]
struct Flags {
    /// Seed for data generation, shot sampling and search.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo replica count.
    #[arg(long)]
    replicas: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, env = "QRC_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Use exact outcome probabilities instead of sampled counts.
    #[arg(long)]
    noiseless: bool,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            replicas: self.replicas,
            output_dir: self.output_dir.clone(),
            noiseless: self.noiseless,
        }
    }
}

fn load(path: &Path, flags: &Flags) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(&flags.overrides());
    cfg.validate().map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(jobs) = flags.jobs {
        if jobs == 0 {
            return Err("--jobs must be at least 1".into());
        }
        configure_threads(jobs).map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<String, String> {
    let mut out = String::new();
    match cli.command {
        Command::Version => writeln!(out, "{VERSION}").unwrap(),
        Command::Validate { config, flags } => {
            let cfg = load(&config, &flags)?;
            let resolved = serde_json::to_string_pretty(&cfg.resolved()).map_err(|e| e.to_string())?;
            writeln!(out, "{}: valid\n{resolved}", config.display()).unwrap();
        }
        Command::Run { config, flags } => {
            let cfg = load(&config, &flags)?;
            let bundle = run(&cfg).map_err(|e| e.to_string())?;
            for (name, s) in &bundle.aggregate {
                writeln!(out, "{name}: median {:.6e}  std {:.3e}  (n={})", s.median, s.std, s.count).unwrap();
            }
            writeln!(out, "wrote {}", cfg.output_dir.display()).unwrap();
        }
        Command::Characterize {
            suite,
            config,
            grid,
            flags,
        } => {
            let suite: Suite = suite.parse().map_err(|e: qrc_core::Error| e.to_string())?;
            let cfg = load(&config, &flags)?;
            let rows = characterize_to_dir(suite, &cfg, grid.as_deref()).map_err(|e| e.to_string())?;
            writeln!(out, "{} rows written to {}", rows.len(), cfg.output_dir.join("sweep.csv").display())
                .unwrap();
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(out) => {
            // a closed pipe downstream is not a failure of the command
            let _ = std::io::stdout().lock().write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
