use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bohm_ergo::scenarios::{execute, parse_config, ScenarioConfig, ScenarioError, ScenarioKind};

#[derive(Parser)]
#[command(
    name = "bohm-ergo",
    version,
    about = "Pilot-wave trajectory and ergodicity scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write its outputs.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; falls back to BOHM_ERGO_THREADS, then all cores.
        #[arg(long, env = "BOHM_ERGO_THREADS")]
        threads: Option<usize>,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// List built-in scenarios with their default configs.
    Scenarios,
}

fn load(path: &PathBuf) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.clone(),
        source,
    })?;
    parse_config(&text)
}

fn run(cli: Cli) -> Result<(), ScenarioError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            let mut cfg = load(&config)?;
            if seed.is_some() {
                cfg.seed = seed;
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| ScenarioError::Schema(format!("thread pool: {e}")))?;
            let summary = pool.install(|| execute(&cfg, &out))?;
            for (k, s) in &summary.statistics {
                println!("{k} = {} (n = {}, tol = {})", s.value, s.n, s.tolerance);
            }
            for f in &summary.flags {
                println!("flag: {f}");
            }
            println!("outputs written to {}", out.display());
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!("{}: ok", cfg.scenario.name());
        }
        Command::Scenarios => {
            for kind in ScenarioKind::ALL {
                let cfg = ScenarioConfig::builtin(kind);
                let json = serde_json::to_string_pretty(&cfg).expect("config serializes");
                println!("# {}: {}\n{json}\n", kind.name(), kind.describe());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
