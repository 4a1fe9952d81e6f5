// `!(a > b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod audits;
mod config;
mod error;
mod run;

use error::CliError;

/// Ricci flow experiments: scenario configs in, trajectories and audit reports out.
#[derive(Debug, Parser)]
#[command(name = "ricci-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve the configured scenario and run its audits.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output` from the config.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Multiplies the grid resolution: `nodes = (nodes - 1) * K + 1`.
        #[arg(long, default_value_t = 1)]
        resolution_scale: usize,
    },
    /// Re-run the audits of a config on a saved trajectory directory.
    Replay {
        /// A run directory or its `checkpoints` directory.
        trajectory: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print a listing for scripting.
    Describe { what: Topic },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Topic {
    Presets,
    Audits,
    Columns,
}

fn describe(topic: Topic) -> String {
    match topic {
        Topic::Presets => {
            let mut out = String::from("# ricci-lab presets v1\n");
            let params = [
                ("round_sphere", "radius=1"),
                ("dumbbell", "rho_b=1 rho_n=0.2 necks=1 width=0.35"),
                ("euclidean_cap", "radius=1"),
                ("cylinder_capped", "radius=0.5 length=8"),
                ("perturbed_sphere", "radius=1 depth=0.05 width=0.35"),
            ];
            for name in ricci_lab::flow::PRESET_NAMES {
                let p = params.iter().find(|(n, _)| *n == name).map_or("", |(_, p)| p);
                out.push_str(&format!("{name}\t{p}\n"));
            }
            out
        }
        Topic::Audits => audits::describe(),
        Topic::Columns => format!("{}\n", ricci_lab::estimates::CSV_COLUMNS.join(",")),
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Describe { what } => {
            print!("{}", describe(what));
            Ok(0)
        }
        Command::Run { config, output, threads, resolution_scale } => {
            if resolution_scale == 0 {
                return Err(CliError::Usage("--resolution-scale must be at least 1".into()));
            }
            let mut cfg = config::RunConfig::load(&config)?;
            cfg.nodes = (cfg.nodes - 1) * resolution_scale + 1;
            let out = run::output_dir(&cfg, output)?;
            pool(threads)?.install(|| run::run(&cfg, &out, None, resolution_scale))
        }
        Command::Replay { trajectory, config, output, threads } => {
            let cfg = config::RunConfig::load(&config)?;
            let out = run::output_dir(&cfg, output)?;
            pool(threads)?.install(|| run::run(&cfg, &out, Some(&trajectory), 1))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
