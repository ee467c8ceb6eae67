//! Command-line harness for the snowflake magnetostatics solver.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CliError;
use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "snowflake-fem", version, about = "Magnetic induction inside Koch snowflake conductors")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Flat TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    /// Highest snowflake level for `table1` and `mosco`.
    #[arg(long, global = true, value_name = "N")]
    max_n: Option<u32>,
    /// Override a configuration key, e.g. `--set eta=0.4`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the level-n boundary and write boundary.csv.
    Geometry {
        #[arg(long, short = 'n')]
        level: Option<u32>,
    },
    /// Build the graded mesh of the configured domain.
    Mesh {
        #[arg(long, short = 'n')]
        level: Option<u32>,
    },
    /// Solve on the configured domain and export mesh, solution and field.
    Solve {
        #[arg(long, short = 'n')]
        level: Option<u32>,
    },
    /// ‖B‖∞ on the circle and the snowflakes up to --max-n.
    Table1,
    /// H¹/L² error ladder against a nested reference.
    Convergence {
        #[arg(long, short = 'n')]
        level: Option<u32>,
        /// Number of study meshes (at least 4).
        #[arg(long)]
        levels: Option<usize>,
        /// Grisvard-graded meshes (default).
        #[arg(long, conflicts_with = "uniform")]
        graded: bool,
        /// Uniform refinement, no grading.
        #[arg(long)]
        uniform: bool,
    },
    /// ‖u_n − u_{n+1}‖ over consecutive snowflake levels.
    Mosco,
}

fn build_config(g: &GlobalArgs, command: &Command) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(g.config.as_deref(), &g.set).map_err(|e| CliError::Config(e.0))?;
    if let Some(out) = &g.out {
        cfg.out = out.clone();
    }
    if let Some(n) = g.max_n {
        cfg.max_n = n;
    }
    match command {
        Command::Geometry { level } | Command::Mesh { level } | Command::Solve { level } => {
            if let Some(n) = level {
                cfg.level = *n;
            }
        }
        Command::Convergence { level, levels, graded, uniform } => {
            if let Some(n) = level {
                cfg.level = *n;
            }
            if let Some(l) = levels {
                cfg.conv_levels = *l;
            }
            if *graded {
                cfg.conv_graded = true;
            }
            if *uniform {
                cfg.conv_graded = false;
            }
        }
        Command::Table1 | Command::Mosco => {}
    }
    cfg.validate().map_err(|e| CliError::Config(e.0))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = build_config(&cli.global, &cli.command)?;
    if let Some(k) = cli.global.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Geometry { .. } => commands::geometry(&cfg),
        Command::Mesh { .. } => commands::mesh(&cfg),
        Command::Solve { .. } => commands::solve(&cfg),
        Command::Table1 => commands::table1(&cfg),
        Command::Convergence { .. } => commands::convergence(&cfg),
        Command::Mosco => commands::mosco(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.stage());
            ExitCode::from(e.exit_code())
        }
    }
}
