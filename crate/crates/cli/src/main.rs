//! Command-line front end. Every command takes a JSON run configuration and
//! writes fixed-name artifacts plus a manifest into the output directory;
//! re-running the same config reuses checksum-verified artifacts.
//!
//! Exit codes: 0 success, 2 config error, 3 verification failure,
//! 4 numerical breakdown.

mod commands;
mod config;
mod fail;
mod manifest;
mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::RunConfig;
use crate::fail::{CliResult, Fail};
use crate::manifest::RunDir;
use crate::verify::WhichVerify;

#[derive(Parser)]
#[command(name = "landscape-lab", version, about = "Landscape-function laboratory for boxed Schrodinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration, JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's output_dir, then runs/<config stem>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides paths.seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to LANDSCAPE_LAB_THREADS, then 1.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the potential (and magnetic field, if configured) on the grid.
    GenModel,
    /// Solve the landscape equation and write the field plus a plottable CSV.
    Landscape,
    /// Heat-smooth the potential at the configured times.
    LocalLandscape,
    /// Compute the lowest eigenpairs and an index of their energies.
    Eigs,
    /// Survival-weighted path bound curves at sampled points.
    FkBound,
    /// Path estimate of the landscape with containment against the sparse solve.
    FkLandscape,
    /// Run one of the built-in checks and gate on its outcome.
    Verify {
        #[arg(value_enum)]
        which: WhichVerify,
    },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("landscape-lab: {}", f.message());
            f.code()
        }
    });
}

fn run(cli: Cli) -> CliResult<i32> {
    let Some(config_path) = cli.config else {
        return Err(Fail::Config("--config <path> is required".into()));
    };
    let mut cfg = RunConfig::load(&config_path)?;
    if let Some(s) = cli.seed {
        cfg.paths.seed = s;
    }
    let threads = cli
        .threads
        .or_else(|| std::env::var("LANDSCAPE_LAB_THREADS").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(1);
    // Core path sampling runs on the global pool; size it once up front.
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Fail::Config(format!("thread pool: {e}")))?;

    let out = cli
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| {
            let stem = config_path.file_stem().map(|s| s.to_string_lossy().into_owned());
            PathBuf::from("runs").join(stem.unwrap_or_else(|| "run".into()))
        });
    let grid = cfg.grid.build()?;
    let run = RunDir::open(&out, &cfg, threads, cli.seed)?;
    let mut ctx = Ctx { cfg, grid, run, stages: Vec::new() };

    let (name, passed) = match cli.command {
        Command::GenModel => (String::from("gen-model"), commands::gen_model(&mut ctx).map(|()| true)?),
        Command::Landscape => (String::from("landscape"), commands::landscape(&mut ctx).map(|()| true)?),
        Command::LocalLandscape => {
            (String::from("local-landscape"), commands::local_landscape_cmd(&mut ctx).map(|()| true)?)
        }
        Command::Eigs => (String::from("eigs"), commands::eigs(&mut ctx).map(|()| true)?),
        Command::FkBound => (String::from("fk-bound"), commands::fk_bound(&mut ctx).map(|()| true)?),
        Command::FkLandscape => {
            (String::from("fk-landscape"), commands::fk_landscape(&mut ctx).map(|()| true)?)
        }
        Command::Verify { which } => {
            (format!("verify {}", which.name()), verify::run(&mut ctx, which)?)
        }
    };

    let stages = std::mem::take(&mut ctx.stages);
    ctx.run.push_command(&name, stages);
    ctx.run.save()?;
    Ok(if passed { 0 } else { 3 })
}
