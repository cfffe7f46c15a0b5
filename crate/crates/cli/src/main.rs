//! `marketareas`: equilibrium market areas on raster geographies.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use marketareas_core::pipeline;
use marketareas_core::RunConfig;

/// Log verbosity, e.g. `MARKETAREAS_LOG=info` or `debug`.
const LOG_ENV: &str = "MARKETAREAS_LOG";

#[derive(Parser)]
#[command(name = "marketareas", version, about = "Equilibrium market areas as additively weighted Voronoi tessellations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration: `key = value` lines, `#` comments.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for equilibrium prices and write prices, assignment and report.
    Solve(ConfigArgs),
    /// Tessellate with constant weights (zero unless `weights` is set).
    Tessellate(ConfigArgs),
    /// Write one distance raster per city.
    DistanceFields(ConfigArgs),
    /// Compare a candidate assignment raster (and a baseline) to a reference.
    Compare(ConfigArgs),
    /// Comparative statics for a population shock and an optional delta scan.
    Compstat(ConfigArgs),
    /// Write a seeded synthetic world and a run.cfg for it.
    Generate(ConfigArgs),
}

fn load(args: &ConfigArgs, needs_file: bool) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::read(path)?,
        None if needs_file => anyhow::bail!("--config <file> is required for this command"),
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&args.overrides)?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> String {
    cfg.paths.out_dir.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(a) => {
            let cfg = load(&a, true)?;
            let r = pipeline::cmd_solve(&cfg)?;
            println!(
                "solved {} cities in {} iterations (gradient {:.3e} <= {:.3e}); wrote {}",
                r.regions.len(),
                r.iterations,
                r.grad_inf_norm,
                r.tol,
                out_dir(&cfg)
            );
            for reg in &r.regions {
                println!("  {:<16} p = {:<22} cells = {}", reg.city_id, reg.price, reg.cells);
            }
        }
        Command::Tessellate(a) => {
            let cfg = load(&a, true)?;
            let (_, r) = pipeline::cmd_tessellate(&cfg)?;
            println!("region cells {:?}; wrote {}", r.region_cells, out_dir(&cfg));
        }
        Command::DistanceFields(a) => {
            let cfg = load(&a, true)?;
            let written = pipeline::cmd_distance_fields(&cfg)?;
            println!("wrote {} distance rasters to {}", written.len(), out_dir(&cfg));
        }
        Command::Compare(a) => {
            let cfg = load(&a, false)?;
            let r = pipeline::cmd_compare(&cfg)?;
            println!("{}", serde_json::to_string(&r).context("serializing the comparison")?);
        }
        Command::Compstat(a) => {
            let cfg = load(&a, true)?;
            let r = pipeline::cmd_compstat(&cfg)?;
            println!(
                "shock to city {}: responses {:?}, own effect largest: {}; wrote {}",
                r.report.shocked_city + 1,
                r.report.price_response,
                r.report.theorem2_holds,
                out_dir(&cfg)
            );
            if let Some(scan) = &r.delta_scan {
                println!("delta threshold: {:?}", scan.threshold);
            }
        }
        Command::Generate(a) => {
            let cfg = load(&a, false)?;
            let run = pipeline::cmd_generate(&cfg)?;
            println!("wrote {}", run.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
