//! `gplab` — config-driven runs over the numerical laboratory: scattering
//! solves, mean-field ground states and flows, exact many-body sectors and
//! the renormalized-operator verification battery.

mod config;
mod report;
mod runner;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "gplab", version, about = "Numerical laboratory for dilute-Bose-gas dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Path to the sectioned key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every randomized suite in the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts and the report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the zero-energy scattering problem; emits scatter.json.
    Scatter {
        #[command(flatten)]
        common: CommonArgs,
        /// Square-well depth (overrides the config).
        #[arg(long)]
        depth: Option<f64>,
        /// Square-well radius (overrides the config).
        #[arg(long)]
        radius: Option<f64>,
        /// Radial grid spacing (overrides the config).
        #[arg(long)]
        dr: Option<f64>,
        /// Outer solve radius (overrides the config).
        #[arg(long)]
        r_max: Option<f64>,
        /// Two-column text file (r, V) with a tabulated potential.
        #[arg(long)]
        potential_file: Option<PathBuf>,
    },
    /// Minimize the trapped energy functional; writes the field and report.
    Groundstate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Propagate the free equation by split-step spectral stepping.
    EvolveGp {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evolve the exact N-boson state and the condensate reference together.
    EvolveManybody {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the operator-identity and inequality battery on one sector.
    VerifyOps {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Trapped ground-state depletion across particle numbers and depths.
    ExperimentTrappedDepletion {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn load_config(common: &CommonArgs) -> Result<config::RunConfig> {
    let (text, base) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            (text, base)
        }
        None => (String::new(), PathBuf::from(".")),
    };
    let mut cfg = match config::parse_config(&text, &base) {
        Ok(cfg) => cfg,
        Err(errors) => {
            eprintln!("configuration is invalid:");
            for e in &errors {
                eprintln!("  - {e}");
            }
            std::process::exit(2);
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (name, cfg) = match &cli.command {
        Command::Scatter { common, depth, radius, dr, r_max, potential_file } => {
            let mut cfg = load_config(common)?;
            if let Some(d) = depth {
                cfg.potential.depth = *d;
            }
            if let Some(r) = radius {
                cfg.potential.radius = *r;
            }
            if let Some(d) = dr {
                cfg.potential.dr = *d;
            }
            if let Some(r) = r_max {
                cfg.scatter.r_max = *r;
            }
            if let Some(p) = potential_file {
                cfg.potential.kind = config::PotentialKind::File;
                cfg.potential.file = Some(p.clone());
            }
            ("scatter", cfg)
        }
        Command::Groundstate { common } => ("groundstate", load_config(common)?),
        Command::EvolveGp { common } => ("evolve-gp", load_config(common)?),
        Command::EvolveManybody { common } => ("evolve-manybody", load_config(common)?),
        Command::VerifyOps { common } => ("verify-ops", load_config(common)?),
        Command::ExperimentTrappedDepletion { common } => {
            ("experiment-trapped-depletion", load_config(common)?)
        }
    };

    let echo = config::serialize_config(&cfg);
    let report = runner::run(name, &cfg, echo)?;
    for check in &report.checks {
        let status = if check.pass { "pass" } else { "FAIL" };
        println!(
            "{status}  {name} [{anchor}]: measured {measured:.6e} {cmp} {tol:.1e}",
            name = check.name,
            anchor = check.anchor,
            measured = check.measured,
            cmp = check.comparison,
            tol = check.tolerance,
        );
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "report: {} ({} checks, {:.2}s)",
        cfg.out_dir.join("report.json").display(),
        report.checks.len(),
        report.wall_seconds
    );
    if !report.pass {
        std::process::exit(1);
    }
    Ok(())
}
