//! Command-line runner for soft-TTL cache experiments.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use softttl::experiments::{
    best_matching_shape, compare_with_reference, run_fairness_table, run_shape_sweep, run_singlerun, run_validate,
    sweep_csv, ExperimentConfig,
};
use softttl::solver_constrained::brute_force_oracle;
use softttl::{solve, Fairness, PolicyClass, SolveResult};

#[derive(Parser)]
#[command(name = "softttl", version, about = "Utility-optimal soft-TTL caching experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    capacity: Option<f64>,
    /// Fairness: a number `alpha != 1` or `max-min`.
    #[arg(long, global = true)]
    alpha: Option<Fairness>,
    /// Weibull shape applied to every file.
    #[arg(long, global = true)]
    shape: Option<f64>,
    /// Number of policy steps.
    #[arg(long = "K", global = true)]
    bins: Option<usize>,
    /// Step width.
    #[arg(long = "T", global = true)]
    step: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one policy class and write the result as JSON.
    Solve {
        #[arg(long, default_value = "soft")]
        class: PolicyClass,
    },
    /// Policies of all three classes for one file, sampled at bin edges.
    Singlerun {
        /// File whose policies are written.
        #[arg(long, default_value_t = 0)]
        file: usize,
    },
    /// Optimal objective of each class over a grid of Weibull shapes.
    ShapeSweep {
        /// Comma-separated shapes; defaults to the configured grid.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// First- and last-file utilities for several fairness settings.
    FairnessTable {
        /// Compare with the published table and search shapes on this grid.
        #[arg(long, value_delimiter = ',')]
        compare: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.02)]
        tolerance: f64,
    },
    /// Monte-Carlo check of the analytic utility and occupancy.
    Validate {
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Exhaustive grid search for small instances.
    Oracle {
        #[arg(long, default_value = "soft")]
        class: PolicyClass,
        #[arg(long, default_value_t = 32)]
        grid_steps: usize,
    },
}

fn load_config(common: &Common, base: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => base,
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(c) = common.capacity {
        cfg.capacity = c;
    }
    if let Some(f) = common.alpha {
        cfg.fairness = f;
    }
    if let Some(a) = common.shape {
        cfg = cfg.with_shape(a);
    }
    if let Some(k) = common.bins {
        cfg.bins = k;
    }
    if let Some(t) = common.step {
        cfg.step = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn summarize(name: &str, r: &SolveResult) {
    let utilities: Vec<String> = r.files.iter().map(|e| format!("{:.4}", e.utility)).collect();
    println!(
        "{name}: objective {:.6}, utilities [{}], occupancy {:.6} of {}",
        r.objective,
        utilities.join(", "),
        r.capacity_used(),
        r.diagnostics.capacity
    );
}

fn class_label(class: PolicyClass) -> &'static str {
    match class {
        PolicyClass::Soft => "soft",
        PolicyClass::Fractional => "fractional",
        PolicyClass::Ttl => "ttl",
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    // The fairness table compares files with different request rates.
    let base = match cli.command {
        Command::FairnessTable { .. } => ExperimentConfig::table_defaults(),
        _ => ExperimentConfig::default(),
    };
    let cfg = load_config(&cli.common, base)?;
    let out = &cli.common.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    match cli.command {
        Command::Solve { class } => {
            let r = solve(&cfg.instance()?, class)?;
            summarize(class_label(class), &r);
            write(out, &format!("solve_{}.json", class_label(class)), &json(&r)?)?;
        }
        Command::Singlerun { file } => {
            let run = run_singlerun(&cfg)?;
            anyhow::ensure!(file < cfg.files.len(), "file index {file} out of range");
            summarize("soft", &run.soft);
            summarize("fractional", &run.fractional);
            summarize("ttl", &run.ttl);
            write(out, "singlerun.csv", &run.to_csv(file))?;
            write(out, "singlerun.json", &json(&run)?)?;
        }
        Command::ShapeSweep { grid } => {
            let grid = grid.unwrap_or_else(|| cfg.shape_grid.clone());
            let points = run_shape_sweep(&cfg, &grid)?;
            write(out, "shape.csv", &sweep_csv(&points))?;
        }
        Command::FairnessTable { compare, tolerance } => {
            let table = run_fairness_table(&cfg)?;
            print!("{}", table.to_csv());
            write(out, "fairness_table.csv", &table.to_csv())?;
            if let Some(grid) = compare {
                let cmp = compare_with_reference(&table, tolerance);
                println!("{} of 24 cells within {tolerance}", cmp.matching_cells);
                for (fairness, column, d) in cmp.mismatches() {
                    println!("  alpha {fairness}, {column}: off by {d:+.4}");
                }
                let best = best_matching_shape(&cfg, &grid, tolerance)?;
                println!(
                    "best shape on grid: {} ({} cells within {tolerance}, worst {:.4})",
                    best.shape, best.comparison.matching_cells, best.comparison.max_abs_difference
                );
                write(out, "fairness_comparison.json", &json(&best)?)?;
            }
        }
        Command::Validate { horizon, replications } => {
            let mut cfg = cfg;
            cfg.horizon = horizon.unwrap_or(cfg.horizon);
            cfg.replications = replications.unwrap_or(cfg.replications);
            cfg.validate()?;
            let report = run_validate(&cfg)?;
            for (i, f) in report.files.iter().enumerate() {
                println!(
                    "file {i}: W {:.6} vs {:.6} (z {:+.2}), C {:.6} vs {:.6} (z {:+.2})",
                    f.utility.mean,
                    f.utility.analytic,
                    f.utility.z,
                    f.occupancy.mean,
                    f.occupancy.analytic,
                    f.occupancy.z
                );
            }
            write(out, "validate.json", &json(&report)?)?;
        }
        Command::Oracle { class, grid_steps } => {
            let r = brute_force_oracle(&cfg.instance()?, class, grid_steps)?;
            summarize(class_label(class), &r);
            write(out, &format!("oracle_{}.json", class_label(class)), &json(&r)?)?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
