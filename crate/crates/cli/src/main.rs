use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use offload_core::harness::{
    emit_plots, parse_config, run_scenario_with, run_sweep, scenario_plan, write_csv,
    write_trace_csv, CsvRow, DEFAULT_U_VALUES,
};

#[derive(Parser)]
#[command(
    name = "offload-sim",
    version,
    about = "Latency-aware task offloading simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single configuration.
    Run {
        /// Scenario file of `key = value` lines.
        #[arg(long)]
        config: PathBuf,
        /// Override the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write a per-task trace.csv.
        #[arg(long)]
        trace: bool,
    },
    /// Sweep one of the evaluation scenarios.
    Sweep {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        scenario: u8,
        /// Comma-separated uncertainty factors.
        #[arg(long, value_delimiter = ',')]
        u: Option<Vec<f64>>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Simulated seconds per run.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Render SVG charts from a results CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_rows(out: &Path, rows: &[CsvRow]) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("results.csv");
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(BufWriter::new(file), rows)?;
    Ok(path)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            trace,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut cfg =
                parse_config(&text).with_context(|| format!("in {}", config.display()))?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let result = run_scenario_with(&cfg, trace)?;
            let label = config.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            let path = write_rows(&out, &[CsvRow::new(1, label, &cfg, result.metrics.clone())])?;
            if trace {
                let trace_path = out.join("trace.csv");
                let file = File::create(&trace_path)
                    .with_context(|| format!("creating {}", trace_path.display()))?;
                write_trace_csv(BufWriter::new(file), &result.world)?;
            }
            let m = &result.metrics;
            println!(
                "submitted {} accepted {} rejected {} on-time {} missed {} success {:.3} -> {}",
                m.submitted,
                m.accepted,
                m.rejected,
                m.completed_on_time,
                m.missed,
                m.success_rate,
                path.display()
            );
        }
        Command::Sweep {
            scenario,
            u,
            seeds,
            out,
            duration,
        } => {
            if seeds.is_empty() {
                bail!("--seeds must list at least one seed");
            }
            let u = u.unwrap_or_else(|| DEFAULT_U_VALUES.to_vec());
            let mut plan = scenario_plan(scenario, u, seeds)?;
            if let Some(d) = duration {
                plan.base.duration_s = d;
            }
            let rows = run_sweep(&plan)?;
            let path = write_rows(&out, &rows)?;
            println!("{} runs -> {}", rows.len(), path.display());
        }
        Command::Plot { csv, out } => {
            for path in
                emit_plots(&csv, &out).with_context(|| format!("plotting {}", csv.display()))?
            {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
