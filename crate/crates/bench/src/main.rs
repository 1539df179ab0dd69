use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geoplan_bench::bench::{run_bench, write_report};
use geoplan_bench::config::{base_dir, read_json, BenchConfig, ConvergeConfig, SolveConfig, Tier};
use geoplan_bench::converge::{run_converge, write_converge};
use geoplan_bench::solve::{run_solve, write_solution};
use geoplan_bench::{BenchError, Result};

#[derive(Parser)]
#[command(name = "geoplan", version, about = "Benchmarks, convergence studies and single solves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method on every trial and write report.json and report.csv.
    Bench {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "smoke")]
        tier: Tier,
        #[arg(long, env = "GEOPLAN_WORKERS")]
        workers: Option<usize>,
        #[arg(long, env = "GEOPLAN_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Convergence study; writes converge.csv and converge.json.
    Converge {
        config: PathBuf,
        #[arg(long, env = "GEOPLAN_WORKERS")]
        workers: Option<usize>,
        #[arg(long, env = "GEOPLAN_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Solve one problem; writes solution.csv and solution.json.
    Solve {
        config: PathBuf,
        #[arg(long, env = "GEOPLAN_OUT", default_value = "out")]
        out: PathBuf,
    },
}

fn default_workers(w: Option<usize>) -> usize {
    w.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Bench { config, tier, workers, out } => {
            let cfg: BenchConfig = read_json(&config)?;
            let report = run_bench(&cfg, &base_dir(&config), tier, default_workers(workers))?;
            write_report(&report, &out)?;
            for m in &report.methods {
                println!(
                    "{:<20} success {:>5.1}%  median length {}  median energy {}",
                    m.method.name(),
                    100.0 * m.success_rate,
                    fmt(m.median_length),
                    fmt(m.median_energy)
                );
            }
            print_written(&out, &["report.json", "report.csv"]);
        }
        Command::Converge { config, workers, out } => {
            let cfg: ConvergeConfig = read_json(&config)?;
            let report = run_converge(&cfg, default_workers(workers))?;
            write_converge(&report, &out)?;
            let s = &report.summary;
            println!(
                "{} points ({} excluded), exact {}, median slopes: distance {} midpoint {} inverse difference {}",
                s.points,
                s.excluded,
                s.exact,
                fmt(s.median_slope_distance),
                fmt(s.median_slope_midpoint),
                fmt(s.median_slope_inverse_difference)
            );
            print_written(&out, &["converge.csv", "converge.json"]);
        }
        Command::Solve { config, out } => {
            let cfg: SolveConfig = read_json(&config)?;
            let o = run_solve(&cfg, &base_dir(&config))?;
            write_solution(&cfg, &o, &out)?;
            if !o.success {
                return Err(BenchError::NoSolution);
            }
            println!("length {}  energy {}  time {:.3}s", fmt(o.length), fmt(o.energy), o.wall_time);
            print_written(&out, &["solution.csv", "solution.json"]);
        }
    }
    Ok(())
}

fn fmt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.4}"))
}

fn print_written(out: &Path, files: &[&str]) {
    for f in files {
        println!("wrote {}", out.join(f).display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
