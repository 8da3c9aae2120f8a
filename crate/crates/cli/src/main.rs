use std::path::{Path, PathBuf};
use std::process::ExitCode;

use asyncdyna_core::harness::{
    compare_summary, emit_plot, parse_config, read_run_csv, run_experiment, Axis, ExperimentConfig, RunLog,
};
use asyncdyna_core::Error;
use clap::{Parser, Subcommand};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "asyncdyna", version, about = "Asynchronous model-based RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every seed of an experiment config and write CSV logs.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set model.beta_ema=off`.
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
    /// Render learning curves from per-run CSVs as SVG.
    Plot {
        #[arg(required = true)]
        csvs: Vec<PathBuf>,
        #[arg(long, default_value = "wall_clock")]
        axis: Axis,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a candidate against a reference; each side is one CSV or a
    /// comma-separated list of per-seed CSVs.
    Compare {
        candidate: String,
        reference: String,
        /// Also write the table as CSV.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, Error> {
    let mut cfg = parse_config(&std::fs::read_to_string(path)?)?;
    for o in overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn read_logs(list: &str) -> Result<Vec<RunLog>, Error> {
    list.split(',').map(|p| read_run_csv(Path::new(p.trim()))).collect()
}

fn cmd_run(config: &Path, overrides: &[String], out_dir: &Path) -> ExitCode {
    let cfg = match load_config(config, overrides) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let report = match run_experiment(&cfg, out_dir) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_FAILURE, e),
    };
    for o in &report.outcomes {
        match &o.result {
            Ok(m) => println!(
                "seed {}: {} trajectories, final eval return {}, {:.1} s",
                o.seed, m.summary.trajectories, m.summary.final_eval_return, m.summary.wall_clock_s
            ),
            Err(e) => println!("seed {}: failed: {e}", o.seed),
        }
    }
    if let Some(p) = &report.aggregate_path {
        println!("aggregate: {}", p.display());
    }
    ExitCode::from(report.exit_code() as u8)
}

fn cmd_plot(csvs: &[PathBuf], axis: Axis, out: &Path) -> ExitCode {
    let svg = csvs
        .iter()
        .map(|p| read_run_csv(p))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|logs| emit_plot(&logs, axis));
    match svg.and_then(|s| std::fs::write(out, s).map_err(Error::from)) {
        Ok(()) => {
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_FAILURE, e),
    }
}

fn cmd_compare(candidate: &str, reference: &str, csv_out: Option<&Path>) -> ExitCode {
    let result = read_logs(candidate)
        .and_then(|a| Ok((a, read_logs(reference)?)))
        .and_then(|(a, b)| compare_summary(&a, &b));
    let cmp = match result {
        Ok(c) => c,
        Err(e) => return fail(EXIT_FAILURE, e),
    };
    print!("{}", cmp.to_table());
    if let Some(path) = csv_out {
        if let Err(e) = cmp.to_csv().and_then(|s| std::fs::write(path, s).map_err(Error::from)) {
            return fail(EXIT_FAILURE, e);
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    log::debug!("{cli:?}");
    match cli.command {
        Command::Run { config, overrides, out_dir } => cmd_run(&config, &overrides, &out_dir),
        Command::Plot { csvs, axis, out } => cmd_plot(&csvs, axis, &out),
        Command::Compare { candidate, reference, csv_out } => cmd_compare(&candidate, &reference, csv_out.as_deref()),
    }
}
