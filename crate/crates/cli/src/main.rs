//! `skewlab run <config>`: runs one experiment and writes its report.
//!
//! Exit status: 0 when every check passes, 1 when a check fails or the run
//! errors, 2 for an invalid config or command line (nothing is written).

mod config;
mod experiments;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Format};

#[derive(Parser)]
#[command(name = "skewlab", version, about = "Short-maturity skew experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Report path; overrides `output_path`. Without either the report goes to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Report format; overrides `output_format`.
        #[arg(long, value_parser = parse_format)]
        format: Option<Format>,
        /// Worker threads; defaults to SKEWLAB_THREADS, then the number of cores.
        /// Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn parse_format(s: &str) -> Result<Format, String> {
    Format::parse(s).ok_or_else(|| format!("expected csv or json, got `{s}`"))
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let Command::Run {
        config,
        output,
        format,
        threads,
    } = cli.command;

    let cfg = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let threads = match threads.map(Ok).or_else(env_threads) {
        Some(Ok(n)) => Some(n),
        Some(Err(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
        None => None,
    };
    if let Some(n) = threads {
        if n == 0 {
            eprintln!("error: thread count must be positive");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    }

    let output = output.or(cfg.output_path.clone());
    let plot = cfg
        .plot_path
        .clone()
        .or_else(|| output.as_deref().map(default_plot_path));
    for p in output.iter().chain(&plot) {
        if let Err(e) = report::check_writable(p) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    let report = match experiments::run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }

    let format = format.unwrap_or(cfg.output_format);
    let text = report.render(format);
    let written = match &output {
        Some(p) => report::write_atomic(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
    .and_then(|()| match &plot {
        Some(p) => report::write_atomic(p, &report.render_plot()),
        None => Ok(()),
    });
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_FAIL);
    }

    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        eprintln!("checks failed: see the pass column");
        ExitCode::from(EXIT_FAIL)
    }
}

fn env_threads() -> Option<Result<usize, String>> {
    let v = std::env::var("SKEWLAB_THREADS").ok()?;
    Some(
        v.trim()
            .parse()
            .map_err(|_| format!("SKEWLAB_THREADS: expected a positive integer, got `{v}`")),
    )
}

/// `<dir>/<stem>.plot.csv` next to the report.
fn default_plot_path(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    report.with_file_name(format!("{stem}.plot.csv"))
}
