use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fracstab::harness::{cache_dir, emit_plots, execute, ExperimentConfig, ExperimentReport};
use fracstab::Error;

#[derive(Parser)]
#[command(name = "fracstab", version, about = "Stability experiments for the fractional conductivity equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suite selected by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `threads` in the configuration.
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides `seed` in the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write plot data and images for a report.
    Plots {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a configuration without computing anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

const INVARIANT_EXIT: u8 = 4;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Validate { config } => match ExperimentConfig::load(&config).and_then(|c| c.validate().map(|_| c)) {
            Ok(c) => {
                println!("ok: {} suite, preset {}, config sha256 {}", c.suite.name(), c.preset.name(), c.hash());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Run { config, out, threads, seed } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if let Some(t) = threads {
                cfg.threads = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let cache = cache_dir(&out);
            match execute(&cfg, &out, Some(&cache)) {
                Ok(outcome) => {
                    let r = &outcome.report;
                    for c in &r.checks {
                        println!("{} {}: {}", if c.ok { "pass" } else { "FAIL" }, c.name, c.detail);
                    }
                    println!(
                        "report {} ({:.1}s, sha256 {})",
                        outcome.report_path.display(),
                        outcome.elapsed.as_secs_f64(),
                        r.content_hash()
                    );
                    if r.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(INVARIANT_EXIT)
                    }
                }
                Err(e) => fail(&e),
            }
        }
        Command::Plots { report, out } => {
            let r = match ExperimentReport::load(&report) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            match emit_plots(&r, &out) {
                Ok(p) => {
                    for w in &p.warnings {
                        eprintln!("warning: {w}");
                    }
                    for f in &p.files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
