use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sisr::harness::{self, oracle, presets, ExperimentConfig, RunReport};
use sisr::Error;

/// Rare-event tail probabilities by sequential importance sampling with
/// resampling.
#[derive(Debug, Parser)]
#[command(name = "sisr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for report.json and results.csv.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores). Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a JSON experiment config.
    Run { config: PathBuf },
    /// Run a reference study: table1 or table2.
    Preset { name: String },
    /// Compare against an exactly known probability: gaussian or binomial.
    Oracle { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 4,
        Error::Config(_) => 2,
        Error::Subgroup { source, .. } => exit_code(source),
        e if e.is_numerical() => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> sisr::Result<ExitCode> {
    match cli.command {
        Command::Run { config } => {
            let text = fs::read_to_string(&config)?;
            let mut config = ExperimentConfig::from_json(&text)?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            harness::run_experiment(&config, cli.threads, cli.out.as_deref())?;
        }
        Command::Preset { name } => {
            let seed = cli.seed.unwrap_or(presets::DEFAULT_SEED);
            let configs = presets::preset(&name, seed)
                .ok_or_else(|| Error::Config(format!("unknown preset `{name}`, expected table1 or table2")))?;
            let mut reports: Vec<RunReport> = Vec::with_capacity(configs.len());
            for config in &configs {
                let report = harness::run_config(config, cli.threads)?;
                for line in report.console_lines() {
                    println!("{line}");
                }
                reports.push(report);
            }
            if let Some(dir) = &cli.out {
                harness::write_outputs(dir, &reports)?;
            }
        }
        Command::Oracle { name } => {
            let seed = cli.seed.unwrap_or(presets::DEFAULT_SEED);
            let (config, exact) = oracle::oracle(&name, seed)
                .ok_or_else(|| Error::Config(format!("unknown oracle `{name}`, expected gaussian or binomial")))?;
            let check = oracle::check(&name, &config, exact, cli.threads)?;
            for line in check.report.console_lines() {
                println!("{line}");
            }
            println!("{:<16} {:.6e}", "exact", exact);
            println!("{:<16} {:.2} SE {}", "deviation", check.z, if check.passed() { "ok" } else { "too far" });
            if let Some(dir) = &cli.out {
                harness::write_outputs(dir, std::slice::from_ref(&check.report))?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
