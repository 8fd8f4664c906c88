use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use viscowave_cli::{exit, parse_config, run};

/// Kernel validation, solves, Picard certificates and convergence studies
/// for viscoelastic wave problems with memory.
#[derive(Debug, Parser)]
#[command(name = "viscowave", version)]
struct Args {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized checks; overrides `validation.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the run summary on standard output.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", args.config.display());
            return ExitCode::from(exit::CONFIG);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprint!("error: {e}");
            if !e.to_string().ends_with('\n') {
                eprintln!();
            }
            return ExitCode::from(exit::CONFIG);
        }
    };
    if let Some(seed) = args.seed {
        config.validation.seed = seed;
    }
    let out = args.out.unwrap_or_else(|| PathBuf::from(&config.output));
    match run(&config, &out) {
        Ok(summary) => {
            if !args.quiet {
                for line in &summary.lines {
                    println!("{line}");
                }
                for path in &summary.artifacts {
                    println!("wrote {}", path.display());
                }
            }
            if let Some(failure) = &summary.failure {
                eprintln!("error: {failure}");
            }
            ExitCode::from(summary.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
