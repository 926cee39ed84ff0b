use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qubit_rtn::config::parse_config;
use qubit_rtn::run::run;

/// Spin-flip fidelity of a square-wave driven qubit under random telegraph noise.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();

    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let out_dir = args.out.unwrap_or_else(|| PathBuf::from(&config.output.dir));

    match run(&config, &out_dir) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            println!("wrote {}", outcome.sidecar.display());
            println!("{}", serde_json::to_string_pretty(&outcome.report.summary).unwrap_or_default());
            if outcome.report.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: validation failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
