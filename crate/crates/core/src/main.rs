use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use browder::cli::{run, RunConfig};

/// Trace a connected fixed-point component of a parametric map.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// Flat `key = value` run config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Built-in problem name; overrides the config.
    #[arg(long)]
    problem: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(args: &Args) -> browder::Result<u8> {
    #[cfg(feature = "parallel")]
    if args.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global()
            .map_err(|e| browder::Error::InvalidInput(e.to_string()))?;
    }
    let mut config = match &args.config {
        Some(path) => RunConfig::parse(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(name) = &args.problem {
        config.problem = Some(name.clone());
    }
    let outcome = run(&config, &args.out)?;
    let r = &outcome.result;
    println!(
        "{}: converged={} iterations={} rects={} coverage_gap={:.3e} residual_max={:.3e}",
        outcome.problem.name,
        r.converged,
        r.history.len(),
        r.final_rects.len(),
        r.coverage_gap,
        r.residual_max
    );
    Ok(outcome.exit_code() as u8)
}
