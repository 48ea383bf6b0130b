use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use slowvary::config::read_config;
use slowvary::output::{merge_by_seed, Artifacts};
use slowvary::{run_experiment, ExperimentConfig, RunError, RunResult};

/// Runs a slowvary experiment described by a JSON config.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Root seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seeds seed..seed+k-1, one subdirectory per seed.
    #[arg(long, value_name = "K")]
    sweep: Option<u64>,
}

fn run_seeds(config: &ExperimentConfig, base: &Path, seeds: &[u64]) -> RunResult<Vec<(u64, Artifacts)>> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(seeds.len().max(1));
    let chunk = seeds.len().div_ceil(workers).max(1);
    let results: Vec<RunResult<Vec<(u64, Artifacts)>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&seed| {
                            let mut c = config.clone();
                            c.seed = seed;
                            run_experiment(&c, base).map(|a| (seed, a))
                        })
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut all = Vec::with_capacity(seeds.len());
    for r in results {
        all.extend(r?);
    }
    Ok(all)
}

fn execute(cli: &Cli) -> RunResult<PathBuf> {
    let mut config = read_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let base = cli.config.parent().unwrap_or(Path::new("."));
    let out = cli
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(|p| base.join(p)))
        .unwrap_or_else(|| PathBuf::from("out"));
    match cli.sweep {
        None => {
            let artifacts = run_experiment(&config, base)?;
            artifacts.write(&out)?;
        }
        Some(0) => return Err(RunError::Precondition("sweep must be at least 1".into())),
        Some(k) => {
            let seeds: Vec<u64> = (0..k).map(|i| config.seed.wrapping_add(i)).collect();
            let runs = run_seeds(&config, base, &seeds)?;
            for (seed, a) in &runs {
                a.write(&out.join(format!("seed-{seed}")))?;
            }
            let mut merged = merge_by_seed(&runs);
            merged.json(
                "sweep.json",
                json!({ "version": slowvary_core::VERSION, "seeds": seeds }),
            );
            merged.write(&out.join("merged"))?;
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(out) => {
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
