use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use manifold_nmf::io::{save_matrix, MatrixFormat};
use manifold_nmf::runner;
use manifold_nmf::synth::{self, SyntheticKind};

/// Manifold-regularized nonnegative matrix factorization toolkit.
#[derive(Parser)]
#[command(name = "manifold-nmf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver described by a JSON config file.
    Run {
        /// Path to the run configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic benchmark dataset.
    Synth {
        /// Dataset family.
        #[arg(long)]
        kind: SyntheticKind,
        /// RNG seed; the same seed reproduces the same files.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(threads) = std::env::var("MANIFOLD_NMF_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("ignoring MANIFOLD_NMF_THREADS={threads}: expected a positive integer");
            }
        }
    }

    match Cli::parse().command {
        Command::Run { config } => match runner::execute(&config) {
            Ok(summary) => {
                println!(
                    "wrote {} and {} (final objective {:.6e})",
                    summary.basis_path.display(),
                    summary.coefficient_path.display(),
                    summary.final_objective
                );
                if let Some(w) = summary.weights_path {
                    println!("wrote {}", w.display());
                }
                println!("wrote {}", summary.report_path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Synth { kind, seed, out } => match generate(kind, seed, &out) {
            Ok(path) => {
                println!("wrote {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("synth error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}

fn generate(
    kind: SyntheticKind,
    seed: u64,
    out: &PathBuf,
) -> Result<PathBuf, manifold_nmf::Error> {
    let x = synth::generate(kind, seed)?;
    std::fs::create_dir_all(out)?;
    let data_path = out.join("X.csv");
    save_matrix(&x, &data_path, MatrixFormat::Csv)?;
    let meta = serde_json::json!({
        "kind": kind,
        "seed": seed,
        "rows": x.rows(),
        "cols": x.cols(),
    });
    std::fs::write(
        out.join("meta.json"),
        serde_json::to_string_pretty(&meta).expect("static schema"),
    )?;
    Ok(data_path)
}
