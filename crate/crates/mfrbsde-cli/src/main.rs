use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mfrbsde_cli::config::{EngineKind, SchemeKind};
use mfrbsde_cli::{run, Overrides};

#[derive(Parser)]
#[command(name = "mfrbsde", about = "Mean-field reflected BSDE solver", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a JSON config and write results
    Solve {
        /// path to the JSON configuration
        #[arg(long)]
        config: PathBuf,
        /// scheme override: snell, penalty or both
        #[arg(long, value_enum)]
        scheme: Option<SchemeKind>,
        /// engine override: mc or lattice
        #[arg(long, value_enum)]
        engine: Option<EngineKind>,
        /// Monte-Carlo path count override
        #[arg(long)]
        paths: Option<usize>,
        /// seed override
        #[arg(long)]
        seed: Option<u64>,
        /// worker thread count (0 = all cores)
        #[arg(long)]
        threads: Option<usize>,
        /// output directory override
        #[arg(long)]
        out: Option<PathBuf>,
        /// run even when validation or the feasibility condition fails
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("MFRBSDE_LOG")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { config, scheme, engine, paths, seed, threads, out, force } => {
            if let Some(n) = threads {
                if n > 0 {
                    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                        log::warn!("could not configure {n} threads: {e}");
                    }
                }
            }
            let overrides = Overrides { scheme, engine, paths, seed, out, force, threads };
            match run(&config, &overrides) {
                Ok(summary) => {
                    println!(
                        "wrote {} ({})",
                        summary.out_dir.display(),
                        summary.schemes_run.join(", ")
                    );
                    if let Some(d) = summary.cross_scheme_distance {
                        println!("cross-scheme mean gap: {d:.6e}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
