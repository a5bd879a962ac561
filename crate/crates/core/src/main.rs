use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use g0hs::cli::{parse_config, run, verify_spec};
use g0hs::Error;

#[derive(Parser)]
#[command(name = "g0hs", version, about = "Generalized 0-Holm-Staley numerical laboratory")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the scenario described by a configuration file.
    Run {
        config: PathBuf,
        /// Override `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in verification scenarios.
    Verify {
        #[arg(long, default_value = "verify_out")]
        out: PathBuf,
    },
}

fn init_threads() {
    let Ok(raw) = std::env::var("G0HS_THREADS") else {
        return;
    };
    match raw.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the worker pool: {e}");
            }
        }
        _ => log::warn!("ignoring G0HS_THREADS={raw:?}; expected a positive integer"),
    }
}

fn execute(args: Args) -> Result<(), Error> {
    let spec = match args.command {
        Cmd::Run { config, out } => {
            let text = std::fs::read_to_string(&config)?;
            let mut spec = parse_config(&text)?;
            if let Some(dir) = out {
                spec.output_dir = dir;
            }
            spec
        }
        Cmd::Verify { out } => verify_spec(out),
    };
    let outcome = run(&spec)?;
    println!(
        "{} files written to {}",
        outcome.files.len(),
        spec.output_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_threads();
    match execute(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("g0hs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
