use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use malgpro_cli::{compare, configure_threads, load_spec, output_dir, run, CliError};

/// Mal-GPro and Ad-SGD runs on the registered benchmark problems.
#[derive(Parser)]
#[command(version, about, after_help = "Set MALGPRO_THREADS to override the worker thread count.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one spec and write its artifacts.
    Run {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the spec's master_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve several specs on one problem and tabulate them.
    Compare {
        #[arg(required = true)]
        specs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Run { spec, out, seed } => {
            let mut spec = load_spec(&spec)?;
            if let Some(seed) = seed {
                spec.master_seed = seed;
            }
            let out = output_dir(out.as_deref(), &spec);
            let report = run(&spec, &out)?;
            if let Some(errors) = report.final_control_errors() {
                println!("final E_c: {}", errors.iter().map(|e| format!("{e:.4e}")).collect::<Vec<_>>().join(", "));
            }
            println!("artifacts written to {}", out.display());
        }
        Command::Compare { specs, out } => {
            let loaded =
                specs.iter().map(|p| Ok((p.display().to_string(), load_spec(p)?))).collect::<Result<Vec<_>, CliError>>()?;
            let out = output_dir(out.as_deref(), &loaded[0].1);
            compare(&loaded, &out)?;
            println!("comparison written to {}", out.join("compare.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
