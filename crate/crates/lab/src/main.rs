use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use gibbs_lab::{run, Experiment, LabError, Overrides};

/// Run a mixing, counting or wave-packet experiment and write its artifacts.
#[derive(Debug, Parser)]
#[command(name = "gibbs-lab", version)]
struct Cli {
    experiment: Experiment,
    /// TOML configuration file; flags below take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Particles per side.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Membrane speed in box widths per unit time.
    #[arg(long)]
    membrane_speed: Option<f64>,
    /// different-gases-by-species, same-gas-by-species or same-gas-by-origin.
    #[arg(long)]
    mode: Option<String>,
}

fn fail(err: &LabError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => {
                return fail(&LabError::Config(format!("cannot read {}: {e}", path.display())))
            }
        },
        None => None,
    };
    let overrides = Overrides {
        seed: cli.seed,
        output_dir: cli.out,
        n: cli.n,
        temperature: cli.temperature,
        membrane_speed: cli.membrane_speed,
        mode: cli.mode,
    };
    let start = Instant::now();
    match run(cli.experiment, text.as_deref(), &overrides) {
        Ok(report) => {
            for path in &report.artifacts {
                println!("{}", path.display());
            }
            eprintln!(
                "{} finished in {:.3} s (seed {})",
                cli.experiment.name(),
                start.elapsed().as_secs_f64(),
                report.seed
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
