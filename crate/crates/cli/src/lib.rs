//! Command-line front end of the Raman-cavity simulator: configuration,
//! sweeps, experiment runners and CSV/JSON output.

pub mod config;
pub mod error;
pub mod output;
pub mod plan;
pub mod presets;
pub mod run;

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

use config::{Experiment, Layers};
pub use error::CliError;
use presets::Target;

#[derive(Debug, Parser)]
#[command(name = "rcs", version, about = "Raman-cavity parametric amplification experiments")]
pub struct Cli {
    /// JSON config, or a previous run's `.meta.json` sidecar.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (falls back to RCS_WORKERS, then all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output CSV; the sidecar goes to `<out>.meta.json`.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<String>,
    /// Dotted-path override, e.g. `--set model.g=0.03`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// No progress output.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment named in the config.
    Run,
    /// Scattered-photon spectrum over detector frequencies.
    Spectrum,
    /// Steady-state fluctuation changes at one parameter set.
    Steady,
    /// Steady-state maps over two swept parameters.
    Sweep2d,
    /// Closed-form polariton branches along a sweep.
    Polariton,
    /// Gaussian-theory fluctuation spectra.
    Gaussian,
    /// Coupling estimate from material and cavity parameters.
    Coupling,
    /// Frozen configuration of a figure.
    Reproduce { target: Target },
}

impl Cli {
    pub fn layers(&self) -> Layers {
        let (experiment, preset) = match &self.command {
            Command::Run => (None, None),
            Command::Spectrum => (Some(Experiment::Spectrum), None),
            Command::Steady => (Some(Experiment::Steady), None),
            Command::Sweep2d => (Some(Experiment::Sweep2d), None),
            Command::Polariton => (Some(Experiment::Polariton), None),
            Command::Gaussian => (Some(Experiment::Gaussian), None),
            Command::Coupling => (Some(Experiment::Coupling), None),
            Command::Reproduce { target } => (None, Some(target.preset())),
        };
        Layers {
            experiment,
            config_file: self.config.clone(),
            preset,
            sets: self.sets.clone(),
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
        }
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match drive(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rcs: {e}");
            e.exit_code()
        }
    }
}

fn drive(cli: &Cli) -> Result<(), CliError> {
    let cfg = config::resolve(&cli.layers())?;
    if cli.dry_run {
        let text = serde_json::to_string_pretty(&cfg).expect("config serialises");
        return match writeln!(std::io::stdout().lock(), "{text}") {
            // a closed pipe (`rcs --dry-run | head`) is not an error
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io("stdout", e)),
            _ => Ok(()),
        };
    }
    let quiet = cli.quiet;
    let mut progress = |msg: &str| {
        if !quiet {
            eprintln!("rcs: {msg}");
        }
    };
    run::execute(&cfg, &mut progress).map(|_| ())
}
