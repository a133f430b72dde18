use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use duct_pinn::ProfileKind;
use duct_pinn_cli::checks;
use duct_pinn_cli::config::{RunConfig, VelocityMethodChoice};
use duct_pinn_cli::run;

const EXIT_VALIDATION: u8 = 1;
const EXIT_CASE_FAILED: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "ductpinn", version, about = "PINN solver for 1-D duct acoustics with mean flow and temperature gradients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (profile, frequency) case and write the error table.
    Sweep(Overrides),
    /// Compare a uniform medium with the linear gradient profile.
    GradientStudy(Overrides),
    /// Write reference solutions only.
    OracleOnly(Overrides),
    /// Run the fast invariant suite.
    Check,
    /// Print the resolved configuration as TOML.
    ShowConfig(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict the sweep to one temperature profile.
    #[arg(long)]
    profile: Option<ProfileKind>,
    /// Comma-separated frequencies in Hz.
    #[arg(long, value_delimiter = ',')]
    freq: Option<Vec<f64>>,
    /// He initialisation seed of the pressure network.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    velocity_method: Option<VelocityMethodChoice>,
}

impl Overrides {
    fn resolve(&self, gradient_study: bool) -> Result<RunConfig, String> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path).map_err(|e| e.to_string())?,
            None => RunConfig::default(),
        };
        if let Some(p) = self.profile {
            config.sweep.profiles = vec![p];
        }
        if let Some(f) = &self.freq {
            if gradient_study {
                config.gradient_study.frequencies = f.clone();
            } else {
                config.sweep.frequencies = f.clone();
            }
        }
        if let Some(s) = self.seed {
            config.training.seed = s;
        }
        if let Some(o) = &self.out {
            config.output_dir = o.clone();
        }
        if let Some(m) = self.velocity_method {
            config.velocity.method = m;
        }
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

fn resolve(overrides: &Overrides, gradient_study: bool) -> Result<RunConfig, ExitCode> {
    overrides.resolve(gradient_study).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_VALIDATION)
    })
}

fn io_failure(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_IO)
}

fn status(failures: usize) -> ExitCode {
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{failures} case(s) failed");
        ExitCode::from(EXIT_CASE_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep(o) => {
            let config = match resolve(&o, false) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match run::run_sweep(&config) {
                Ok(outcome) => {
                    for r in &outcome.results {
                        println!(
                            "{:<10} {:>7} Hz  dp = ({:.2e}, {:.2e})  du = {}",
                            r.profile.as_str(),
                            r.frequency,
                            r.pressure_error.0,
                            r.pressure_error.1,
                            r.velocity_error
                                .map(|(a, b)| format!("({a:.2e}, {b:.2e})"))
                                .unwrap_or_else(|| "-".into())
                        );
                    }
                    println!("error table: {}", outcome.error_table.display());
                    status(outcome.failures.len())
                }
                Err(e) => io_failure(e),
            }
        }
        Command::GradientStudy(o) => {
            let config = match resolve(&o, true) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match run::run_gradient_study(&config) {
                Ok(outcome) => {
                    for r in &outcome.results {
                        println!(
                            "{:>7} Hz  uniform dp = ({:.2e}, {:.2e})  gradient envelope increasing: {}  uniform spread: {:.2e}",
                            r.frequency,
                            r.uniform_error.0,
                            r.uniform_error.1,
                            r.gradient_envelope_increasing,
                            r.uniform_envelope_spread
                        );
                    }
                    status(outcome.failures.len())
                }
                Err(e) => io_failure(e),
            }
        }
        Command::OracleOnly(o) => {
            let config = match resolve(&o, false) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match run::run_oracle_only(&config) {
                Ok(failures) => status(failures.len()),
                Err(e) => io_failure(e),
            }
        }
        Command::Check => {
            let outcomes = checks::run_all();
            for c in &outcomes {
                println!("{c}");
            }
            status(outcomes.iter().filter(|c| !c.passed).count())
        }
        Command::ShowConfig(o) => match resolve(&o, false) {
            Ok(config) => {
                print!("{}", config.to_toml());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
    }
}
