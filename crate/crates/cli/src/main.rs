use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fock_sme::error::{Error, Result};
use fock_sme::integrator::RunOptions;
use fock_sme_cli::commands::{self, Overrides};
use fock_sme_cli::scenario::{load_scenario, LoadedScenario, PRESETS};
use fock_sme_cli::validate::{run_check, Check, ValidateOptions};

/// Quantum trajectories of open systems driven by N-photon and truncated
/// coherent wave packets.
#[derive(Parser)]
#[command(name = "fock-sme", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ScenarioArgs {
    /// TOML scenario file, or `preset:NAME`.
    scenario: String,
    /// counting, homodyne or heterodyne.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    phase: Option<f64>,
    /// gaussian or binary diffusive outcomes.
    #[arg(long)]
    mode: Option<String>,
    /// Detection efficiency.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// `vacuum`, `fock:N` or `coherent:AMP:TRUNC`.
    #[arg(long)]
    field: Option<String>,
    /// Comma-separated observable names.
    #[arg(long, value_delimiter = ',')]
    observables: Option<Vec<String>>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<LoadedScenario> {
        let mut loaded = load_scenario(&self.scenario)?;
        Overrides {
            scheme: self.scheme.clone(),
            phase: self.phase,
            mode: self.mode.clone(),
            eta: self.eta,
            dt: self.dt,
            field: self.field.clone(),
            observables: self.observables.clone(),
        }
        .apply(&mut loaded)?;
        Ok(loaded)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one conditional trajectory; writes PREFIX.csv and PREFIX.record.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value = "trajectory")]
        out: PathBuf,
        /// Skip the step-size bound.
        #[arg(long)]
        relaxed: bool,
    },
    /// Mean, variance and standard error of observables over trajectories.
    Ensemble {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 100)]
        n_traj: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        base_seed: Option<u64>,
        #[arg(long, default_value_t = 10)]
        stride: usize,
        #[arg(long, default_value = "ensemble.csv")]
        out: PathBuf,
    },
    /// Re-run the filter on a stored measurement record.
    Replay {
        record: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value = "replay.csv")]
        out: PathBuf,
        #[arg(long)]
        relaxed: bool,
    },
    /// Unconditional evolution; cumulative counts are η∫flux dt.
    Me {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value = "me.csv")]
        out: PathBuf,
    },
    /// Built-in checks: oracle, duality, invariants, statistics.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long = "check", required = true, value_delimiter = ',')]
        checks: Vec<String>,
        #[arg(long, default_value_t = 8)]
        bins: usize,
        #[arg(long, default_value_t = 200)]
        n_traj: usize,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// List the built-in scenarios.
    Presets,
}

fn write(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(Error::from)
}

fn with_extension(prefix: &PathBuf, ext: &str) -> PathBuf {
    let mut s = prefix.clone().into_os_string();
    s.push(ext);
    PathBuf::from(s)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { scenario, seed, stride, out, relaxed } => {
            let loaded = scenario.load()?;
            let seed = seed.unwrap_or(loaded.seed);
            let options = RunOptions { relaxed_step_bound: relaxed };
            let (csv, record) = commands::simulate(&loaded, seed, stride, options)?;
            write(&with_extension(&out, ".csv"), &csv)?;
            write(&with_extension(&out, ".record"), &record)?;
        }
        Command::Ensemble { scenario, n_traj, workers, base_seed, stride, out } => {
            let loaded = scenario.load()?;
            let seed = base_seed.unwrap_or(loaded.seed);
            let (_, csv) = commands::ensemble(&loaded, n_traj, workers, seed, stride, RunOptions::default())?;
            write(&out, &csv)?;
        }
        Command::Replay { record, scenario, stride, out, relaxed } => {
            let loaded = scenario.load()?;
            let text = std::fs::read_to_string(&record)?;
            let options = RunOptions { relaxed_step_bound: relaxed };
            write(&out, &commands::replay(&loaded, &text, stride, options)?)?;
        }
        Command::Me { scenario, stride, out } => {
            let loaded = scenario.load()?;
            write(&out, &commands::master_equation(&loaded, stride)?)?;
        }
        Command::Validate { scenario, checks, bins, n_traj, steps, seed } => {
            let loaded = scenario.load()?;
            let opts = ValidateOptions { bins, n_traj, steps, seed };
            let mut all = true;
            for name in &checks {
                let report = run_check(&loaded, Check::parse(name)?, &opts)?;
                println!("[{}] {name}", if report.passed { "PASS" } else { "FAIL" });
                for line in report.text.lines() {
                    println!("  {line}");
                }
                all &= report.passed;
            }
            return Ok(all);
        }
        Command::Presets => {
            for p in PRESETS {
                println!("preset:{p}");
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
