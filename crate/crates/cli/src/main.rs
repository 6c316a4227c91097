mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Failure with a specific process exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

pub fn exit(code: u8, message: impl Into<String>) -> anyhow::Error {
    Exit {
        code,
        message: message.into(),
    }
    .into()
}

pub const EXIT_FAILED: u8 = 1;
pub const EXIT_PLANT_FILE: u8 = 2;
pub const EXIT_MISSING_STAGE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "selftune", version, about = "Step-response PID self-tuning with a learned increment policy")]
pub struct Cli {
    /// Directory that receives every artifact.
    #[arg(long, global = true, env = "SELFTUNE_OUT_DIR", default_value = "selftune-out")]
    pub out_dir: PathBuf,

    /// Seed recorded in every artifact and used for all sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlantPreset {
    /// 8/(s^2 + 0.878 s + 21.5).
    CaseA,
    /// Roll channel, wing retracted.
    WingspanA,
    /// Roll channel, wing extended.
    WingspanB,
    /// 1/(s + 1).
    FirstOrder,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    CaseA,
    CaseB,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Closed-loop step response of a preset or plant file.
    Simulate(commands::SimulateArgs),
    /// Sample controllers around the expert and record indicator/label pairs.
    GenDataset(commands::GenDatasetArgs),
    /// Fit the policy network to a dataset.
    Train(commands::TrainArgs),
    /// Run the online tuning loop with a trained model.
    Learn(commands::LearnArgs),
    /// Check gains against the stability region and build the certificate.
    Certify(commands::CertifyArgs),
    /// Re-simulate a saved report and compare the recorded indicators.
    Replay(commands::ReplayArgs),
    /// Full pipeline on a bundled scenario.
    Demo(commands::DemoArgs),
    /// Tuning runs from many random starts.
    Sweep(commands::SweepArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.downcast_ref::<Exit>().map_or(EXIT_FAILED, |x| x.code);
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
