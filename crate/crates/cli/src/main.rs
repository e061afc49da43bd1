//! `platoon`: design, check and simulate leader-information controllers.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 unreadable or
//! invalid input, 3 design failure, 4 simulation diverged.

mod commands;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{out_or, SynthOptions};
use platoon_core::synthesis::DesignNorm;

#[derive(Parser)]
#[command(name = "platoon", version, about = "Leader-information controllers for vehicle platoons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    H2,
    Hinf,
}

#[derive(Subcommand)]
enum Command {
    /// Design one local controller per vehicle and write the controller file.
    Synth {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        norm: Option<NormArg>,
        #[arg(long)]
        basis_degree: Option<usize>,
        #[arg(long)]
        grid_points: Option<usize>,
        /// Coprime-factorization gain.
        #[arg(long)]
        alpha: Option<f64>,
        /// Controller file to write [default: controller.json].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the structural checks on a controller for a scenario.
    Verify { controller: PathBuf, scenario: PathBuf },
    /// Simulate a scenario and write trajectories and plots.
    Simulate {
        controller: PathBuf,
        scenario: PathBuf,
        /// Overrides the scenario's step.
        #[arg(long)]
        dt: Option<f64>,
        /// Output directory [default: sim_out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Six-vehicle reference run with delays, from design to plots.
    Example {
        #[arg(long)]
        dt: Option<f64>,
        /// Output directory [default: reference_out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { scenario, norm, basis_degree, grid_points, alpha, out } => {
            let opts = SynthOptions {
                norm: norm.map(|n| match n {
                    NormArg::H2 => DesignNorm::H2,
                    NormArg::Hinf => DesignNorm::Hinf,
                }),
                basis_degree,
                grid_points,
                alpha,
            };
            commands::synth(&scenario, &opts, &out_or(out, commands::CONTROLLER_NAME))
        }
        Command::Verify { controller, scenario } => commands::verify(&controller, &scenario),
        Command::Simulate { controller, scenario, dt, out } => {
            commands::simulate_cmd(&controller, &scenario, &out_or(out, "sim_out"), dt)
        }
        Command::Example { dt, out } => commands::example(&out_or(out, "reference_out"), dt),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
