use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use emla_core::sim::ControllerKind;
use emla_ctrl::commands::{self, Budget, Common, Exit};

#[derive(Parser)]
#[command(name = "emla", version, about = "Simulate and tune PMSM linear-actuator controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// RNG seed for sensor noise and Jaya (overrides the scenario file).
    #[arg(long, global = true, env = "EMLA_CTRL_SEED")]
    seed: Option<u64>,

    /// Only errors on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Controller {
    Drsblf,
    Pid,
}

impl From<Controller> for ControllerKind {
    fn from(c: Controller) -> Self {
        match c {
            Controller::Drsblf => ControllerKind::DrsBlf,
            Controller::Pid => ControllerKind::Pid,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a quintic trajectory from waypoints and write plan.csv.
    Plan {
        /// Waypoint file (`t pos vel acc` rows) or a scenario file.
        #[arg(long = "scenario", value_name = "PATH")]
        waypoints: PathBuf,
        /// Sample rate of plan.csv (Hz).
        #[arg(long, default_value_t = 1000.0)]
        rate: f64,
    },
    /// Run one closed loop; writes the trace and metrics.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        controller: Option<Controller>,
    },
    /// Tune controller gains with Jaya.
    Optimize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        controller: Option<Controller>,
        #[arg(long)]
        generations: Option<usize>,
        /// Concurrent objective evaluations.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Tune both controllers with the same budget and tabulate the results.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = Common {
        out: cli.out,
        seed: cli.seed,
        quiet: cli.quiet,
    };
    let result = match cli.command {
        Command::Plan { waypoints, rate } => commands::plan(&waypoints, rate, &common),
        Command::Simulate {
            scenario,
            controller,
        } => commands::simulate(&scenario, controller.map(Into::into), &common),
        Command::Optimize {
            scenario,
            controller,
            generations,
            jobs,
        } => commands::optimize(
            &scenario,
            controller.map(Into::into),
            Budget { generations, jobs },
            &common,
        ),
        Command::Compare {
            scenario,
            generations,
            jobs,
        } => commands::compare(&scenario, Budget { generations, jobs }, &common),
    };
    match result {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Exit::Input as u8)
        }
    }
}
