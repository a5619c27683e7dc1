use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isoflow_core::constants::GAMMA_LIMIT;
use isoflow_harness::config::ExperimentConfig;
use isoflow_harness::error::{HarnessError, Result};
use isoflow_harness::experiment::{Experiment, RunOptions};
use isoflow_harness::model::ModelSetup;
use isoflow_harness::output::{self, ConstantsFile, Report};
use isoflow_harness::runner;

#[derive(Parser)]
#[command(name = "isoflow", version, about = "Monte Carlo checks for isotropic Brownian flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the claims listed in a config and write the result directory.
    Run(RunArgs),
    /// Print the flow constants of a kernel as JSON.
    Constants(ConstantsArgs),
    /// Print the summary table of a result directory.
    Report { dir: PathBuf },
    /// Write raw trajectories for every replication.
    Simulate(RunArgs),
    /// Compare the smooth flow with the coalescing reference.
    ArratiaCompare(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `ensemble.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides `output.directory`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Suppress the progress heartbeat.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct ConstantsArgs {
    /// Bump kernel width.
    #[arg(long, conflicts_with = "table")]
    epsilon: Option<f64>,
    /// Two-column `z,b` table of the kernel profile.
    #[arg(long)]
    table: Option<PathBuf>,
    /// γ in (0, √2] for the L∞ and M∞ bounds.
    #[arg(long, default_value_t = GAMMA_LIMIT)]
    gamma: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, HarnessError::ClaimsFailed { .. }) {
                eprintln!("isoflow: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn prepare(args: &RunArgs) -> Result<Experiment> {
    let (config, source) = ExperimentConfig::load(&args.config)?;
    let opts = RunOptions {
        seed: args.seed,
        workers: args.workers,
        output: args.output.clone(),
        progress: !args.quiet,
    };
    Experiment::prepare(config, Some(&source), args.config.parent(), &opts)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => {
            let exp = prepare(&args)?;
            let report: Report = runner::pool(args.workers)?.install(|| exp.run())?;
            print!("{}", output::render_report(&report));
            for c in report.claims.iter().filter(|c| !c.pass) {
                println!("{}: {}", c.claim_id, c.detail);
            }
            match report.failures() {
                0 => Ok(()),
                failed => Err(HarnessError::ClaimsFailed {
                    failed,
                    total: report.claims.len(),
                }),
            }
        }
        Command::Constants(args) => {
            let setup = match (&args.table, args.epsilon) {
                (Some(path), _) => ModelSetup::table(path, args.gamma)?,
                (None, eps) => ModelSetup::bump(eps.unwrap_or(1.0), args.gamma)?,
            };
            print!("{}", output::to_json(&ConstantsFile::new(&setup.profile, setup.constants))?);
            Ok(())
        }
        Command::Report { dir } => {
            print!("{}", output::render_report(&output::read_report(&dir)?));
            Ok(())
        }
        Command::Simulate(args) => {
            let exp = prepare(&args)?;
            let path = runner::pool(args.workers)?.install(|| exp.simulate())?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::ArratiaCompare(args) => {
            let exp = prepare(&args)?;
            let record = runner::pool(args.workers)?.install(|| exp.arratia_compare())?;
            println!(
                "{} {} ({})",
                record.claim_id,
                if record.pass { "PASS" } else { "FAIL" },
                record.detail
            );
            if record.pass {
                Ok(())
            } else {
                Err(HarnessError::ClaimsFailed { failed: 1, total: 1 })
            }
        }
    }
}
