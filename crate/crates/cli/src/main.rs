use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use paqs_sim::run::EXIT_ABORTED;
use paqs_sim::{parse_config, run, CliOptions, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Per-trajectory locally optimal feedback.
    Tea,
    /// Averaged-state feedback; writes the fidelity curve and the schedule.
    Aslo,
    /// Apply a precomputed schedule to stochastic trajectories.
    Replay,
    /// Measurement only, no feedback.
    Baseline,
    /// Three-tangle maximizing feedback (ghz, 3 qubits).
    Tangle,
    /// Averaged-state feedback; writes the schedule only.
    Schedule,
}

#[derive(Debug, Parser)]
#[command(name = "paqs-sim", version, about = "Continuous measurement with locally optimal feedback")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (PAQS_SIM_WORKERS takes precedence).
    #[arg(long)]
    workers: Option<usize>,
    /// Schedule CSV for replay.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Write every time step instead of at most 2000 rows.
    #[arg(long)]
    raw_steps: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cmd = match args.command {
        Command::Tea => Subcommand::Tea,
        Command::Aslo => Subcommand::Aslo,
        Command::Replay => Subcommand::Replay,
        Command::Baseline => Subcommand::Baseline,
        Command::Tangle => Subcommand::Tangle,
        Command::Schedule => Subcommand::Schedule,
    };
    let cfg = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("paqs-sim: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = CliOptions { workers: args.workers, schedule: args.schedule, raw_steps: args.raw_steps };
    match run(cmd, &cfg, &opts) {
        Ok(report) if report.aborted() > 0 => {
            eprintln!(
                "paqs-sim: {} trajectories aborted (first: #{} {}); see {}",
                report.aborted(),
                report.manifest.aborted[0].trajectory,
                report.manifest.aborted[0].reason,
                report.manifest_path.display()
            );
            ExitCode::from(EXIT_ABORTED as u8)
        }
        Ok(report) => {
            for a in &report.manifest.artifacts {
                println!("{} {}", a.sha256, cfg.output_dir.join(&a.file).display());
            }
            println!("manifest {}", report.manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("paqs-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
