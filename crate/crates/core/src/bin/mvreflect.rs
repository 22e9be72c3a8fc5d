use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mvreflect::harness::{run_experiment, Experiment, ExperimentConfig};
use mvreflect::{Error, Result};

/// Reflected McKean-Vlasov experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Interacting particle paths.
    Simulate(RunArgs),
    /// Fixed-point iteration on measure flows.
    Picard(RunArgs),
    /// Propagation-of-chaos table.
    Chaos(RunArgs),
    /// Small-noise large deviations.
    #[command(subcommand)]
    Ldp(LdpCommand),
}

#[derive(Subcommand)]
enum LdpCommand {
    /// Rate estimate for the configured target.
    Rate(RunArgs),
    /// Monte Carlo rare-event table.
    RareEvent(RunArgs),
    /// Skeleton continuity along oscillating controls.
    CheckLdp1(RunArgs),
    /// Controlled process against the skeleton.
    CheckLdp2(RunArgs),
    /// Empirical law against the noise-free limit.
    CheckLimitLaw(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(experiment: Experiment, args: &RunArgs) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    match cfg.experiment {
        Some(e) if e != experiment => {
            return Err(Error::Config(format!(
                "config is for `{}`, command asked for `{}`",
                e.name(),
                experiment.name()
            )))
        }
        _ => cfg.experiment = Some(experiment),
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = Some(o.clone());
    }
    let record = run_experiment(&cfg)?;
    println!("{} -> {}", experiment.name(), record.dir.display());
    for c in &record.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{tag} {}", c.name);
        } else {
            println!("{tag} {} ({})", c.name, c.detail);
        }
    }
    Ok(record.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match &cli.command {
        Command::Simulate(a) => (Experiment::Simulate, a),
        Command::Picard(a) => (Experiment::Picard, a),
        Command::Chaos(a) => (Experiment::Chaos, a),
        Command::Ldp(l) => match l {
            LdpCommand::Rate(a) => (Experiment::LdpRate, a),
            LdpCommand::RareEvent(a) => (Experiment::LdpRareEvent, a),
            LdpCommand::CheckLdp1(a) => (Experiment::LdpCheckLdp1, a),
            LdpCommand::CheckLdp2(a) => (Experiment::LdpCheckLdp2, a),
            LdpCommand::CheckLimitLaw(a) => (Experiment::LdpCheckLimitLaw, a),
        },
    };
    match run(experiment, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.code() as u8)
        }
    }
}
