use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sdqn::cli::{resolve, run, Command, Overrides, PbLnMode, OUT_DIR_ENV};
use sdqn::envs::EnvKind;

#[derive(Parser)]
#[command(name = "sdqn", version, about = "Directly trained spiking deep Q networks with pbLN")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a spiking DQN and write metrics, summary and checkpoint.
    Train(Flags),
    /// Greedy evaluation of a checkpoint.
    Eval(Flags),
    /// Monte-Carlo check of the subthreshold potential variance.
    VerifyLemma(Flags),
    /// Monte-Carlo check of the firing-rate bound over a (k, p) grid.
    VerifyTheorem(Flags),
    /// Monte-Carlo check of the binary spike moment identities.
    VerifyMoments(Flags),
    /// Layer-wise active fractions of random-init networks.
    SweepFiring(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML config file; see `config.resolved` in any output directory for every key.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// pbLN arms to run (default: both for sweep-firing, on otherwise).
    #[arg(long, value_parser = ["on", "off", "both"])]
    pbln: Option<String>,
    #[arg(long, value_parser = ["catch", "gridview"])]
    env: Option<String>,
    /// Output directory (default: $SDQN_OUT_DIR/<command>, or runs/<command>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training frame budget.
    #[arg(long)]
    frames: Option<usize>,
    /// Checkpoint for `eval`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Any config key, e.g. `--set train.lr=0.001`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, f) = match cli.command {
        Cmd::Train(f) => (Command::Train, f),
        Cmd::Eval(f) => (Command::Eval, f),
        Cmd::VerifyLemma(f) => (Command::VerifyLemma, f),
        Cmd::VerifyTheorem(f) => (Command::VerifyTheorem, f),
        Cmd::VerifyMoments(f) => (Command::VerifyMoments, f),
        Cmd::SweepFiring(f) => (Command::SweepFiring, f),
    };
    let result = (|| {
        let flags = Overrides {
            config: f.config,
            seed: f.seed,
            pbln: f.pbln.map(|s| s.parse::<PbLnMode>()).transpose()?,
            env: f.env.map(|s| s.parse::<EnvKind>()).transpose()?,
            out: f.out,
            frames: f.frames,
            checkpoint: f.checkpoint,
            set: f.set,
        };
        let root = std::env::var(OUT_DIR_ENV).ok();
        let cfg = resolve(command, &flags, root.as_deref())?;
        run(&cfg)
    })();
    match result {
        Ok(status) => {
            for line in &status.lines {
                println!("{line}");
            }
            for a in &status.artifacts {
                println!("wrote {}", a.display());
            }
            if status.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
