use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hycon_cli::{commands, load_config_with, CliError, RawConfig};

/// Consensus checks and simulations for hybrid multi-agent systems.
#[derive(Debug, Parser)]
#[command(name = "hycon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide solvability and predict the consensus value without simulating.
    Check(Common),
    /// Simulate, write trajectory.csv and verdict.json, and compare.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory [default: $HYCON_OUT_DIR or ./out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the sampling-period bounds of all three protocols.
    Bounds(Common),
    /// Print the one-step (or expected gossip) iteration matrix.
    Matrix(Common),
}

/// Flags override the matching config keys.
#[derive(Debug, Args)]
struct Common {
    /// Experiment config (`key = value` lines).
    config: PathBuf,
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    dense_per_step: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    gossip_probs: Option<String>,
    #[arg(long)]
    tol: Option<String>,
}

impl Common {
    fn overrides(&self) -> RawConfig {
        let mut raw = RawConfig::new();
        let fields = [
            ("graph", &self.graph),
            ("case", &self.case),
            ("m", &self.m),
            ("h", &self.h),
            ("x0", &self.x0),
            ("steps", &self.steps),
            ("dense_per_step", &self.dense_per_step),
            ("seed", &self.seed),
            ("trials", &self.trials),
            ("gossip_probs", &self.gossip_probs),
            ("tol", &self.tol),
        ];
        for (key, value) in fields {
            if let Some(v) = value {
                raw.insert(key.to_string(), v.clone());
            }
        }
        raw
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let (common, out) = match &cli.command {
        Command::Check(c) | Command::Bounds(c) | Command::Matrix(c) => (c, None),
        Command::Run { common, out } => (common, Some(out)),
    };
    let mut overrides = common.overrides();
    // A --graph flag is given relative to the working directory.
    if let Some(g) = overrides.get_mut("graph") {
        *g = std::env::current_dir()
            .map(|d| d.join(&*g).to_string_lossy().into_owned())
            .unwrap_or_else(|_| g.clone());
    }
    let cfg = load_config_with(&common.config, &overrides)?;
    match &cli.command {
        Command::Check(_) => print!("{}", commands::check(&cfg)?),
        Command::Bounds(_) => print!("{}", commands::bounds(&cfg)?),
        Command::Matrix(_) => print!("{}", commands::matrix(&cfg)?),
        Command::Run { .. } => {
            let dir = out
                .cloned()
                .flatten()
                .or_else(|| std::env::var_os("HYCON_OUT_DIR").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            let outcome = commands::run(&cfg, &dir)?;
            let v = &outcome.verdict;
            println!(
                "case {}: solvable={} converged={} predicted={} disagreement={} ({} steps) -> {}",
                v.case,
                v.solvable,
                v.converged,
                v.predicted_value.map_or_else(|| "none".into(), |p| p.to_string()),
                v.measured_final_disagreement.unwrap_or(f64::NAN),
                v.steps.unwrap_or(0),
                dir.display()
            );
            if outcome.exit_code != 0 {
                eprintln!("hycon: converged={} does not match solvable={}", v.converged, v.solvable);
            }
            return Ok(outcome.exit_code);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("hycon: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
