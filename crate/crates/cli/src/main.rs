use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tqd_cli::acceptance;
use tqd_cli::config::{parse_config, Kind};
use tqd_cli::scenario::run_scenario;
use tqd_core::propagate::StepPolicy;

/// Transitionless-driving spin echo simulator.
#[derive(Parser)]
#[command(name = "tqd-echo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Field timeline of one loop.
    Fields(RunArgs),
    /// Single loop from an eigenstate.
    Evolve(RunArgs),
    /// Loop, pulse, reversed loop, pulse.
    Echo(RunArgs),
    /// Single-qubit geometric gate.
    Gate(RunArgs),
    /// Eight-element two-qubit phase gate.
    Twoqubit(RunArgs),
    /// Rotating-frame parameter map.
    Expmap(RunArgs),
    /// Tracking fidelity sweep over the speed ratio.
    Scan(RunArgs),
    /// Run the acceptance suite.
    VerifyAll {
        /// Also write acceptance.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides output_dir from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fixed substep count per segment.
    #[arg(long, conflicts_with = "tol")]
    substeps: Option<usize>,
    /// Target per-segment error for step halving.
    #[arg(long)]
    tol: Option<f64>,
}

fn run(kind: Kind, args: &RunArgs) -> Result<bool, String> {
    let path = args.config.display();
    let text = fs::read_to_string(&args.config).map_err(|e| format!("reading {path}: {e}"))?;
    let mut cfg = parse_config(&text).map_err(|e| format!("{path}: {e}"))?;
    if cfg.kind != kind {
        return Err(format!("{path}: config kind `{}` does not match subcommand `{kind}`", cfg.kind));
    }
    if let Some(n) = args.substeps {
        cfg.policy = StepPolicy::Substeps(n);
    }
    if let Some(tol) = args.tol {
        cfg.policy = StepPolicy::TargetError(tol);
    }
    cfg.policy.validate().map_err(|e| e.to_string())?;
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.id));
    let summary = run_scenario(&cfg, &dir).map_err(|e| e.to_string())?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    for check in summary.checks.iter().filter(|c| !c.pass) {
        eprintln!(
            "check {} failed: measured {} target {} tolerance {}",
            check.name, check.measured, check.target, check.tolerance
        );
    }
    Ok(summary.pass)
}

fn verify_all(out: Option<&PathBuf>) -> Result<bool, String> {
    let results = acceptance::run_all();
    for r in &results {
        println!("{}", r.line());
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| format!("creating {}: {e}", dir.display()))?;
        let text = serde_json::to_string_pretty(&results).expect("results serialize") + "\n";
        let path = dir.join("acceptance.json");
        fs::write(&path, text).map_err(|e| format!("writing {}: {e}", path.display()))?;
    }
    Ok(results.iter().all(|r| r.pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Fields(a) => run(Kind::Fields, a),
        Command::Evolve(a) => run(Kind::Evolve, a),
        Command::Echo(a) => run(Kind::Echo, a),
        Command::Gate(a) => run(Kind::Gate, a),
        Command::Twoqubit(a) => run(Kind::TwoQubit, a),
        Command::Expmap(a) => run(Kind::ExpMap, a),
        Command::Scan(a) => run(Kind::Scan, a),
        Command::VerifyAll { out } => verify_all(out.as_ref()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
