//! `covsim`: run, validate and inspect covert-attack scenarios.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use covsim_core::scenario::{load_scenario, run_with, Designs, RunOptions, ScenarioConfig};
use covsim_core::{Error, Result};

#[derive(Parser)]
#[command(name = "covsim", version, about = "Covert-attack detection and accommodation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace as CSV.
    Run {
        /// Scenario file, or a built-in name (v5_fullrank, v5_lowrank).
        #[arg(long)]
        scenario: String,
        /// Output CSV path; defaults to the scenario's `output` field.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the horizon.
        #[arg(long)]
        horizon: Option<usize>,
        /// Calibrate thresholds even if the scenario lists them.
        #[arg(long)]
        calibrate: bool,
    },
    /// Load and validate a scenario without running it.
    Validate {
        #[arg(long)]
        scenario: String,
    },
    /// Synthesize designs and report their spectral radii.
    Designs {
        #[arg(long)]
        scenario: String,
    },
}

fn load(source: &str, horizon: Option<usize>) -> Result<ScenarioConfig> {
    let cfg = load_scenario(source)?;
    match horizon {
        Some(h) => cfg.with_horizon(h),
        None => Ok(cfg),
    }
}

fn run(scenario: &str, out: Option<PathBuf>, horizon: Option<usize>, calibrate: bool) -> Result<()> {
    let cfg = load(scenario, horizon)?;
    let out = out
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::config("output", "no --out given and the scenario has no output path"))?;
    let options = RunOptions {
        force_calibration: calibrate,
        ..RunOptions::default()
    };
    let result = run_with(&cfg, &options)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let file = File::create(&out).map_err(|e| Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    result.trace.write_csv(BufWriter::new(file))?;

    let decisions: Vec<String> = (0..cfg.len())
        .filter_map(|i| result.trace.decision_step(i).map(|k| format!("node {} at step {k}", i + 1)))
        .collect();
    println!(
        "{}: {} steps x {} nodes -> {}",
        cfg.name,
        cfg.horizon,
        cfg.len(),
        out.display()
    );
    if decisions.is_empty() {
        println!("no attack decisions");
    } else {
        println!("attack decided: {}", decisions.join(", "));
    }
    Ok(())
}

fn validate(scenario: &str) -> Result<()> {
    let cfg = load(scenario, None)?;
    let edges: usize = (0..cfg.len()).map(|i| cfg.topology.neighbors(i).len()).sum();
    println!(
        "{}: ok ({} subsystems, {edges} couplings, {} attacks, horizon {})",
        cfg.name,
        cfg.len(),
        cfg.attacks.len(),
        cfg.horizon
    );
    if !cfg.topology.is_symmetric() {
        println!("note: topology is asymmetric; monitor sets follow outbound couplings");
    }
    Ok(())
}

fn designs(scenario: &str) -> Result<()> {
    let cfg = load(scenario, None)?;
    let d = Designs::synthesize(&cfg)?;
    println!("node  rho(F)    rho(Fc)   rho(A+BK)  regime  reconstruction");
    for (i, node) in d.nodes.iter().enumerate() {
        let rec = match &node.reconstructor {
            Ok(r) => format!("delay {}", r.delay()),
            Err(e) => format!("unavailable ({e})"),
        };
        println!(
            "{:<5} {:<9.6} {:<9.6} {:<10.6} {:<7} {rec}",
            i + 1,
            node.uio_radius(),
            node.observer_radius(),
            node.controller_radius,
            node.ls.regime.as_str(),
        );
    }
    println!("network closed-loop radius {:.6}", d.network_radius);
    let all_stable = d.network_radius < 1.0
        && d.nodes
            .iter()
            .all(|n| n.uio_radius() < 1.0 && n.observer_radius() < 1.0 && n.controller_radius < 1.0);
    println!("all radii < 1: {}", if all_stable { "yes" } else { "no" });
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            horizon,
            calibrate,
        } => run(&scenario, out, horizon, calibrate),
        Command::Validate { scenario } => validate(&scenario),
        Command::Designs { scenario } => designs(&scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            eprintln!("error[{}]: {e}", category.as_str());
            ExitCode::from(category.exit_code() as u8)
        }
    }
}
