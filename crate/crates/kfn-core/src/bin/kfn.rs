//! Command-line front end: run scenario sweeps and flow demonstrations,
//! writing reproducible artifacts to an output directory.

use clap::{Parser, Subcommand};
use kfn_core::harness::{
    render_flow_json, render_per_node_csv, render_summary_json, render_totals_csv, run_flow_demo,
    run_sweep, FlowDemoParams,
};
use kfn_core::model::{NodeId, UnitFieldId};
use kfn_core::scenario::{parse_scenario, Scenario};
use kfn_core::strategies::Strategy;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "kfn", version, about = "Knowledge-flow network simulator and flow planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, optionally pinned to one strategy or reseeded.
    Simulate {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Run only this strategy instead of the scenario's list.
        #[arg(long)]
        strategy: Option<String>,
        /// Replace the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the scenario's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every strategy the scenario lists.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan one knowledge flow and execute it tick by tick.
    Flow {
        #[arg(long)]
        scenario: PathBuf,
        /// Node the knowledge must reach.
        #[arg(long)]
        recipient: u32,
        #[arg(long = "unit-field", default_value_t = 0)]
        unit_field: u32,
        /// Ticks from now until the delivery deadline.
        #[arg(long)]
        tc: u64,
        #[arg(long, default_value_t = 0)]
        now: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(1),
            CliError::Io(_) => ExitCode::from(2),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Io(m) => m,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    parse_scenario(&text).map_err(validation)
}

fn resolve_out(flag: Option<PathBuf>, sc: &Scenario) -> Result<PathBuf, CliError> {
    flag.or_else(|| sc.output_dir.clone().map(PathBuf::from)).ok_or_else(|| {
        CliError::Validation(
            "no output directory: pass --out or set output_dir in the scenario".into(),
        )
    })
}

fn write_file(dir: &Path, name: &str, text: String) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, text)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_sweep(sc: &Scenario, out: &Path) -> Result<(), CliError> {
    let reports = run_sweep(sc).map_err(validation)?;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", out.display())))?;
    write_file(out, "per_node.csv", render_per_node_csv(sc, &reports))?;
    write_file(out, "totals.csv", render_totals_csv(sc, &reports))?;
    write_file(out, "summary.json", render_summary_json(sc, &reports))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { scenario, strategy, seed, out } => {
            let mut sc = load_scenario(&scenario)?;
            if let Some(name) = strategy {
                let s: Strategy = name
                    .parse()
                    .map_err(|_| CliError::Validation(format!("unknown strategy {name:?}")))?;
                sc.strategies = vec![s];
            }
            if let Some(seed) = seed {
                sc.sim.seed = seed;
            }
            let out = resolve_out(out, &sc)?;
            write_sweep(&sc, &out)
        }
        Command::Sweep { scenario, out } => {
            let sc = load_scenario(&scenario)?;
            let out = resolve_out(out, &sc)?;
            write_sweep(&sc, &out)
        }
        Command::Flow { scenario, recipient, unit_field, tc, now, out } => {
            let sc = load_scenario(&scenario)?;
            let out = resolve_out(out, &sc)?;
            let p = FlowDemoParams {
                recipient: NodeId(recipient),
                unit_field: UnitFieldId(unit_field),
                time_constraint: tc,
                now,
            };
            let demo = run_flow_demo(&sc, &p).map_err(validation)?;
            std::fs::create_dir_all(&out)
                .map_err(|e| CliError::Io(format!("creating {}: {e}", out.display())))?;
            write_file(&out, "flow.json", render_flow_json(&sc, &p, &demo))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
