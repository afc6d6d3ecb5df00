use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use namo_core::sim::{run_scenario, PerceptionMode, RunOptions, Scenario, StopReason};

#[derive(Parser)]
#[command(name = "namo-sim", version, about = "Run navigation-among-movable-obstacles scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario file and write the trajectory and report.
    Run(RunArgs),
    /// Check a scenario file without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for trajectory.csv, report.json and SVG frames.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write frame_<tick>.svg every N ticks.
    #[arg(long, value_name = "TICKS")]
    svg_every: Option<u64>,
    /// Override the scenario's tick budget.
    #[arg(long, value_name = "N")]
    max_ticks: Option<u64>,
    #[arg(long, value_enum, default_value_t = Perception::Rendered)]
    perception: Perception,
    /// Only report errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Perception {
    Rendered,
    Oracle,
}

const EXIT_INVALID: u8 = 1;
const EXIT_STUCK: u8 = 2;
const EXIT_MAX_TICKS: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(&args),
        Command::Validate { scenario } => validate(&scenario),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn load(path: &Path) -> Result<Scenario> {
    let scenario = Scenario::load(path).with_context(|| format!("loading {}", path.display()))?;
    scenario
        .validate()
        .with_context(|| format!("validating {}", path.display()))?;
    Ok(scenario)
}

fn validate(path: &Path) -> Result<ExitCode> {
    load(path)?;
    println!("{}: ok", path.display());
    Ok(ExitCode::SUCCESS)
}

fn run(args: &RunArgs) -> Result<ExitCode> {
    let scenario = load(&args.scenario)?;
    let opts = RunOptions {
        perception: match args.perception {
            Perception::Rendered => PerceptionMode::Rendered,
            Perception::Oracle => PerceptionMode::Oracle,
        },
        max_ticks: args.max_ticks,
        svg_every: args.svg_every,
        ..Default::default()
    };
    let out = run_scenario(&scenario, &opts)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("trajectory.csv"), out.trajectory_csv())?;
    fs::write(args.out.join("report.json"), out.report_json())?;
    for (tick, svg) in &out.frames {
        fs::write(args.out.join(format!("frame_{tick:05}.svg")), svg)?;
    }

    if !args.quiet {
        let r = &out.report;
        println!(
            "{}: {:?} after {} ticks ({:.2} s), path {:.2} m, {} replans",
            args.scenario.display(),
            out.stop,
            r.ticks,
            r.sim_time_s,
            r.path_length_m,
            r.replans
        );
        for p in &r.pushes {
            println!(
                "  pushed object {}: {:.3} m, peak {:.2} A{}",
                p.object_id,
                p.push_distance_m,
                p.max_current_a,
                if p.limit_tripped { ", current limit tripped" } else { "" }
            );
        }
    }
    Ok(match out.stop {
        StopReason::GoalReached => ExitCode::SUCCESS,
        StopReason::Stuck => ExitCode::from(EXIT_STUCK),
        StopReason::MaxTicks => ExitCode::from(EXIT_MAX_TICKS),
    })
}
