use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use capgame::centralized::{solve_reduced, ClassAllocation, ContinuousAllocation};
use capgame::error::Error;
use capgame::experiments::{
    run_decreasing_capacity, run_decreasing_deadlines, run_scalability, run_sensitivity, write_csv, CampaignConfig,
    SweepConfig, SENSITIVITY_EPSILONS,
};
use capgame::game::{run_best_reply, LoopConfig};
use capgame::generator::{generate, CapacityRule, GeneratorConfig, PenaltyMode};
use capgame::model::ProblemInstance;
use capgame::rounding::{check_integer_feasibility, round_solution};

#[derive(Parser)]
#[command(name = "capgame", version, about = "Capacity allocation for multi-class MapReduce clusters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random instance.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Capacity as a multiple of sum r_up.
        #[arg(long, default_value_t = 1.1, conflicts_with = "capacity")]
        capacity_factor: f64,
        /// Explicit capacity in VMs.
        #[arg(long)]
        capacity: Option<f64>,
        #[arg(long)]
        calibrate_penalties: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Centralized optimum of the continuous relaxation.
    SolveCentralized {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Best-reply equilibrium between the resource manager and class managers.
    SolveGame {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0.03)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        lambda: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        /// Per-iteration trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Round a continuous allocation to integer VMs and slots.
    Round {
        #[arg(long)]
        instance: PathBuf,
        /// Output of solve-centralized or solve-game.
        #[arg(long)]
        allocation: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Capacity or deadline sweep.
    Scenario {
        kind: ScenarioKind,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = 0.03)]
        epsilon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Costs and gaps for N = 20, 40, ..., 500.
    Scalability {
        /// Number of seeds per class count, seeds 0..n.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0.03)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.9)]
        capacity_factor: f64,
        /// Network delay per exchange for the distributed time estimate.
        #[arg(long, default_value_t = 0.0)]
        message_delay: f64,
        /// Largest class count.
        #[arg(long, default_value_t = 500)]
        max_n: usize,
        /// Wall-clock columns go to <out>_timing.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gaps for stopping tolerances 1%, 3%, 5% and 10%.
    Sensitivity {
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0.9)]
        capacity_factor: f64,
        #[arg(long, default_value_t = 500)]
        max_n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioKind {
    Capacity,
    Deadline,
}

/// The part of either solver's output that rounding needs. The centralized
/// report carries it at the top level, the game result under `allocation`.
#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct PerClass {
    per_class: Vec<ClassAllocation>,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

fn read_instance(path: &Path) -> Result<ProblemInstance, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ProblemInstance::from_json(&text)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), Error> {
    let mut out = sink(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Error::Io(e.to_string()))?;
    out.flush().map_err(|e| Error::Io(e.to_string()))
}

fn write_rows<T: Serialize>(path: Option<&Path>, rows: &[T]) -> Result<(), Error> {
    write_csv(sink(path)?, rows)
}

fn timing_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_timing.csv"))
}

fn campaign(seeds: u64, capacity_factor: f64, max_n: usize, loop_config: LoopConfig) -> CampaignConfig {
    CampaignConfig {
        n_values: (20..=max_n).step_by(20).collect(),
        seeds: (0..seeds).collect(),
        capacity_factor,
        loop_config,
        ..Default::default()
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate {
            n,
            seed,
            capacity_factor,
            capacity,
            calibrate_penalties,
            out,
        } => {
            let mut config = GeneratorConfig::new(n, seed).with_capacity_rule(match capacity {
                Some(capacity) => CapacityRule::Explicit { capacity },
                None => CapacityRule::MultipleOfOptimal {
                    factor: capacity_factor,
                },
            });
            if calibrate_penalties {
                config.penalty_mode = PenaltyMode::Calibrated;
            }
            let instance = generate(&config)?;
            let mut w = sink(out.as_deref())?;
            writeln!(w, "{}", instance.to_json()).map_err(|e| Error::Io(e.to_string()))?;
            w.flush().map_err(|e| Error::Io(e.to_string()))
        }
        Command::SolveCentralized { instance, out } => {
            let instance = read_instance(&instance)?;
            let report = solve_reduced(&instance)?;
            write_json(out.as_deref(), &report)
        }
        Command::SolveGame {
            instance,
            epsilon,
            lambda,
            max_iter,
            trace,
            out,
        } => {
            let instance = read_instance(&instance)?;
            let config = LoopConfig {
                epsilon_bar: epsilon,
                lambda,
                max_iterations: max_iter,
            };
            let result = run_best_reply(&instance, &config)?;
            if let Some(path) = trace {
                write_rows(Some(&path), &result.trace)?;
            }
            write_json(out.as_deref(), &result)
        }
        Command::Round {
            instance,
            allocation,
            out,
        } => {
            let instance = read_instance(&instance)?;
            let text = std::fs::read_to_string(&allocation)
                .map_err(|e| Error::Io(format!("{}: {e}", allocation.display())))?;
            let mut value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
            if let Some(nested) = value.get_mut("allocation") {
                value = nested.take();
            }
            let parsed: PerClass = serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
            let continuous = ContinuousAllocation::new(&instance, parsed.per_class);
            let rounded = round_solution(&continuous, &instance)?;
            let feasibility = check_integer_feasibility(&rounded, &instance);
            #[derive(Serialize)]
            struct Rounded<'a> {
                #[serde(flatten)]
                allocation: &'a capgame::rounding::IntegerAllocation,
                feasibility: &'a capgame::rounding::FeasibilityReport,
            }
            write_json(
                out.as_deref(),
                &Rounded {
                    allocation: &rounded,
                    feasibility: &feasibility,
                },
            )
        }
        Command::Scenario {
            kind,
            instance,
            step,
            epsilon,
            out,
        } => {
            let instance = read_instance(&instance)?;
            let config = SweepConfig {
                step,
                loop_config: LoopConfig::with_epsilon(epsilon),
                ..Default::default()
            };
            let rows = match kind {
                ScenarioKind::Capacity => run_decreasing_capacity(&instance, &config)?,
                ScenarioKind::Deadline => run_decreasing_deadlines(&instance, &config)?,
            };
            write_rows(out.as_deref(), &rows)
        }
        Command::Scalability {
            seeds,
            epsilon,
            capacity_factor,
            message_delay,
            max_n,
            out,
        } => {
            let mut config = campaign(seeds, capacity_factor, max_n, LoopConfig::with_epsilon(epsilon));
            config.per_message_seconds = message_delay;
            let report = run_scalability(&config)?;
            write_rows(out.as_deref(), &report.rows)?;
            match out {
                Some(path) => write_rows(Some(&timing_path(&path)), &report.timings),
                None => write_rows(None, &report.timings),
            }
        }
        Command::Sensitivity {
            seeds,
            capacity_factor,
            max_n,
            out,
        } => {
            let config = campaign(seeds, capacity_factor, max_n, LoopConfig::default());
            let report = run_sensitivity(&config, &SENSITIVITY_EPSILONS)?;
            write_rows(out.as_deref(), &report.rows)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = ErrorReport {
                error: e.code(),
                message: e.to_string(),
            };
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            ExitCode::FAILURE
        }
    }
}
