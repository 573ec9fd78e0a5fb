//! Experiment campaigns: capacity and deadline sweeps, scalability and
//! tolerance sensitivity, plus CSV output.
//!
//! CSV files start with a `# generated <timestamp>` line; everything after
//! it is a deterministic function of the inputs.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::centralized::{solve_reduced, ContinuousAllocation};
use crate::error::{Error, Result};
use crate::game::{estimate_distributed_time, run_best_reply, LoopConfig};
use crate::generator::{generate, CapacityRule, GeneratorConfig};
use crate::model::ProblemInstance;
use crate::rounding::{check_integer_feasibility, round_solution};

pub const GENERATED_PREFIX: &str = "# generated ";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioRow {
    /// Capacity for the capacity sweep, deadline factor for the deadline sweep.
    pub sweep_value: f64,
    pub cost_centralized: Option<f64>,
    pub cost_distributed: Option<f64>,
    /// Rejection penalties of the centralized optimum.
    pub penalty_total: Option<f64>,
    pub iterations: Option<usize>,
    pub feasible: bool,
    pub chi: Option<f64>,
}

impl ScenarioRow {
    fn infeasible(sweep_value: f64) -> Self {
        ScenarioRow {
            sweep_value,
            cost_centralized: None,
            cost_distributed: None,
            penalty_total: None,
            iterations: None,
            feasible: false,
            chi: None,
        }
    }
}

/// `(C^d - C^c) / C^c`.
pub fn relative_gap(cost_centralized: f64, cost_distributed: f64) -> f64 {
    (cost_distributed - cost_centralized) / cost_centralized
}

/// Fraction of the allocated VMs held by each class.
pub fn report_shares(r: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = r.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Precondition(format!("total allocation {total} is not positive")));
    }
    Ok(r.iter().map(|x| x / total).collect())
}

fn round_checked(allocation: &ContinuousAllocation, instance: &ProblemInstance) -> Result<()> {
    let rounded = round_solution(allocation, instance)?;
    let report = check_integer_feasibility(&rounded, instance);
    if !report.is_feasible() {
        return Err(Error::Precondition(report.violations.join("; ")));
    }
    Ok(())
}

/// One sweep step: both solvers and rounding of both solutions.
pub fn evaluate(instance: &ProblemInstance, config: &LoopConfig, sweep_value: f64) -> Result<ScenarioRow> {
    if !instance.is_feasible() {
        return Ok(ScenarioRow::infeasible(sweep_value));
    }
    let central = solve_reduced(instance)?;
    let game = run_best_reply(instance, config)?;
    round_checked(&central.allocation, instance)?;
    round_checked(&game.allocation, instance)?;
    let cost_centralized = central.allocation.objective;
    Ok(ScenarioRow {
        sweep_value,
        cost_centralized: Some(cost_centralized),
        cost_distributed: Some(game.distributed_cost),
        penalty_total: Some(central.allocation.penalty_cost),
        iterations: Some(game.iterations),
        feasible: true,
        chi: Some(relative_gap(cost_centralized, game.distributed_cost)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    /// Starting capacity as a multiple of `sum r_up`.
    pub start_factor: f64,
    /// Capacity step as a fraction of `sum r_up`, or deadline factor step.
    pub step: f64,
    pub loop_config: LoopConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            start_factor: 1.1,
            step: 0.05,
            loop_config: LoopConfig::default(),
        }
    }
}

impl SweepConfig {
    fn check(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid("step", format!("must be positive, got {}", self.step)));
        }
        if !(self.start_factor > 0.0 && self.start_factor.is_finite()) {
            return Err(Error::invalid("start", format!("must be positive, got {}", self.start_factor)));
        }
        Ok(())
    }
}

/// Capacity from `start_factor * sum r_up` down in steps of
/// `step * sum r_up`; the first infeasible step is the last row.
pub fn run_decreasing_capacity(instance: &ProblemInstance, config: &SweepConfig) -> Result<Vec<ScenarioRow>> {
    config.check()?;
    let r_opt = instance.max_demand();
    let mut rows = Vec::new();
    for k in 0u32.. {
        let factor = config.start_factor - f64::from(k) * config.step;
        let capacity = factor * r_opt;
        let row = match instance.with_capacity(capacity) {
            Ok(inst) => evaluate(&inst, &config.loop_config, capacity)?,
            Err(_) => ScenarioRow::infeasible(capacity),
        };
        rows.push(row);
        if !row.feasible {
            break;
        }
    }
    Ok(rows)
}

/// Capacity fixed at `start_factor * sum r_up` for the original deadlines;
/// deadlines scaled by `1, 1 - step, 1 - 2 step, ...` until a step is
/// infeasible, either because a class cannot meet its deadline at all or
/// because the cluster is too small.
pub fn run_decreasing_deadlines(instance: &ProblemInstance, config: &SweepConfig) -> Result<Vec<ScenarioRow>> {
    config.check()?;
    let base = instance.with_capacity(config.start_factor * instance.max_demand())?;
    let mut rows = Vec::new();
    for k in 0u32.. {
        let factor = 1.0 - f64::from(k) * config.step;
        let row = match base.with_deadline_scale(factor) {
            Ok(inst) => evaluate(&inst, &config.loop_config, factor)?,
            Err(Error::DeadlineInfeasible { .. } | Error::InvalidParameter { .. }) => ScenarioRow::infeasible(factor),
            Err(e) => return Err(e),
        };
        rows.push(row);
        if !row.feasible {
            break;
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub n_values: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Capacity as a multiple of `sum r_up`.
    pub capacity_factor: f64,
    pub loop_config: LoopConfig,
    /// Network delay per RM/CM exchange for the distributed time estimate.
    pub per_message_seconds: f64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            n_values: (20..=500).step_by(20).collect(),
            seeds: (0..10).collect(),
            capacity_factor: 0.9,
            loop_config: LoopConfig::default(),
            per_message_seconds: 0.0,
        }
    }
}

/// One `(N, seed)` run of a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunRecord {
    pub n: usize,
    pub seed: u64,
    pub epsilon_bar: f64,
    pub feasible: bool,
    pub cost_centralized: Option<f64>,
    pub cost_distributed: Option<f64>,
    pub chi: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub centralized_seconds: f64,
    pub game_seconds: f64,
}

/// Generates the `(n, seed)` instance and plays one game per loop config
/// against a single centralized solve.
pub fn run_cell(
    n: usize,
    seed: u64,
    capacity_factor: f64,
    loop_configs: &[LoopConfig],
) -> Result<Vec<RunRecord>> {
    let gen = GeneratorConfig::new(n, seed).with_capacity_rule(CapacityRule::MultipleOfOptimal {
        factor: capacity_factor,
    });
    let instance = generate(&gen)?;
    let blank = |epsilon_bar| RunRecord {
        n,
        seed,
        epsilon_bar,
        feasible: false,
        cost_centralized: None,
        cost_distributed: None,
        chi: None,
        iterations: None,
        converged: false,
        centralized_seconds: 0.0,
        game_seconds: 0.0,
    };
    if !instance.is_feasible() {
        return Ok(loop_configs.iter().map(|c| blank(c.epsilon_bar)).collect());
    }
    let start = Instant::now();
    let central = solve_reduced(&instance)?;
    let centralized_seconds = start.elapsed().as_secs_f64();
    let cost_centralized = central.allocation.objective;

    loop_configs
        .iter()
        .map(|config| {
            let start = Instant::now();
            let game = run_best_reply(&instance, config)?;
            let game_seconds = start.elapsed().as_secs_f64();
            Ok(RunRecord {
                feasible: true,
                cost_centralized: Some(cost_centralized),
                cost_distributed: Some(game.distributed_cost),
                chi: Some(relative_gap(cost_centralized, game.distributed_cost)),
                iterations: Some(game.iterations),
                converged: game.converged,
                centralized_seconds,
                game_seconds,
                ..blank(config.epsilon_bar)
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScalabilityRow {
    pub n: usize,
    pub runs: usize,
    pub feasible_runs: usize,
    pub converged_runs: usize,
    pub mean_cost_centralized: Option<f64>,
    pub mean_cost_distributed: Option<f64>,
    pub mean_chi: Option<f64>,
    pub max_chi: Option<f64>,
    pub mean_iterations: Option<f64>,
}

/// Wall-clock figures, kept apart from the deterministic table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TimingRow {
    pub n: usize,
    pub mean_centralized_seconds: f64,
    pub mean_game_seconds: f64,
    pub mean_estimated_distributed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalabilityReport {
    pub rows: Vec<ScalabilityRow>,
    pub timings: Vec<TimingRow>,
    pub runs: Vec<RunRecord>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn aggregate(n: usize, runs: &[RunRecord]) -> ScalabilityRow {
    let feasible: Vec<&RunRecord> = runs.iter().filter(|r| r.feasible).collect();
    ScalabilityRow {
        n,
        runs: runs.len(),
        feasible_runs: feasible.len(),
        converged_runs: feasible.iter().filter(|r| r.converged).count(),
        mean_cost_centralized: mean(feasible.iter().filter_map(|r| r.cost_centralized)),
        mean_cost_distributed: mean(feasible.iter().filter_map(|r| r.cost_distributed)),
        mean_chi: mean(feasible.iter().filter_map(|r| r.chi)),
        max_chi: feasible.iter().filter_map(|r| r.chi).reduce(f64::max),
        mean_iterations: mean(feasible.iter().filter_map(|r| r.iterations.map(|i| i as f64))),
    }
}

fn check_campaign(config: &CampaignConfig) -> Result<()> {
    if config.n_values.is_empty() || config.n_values.contains(&0) {
        return Err(Error::invalid("N", "class counts must be positive"));
    }
    if config.seeds.is_empty() {
        return Err(Error::invalid("seeds", "at least one seed is required"));
    }
    if !(config.per_message_seconds >= 0.0) {
        return Err(Error::invalid("messageDelay", "must be non-negative"));
    }
    Ok(())
}

/// Mean costs and gaps per class count, with timings.
pub fn run_scalability(config: &CampaignConfig) -> Result<ScalabilityReport> {
    check_campaign(config)?;
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    let mut all_runs = Vec::new();
    for &n in &config.n_values {
        let mut runs = Vec::with_capacity(config.seeds.len());
        for &seed in &config.seeds {
            runs.extend(run_cell(n, seed, config.capacity_factor, &[config.loop_config])?);
        }
        rows.push(aggregate(n, &runs));
        let feasible: Vec<&RunRecord> = runs.iter().filter(|r| r.feasible).collect();
        timings.push(TimingRow {
            n,
            mean_centralized_seconds: mean(feasible.iter().map(|r| r.centralized_seconds)).unwrap_or(0.0),
            mean_game_seconds: mean(feasible.iter().map(|r| r.game_seconds)).unwrap_or(0.0),
            mean_estimated_distributed_seconds: mean(feasible.iter().map(|r| {
                estimate_distributed_time(
                    r.game_seconds,
                    n,
                    r.iterations.unwrap_or(0),
                    config.per_message_seconds,
                )
            }))
            .unwrap_or(0.0),
        });
        all_runs.extend(runs);
    }
    Ok(ScalabilityReport {
        rows,
        timings,
        runs: all_runs,
    })
}

pub const SENSITIVITY_EPSILONS: [f64; 4] = [0.01, 0.03, 0.05, 0.10];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SensitivityRow {
    pub n: usize,
    pub epsilon_bar: f64,
    pub runs: usize,
    pub feasible_runs: usize,
    pub converged_runs: usize,
    pub mean_chi: Option<f64>,
    pub max_chi: Option<f64>,
    pub mean_iterations: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub rows: Vec<SensitivityRow>,
    pub runs: Vec<RunRecord>,
}

/// The scalability campaign repeated for each stopping tolerance on the same
/// instances. `config.loop_config.epsilon_bar` is ignored.
pub fn run_sensitivity(config: &CampaignConfig, epsilons: &[f64]) -> Result<SensitivityReport> {
    check_campaign(config)?;
    if epsilons.is_empty() {
        return Err(Error::invalid("epsilon", "at least one tolerance is required"));
    }
    let loops: Vec<LoopConfig> = epsilons
        .iter()
        .map(|&epsilon_bar| LoopConfig {
            epsilon_bar,
            ..config.loop_config
        })
        .collect();
    let mut rows = Vec::new();
    let mut all_runs = Vec::new();
    for &n in &config.n_values {
        let mut runs = Vec::new();
        for &seed in &config.seeds {
            runs.extend(run_cell(n, seed, config.capacity_factor, &loops)?);
        }
        for &epsilon_bar in epsilons {
            let series: Vec<RunRecord> = runs.iter().filter(|r| r.epsilon_bar == epsilon_bar).copied().collect();
            let agg = aggregate(n, &series);
            rows.push(SensitivityRow {
                n,
                epsilon_bar,
                runs: agg.runs,
                feasible_runs: agg.feasible_runs,
                converged_runs: agg.converged_runs,
                mean_chi: agg.mean_chi,
                max_chi: agg.max_chi,
                mean_iterations: agg.mean_iterations,
            });
        }
        all_runs.extend(runs);
    }
    Ok(SensitivityReport { rows, runs: all_runs })
}

/// Writes the timestamp line followed by a header row and one row per item.
pub fn write_csv<T: Serialize, W: Write>(mut out: W, rows: &[T]) -> Result<()> {
    writeln!(out, "{GENERATED_PREFIX}{}", chrono::Utc::now().to_rfc3339()).map_err(|e| Error::Io(e.to_string()))?;
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::Io(e.to_string()))
}

/// The CSV text without its timestamp line.
pub fn strip_generated_header(text: &str) -> &str {
    match text.strip_prefix(GENERATED_PREFIX) {
        Some(rest) => rest.split_once('\n').map_or("", |(_, body)| body),
        None => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> ProblemInstance {
        generate(&GeneratorConfig::new(6, 21)).unwrap()
    }

    #[test]
    fn shares_examples() {
        assert_eq!(report_shares(&[1.0, 3.0]).unwrap(), vec![0.25, 0.75]);
        assert_eq!(report_shares(&[7.5]).unwrap(), vec![1.0]);
        assert_eq!(report_shares(&[2.0; 4]).unwrap(), vec![0.25; 4]);
        assert!(report_shares(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn capacity_sweep_endpoints() {
        let inst = small();
        let rows = run_decreasing_capacity(&inst, &SweepConfig::default()).unwrap();
        let first = rows[0];
        assert_relative_eq!(first.sweep_value, 1.1 * inst.max_demand(), max_relative = 1e-15);
        assert_eq!(first.penalty_total, Some(0.0));
        assert_relative_eq!(
            first.cost_centralized.unwrap(),
            inst.rho_bar() * inst.max_demand(),
            max_relative = 1e-12
        );
        let last = rows.last().unwrap();
        assert!(!last.feasible);
        assert!(last.sweep_value < inst.min_demand());
        assert!(rows[..rows.len() - 1].iter().all(|r| r.feasible));
    }

    #[test]
    fn deadline_sweep_stops_at_first_infeasible() {
        let inst = small();
        let rows = run_decreasing_deadlines(&inst, &SweepConfig::default()).unwrap();
        assert_eq!(rows[0].sweep_value, 1.0);
        assert_eq!(rows[0].penalty_total, Some(0.0));
        assert!(!rows.last().unwrap().feasible);
        assert_eq!(rows.iter().filter(|r| !r.feasible).count(), 1);
    }

    #[test]
    fn bad_step_rejected() {
        let cfg = SweepConfig {
            step: 0.0,
            ..Default::default()
        };
        assert!(run_decreasing_capacity(&small(), &cfg).is_err());
    }

    #[test]
    fn chi_recomputes_from_columns() {
        let rows = run_decreasing_capacity(&small(), &SweepConfig::default()).unwrap();
        for r in rows.iter().filter(|r| r.feasible) {
            assert_eq!(
                r.chi.unwrap(),
                relative_gap(r.cost_centralized.unwrap(), r.cost_distributed.unwrap())
            );
        }
    }

    #[test]
    fn csv_has_header_and_columns() {
        let rows = run_decreasing_capacity(&small(), &SweepConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(GENERATED_PREFIX));
        let body = strip_generated_header(&text);
        assert_eq!(
            body.lines().next().unwrap(),
            "sweepValue,costCentralized,costDistributed,penaltyTotal,iterations,feasible,chi"
        );
        assert_eq!(body.lines().count(), rows.len() + 1);
        assert!(body.lines().last().unwrap().ends_with(",false,"));
    }

    #[test]
    fn small_campaign_shapes() {
        let cfg = CampaignConfig {
            n_values: vec![3, 6],
            seeds: vec![0, 1],
            ..Default::default()
        };
        let report = run_scalability(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.timings.len(), 2);
        assert_eq!(report.runs.len(), 4);
        assert!(report.rows.iter().all(|r| r.feasible_runs == 2 && r.converged_runs == 2));

        let sens = run_sensitivity(&cfg, &SENSITIVITY_EPSILONS).unwrap();
        assert_eq!(sens.rows.len(), 8);
        assert_eq!(sens.runs.len(), 16);
    }

    #[test]
    fn default_campaign_grid() {
        let cfg = CampaignConfig::default();
        assert_eq!(cfg.n_values.len(), 25);
        assert_eq!((cfg.n_values[0], cfg.n_values[24]), (20, 500));
        assert_eq!(cfg.seeds.len(), 10);
    }
}
