//! Best-reply dynamics between the Resource Manager and the Class Managers.
//!
//! Every round the RM prices and allocates capacity for the current bids,
//! then each CM best-responds to its allotment and, if it still rejects
//! jobs, raises its bid. The loop stops once the summed relative change of
//! the allocation drops below `epsilon_bar`.

use serde::{Deserialize, Serialize};

use crate::centralized::{ClassAllocation, ContinuousAllocation};
use crate::cm::CmState;
use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::rm::solve_rm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LoopConfig {
    pub epsilon_bar: f64,
    pub lambda: f64,
    pub max_iterations: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            epsilon_bar: 0.03,
            lambda: 0.05,
            max_iterations: 1000,
        }
    }
}

impl LoopConfig {
    pub fn with_epsilon(epsilon_bar: f64) -> Self {
        LoopConfig {
            epsilon_bar,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.epsilon_bar > 0.0) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::invalid("lambda", "must lie in (0, 1)"));
        }
        if self.max_iterations < 1 {
            return Err(Error::invalid("maxIterations", "must be at least 1"));
        }
        Ok(())
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IterationTrace {
    pub iteration: usize,
    pub epsilon: f64,
    pub price: f64,
    pub total_allocated: f64,
    pub num_rejecting_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EquilibriumResult {
    pub allocation: ContinuousAllocation,
    pub bids: Vec<f64>,
    pub price: f64,
    pub iterations: usize,
    pub epsilon_trace: Vec<f64>,
    pub trace: Vec<IterationTrace>,
    pub converged: bool,
    pub distributed_cost: f64,
}

/// `sum_i |r_i - r_old_i| / r_old_i`.
pub fn convergence_metric(r: &[f64], r_old: &[f64]) -> f64 {
    r.iter()
        .zip(r_old)
        .map(|(new, old)| (new - old).abs() / old)
        .sum()
}

/// Energy plus penalties of the CM responses; the same expression as the
/// centralized objective, evaluated at the equilibrium.
pub fn distributed_cost(allocation: &ContinuousAllocation, instance: &ProblemInstance) -> f64 {
    let rho_bar = instance.rho_bar();
    allocation
        .per_class
        .iter()
        .zip(&instance.classes)
        .map(|(a, c)| c.derived.penalty(a.psi) + rho_bar * a.r)
        .sum()
}

/// Wall time of the loop if all CMs ran on their own node: the serial time
/// spread over `n` CMs plus one message exchange per iteration.
pub fn estimate_distributed_time(serial_seconds: f64, n: usize, iterations: usize, per_message_seconds: f64) -> f64 {
    serial_seconds / n.max(1) as f64 + iterations as f64 * per_message_seconds
}

fn snapshot(states: &[CmState]) -> Vec<ClassAllocation> {
    states
        .iter()
        .map(|s| ClassAllocation {
            id: s.class_id,
            r: s.r,
            psi: s.psi,
            s_map: s.s_map,
            s_reduce: s.s_reduce,
        })
        .collect()
}

/// Runs the best-reply iteration to its stopping criterion.
pub fn run_best_reply(instance: &ProblemInstance, config: &LoopConfig) -> Result<EquilibriumResult> {
    config.check()?;
    instance.ensure_feasible()?;
    let rho_bar = instance.rho_bar();

    let mut states: Vec<CmState> = instance
        .classes
        .iter()
        .map(|c| CmState::initial(c, rho_bar))
        .collect();
    let mut epsilon_trace = Vec::new();
    let mut trace = Vec::new();
    let mut price = rho_bar;
    let mut converged = false;

    for iteration in 1..=config.max_iterations {
        let r_old: Vec<f64> = states.iter().map(|s| s.r).collect();
        let bids: Vec<f64> = states.iter().map(|s| s.rho_a).collect();
        let rm = solve_rm(instance, &bids)?;
        price = rm.price;

        for ((state, class), &r) in states.iter_mut().zip(&instance.classes).zip(&rm.r) {
            state.respond(&class.derived, r, price, config.lambda)?;
        }

        let epsilon = convergence_metric(&rm.r, &r_old);
        epsilon_trace.push(epsilon);
        trace.push(IterationTrace {
            iteration,
            epsilon,
            price,
            total_allocated: rm.r.iter().sum(),
            num_rejecting_classes: states.iter().filter(|s| s.rejecting).count(),
        });
        if epsilon < config.epsilon_bar {
            converged = true;
            break;
        }
    }

    let allocation = ContinuousAllocation::new(instance, snapshot(&states));
    let distributed_cost = distributed_cost(&allocation, instance);
    Ok(EquilibriumResult {
        allocation,
        bids: states.iter().map(|s| s.rho_a).collect(),
        price,
        iterations: epsilon_trace.len(),
        epsilon_trace,
        trace,
        converged,
        distributed_cost,
    })
}
