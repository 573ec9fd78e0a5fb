//! Centralized solver for the reduced capacity-allocation problem
//!
//! ```text
//! min  sum_i rho_bar r_i + alpha_i K_i / r_i - beta_i
//! s.t. sum_i r_i <= R,  r_low_i <= r_i <= r_up_i
//! ```
//!
//! The objective is separable and strictly convex with a single coupling
//! constraint, so for a capacity price `a >= 0` every class minimizes
//! independently at `r_i(a) = clamp(sqrt(alpha_i K_i / (rho_bar + a)))` and
//! `sum_i r_i(a)` is non-increasing in `a`. The optimal price is found by
//! bisection. Concurrency and slots follow from `r_i` in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassId, ClassParams, DerivedClassParams, ProblemInstance};

/// Relative tolerance on the capacity equation at the bisection exit.
pub const CAPACITY_TOLERANCE: f64 = 1e-13;
pub const MAX_BISECTION_ITERATIONS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAllocation {
    pub id: ClassId,
    pub r: f64,
    pub psi: f64,
    #[serde(rename = "sM")]
    pub s_map: f64,
    #[serde(rename = "sR")]
    pub s_reduce: f64,
}

/// Real-valued allocation with its cost breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ContinuousAllocation {
    pub objective: f64,
    pub energy_cost: f64,
    pub penalty_cost: f64,
    pub per_class: Vec<ClassAllocation>,
}

impl ContinuousAllocation {
    /// Builds an allocation and evaluates `sum rho_bar r + sum (alpha psi - beta)`.
    pub fn new(instance: &ProblemInstance, per_class: Vec<ClassAllocation>) -> Self {
        let rho_bar = instance.rho_bar();
        let energy_cost = per_class.iter().map(|c| rho_bar * c.r).sum::<f64>();
        let penalty_cost = per_class
            .iter()
            .zip(&instance.classes)
            .map(|(c, p)| p.derived.penalty(c.psi))
            .sum::<f64>();
        ContinuousAllocation {
            objective: energy_cost + penalty_cost,
            energy_cost,
            penalty_cost,
            per_class,
        }
    }

    pub fn total_vms(&self) -> f64 {
        self.per_class.iter().map(|c| c.r).sum()
    }

    pub fn vms(&self) -> Vec<f64> {
        self.per_class.iter().map(|c| c.r).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CentralizedReport {
    #[serde(flatten)]
    pub allocation: ContinuousAllocation,
    /// Price of one unit of capacity (multiplier of `sum r <= R`).
    pub capacity_dual: f64,
    pub kkt_residual: f64,
    pub feasible: bool,
    pub bisection_iterations: u32,
}

/// Slots and concurrency that saturate both the deadline and the slot
/// constraint for `r` VMs.
pub fn expand_solution(r: f64, params: &DerivedClassParams) -> Result<(f64, f64, f64)> {
    if !(r > 0.0) {
        return Err(Error::invalid("r", format!("must be positive, got {r}")));
    }
    // K / r_up and K / r_low equal the concurrency limits only up to rounding.
    let psi = if r >= params.r_up {
        params.psi_low
    } else if r <= params.r_low {
        params.psi_up
    } else {
        params.k / r
    };
    Ok((psi, params.xi_map * r, params.xi_reduce * r))
}

/// Relative residuals of the deadline constraint and the slot constraint:
/// `(A/(sM psi) + B/(sR psi) + E) / |E|` and `(sM/cM + sR/cR - r) / r`.
/// Both vanish when the constraints are active.
pub fn activation_residuals(class: &ClassParams, alloc: &ClassAllocation) -> (f64, f64) {
    let spec = &class.spec;
    let e = class.derived.e;
    let deadline = (spec.a / (alloc.s_map * alloc.psi) + spec.b / (alloc.s_reduce * alloc.psi) + e) / e.abs();
    let slots = (alloc.s_map / f64::from(spec.c_map) + alloc.s_reduce / f64::from(spec.c_reduce) - alloc.r) / alloc.r;
    (deadline, slots)
}

fn stationary_point(d: &DerivedClassParams, price: f64) -> f64 {
    (d.alpha * d.k / price).sqrt().clamp(d.r_low, d.r_up)
}

fn demand_at(instance: &ProblemInstance, price: f64) -> f64 {
    instance
        .classes
        .iter()
        .map(|c| stationary_point(&c.derived, price))
        .sum()
}

fn build_report(instance: &ProblemInstance, r: Vec<f64>, dual: f64, iterations: u32) -> Result<CentralizedReport> {
    let per_class = instance
        .classes
        .iter()
        .zip(r)
        .map(|(c, r)| {
            let (psi, s_map, s_reduce) = expand_solution(r, &c.derived)?;
            Ok(ClassAllocation {
                id: c.id(),
                r,
                psi,
                s_map,
                s_reduce,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = CentralizedReport {
        allocation: ContinuousAllocation::new(instance, per_class),
        capacity_dual: dual,
        kkt_residual: 0.0,
        feasible: true,
        bisection_iterations: iterations,
    };
    report.kkt_residual = kkt_residual(&report, instance);
    Ok(report)
}

/// Solves the reduced centralized problem exactly.
pub fn solve_reduced(instance: &ProblemInstance) -> Result<CentralizedReport> {
    instance.ensure_feasible()?;
    let rho_bar = instance.rho_bar();
    let capacity = instance.capacity();

    if instance.min_demand() == capacity {
        // Every class sits at its lower bound; the smallest supporting price
        // is the largest marginal penalty there.
        let dual = instance
            .classes
            .iter()
            .map(|c| c.derived.alpha * c.derived.k / (c.derived.r_low * c.derived.r_low) - rho_bar)
            .fold(0.0, f64::max);
        let r = instance.classes.iter().map(|c| c.derived.r_low).collect();
        return build_report(instance, r, dual, 0);
    }

    if demand_at(instance, rho_bar) <= capacity {
        let r = instance
            .classes
            .iter()
            .map(|c| stationary_point(&c.derived, rho_bar))
            .collect();
        return build_report(instance, r, 0.0, 0);
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    while demand_at(instance, rho_bar + hi) > capacity {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Precondition("capacity price diverged".into()));
        }
    }
    let mut iterations = 0;
    while iterations < MAX_BISECTION_ITERATIONS {
        if capacity - demand_at(instance, rho_bar + hi) <= CAPACITY_TOLERANCE * capacity {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if demand_at(instance, rho_bar + mid) > capacity {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let r = instance
        .classes
        .iter()
        .map(|c| stationary_point(&c.derived, rho_bar + hi))
        .collect();
    build_report(instance, r, hi, iterations)
}

/// Largest normalized violation of the optimality conditions.
///
/// Stationarity `rho_bar + a - alpha K / r^2` is measured relative to
/// `rho_bar + a`: zero for interior classes, sign-constrained at the box
/// bounds. Primal feasibility, `a >= 0` and `a (sum r - R) = 0` are added
/// relative to `R` and `rho_bar + a`.
pub fn kkt_residual(report: &CentralizedReport, instance: &ProblemInstance) -> f64 {
    let a = report.capacity_dual;
    let price = instance.rho_bar() + a;
    let capacity = instance.capacity();
    let mut worst: f64 = (-a).max(0.0) / price;

    for (alloc, class) in report.allocation.per_class.iter().zip(&instance.classes) {
        let d = &class.derived;
        let r = alloc.r;
        worst = worst.max((r - d.r_up).max(0.0) / d.r_up);
        worst = worst.max((d.r_low - r).max(0.0) / d.r_low);
        if d.r_up - d.r_low <= 1e-12 * d.r_up {
            continue;
        }
        let gradient = (price - d.alpha * d.k / (r * r)) / price;
        let violation = if r >= d.r_up * (1.0 - 1e-12) {
            gradient.max(0.0)
        } else if r <= d.r_low * (1.0 + 1e-12) {
            (-gradient).max(0.0)
        } else {
            gradient.abs()
        };
        worst = worst.max(violation);
    }

    let used = report.allocation.total_vms();
    worst = worst.max((used - capacity).max(0.0) / capacity);
    worst.max(a * (used - capacity).abs() / (price * capacity))
}
