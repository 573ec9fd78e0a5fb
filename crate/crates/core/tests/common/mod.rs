//! Independent reference computations shared by the integration tests and
//! the acceptance harness. Everything here works from the raw class
//! `JobClassSpec`, not from the derived constants the library computes.

#![allow(dead_code)]

use capgame::generator::{generate, CapacityRule, GeneratorConfig};
use capgame::model::{JobClassSpec, ProblemInstance};
use capgame::rounding::IntegerAllocation;

/// Generated instance with `R = factor * sum r_up`.
pub fn instance(n: usize, seed: u64, factor: f64) -> ProblemInstance {
    generate(&GeneratorConfig::new(n, seed).with_capacity_rule(CapacityRule::MultipleOfOptimal { factor })).unwrap()
}

/// VMs needed for one job by its deadline, from the job profile.
pub fn vms_per_job(spec: &JobClassSpec) -> f64 {
    let root = (spec.a / f64::from(spec.c_map)).sqrt() + (spec.b / f64::from(spec.c_reduce)).sqrt();
    root * root / (spec.d - spec.c)
}

/// Energy plus penalty of running class `spec` on `r` VMs with concurrency
/// `h = r / K`: `rho_bar r + m Hlow (Hup / h - 1)`.
pub fn class_cost(spec: &JobClassSpec, rho_bar: f64, r: f64) -> f64 {
    let h = r / vms_per_job(spec);
    let (hup, hlow) = (f64::from(spec.h_up), f64::from(spec.h_low));
    rho_bar * r + spec.penalty * hlow * (hup / h - 1.0)
}

pub fn box_bounds(spec: &JobClassSpec) -> (f64, f64) {
    let k = vms_per_job(spec);
    (k * f64::from(spec.h_low), k * f64::from(spec.h_up))
}

/// Golden-section minimum of a convex function on `[lo, hi]`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi.abs().max(1.0) {
            break;
        }
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if f(x1) <= f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    f(0.5 * (lo + hi)).min(f(lo)).min(f(hi))
}

/// Minimum total cost by exhaustive search: every class but one on a grid
/// of spacing `step` (box ends included), the remaining class by a 1-D
/// search over what capacity is left. Each class takes the free role in
/// turn, so classes sitting on a bound are hit exactly. Returns `None` if no
/// grid point is feasible.
pub fn grid_oracle(instance: &ProblemInstance, step: f64) -> Option<f64> {
    let specs = instance.specs();
    (0..specs.len())
        .filter_map(|free| {
            let mut order = specs.clone();
            let last = order.remove(free);
            order.push(last);
            grid_with_last_free(&order, instance.rho_bar(), instance.capacity(), step)
        })
        .reduce(f64::min)
}

fn grid_with_last_free(specs: &[JobClassSpec], rho_bar: f64, capacity: f64, step: f64) -> Option<f64> {
    let grids: Vec<Vec<f64>> = specs[..specs.len() - 1]
        .iter()
        .map(|s| {
            let (lo, hi) = box_bounds(s);
            let mut g: Vec<f64> = (0..)
                .map(|k| lo + f64::from(k) * step)
                .take_while(|&x| x < hi)
                .collect();
            g.push(hi);
            g
        })
        .collect();
    let last = specs.last().unwrap();
    let (last_lo, last_hi) = box_bounds(last);

    let mut best: Option<f64> = None;
    let mut index = vec![0usize; grids.len()];
    loop {
        let used: f64 = index.iter().zip(&grids).map(|(&k, g)| g[k]).sum();
        let room = capacity - used;
        if room >= last_lo {
            let head: f64 = index
                .iter()
                .zip(&grids)
                .zip(specs)
                .map(|((&k, g), s)| class_cost(s, rho_bar, g[k]))
                .sum();
            let tail = golden_min(|r| class_cost(last, rho_bar, r), last_lo, last_hi.min(room));
            let total = head + tail;
            best = Some(best.map_or(total, |b: f64| b.min(total)));
        }
        // Odometer increment over the grids.
        let mut pos = 0;
        loop {
            if pos == grids.len() {
                return best;
            }
            index[pos] += 1;
            if index[pos] < grids[pos].len() {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
    }
}

/// Capacity and slot fit of an integer allocation, in exact arithmetic.
/// Integrality holds by construction of the type.
pub fn integer_postconditions(alloc: &IntegerAllocation, instance: &ProblemInstance) -> Result<(), String> {
    let total: u64 = alloc.per_class.iter().map(|c| c.r).sum();
    if total as f64 > instance.capacity() {
        return Err(format!("{total} VMs exceed capacity {}", instance.capacity()));
    }
    for (c, spec) in alloc.per_class.iter().zip(instance.specs()) {
        let (cm, cr) = (u128::from(spec.c_map), u128::from(spec.c_reduce));
        if u128::from(c.s_map) * cr + u128::from(c.s_reduce) * cm > u128::from(c.r) * cm * cr {
            return Err(format!("class {}: slots do not fit", c.id));
        }
    }
    Ok(())
}
