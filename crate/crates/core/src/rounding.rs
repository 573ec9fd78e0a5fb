//! Integer rounding of a continuous allocation.
//!
//! VM counts are rounded up and then, walking classes by increasing penalty
//! slope `alpha`, decremented once each while the cluster is over capacity.
//! Slots are rounded up and trimmed, Reduce first, until they fit on the
//! class's VMs. The deadline constraint is not enforced on the result; its
//! slack is reported instead.

use serde::Serialize;

use crate::centralized::ContinuousAllocation;
use crate::error::{Error, Result};
use crate::model::{predicted_time, ClassId, ProblemInstance};

/// Relative slack on `sum r_hat <= R` for floating-point noise.
const CAPACITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IntegerClass {
    pub id: ClassId,
    pub r: u64,
    #[serde(rename = "sM")]
    pub s_map: u64,
    #[serde(rename = "sR")]
    pub s_reduce: u64,
    /// Reported concurrency `floor(r / K)` clamped to `[0, Hup]`.
    pub h: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RoundingCounters {
    /// Total capacity decrements across classes.
    pub r_decrements: usize,
    pub per_class_decrements: Vec<u32>,
    /// Iterations of the slot-trimming loop per class.
    pub slot_iterations: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IntegerAllocation {
    pub per_class: Vec<IntegerClass>,
    pub counters: RoundingCounters,
}

impl IntegerAllocation {
    pub fn total_vms(&self) -> u64 {
        self.per_class.iter().map(|c| c.r).sum()
    }
}

/// `sM / cM + sR / cR > r`, evaluated exactly in integers.
fn slots_exceed(s_map: u64, s_reduce: u64, c_map: u64, c_reduce: u64, r: u64) -> bool {
    u128::from(s_map) * u128::from(c_reduce) + u128::from(s_reduce) * u128::from(c_map)
        > u128::from(r) * u128::from(c_map) * u128::from(c_reduce)
}

fn ceil_u64(x: f64) -> u64 {
    if x <= 0.0 {
        0
    } else {
        x.ceil() as u64
    }
}

/// Rounds a continuous allocation to integer VMs and slots.
pub fn round_solution(continuous: &ContinuousAllocation, instance: &ProblemInstance) -> Result<IntegerAllocation> {
    let n = instance.len();
    if continuous.per_class.len() != n {
        return Err(Error::Precondition(format!(
            "allocation has {} classes, instance {}",
            continuous.per_class.len(),
            n
        )));
    }
    for (alloc, class) in continuous.per_class.iter().zip(&instance.classes) {
        if alloc.id != class.id() {
            return Err(Error::Precondition(format!(
                "allocation class {} does not match instance class {}",
                alloc.id,
                class.id()
            )));
        }
        if !(alloc.r >= 0.0 && alloc.s_map >= 0.0 && alloc.s_reduce >= 0.0) {
            return Err(Error::Precondition(format!("class {}: negative allocation", alloc.id)));
        }
    }
    let capacity = instance.capacity();
    let requested = continuous.total_vms();
    if requested > capacity * (1.0 + CAPACITY_SLACK) {
        return Err(Error::Precondition(format!(
            "continuous allocation uses {requested} VMs, capacity is {capacity}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (ci, cj) = (&instance.classes[i], &instance.classes[j]);
        ci.derived.alpha.total_cmp(&cj.derived.alpha).then(ci.id().cmp(&cj.id()))
    });

    let mut r: Vec<u64> = continuous.per_class.iter().map(|c| ceil_u64(c.r)).collect();
    let mut per_class_decrements = vec![0u32; n];
    let mut total: u64 = r.iter().sum();
    for &j in &order {
        if total as f64 > capacity && r[j] > 0 {
            r[j] -= 1;
            total -= 1;
            per_class_decrements[j] += 1;
        }
    }
    if total as f64 > capacity {
        return Err(Error::Precondition(format!(
            "rounded allocation of {total} VMs exceeds capacity {capacity}"
        )));
    }

    let mut slot_iterations = vec![0u32; n];
    let mut per_class = Vec::with_capacity(n);
    for (i, (alloc, class)) in continuous.per_class.iter().zip(&instance.classes).enumerate() {
        let (cm, cr) = (u64::from(class.spec.c_map), u64::from(class.spec.c_reduce));
        let mut s_map = ceil_u64(alloc.s_map);
        let mut s_reduce = ceil_u64(alloc.s_reduce);
        while slots_exceed(s_map, s_reduce, cm, cr, r[i]) {
            slot_iterations[i] += 1;
            s_reduce = s_reduce.saturating_sub(1);
            if slots_exceed(s_map, s_reduce, cm, cr, r[i]) {
                s_map = s_map.saturating_sub(1);
            }
        }
        let h = (r[i] as f64 / class.derived.k)
            .floor()
            .clamp(0.0, f64::from(class.spec.h_up)) as u64;
        per_class.push(IntegerClass {
            id: class.id(),
            r: r[i],
            s_map,
            s_reduce,
            h,
        });
    }

    Ok(IntegerAllocation {
        per_class,
        counters: RoundingCounters {
            r_decrements: per_class_decrements.iter().map(|&d| d as usize).sum(),
            per_class_decrements,
            slot_iterations,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassFeasibility {
    pub id: ClassId,
    /// `sM / cM + sR / cR <= r`.
    pub slots_fit: bool,
    /// Predicted time minus deadline; positive when the deadline is missed,
    /// absent when a slot count is zero.
    pub deadline_slack: Option<f64>,
    pub below_r_low: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FeasibilityReport {
    pub capacity_ok: bool,
    pub per_class: Vec<ClassFeasibility>,
    pub violations: Vec<String>,
}

impl FeasibilityReport {
    /// Capacity and slot constraints hold. Deadline slack is informational.
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the hard constraints of an integer allocation and reports deadline
/// slack and classes left under their guaranteed minimum.
pub fn check_integer_feasibility(alloc: &IntegerAllocation, instance: &ProblemInstance) -> FeasibilityReport {
    let mut violations = Vec::new();
    let total = alloc.total_vms();
    let capacity_ok = total as f64 <= instance.capacity();
    if !capacity_ok {
        violations.push(format!("{total} VMs exceed capacity {}", instance.capacity()));
    }
    if alloc.per_class.len() != instance.len() {
        violations.push(format!(
            "allocation has {} classes, instance {}",
            alloc.per_class.len(),
            instance.len()
        ));
    }
    let per_class = alloc
        .per_class
        .iter()
        .zip(&instance.classes)
        .map(|(a, class)| {
            let spec = &class.spec;
            let slots_fit = !slots_exceed(a.s_map, a.s_reduce, spec.c_map.into(), spec.c_reduce.into(), a.r);
            if !slots_fit {
                violations.push(format!(
                    "class {}: {} map + {} reduce slots do not fit on {} VMs",
                    a.id, a.s_map, a.s_reduce, a.r
                ));
            }
            let deadline_slack = predicted_time(
                spec.a,
                spec.b,
                spec.c,
                a.h as f64,
                a.s_map as f64,
                a.s_reduce as f64,
            )
            .ok()
            .map(|t| t - spec.d);
            ClassFeasibility {
                id: a.id,
                slots_fit,
                deadline_slack,
                below_r_low: (a.r as f64) < class.derived.r_low,
            }
        })
        .collect();
    FeasibilityReport {
        capacity_ok,
        per_class,
        violations,
    }
}
