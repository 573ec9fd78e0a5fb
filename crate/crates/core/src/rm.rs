//! Resource Manager: posts a single price, admits the classes bidding at
//! least that price to extra capacity and splits the spare VMs.
//!
//! The RM maximizes `sum (rho - rho_bar) r_i - sum p_i (r_up_i - r_i)`. For
//! a fixed eligibility set the coefficient of `r_i` is `rho - rho_bar + p_i`,
//! positive and differing between classes only through `p_i`, so the spare
//! capacity goes to eligible classes in decreasing `p_i` order. That
//! allocation does not depend on `rho`, so the objective is linear and
//! non-decreasing in `rho` and the best price for a given eligibility set is
//! the largest one preserving it: a bid value, or `rho_hat` when nobody is
//! eligible. Enumerating `{rho_bar} ∪ bids ∪ {rho_hat}` is therefore exact.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;

/// Bids may exceed their bounds by this relative amount before being rejected.
const BID_TOLERANCE: f64 = 1e-12;
/// Objective improvements smaller than this (relative) count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

pub const BRUTE_FORCE_MAX_CLASSES: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RmSolution {
    pub r: Vec<f64>,
    /// `y_i`: class `i` may receive VMs above `r_low_i`.
    pub eligible: Vec<bool>,
    pub price: f64,
    pub objective: f64,
}

/// `sum (rho - rho_bar) r_i - sum p_i (r_up_i - r_i)`.
pub fn rm_objective(solution: &RmSolution, instance: &ProblemInstance) -> f64 {
    objective(instance, &solution.r, solution.price)
}

fn objective(instance: &ProblemInstance, r: &[f64], price: f64) -> f64 {
    let margin = price - instance.rho_bar();
    let revenue: f64 = r.iter().map(|r| margin * r).sum();
    let penalty: f64 = instance
        .classes
        .iter()
        .zip(r)
        .map(|(c, r)| c.derived.p * (c.derived.r_up - r))
        .sum();
    revenue - penalty
}

fn check_bids(instance: &ProblemInstance, bids: &[f64]) -> Result<()> {
    if bids.len() != instance.len() {
        return Err(Error::Precondition(format!(
            "{} bids for {} classes",
            bids.len(),
            instance.len()
        )));
    }
    let rho_bar = instance.rho_bar();
    for (class, &bid) in instance.classes.iter().zip(bids) {
        let high = class.spec.rho_up;
        if !(bid >= rho_bar * (1.0 - BID_TOLERANCE) && bid <= high * (1.0 + BID_TOLERANCE)) {
            return Err(Error::InvalidBid {
                id: class.id(),
                bid,
                low: rho_bar,
                high,
            });
        }
    }
    Ok(())
}

/// Class indices by decreasing `p`, ties in instance order.
fn priority_order(instance: &ProblemInstance) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instance.len()).collect();
    order.sort_by(|&i, &j| {
        instance.classes[j]
            .derived
            .p
            .partial_cmp(&instance.classes[i].derived.p)
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    order
}

/// Gives every class `r_low`, then fills eligible classes up to `r_up` in
/// priority order while spare capacity lasts.
fn fill(instance: &ProblemInstance, order: &[usize], eligible: &[bool]) -> Vec<f64> {
    let mut r: Vec<f64> = instance.classes.iter().map(|c| c.derived.r_low).collect();
    let mut spare = (instance.capacity() - instance.min_demand()).max(0.0);
    for &i in order {
        if spare <= 0.0 {
            break;
        }
        if !eligible[i] {
            continue;
        }
        let d = &instance.classes[i].derived;
        let room = d.r_up - d.r_low;
        if spare >= room {
            r[i] = d.r_up;
            spare -= room;
        } else {
            r[i] = d.r_low + spare;
            spare = 0.0;
        }
    }
    r
}

fn improves(candidate: f64, best: f64) -> bool {
    candidate > best + TIE_TOLERANCE * best.abs().max(1.0)
}

/// Solves the RM problem for the given bids.
///
/// Candidate prices are scanned in increasing order and a later candidate
/// replaces the incumbent only on a strict improvement, so ties go to the
/// lower price. A class bidding exactly the price is eligible.
pub fn solve_rm(instance: &ProblemInstance, bids: &[f64]) -> Result<RmSolution> {
    instance.ensure_feasible()?;
    check_bids(instance, bids)?;

    let mut prices: Vec<f64> = Vec::with_capacity(bids.len() + 2);
    prices.push(instance.rho_bar());
    prices.extend(bids.iter().map(|&b| b.clamp(instance.rho_bar(), instance.rho_hat())));
    prices.push(instance.rho_hat());
    prices.sort_by(f64::total_cmp);
    prices.dedup();

    let order = priority_order(instance);
    let mut best: Option<RmSolution> = None;
    for price in prices {
        let eligible: Vec<bool> = bids.iter().map(|&b| b >= price).collect();
        let r = fill(instance, &order, &eligible);
        let value = objective(instance, &r, price);
        if best.as_ref().is_none_or(|b| improves(value, b.objective)) {
            best = Some(RmSolution {
                r,
                eligible,
                price,
                objective: value,
            });
        }
    }
    Ok(best.expect("candidate set is never empty"))
}

/// Exhaustive oracle: every eligibility vector, every admissible price among
/// the bids, the interval ends and a uniform grid.
///
/// For a fixed eligibility vector the big-M constraints confine the price to
/// `[max(rho_bar, bids of ineligible), min(rho_hat, bids of eligible)]`.
pub fn brute_force_rm(instance: &ProblemInstance, bids: &[f64], price_grid_step: f64) -> Result<RmSolution> {
    let n = instance.len();
    if n > BRUTE_FORCE_MAX_CLASSES {
        return Err(Error::TooManyClasses {
            n,
            max: BRUTE_FORCE_MAX_CLASSES,
        });
    }
    if !(price_grid_step > 0.0) {
        return Err(Error::invalid("priceGridStep", "must be positive"));
    }
    instance.ensure_feasible()?;
    check_bids(instance, bids)?;

    let rho_bar = instance.rho_bar();
    let rho_hat = instance.rho_hat();
    let capacity = instance.capacity();
    let mut best: Option<RmSolution> = None;

    for mask in 0u32..(1u32 << n) {
        let eligible: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        let mut lo = rho_bar;
        let mut hi = rho_hat;
        for (i, &bid) in bids.iter().enumerate() {
            if eligible[i] {
                hi = hi.min(bid);
            } else {
                lo = lo.max(bid);
            }
        }
        if lo > hi {
            continue;
        }

        // Linear objective over a box plus one knapsack row: greedy on the
        // per-unit gain, identical for every price in [lo, hi].
        let mut members: Vec<usize> = (0..n).filter(|&i| eligible[i]).collect();
        members.sort_by(|&i, &j| {
            let (pi, pj) = (instance.classes[i].derived.p, instance.classes[j].derived.p);
            pj.total_cmp(&pi)
        });
        let mut r: Vec<f64> = instance.classes.iter().map(|c| c.derived.r_low).collect();
        let mut spare = capacity - r.iter().sum::<f64>();
        for i in members {
            let d = &instance.classes[i].derived;
            let extra = (d.r_up - d.r_low).min(spare.max(0.0));
            r[i] += extra;
            spare -= extra;
        }

        let mut prices = vec![lo, hi];
        prices.extend(bids.iter().copied().filter(|&b| b >= lo && b <= hi));
        let steps = ((hi - lo) / price_grid_step).floor() as u64;
        prices.extend((1..=steps).map(|k| lo + k as f64 * price_grid_step).filter(|&p| p <= hi));

        for price in prices {
            let value = objective(instance, &r, price);
            if best.as_ref().is_none_or(|b| value > b.objective) {
                best = Some(RmSolution {
                    r: r.clone(),
                    eligible: eligible.clone(),
                    price,
                    objective: value,
                });
            }
        }
    }
    // The all-ineligible vector always admits price rho_hat.
    Ok(best.expect("some eligibility vector is feasible"))
}
