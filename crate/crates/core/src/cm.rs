//! Class Manager: best response to an assigned number of VMs and the bid
//! escalation rule.
//!
//! Given `r` VMs a class manager only minimizes its penalty, so the deadline
//! and slot constraints are both tight and the response is the same closed
//! form the centralized solution uses. Beyond `r_up` the class already runs
//! at maximum concurrency and keeps the slot split sized for `r_up`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassId, ClassParams, DerivedClassParams};

/// Tolerance below `r_low` absorbed as floating-point noise.
const R_LOW_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BestResponse {
    pub psi: f64,
    #[serde(rename = "sM")]
    pub s_map: f64,
    #[serde(rename = "sR")]
    pub s_reduce: f64,
    /// `psi > psi_low`: some jobs are turned away.
    pub rejecting: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CmState {
    pub class_id: ClassId,
    /// VMs granted by the resource manager.
    pub r: f64,
    /// Current bid, within `[rho_bar, rho_up]`.
    pub rho_a: f64,
    pub rho_up: f64,
    pub psi: f64,
    #[serde(rename = "sM")]
    pub s_map: f64,
    #[serde(rename = "sR")]
    pub s_reduce: f64,
    pub rejecting: bool,
}

impl CmState {
    /// Starting point of the game: minimum allocation, minimum concurrency,
    /// bid at cost.
    pub fn initial(class: &ClassParams, rho_bar: f64) -> Self {
        let d = &class.derived;
        CmState {
            class_id: class.id(),
            r: d.r_low,
            rho_a: rho_bar,
            rho_up: class.spec.rho_up,
            psi: d.psi_up,
            s_map: d.xi_map * d.r_low,
            s_reduce: d.xi_reduce * d.r_low,
            rejecting: d.psi_up > d.psi_low,
        }
    }

    /// Receives `(r, rho)` from the resource manager, best-responds and
    /// returns the bid sent back.
    pub fn respond(&mut self, params: &DerivedClassParams, r: f64, price: f64, lambda: f64) -> Result<f64> {
        let br = best_response(params, r).map_err(|e| match e {
            Error::ProtocolViolation { r, r_low, .. } => Error::ProtocolViolation {
                id: self.class_id,
                r,
                r_low,
            },
            other => other,
        })?;
        self.r = r;
        self.psi = br.psi;
        self.s_map = br.s_map;
        self.s_reduce = br.s_reduce;
        self.rejecting = br.rejecting;
        self.rho_a = update_bid(self, price, lambda);
        Ok(self.rho_a)
    }
}

/// Optimal concurrency and slot split for `r` assigned VMs.
pub fn best_response(params: &DerivedClassParams, r: f64) -> Result<BestResponse> {
    if !(r > 0.0) || r < params.r_low * (1.0 - R_LOW_SLACK) {
        return Err(Error::ProtocolViolation {
            id: ClassId::default(),
            r,
            r_low: params.r_low,
        });
    }
    if r >= params.r_up {
        return Ok(BestResponse {
            psi: params.psi_low,
            s_map: params.xi_map * params.r_up,
            s_reduce: params.xi_reduce * params.r_up,
            rejecting: false,
        });
    }
    Ok(BestResponse {
        psi: (params.k / r).min(params.psi_up),
        s_map: params.xi_map * r,
        s_reduce: params.xi_reduce * r,
        rejecting: true,
    })
}

/// A rejecting class raises its bid to `max(bid, price) + lambda * rho_up`,
/// capped at `rho_up`; a satisfied class keeps its bid.
pub fn update_bid(state: &CmState, price: f64, lambda: f64) -> f64 {
    if state.rejecting {
        (state.rho_a.max(price) + lambda * state.rho_up).min(state.rho_up)
    } else {
        state.rho_a
    }
}

/// Class manager objective `alpha psi - beta`.
pub fn cm_objective(psi: f64, alpha: f64, beta: f64) -> f64 {
    alpha * psi - beta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_class_params, JobClassSpec};
    use approx::assert_relative_eq;

    fn params() -> DerivedClassParams {
        let spec = JobClassSpec {
            id: ClassId(7),
            a: 1000.0,
            b: 500.0,
            c: 50.0,
            d: 150.0,
            c_map: 2,
            c_reduce: 2,
            h_up: 20,
            h_low: 16,
            penalty: 30000.0,
            rho_up: 20.0,
            raw_profile: None,
        };
        derive_class_params(&spec, 1.0).unwrap()
    }

    fn state(rho_a: f64, rho_up: f64, rejecting: bool) -> CmState {
        CmState {
            class_id: ClassId(0),
            r: 1.0,
            rho_a,
            rho_up,
            psi: 0.1,
            s_map: 1.0,
            s_reduce: 1.0,
            rejecting,
        }
    }

    #[test]
    fn hand_evaluated_response() {
        let p = params();
        // r = 10 lies below r_low for this class; widen the concurrency
        // range so the closed form can be evaluated there.
        let wide = DerivedClassParams {
            r_low: 1.0,
            psi_up: p.k,
            ..p
        };
        let br = best_response(&wide, 10.0).unwrap();
        assert_relative_eq!(br.psi, 1.45711, max_relative = 1e-5);
        assert_relative_eq!(br.s_map, 11.7157, max_relative = 1e-5);
        assert_relative_eq!(br.s_reduce, 8.2843, max_relative = 1e-5);
        assert!(br.rejecting);
    }

    #[test]
    fn bounds_map_to_concurrency_limits() {
        let p = params();
        let top = best_response(&p, p.r_up).unwrap();
        assert_eq!(top.psi, p.psi_low);
        assert!(!top.rejecting);
        assert_relative_eq!(cm_objective(top.psi, p.alpha, p.beta), 0.0, epsilon = 1e-6);
        let bottom = best_response(&p, p.r_low).unwrap();
        assert_relative_eq!(bottom.psi, p.psi_up, max_relative = 1e-14);
    }

    #[test]
    fn beyond_r_up_keeps_efficient_split() {
        let p = params();
        let br = best_response(&p, 2.0 * p.r_up).unwrap();
        assert_eq!(br.psi, p.psi_low);
        assert_eq!(br.s_map, p.xi_map * p.r_up);
        assert_eq!(br.s_reduce, p.xi_reduce * p.r_up);
    }

    #[test]
    fn below_r_low_is_protocol_violation() {
        let p = params();
        assert!(matches!(
            best_response(&p, 0.9 * p.r_low),
            Err(Error::ProtocolViolation { .. })
        ));
        let noisy = best_response(&p, p.r_low * (1.0 - 1e-12)).unwrap();
        assert_eq!(noisy.psi, p.psi_up);
    }

    #[test]
    fn bid_escalation() {
        assert_relative_eq!(update_bid(&state(5.0, 20.0, true), 6.0, 0.05), 7.0, max_relative = 1e-15);
        assert_eq!(update_bid(&state(5.0, 20.0, false), 6.0, 0.05), 5.0);
        assert_eq!(update_bid(&state(19.5, 20.0, true), 10.0, 0.05), 20.0);
    }

    #[test]
    fn objective_examples() {
        let p = params();
        assert_relative_eq!(cm_objective(p.psi_low, p.alpha, p.beta), 0.0, epsilon = 1e-6);
        assert_relative_eq!(cm_objective(p.psi_up, p.alpha, p.beta), 30000.0 * 4.0, max_relative = 1e-12);
        let mid = 0.5 * (p.psi_low + p.psi_up);
        assert_relative_eq!(
            cm_objective(mid, p.alpha, p.beta),
            30000.0 * 20.0 * 16.0 * mid - 30000.0 * 16.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn respond_updates_state_and_bid() {
        let p = params();
        let mut s = CmState {
            class_id: ClassId(3),
            r: p.r_low,
            rho_a: 1.0,
            rho_up: 20.0,
            psi: p.psi_up,
            s_map: 0.0,
            s_reduce: 0.0,
            rejecting: true,
        };
        let bid = s.respond(&p, 0.5 * (p.r_low + p.r_up), 4.0, 0.05).unwrap();
        assert_eq!(bid, 5.0);
        assert!(s.rejecting);
        let err = s.respond(&p, 0.5 * p.r_low, 4.0, 0.05).unwrap_err();
        assert!(matches!(err, Error::ProtocolViolation { id: ClassId(3), .. }));
    }
}
