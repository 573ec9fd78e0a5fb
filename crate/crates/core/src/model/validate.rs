use serde::Serialize;

use super::{check_class, ClassId, ClusterSpec, JobClassSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    InvalidCluster,
    InvalidClass,
    DuplicateId,
    DeadlineInfeasibleClass,
    BidCapBelowUnitCost,
    InsufficientCapacity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub class: Option<ClassId>,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// `sum r_low` over the classes whose parameters could be derived.
    pub min_demand: f64,
    pub capacity: f64,
    /// Every class is valid and `sum r_low <= R`.
    pub feasible: bool,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

/// Collects every problem with a raw instance instead of stopping at the
/// first one.
pub fn validate_instance(cluster: &ClusterSpec, classes: &[JobClassSpec]) -> ValidationReport {
    let mut violations = Vec::new();
    if let Err(e) = cluster.check() {
        violations.push(Violation {
            class: None,
            kind: ViolationKind::InvalidCluster,
            message: e.to_string(),
        });
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut min_demand = 0.0;
    for spec in classes {
        if !seen.insert(spec.id) {
            violations.push(Violation {
                class: Some(spec.id),
                kind: ViolationKind::DuplicateId,
                message: format!("class id {} appears more than once", spec.id),
            });
        }
        if let Err(e) = check_class(spec) {
            violations.push(Violation {
                class: Some(spec.id),
                kind: ViolationKind::InvalidClass,
                message: e.to_string(),
            });
            continue;
        }
        let e = spec.e();
        if e >= 0.0 {
            violations.push(Violation {
                class: Some(spec.id),
                kind: ViolationKind::DeadlineInfeasibleClass,
                message: format!("E = C - D = {e} >= 0"),
            });
            continue;
        }
        if spec.rho_up < cluster.rho_bar {
            violations.push(Violation {
                class: Some(spec.id),
                kind: ViolationKind::BidCapBelowUnitCost,
                message: format!("rhoUp {} < rhoBar {}", spec.rho_up, cluster.rho_bar),
            });
        }
        if let Ok(d) = super::derive_class_params(spec, f64::NEG_INFINITY) {
            min_demand += d.r_low;
        }
    }
    if min_demand > cluster.capacity {
        violations.push(Violation {
            class: None,
            kind: ViolationKind::InsufficientCapacity,
            message: format!(
                "sum of minimum requirements {min_demand} exceeds capacity {}",
                cluster.capacity
            ),
        });
    }
    let feasible = violations.is_empty();
    ValidationReport {
        violations,
        min_demand,
        capacity: cluster.capacity,
        feasible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_class_params;

    fn class(id: u32, c: f64, d: f64) -> JobClassSpec {
        JobClassSpec {
            id: ClassId(id),
            a: 1000.0,
            b: 500.0,
            c,
            d,
            c_map: 2,
            c_reduce: 2,
            h_up: 10,
            h_low: 8,
            penalty: 20000.0,
            rho_up: 10.0,
            raw_profile: None,
        }
    }

    #[test]
    fn flags_deadline_infeasible_class() {
        let cluster = ClusterSpec::new(1000.0, 1.0).unwrap();
        let report = validate_instance(&cluster, &[class(0, 1600.0, 1500.0)]);
        assert!(report.has(ViolationKind::DeadlineInfeasibleClass));
        assert!(!report.feasible);
    }

    #[test]
    fn boundary_capacity_accepted() {
        let classes = [class(0, 100.0, 400.0), class(1, 50.0, 300.0)];
        let min: f64 = classes
            .iter()
            .map(|c| derive_class_params(c, 1.0).unwrap().r_low)
            .sum();
        let cluster = ClusterSpec::new(min, 1.0).unwrap();
        let report = validate_instance(&cluster, &classes);
        assert!(report.is_ok(), "{:?}", report.violations);
        assert!(report.feasible);

        let tight = ClusterSpec::new(min * 0.999, 1.0).unwrap();
        assert!(validate_instance(&tight, &classes).has(ViolationKind::InsufficientCapacity));
    }

    #[test]
    fn valid_pair_has_no_violations() {
        let cluster = ClusterSpec::new(10_000.0, 1.0).unwrap();
        let report = validate_instance(&cluster, &[class(0, 100.0, 400.0), class(1, 50.0, 300.0)]);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn collects_several_problems() {
        let cluster = ClusterSpec::new(10_000.0, 12.0).unwrap();
        let mut bad = class(2, 100.0, 400.0);
        bad.c_map = 0;
        let report = validate_instance(
            &cluster,
            &[class(0, 100.0, 400.0), class(0, 100.0, 400.0), bad],
        );
        assert!(report.has(ViolationKind::DuplicateId));
        assert!(report.has(ViolationKind::InvalidClass));
        assert!(report.has(ViolationKind::BidCapBelowUnitCost));
    }
}
