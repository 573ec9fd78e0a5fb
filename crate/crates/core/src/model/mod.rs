//! Job classes, cluster description and the makespan model.
//!
//! Each application class is described by its job profile coefficients
//! `A`, `B`, `C` (seconds), a deadline `D`, the per-VM Map/Reduce slot
//! counts, the SLA concurrency bounds and the penalty paid per rejected job.
//! Everything the solvers need is derived once from these inputs into
//! [`DerivedClassParams`].
//!
//! Time quantities are seconds; money is euro cents, with the unit cost of a
//! VM expressed per VM-hour (allocations are recomputed hourly).

mod file;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::Provenance;

pub use file::{ClusterFile, InstanceFile};
pub use validate::{validate_instance, ValidationReport, Violation, ViolationKind};

/// Identifier of an application class.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ClassId(pub u32);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Raw job-profile measurements. Carried along as metadata; the solvers only
/// consume the aggregated `A`, `B`, `C` coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub struct RawProfile {
    pub n_map: u32,
    pub n_reduce: u32,
    pub map_max: f64,
    pub map_avg: f64,
    pub reduce_max: f64,
    pub reduce_avg: f64,
    pub shuffle_first_max: f64,
    pub shuffle_typ_max: f64,
    pub shuffle_typ_avg: f64,
}

/// One application class as specified by its SLA and job profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobClassSpec {
    pub id: ClassId,
    /// Map-side coefficient, seconds.
    #[serde(rename = "A")]
    pub a: f64,
    /// Reduce-side coefficient, seconds.
    #[serde(rename = "B")]
    pub b: f64,
    /// Constant term, seconds.
    #[serde(rename = "C")]
    pub c: f64,
    /// Deadline, seconds.
    #[serde(rename = "D")]
    pub d: f64,
    /// Map slots per VM.
    #[serde(rename = "cM")]
    pub c_map: u32,
    /// Reduce slots per VM.
    #[serde(rename = "cR")]
    pub c_reduce: u32,
    /// Maximum concurrency (jobs).
    #[serde(rename = "Hup")]
    pub h_up: u32,
    /// Minimum concurrency (jobs).
    #[serde(rename = "Hlow")]
    pub h_low: u32,
    /// Penalty per rejected job, euro cents.
    #[serde(rename = "m")]
    pub penalty: f64,
    /// Maximum bid, euro cents per VM-hour.
    #[serde(rename = "rhoUp")]
    pub rho_up: f64,
    #[serde(
        rename = "rawProfile",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub raw_profile: Option<RawProfile>,
}

impl JobClassSpec {
    /// `E = C - D`; negative for any class that can finish on time.
    pub fn e(&self) -> f64 {
        self.c - self.d
    }
}

/// Closed-form constants derived from a job class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DerivedClassParams {
    pub e: f64,
    pub psi_low: f64,
    pub psi_up: f64,
    /// Map slots per assigned VM at the optimal slot split.
    pub xi_map: f64,
    /// Reduce slots per assigned VM at the optimal slot split.
    pub xi_reduce: f64,
    /// VMs needed to complete exactly one job by its deadline.
    pub k: f64,
    pub r_up: f64,
    pub r_low: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Penalty per VM missing from `r_up`.
    pub p: f64,
}

impl DerivedClassParams {
    /// Penalty `alpha * psi - beta`, exactly zero at `psi_low` where the
    /// two terms cancel only up to rounding.
    pub fn penalty(&self, psi: f64) -> f64 {
        if psi <= self.psi_low {
            0.0
        } else {
            self.alpha * psi - self.beta
        }
    }
}

/// Energy-side inputs the unit VM cost is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyInputs {
    #[serde(rename = "PUE")]
    pub pue: f64,
    /// Euro cents per core-hour.
    #[serde(rename = "energyCost")]
    pub energy_cost: f64,
    /// Server depreciation, euro cents per core-hour.
    #[serde(rename = "serverCost")]
    pub server_cost: f64,
    /// Virtual cores per VM.
    pub v: f64,
    /// Virtual-to-physical core density.
    pub d: f64,
}

/// Unit cost of one VM-hour: `(PUE * energy + server) * v / d`.
pub fn compute_unit_cost(pue: f64, energy_cost: f64, server_cost: f64, v: f64, d: f64) -> Result<f64> {
    for (name, value) in [("PUE", pue), ("v", v), ("d", d)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::invalid(name, format!("must be positive, got {value}")));
        }
    }
    for (name, value) in [("energyCost", energy_cost), ("serverCost", server_cost)] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::invalid(name, format!("must be non-negative, got {value}")));
        }
    }
    let rho_bar = (pue * energy_cost + server_cost) * v / d;
    if rho_bar <= 0.0 {
        return Err(Error::invalid("rhoBar", "energy inputs give a zero unit cost"));
    }
    Ok(rho_bar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    /// Total capacity in VMs.
    pub capacity: f64,
    /// Unit cost per VM-hour.
    pub rho_bar: f64,
    pub energy: Option<EnergyInputs>,
}

impl ClusterSpec {
    pub fn new(capacity: f64, rho_bar: f64) -> Result<Self> {
        let cluster = ClusterSpec {
            capacity,
            rho_bar,
            energy: None,
        };
        cluster.check()?;
        Ok(cluster)
    }

    pub fn from_energy(capacity: f64, energy: EnergyInputs) -> Result<Self> {
        let rho_bar = compute_unit_cost(
            energy.pue,
            energy.energy_cost,
            energy.server_cost,
            energy.v,
            energy.d,
        )?;
        let cluster = ClusterSpec {
            capacity,
            rho_bar,
            energy: Some(energy),
        };
        cluster.check()?;
        Ok(cluster)
    }

    fn check(&self) -> Result<()> {
        if !(self.capacity >= 1.0 && self.capacity.is_finite()) {
            return Err(Error::invalid("R", format!("must be >= 1, got {}", self.capacity)));
        }
        if !(self.rho_bar > 0.0 && self.rho_bar.is_finite()) {
            return Err(Error::invalid(
                "rhoBar",
                format!("must be positive, got {}", self.rho_bar),
            ));
        }
        Ok(())
    }
}

fn check_class(spec: &JobClassSpec) -> Result<()> {
    let positive = [("A", spec.a), ("B", spec.b), ("D", spec.d), ("m", spec.penalty), ("rhoUp", spec.rho_up)];
    for (name, value) in positive {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::invalid(name, format!("class {}: must be positive, got {value}", spec.id)));
        }
    }
    if !(spec.c >= 0.0 && spec.c.is_finite()) {
        return Err(Error::invalid("C", format!("class {}: must be non-negative, got {}", spec.id, spec.c)));
    }
    if spec.c_map < 1 || spec.c_reduce < 1 {
        return Err(Error::invalid("cM/cR", format!("class {}: slot counts must be >= 1", spec.id)));
    }
    if spec.h_low < 1 || spec.h_low > spec.h_up {
        return Err(Error::invalid(
            "Hlow/Hup",
            format!("class {}: need 1 <= Hlow <= Hup, got Hlow={} Hup={}", spec.id, spec.h_low, spec.h_up),
        ));
    }
    Ok(())
}

/// Derives the closed-form constants of a class.
///
/// Slot coefficients split one VM between Map and Reduce so that
/// `xi_map / cM + xi_reduce / cR = 1`; `K` is the VM count that completes a
/// single job exactly at its deadline. Penalty coefficients make the penalty
/// zero at maximum concurrency and `m * (Hup - Hlow)` at minimum concurrency.
pub fn derive_class_params(spec: &JobClassSpec, rho_bar: f64) -> Result<DerivedClassParams> {
    check_class(spec)?;
    if spec.rho_up < rho_bar {
        return Err(Error::invalid(
            "rhoUp",
            format!("class {}: bid cap {} below unit cost {rho_bar}", spec.id, spec.rho_up),
        ));
    }
    let e = spec.e();
    if e >= 0.0 {
        return Err(Error::DeadlineInfeasible { id: spec.id, e });
    }
    let (a, b) = (spec.a, spec.b);
    let (cm, cr) = (f64::from(spec.c_map), f64::from(spec.c_reduce));
    let h_up = f64::from(spec.h_up);
    let h_low = f64::from(spec.h_low);

    let xi_map = cm / (1.0 + ((b * cm) / (a * cr)).sqrt());
    let xi_reduce = cr / (1.0 + ((a * cr) / (b * cm)).sqrt());
    let root_sum = (a / cm).sqrt() + (b / cr).sqrt();
    let k = root_sum * root_sum / -e;

    Ok(DerivedClassParams {
        e,
        psi_low: 1.0 / h_up,
        psi_up: 1.0 / h_low,
        xi_map,
        xi_reduce,
        k,
        r_up: k * h_up,
        r_low: k * h_low,
        alpha: spec.penalty * h_up * h_low,
        beta: spec.penalty * h_low,
        p: spec.penalty / k,
    })
}

/// Average-case job execution time `A h / sM + B h / sR + C`.
pub fn predicted_time(a: f64, b: f64, c: f64, h: f64, s_map: f64, s_reduce: f64) -> Result<f64> {
    if !(s_map > 0.0 && s_reduce > 0.0) {
        return Err(Error::ZeroSlots { s_map, s_reduce });
    }
    if h < 0.0 {
        return Err(Error::invalid("h", format!("must be non-negative, got {h}")));
    }
    Ok(a * h / s_map + b * h / s_reduce + c)
}

/// A class together with its derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassParams {
    pub spec: JobClassSpec,
    pub derived: DerivedClassParams,
}

impl ClassParams {
    pub fn new(spec: JobClassSpec, rho_bar: f64) -> Result<Self> {
        let derived = derive_class_params(&spec, rho_bar)?;
        Ok(ClassParams { spec, derived })
    }

    pub fn id(&self) -> ClassId {
        self.spec.id
    }
}

/// A validated problem: cluster plus classes with derived parameters.
///
/// Construction rejects invalid classes; insufficient capacity is allowed and
/// recorded, since capacity sweeps deliberately walk into infeasibility.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub cluster: ClusterSpec,
    pub classes: Vec<ClassParams>,
    pub provenance: Option<Provenance>,
}

impl ProblemInstance {
    pub fn new(cluster: ClusterSpec, specs: Vec<JobClassSpec>) -> Result<Self> {
        cluster.check()?;
        if specs.is_empty() {
            return Err(Error::invalid("classes", "at least one class is required"));
        }
        let mut ids: Vec<ClassId> = specs.iter().map(|s| s.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid("id", format!("duplicate class id {}", w[0])));
        }
        let classes = specs
            .into_iter()
            .map(|spec| ClassParams::new(spec, cluster.rho_bar))
            .collect::<Result<Vec<_>>>()?;
        Ok(ProblemInstance {
            cluster,
            classes,
            provenance: None,
        })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn capacity(&self) -> f64 {
        self.cluster.capacity
    }

    pub fn rho_bar(&self) -> f64 {
        self.cluster.rho_bar
    }

    /// Highest admissible price, the largest bid cap.
    pub fn rho_hat(&self) -> f64 {
        self.classes
            .iter()
            .map(|c| c.spec.rho_up)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sum r_low`: capacity needed to run every class at minimum concurrency.
    pub fn min_demand(&self) -> f64 {
        self.classes.iter().map(|c| c.derived.r_low).sum()
    }

    /// `sum r_up`: the capacity at which no job needs to be rejected.
    pub fn max_demand(&self) -> f64 {
        self.classes.iter().map(|c| c.derived.r_up).sum()
    }

    pub fn is_feasible(&self) -> bool {
        self.min_demand() <= self.capacity()
    }

    pub fn ensure_feasible(&self) -> Result<()> {
        let min_demand = self.min_demand();
        if min_demand > self.capacity() {
            return Err(Error::Infeasible {
                min_demand,
                capacity: self.capacity(),
            });
        }
        Ok(())
    }

    /// Same classes on a cluster of a different size.
    pub fn with_capacity(&self, capacity: f64) -> Result<Self> {
        let mut out = self.clone();
        out.cluster.capacity = capacity;
        out.cluster.check()?;
        Ok(out)
    }

    /// Same cluster with every deadline multiplied by `factor`; all derived
    /// constants are recomputed.
    pub fn with_deadline_scale(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::invalid("factor", format!("must be positive, got {factor}")));
        }
        let rho_bar = self.rho_bar();
        let classes = self
            .classes
            .iter()
            .map(|c| {
                let mut spec = c.spec.clone();
                spec.d *= factor;
                ClassParams::new(spec, rho_bar)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProblemInstance {
            cluster: self.cluster.clone(),
            classes,
            provenance: self.provenance.clone(),
        })
    }

    pub fn specs(&self) -> Vec<JobClassSpec> {
        self.classes.iter().map(|c| c.spec.clone()).collect()
    }
}
