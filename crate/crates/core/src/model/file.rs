//! JSON instance file.
//!
//! ```json
//! { "cluster": { "R": 120.0, "rhoBar": 1.0 },
//!   "classes": [ { "id": 0, "A": 1000.0, "B": 500.0, "C": 50.0, "D": 900.0,
//!                  "cM": 2, "cR": 2, "Hup": 10, "Hlow": 8,
//!                  "m": 20000.0, "rhoUp": 10.0 } ] }
//! ```
//!
//! The cluster may give `energy: {PUE, energyCost, serverCost, v, d}` instead
//! of `rhoBar`. Derived parameters are never read from the file.

use serde::{Deserialize, Serialize};

use super::{ClusterSpec, EnergyInputs, JobClassSpec, ProblemInstance};
use crate::error::{Error, Result};
use crate::generator::Provenance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFile {
    #[serde(rename = "R")]
    pub capacity: f64,
    #[serde(rename = "rhoBar", default, skip_serializing_if = "Option::is_none")]
    pub rho_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyInputs>,
}

impl ClusterFile {
    pub fn resolve(&self) -> Result<ClusterSpec> {
        match (self.rho_bar, self.energy) {
            (Some(rho_bar), None) => ClusterSpec::new(self.capacity, rho_bar),
            (None, Some(energy)) => ClusterSpec::from_energy(self.capacity, energy),
            (Some(rho_bar), Some(energy)) => {
                let cluster = ClusterSpec::from_energy(self.capacity, energy)?;
                if (cluster.rho_bar - rho_bar).abs() > 1e-9 * rho_bar.abs() {
                    return Err(Error::invalid(
                        "rhoBar",
                        format!(
                            "given {rho_bar} but energy inputs give {}",
                            cluster.rho_bar
                        ),
                    ));
                }
                Ok(cluster)
            }
            (None, None) => Err(Error::invalid(
                "cluster",
                "either `rhoBar` or `energy` is required",
            )),
        }
    }
}

impl From<&ClusterSpec> for ClusterFile {
    fn from(c: &ClusterSpec) -> Self {
        match c.energy {
            Some(energy) => ClusterFile {
                capacity: c.capacity,
                rho_bar: None,
                energy: Some(energy),
            },
            None => ClusterFile {
                capacity: c.capacity,
                rho_bar: Some(c.rho_bar),
                energy: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub cluster: ClusterFile,
    pub classes: Vec<JobClassSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance file serializes")
    }

    pub fn into_instance(self) -> Result<ProblemInstance> {
        let cluster = self.cluster.resolve()?;
        let mut instance = ProblemInstance::new(cluster, self.classes)?;
        instance.provenance = self.provenance;
        Ok(instance)
    }
}

impl From<&ProblemInstance> for InstanceFile {
    fn from(instance: &ProblemInstance) -> Self {
        InstanceFile {
            cluster: ClusterFile::from(&instance.cluster),
            classes: instance.specs(),
            provenance: instance.provenance.clone(),
        }
    }
}

impl ProblemInstance {
    pub fn from_json(text: &str) -> Result<Self> {
        InstanceFile::from_json(text)?.into_instance()
    }

    pub fn to_json(&self) -> String {
        InstanceFile::from(self).to_json()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "cluster": { "R": 500.0, "rhoBar": 1.0 },
        "classes": [
            { "id": 3, "A": 1000.0, "B": 500.0, "C": 50.0, "D": 900.0,
              "cM": 2, "cR": 2, "Hup": 10, "Hlow": 8, "m": 20000.0, "rhoUp": 10.0 }
        ]
    }"#;

    #[test]
    fn parses_rho_bar_form() {
        let inst = ProblemInstance::from_json(SAMPLE).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst.rho_bar(), 1.0);
        assert!(inst.classes[0].derived.k > 0.0);
    }

    #[test]
    fn parses_energy_form() {
        let text = SAMPLE.replace(
            r#""rhoBar": 1.0"#,
            r#""energy": {"PUE": 1.2, "energyCost": 0.06009, "serverCost": 2.0615, "v": 2, "d": 5}"#,
        );
        let inst = ProblemInstance::from_json(&text).unwrap();
        assert!((inst.rho_bar() - 0.85344).abs() < 1e-5);
    }

    #[test]
    fn rejects_missing_cost() {
        let text = SAMPLE.replace(r#", "rhoBar": 1.0"#, "");
        assert!(ProblemInstance::from_json(&text).is_err());
    }

    #[test]
    fn rejects_inconsistent_cost() {
        let text = SAMPLE.replace(
            r#""rhoBar": 1.0"#,
            r#""rhoBar": 1.0, "energy": {"PUE": 1.2, "energyCost": 0.06009, "serverCost": 2.0615, "v": 2, "d": 5}"#,
        );
        assert!(ProblemInstance::from_json(&text).is_err());
    }

    #[test]
    fn round_trips_exactly() {
        let inst = ProblemInstance::from_json(SAMPLE).unwrap();
        let again = ProblemInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn malformed_is_format_error() {
        assert!(matches!(ProblemInstance::from_json("{"), Err(Error::Format(_))));
    }
}
