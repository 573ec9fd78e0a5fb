//! Seeded random instances.
//!
//! Every parameter is drawn uniformly from a configurable range. The RNG is
//! ChaCha8 seeded with `seed_from_u64(seed)`; stream 0 feeds the cluster and
//! stream `i + 1` feeds class `i`, so the first classes of a large instance
//! are exactly the classes of a smaller one with the same seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centralized::solve_reduced;
use crate::error::{Error, Result};
use crate::model::{ClassId, ClusterSpec, EnergyInputs, JobClassSpec, ProblemInstance, RawProfile};

pub const GENERATOR_VERSION: &str = "1";
pub const RNG_DESCRIPTION: &str = "ChaCha8Rng/rand_chacha-0.3 seed_from_u64(seed); stream 0 cluster, stream i+1 class i";

/// Ratio between average and maximum task durations, and between minimum
/// and maximum concurrency.
const LOW_TO_HIGH: f64 = 0.8;

/// Calibrated penalty as a multiple of the average job cost.
const CALIBRATION_MULTIPLE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntSpan {
    pub low: u32,
    pub high: u32,
}

const fn span(low: f64, high: f64) -> Span {
    Span { low, high }
}

const fn int_span(low: u32, high: u32) -> IntSpan {
    IntSpan { low, high }
}

impl Span {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        rng.gen_range(self.low..=self.high)
    }
}

impl IntSpan {
    fn draw(&self, rng: &mut ChaCha8Rng) -> u32 {
        rng.gen_range(self.low..=self.high)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParameterRanges {
    pub rho_up: Span,
    pub h_up: IntSpan,
    pub c_map: IntSpan,
    pub c_reduce: IntSpan,
    pub penalty: Span,
    pub deadline: Span,
    pub a: Span,
    pub b: Span,
    pub c: Span,
    pub n_map: IntSpan,
    pub n_reduce: IntSpan,
    pub map_max: Span,
    pub reduce_max: Span,
    pub shuffle_first_max: Span,
    pub shuffle_typ_max: Span,
    pub pue: Span,
    pub energy_cost: Span,
    pub server_cost: Span,
    pub v: Span,
    pub density: IntSpan,
}

impl Default for ParameterRanges {
    fn default() -> Self {
        ParameterRanges {
            rho_up: span(5.0, 20.0),
            h_up: int_span(5, 20),
            c_map: int_span(1, 4),
            c_reduce: int_span(1, 4),
            penalty: span(15000.0, 30000.0),
            deadline: span(900.0, 1500.0),
            a: span(656.0, 107488.0),
            b: span(1854.0, 11430.0),
            c: span(132.0, 720.0),
            n_map: int_span(70, 1120),
            n_reduce: int_span(64, 64),
            map_max: span(16.0, 120.0),
            reduce_max: span(15.0, 75.0),
            shuffle_first_max: span(10.0, 30.0),
            shuffle_typ_max: span(30.0, 150.0),
            pue: span(1.2, 2.2),
            energy_cost: span(0.06009, 0.06690),
            server_cost: span(2.0615, 2.0615),
            v: span(2.0, 2.0),
            density: int_span(3, 5),
        }
    }
}

impl ParameterRanges {
    fn check(&self) -> Result<()> {
        let reals = [
            ("rhoUp", self.rho_up),
            ("m", self.penalty),
            ("D", self.deadline),
            ("A", self.a),
            ("B", self.b),
            ("C", self.c),
            ("mapMax", self.map_max),
            ("reduceMax", self.reduce_max),
            ("shuffleFirstMax", self.shuffle_first_max),
            ("shuffleTypMax", self.shuffle_typ_max),
            ("PUE", self.pue),
            ("energyCost", self.energy_cost),
            ("serverCost", self.server_cost),
            ("v", self.v),
        ];
        for (name, s) in reals {
            if !(s.low.is_finite() && s.high.is_finite() && s.low <= s.high) {
                return Err(Error::invalid(name, format!("range [{}, {}] is empty", s.low, s.high)));
            }
        }
        let ints = [
            ("Hup", self.h_up),
            ("cM", self.c_map),
            ("cR", self.c_reduce),
            ("nM", self.n_map),
            ("nR", self.n_reduce),
            ("d", self.density),
        ];
        for (name, s) in ints {
            if s.low > s.high {
                return Err(Error::invalid(name, format!("range [{}, {}] is empty", s.low, s.high)));
            }
        }
        if self.h_up.low < 2 {
            return Err(Error::invalid("Hup", "lower bound must be at least 2 so that Hlow >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CapacityRule {
    Explicit { capacity: f64 },
    /// `R = factor * sum r_up`.
    MultipleOfOptimal { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyMode {
    #[default]
    Drawn,
    /// `m_i = 100 rho_bar K_i`, the cost of one job at maximum concurrency
    /// times 100.
    Calibrated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n: usize,
    pub seed: u64,
    pub ranges: ParameterRanges,
    pub capacity_rule: CapacityRule,
    pub penalty_mode: PenaltyMode,
}

impl GeneratorConfig {
    /// Default ranges, `R = 1.1 sum r_up`, drawn penalties.
    pub fn new(n: usize, seed: u64) -> Self {
        GeneratorConfig {
            n,
            seed,
            ranges: ParameterRanges::default(),
            capacity_rule: CapacityRule::MultipleOfOptimal { factor: 1.1 },
            penalty_mode: PenaltyMode::Drawn,
        }
    }

    pub fn with_capacity_rule(mut self, rule: CapacityRule) -> Self {
        self.capacity_rule = rule;
        self
    }

    fn check(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::invalid("N", "at least one class is required"));
        }
        if self.n > u32::MAX as usize {
            return Err(Error::invalid("N", "too many classes"));
        }
        match self.capacity_rule {
            CapacityRule::Explicit { capacity } if !(capacity >= 1.0) => {
                Err(Error::invalid("R", format!("must be at least 1, got {capacity}")))
            }
            CapacityRule::MultipleOfOptimal { factor } if !(factor > 0.0 && factor.is_finite()) => {
                Err(Error::invalid("factor", format!("must be positive, got {factor}")))
            }
            _ => self.ranges.check(),
        }
    }
}

/// Written into generated instance files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Provenance {
    pub seed: u64,
    pub generator_version: String,
    pub rng: String,
    pub ranges: ParameterRanges,
    pub capacity_rule: CapacityRule,
    pub penalty_mode: PenaltyMode,
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_class(index: usize, ranges: &ParameterRanges, rng: &mut ChaCha8Rng) -> JobClassSpec {
    let rho_up = ranges.rho_up.draw(rng);
    let h_up = ranges.h_up.draw(rng);
    let c_map = ranges.c_map.draw(rng);
    let c_reduce = ranges.c_reduce.draw(rng);
    let penalty = ranges.penalty.draw(rng);
    let d = ranges.deadline.draw(rng);
    let a = ranges.a.draw(rng);
    let b = ranges.b.draw(rng);
    let c = ranges.c.draw(rng);

    let map_max = ranges.map_max.draw(rng);
    let reduce_max = ranges.reduce_max.draw(rng);
    let shuffle_typ_max = ranges.shuffle_typ_max.draw(rng);
    let raw_profile = RawProfile {
        n_map: ranges.n_map.draw(rng),
        n_reduce: ranges.n_reduce.draw(rng),
        map_max,
        map_avg: LOW_TO_HIGH * map_max,
        reduce_max,
        reduce_avg: LOW_TO_HIGH * reduce_max,
        shuffle_first_max: ranges.shuffle_first_max.draw(rng),
        shuffle_typ_max,
        shuffle_typ_avg: LOW_TO_HIGH * shuffle_typ_max,
    };

    JobClassSpec {
        id: ClassId(index as u32),
        a,
        b,
        c,
        d,
        c_map,
        c_reduce,
        h_up,
        h_low: (LOW_TO_HIGH * f64::from(h_up)).floor() as u32,
        penalty,
        rho_up,
        raw_profile: Some(raw_profile),
    }
}

fn draw_energy(ranges: &ParameterRanges, rng: &mut ChaCha8Rng) -> EnergyInputs {
    EnergyInputs {
        pue: ranges.pue.draw(rng),
        energy_cost: ranges.energy_cost.draw(rng),
        server_cost: ranges.server_cost.draw(rng),
        v: ranges.v.draw(rng),
        d: f64::from(ranges.density.draw(rng)),
    }
}

fn capacity_for(rule: CapacityRule, max_demand: f64) -> f64 {
    match rule {
        CapacityRule::Explicit { capacity } => capacity,
        CapacityRule::MultipleOfOptimal { factor } => factor * max_demand,
    }
}

/// Draws an instance. Identical configs give identical instances.
pub fn generate(config: &GeneratorConfig) -> Result<ProblemInstance> {
    config.check()?;
    let energy = draw_energy(&config.ranges, &mut stream(config.seed, 0));
    let specs: Vec<JobClassSpec> = (0..config.n)
        .map(|i| draw_class(i, &config.ranges, &mut stream(config.seed, i as u64 + 1)))
        .collect();

    // Placeholder capacity; the rule needs the derived r_up values.
    let probe = ProblemInstance::new(ClusterSpec::from_energy(1.0, energy)?, specs)?;
    let max_demand = probe.max_demand();
    let mut instance = probe.with_capacity(capacity_for(config.capacity_rule, max_demand))?;

    if config.penalty_mode == PenaltyMode::Calibrated {
        // Penalties must not depend on how tight the cluster is, so they are
        // calibrated on a cluster large enough for maximum concurrency.
        let roomy = instance.with_capacity(instance.capacity().max(max_demand))?;
        let penalties = calibrate_penalties(&roomy)?;
        let mut specs = instance.specs();
        for (spec, m) in specs.iter_mut().zip(penalties) {
            spec.penalty = m;
        }
        instance = ProblemInstance::new(instance.cluster.clone(), specs)?;
    }

    instance.provenance = Some(Provenance {
        seed: config.seed,
        generator_version: GENERATOR_VERSION.to_string(),
        rng: RNG_DESCRIPTION.to_string(),
        ranges: config.ranges.clone(),
        capacity_rule: config.capacity_rule,
        penalty_mode: config.penalty_mode,
    });
    Ok(instance)
}

/// Keeps the first `n` classes. Under a multiple-of-optimal rule the
/// capacity is recomputed over the retained classes; otherwise it shrinks in
/// proportion to `sum r_up`.
pub fn shrink(instance: &ProblemInstance, n: usize) -> Result<ProblemInstance> {
    if n < 1 || n > instance.len() {
        return Err(Error::invalid(
            "N",
            format!("must lie in [1, {}], got {n}", instance.len()),
        ));
    }
    if n == instance.len() {
        return Ok(instance.clone());
    }
    let mut out = instance.clone();
    out.classes.truncate(n);
    let retained = out.max_demand();
    let capacity = match instance.provenance.as_ref().map(|p| p.capacity_rule) {
        Some(CapacityRule::MultipleOfOptimal { factor }) => factor * retained,
        _ => instance.capacity() * retained / instance.max_demand(),
    };
    out.with_capacity(capacity)
}

/// Calibrated penalties: solve the centralized problem with rejection
/// disabled (`H_low = H_up`), then take 100 times the average job cost
/// `rho_bar r_i / H_up_i`.
pub fn calibrate_penalties(instance: &ProblemInstance) -> Result<Vec<f64>> {
    let forced_specs: Vec<JobClassSpec> = instance
        .specs()
        .into_iter()
        .map(|mut s| {
            s.h_low = s.h_up;
            s
        })
        .collect();
    let forced = ProblemInstance::new(instance.cluster.clone(), forced_specs)?;
    let report = solve_reduced(&forced)?;
    let rho_bar = instance.rho_bar();
    Ok(report
        .allocation
        .per_class
        .iter()
        .zip(&forced.classes)
        .map(|(a, c)| CALIBRATION_MULTIPLE * rho_bar * a.r / f64::from(c.spec.h_up))
        .collect())
}
