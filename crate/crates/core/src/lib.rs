//! Capacity allocation for multi-class MapReduce clusters, solved either
//! centrally or as a game between a resource manager and per-class managers.
//!
//! The entry points are [`solve_reduced`] for the centralized optimum,
//! [`run_best_reply`] for the distributed equilibrium and [`round_solution`]
//! to turn either continuous allocation into integer VMs and slots.

pub mod centralized;
pub mod cm;
pub mod error;
pub mod experiments;
pub mod game;
pub mod generator;
pub mod model;
pub mod rm;
pub mod rounding;

pub use centralized::{kkt_residual, solve_reduced, CentralizedReport, ClassAllocation, ContinuousAllocation};
pub use cm::{best_response, update_bid, BestResponse, CmState};
pub use error::{Error, Result};
pub use game::{run_best_reply, EquilibriumResult, LoopConfig};
pub use generator::{calibrate_penalties, generate, shrink, CapacityRule, GeneratorConfig, PenaltyMode};
pub use model::{ClassId, ClusterSpec, JobClassSpec, ProblemInstance};
pub use rm::{brute_force_rm, solve_rm, RmSolution};
pub use rounding::{check_integer_feasibility, round_solution, IntegerAllocation};
