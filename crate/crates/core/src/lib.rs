//! Resource allocation for uplink NOMA vehicular networks in which roadside
//! units (RSUs) relay to a high-altitude platform (HAP).
//!
//! The solver alternates three blocks until the system utility settles:
//!
//! 1. [`association`]: HAP user selection, caching-aware sense-and-act and
//!    utility-improving swap matching,
//! 2. [`bandwidth`]: the closed-form fronthaul/backhaul split,
//! 3. [`power`]: successive convex approximation of the transmit powers with
//!    adaptive interference pricing.
//!
//! [`orchestrator`] runs the loop, [`link`] evaluates every SINR, rate and
//! utility expression, and [`harness`] holds the experiment presets and the
//! brute-force oracles.

pub mod association;
pub mod bandwidth;
pub mod error;
pub mod harness;
pub mod link;
pub mod orchestrator;
pub mod power;
pub mod rng;
pub mod scenario;

pub use association::{run_association, AssociationConfig, AssociationOutcome};
pub use bandwidth::{bisection_eta, optimal_eta, BandwidthSolution, ETA_FLOOR};
pub use error::{Error, Result, Stage};
pub use link::{AccessPoint, Association, ResourceAllocation, UtilityReport};
pub use orchestrator::{three_stage_solve, Solution, SolveStatus, SolveTrace, SolverConfig};
pub use power::{sca_power_allocation, PowerSolveReport, ScaParams};
pub use scenario::{dbm_to_watt, generate_scenario, noise_power, Scenario, SystemConfig};
