//! Seeded oracle comparisons, shared by the CLI and the acceptance tests.

use crate::association::{run_association, select_hap_users, AssociationConfig};
use crate::bandwidth::{bisection_eta, optimal_eta};
use crate::error::Result;
use crate::link::{verify_theorem_1, Association, ResourceAllocation};
use crate::orchestrator::solve_eta;
use crate::power::{sca_power_allocation, true_objective, ScaParams};
use crate::scenario::{generate_scenario, SystemConfig};
use crate::SolverConfig;

use super::oracle::{exhaustive_association_oracle, grid_power_oracle};

/// Association must reach this share of the oracle optimum.
pub const ASSOCIATION_RATIO: f64 = 0.95;
/// Allowed relative gap between SCA and the power grid.
pub const POWER_GAP: f64 = 0.01;
pub const POWER_GRID: usize = 200;
pub const BANDWIDTH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub seed: u64,
    pub solver: f64,
    pub reference: f64,
    /// solver / reference for association, relative gap for power,
    /// absolute eta difference for bandwidth.
    pub score: f64,
    pub pass: bool,
    pub sic_order_ok: bool,
}

/// N = 5, M = 2, one HAP user.
pub fn association_instance(seed: u64) -> SystemConfig {
    SystemConfig {
        num_vues: 5,
        num_rsus: 2,
        hap_user_count: Some(1),
        seed,
        ..Default::default()
    }
}

/// Two terrestrial VUEs, one RSU.
pub fn power_instance(seed: u64) -> SystemConfig {
    SystemConfig {
        num_vues: 2,
        num_rsus: 1,
        hap_user_count: Some(0),
        seed,
        ..Default::default()
    }
}

pub fn bandwidth_instance(seed: u64) -> SystemConfig {
    SystemConfig {
        num_vues: 20,
        num_rsus: 4,
        seed,
        ..Default::default()
    }
}

pub fn check_association(seed: u64) -> Result<Check> {
    let config = association_instance(seed);
    let s = generate_scenario(&config)?;
    let cfg = AssociationConfig::from_system(&config);
    let mut alloc = ResourceAllocation::initial(&s);
    let start = Association::nearest_rsu(&s, &select_hap_users(&s, cfg.hap_user_count)?);
    alloc.eta = optimal_eta(&s, &start, &alloc)?.eta_star;
    let run = run_association(&s, &alloc, &cfg)?;
    let best = exhaustive_association_oracle(&s, &alloc, &cfg)?;
    let score = run.utility / best.utility;
    Ok(Check {
        seed,
        solver: run.utility,
        reference: best.utility,
        score,
        pass: score >= ASSOCIATION_RATIO,
        sic_order_ok: verify_theorem_1(&s, &run.association) && verify_theorem_1(&s, &best.association),
    })
}

/// SCA at a fixed price (no price steps) against the dense grid, both at
/// the eta of the nearest-RSU start.
pub fn check_power(seed: u64) -> Result<Check> {
    let config = power_instance(seed);
    let s = generate_scenario(&config)?;
    let assoc = Association::nearest_rsu(&s, &[]);
    let mut alloc = ResourceAllocation::initial(&s);
    alloc.eta = solve_eta(&s, &assoc, &alloc, &SolverConfig::from_system(&config))?;
    let mut params = ScaParams::from_system(&config);
    params.delta = 0.0;
    let omega = params.omega0;
    let rep = sca_power_allocation(&s, &assoc, alloc.eta, &params, &alloc.power)?;
    let solver = true_objective(&s, &assoc, alloc.eta, &rep.power, omega);
    let grid = grid_power_oracle(&s, &assoc, alloc.eta, omega, POWER_GRID)?;
    let gap = (grid.utility - solver) / grid.utility.abs().max(f64::MIN_POSITIVE);
    Ok(Check {
        seed,
        solver,
        reference: grid.utility,
        score: gap,
        pass: gap <= POWER_GAP,
        sic_order_ok: verify_theorem_1(&s, &assoc),
    })
}

pub fn check_bandwidth(seed: u64) -> Result<Check> {
    let config = bandwidth_instance(seed);
    let s = generate_scenario(&config)?;
    let assoc = Association::nearest_rsu(&s, &select_hap_users(&s, config.hap_user_count())?);
    let alloc = ResourceAllocation::initial(&s);
    let closed = optimal_eta(&s, &assoc, &alloc)?.eta_star;
    let bisect = bisection_eta(&s, &assoc, &alloc, 1e-12)?;
    let diff = (closed - bisect).abs();
    Ok(Check {
        seed,
        solver: closed,
        reference: bisect,
        score: diff,
        pass: diff <= BANDWIDTH_TOL,
        sic_order_ok: verify_theorem_1(&s, &assoc),
    })
}
