//! Fronthaul/backhaul bandwidth split.
//!
//! Cell m carries its uncached fronthaul traffic over a backhaul share of
//! eta B / M, so the backhaul constraint rearranges to eta >= JB_m with
//!
//! JB_m = A / (Psi'_m Theta_m + A),
//! A = sum of log2(1 + Gamma_i) over uncached VUEs i of the cell,
//! Theta_m = log2(1 + Gamma_{m,l}), Psi'_m = (uncached fraction) / M.
//!
//! F falls as eta grows, so the smallest feasible eta is optimal. The SINRs
//! inside A and Theta depend on eta through the noise bandwidth, so the
//! closed form is iterated to its fixed point.

use crate::error::{Error, Result};
use crate::link::{backhaul_sinr, fronthaul_links, uncached_fraction, utility, Association, ResourceAllocation};
use crate::scenario::Scenario;

/// Smallest admissible eta; eta lives in the open interval (0, 1).
pub const ETA_FLOOR: f64 = 1e-6;

const MAX_FIXED_POINT_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthSolution {
    /// JB_m per RSU, evaluated at `eta_star`.
    pub jb_values: Vec<f64>,
    pub eta_star: f64,
    /// True when no cell needs more than the floor.
    pub clamped: bool,
    pub iterations: usize,
}

fn jb_from_parts(a: f64, psi_norm: f64, theta: f64) -> f64 {
    if a <= 0.0 {
        0.0
    } else {
        a / (psi_norm * theta + a)
    }
}

/// JB_m of every RSU with SINRs evaluated at `alloc.eta`.
pub fn jb_values(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation) -> Vec<f64> {
    let links = fronthaul_links(scenario, assoc, alloc, 0.0);
    let m_count = scenario.num_rsus();
    (0..m_count)
        .map(|m| {
            let a: f64 = assoc
                .cell(m)
                .iter()
                .filter(|&&i| !scenario.cache.x(i, m))
                .map(|&i| links[i].sinr.ln_1p() / std::f64::consts::LN_2)
                .sum();
            let psi_norm = uncached_fraction(scenario, assoc, m) / m_count as f64;
            let theta = backhaul_sinr(scenario, alloc, m).ln_1p() / std::f64::consts::LN_2;
            jb_from_parts(a, psi_norm, theta)
        })
        .collect()
}

/// JB_m of one RSU.
pub fn compute_jb(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation, m: usize) -> f64 {
    jb_values(scenario, assoc, alloc)[m]
}

/// eta* = max(max_m JB_m, ETA_FLOOR) for fixed JB values.
pub fn eta_from_jb(jb: &[f64]) -> Result<BandwidthSolution> {
    let (worst, max_jb) = jb
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |best, (m, v)| if v > best.1 { (m, v) } else { best });
    if max_jb >= 1.0 - ETA_FLOOR {
        return Err(Error::InfeasibleBackhaul {
            rsu: worst,
            required: max_jb,
            limit: 1.0 - ETA_FLOOR,
        });
    }
    Ok(BandwidthSolution {
        jb_values: jb.to_vec(),
        eta_star: max_jb.max(ETA_FLOOR),
        clamped: max_jb < ETA_FLOOR,
        iterations: 0,
    })
}

fn max_jb_at(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation, eta: f64) -> Vec<f64> {
    let trial = ResourceAllocation { eta, ..alloc.clone() };
    jb_values(scenario, assoc, &trial)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Smallest eta meeting every cell's backhaul constraint, for the powers
/// in `alloc` (its own eta is ignored).
///
/// JB_m is nondecreasing in eta, so iterating eta <- max(max_m JB_m(eta),
/// floor) from the floor climbs monotonically to the least fixed point.
/// A bisection on eta - max_m JB_m(eta) finishes the job if the climb is slow.
pub fn optimal_eta(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation) -> Result<BandwidthSolution> {
    let upper = 1.0 - ETA_FLOOR;
    let at_upper = max_jb_at(scenario, assoc, alloc, upper);
    if max_of(&at_upper) >= upper {
        return eta_from_jb(&at_upper);
    }

    let mut eta = ETA_FLOOR;
    let mut jb = max_jb_at(scenario, assoc, alloc, eta);
    let mut iterations = 1;
    loop {
        let next = max_of(&jb).max(ETA_FLOOR);
        if next - eta <= 1e-15 * next.max(1e-3) || iterations >= MAX_FIXED_POINT_ITERS {
            break;
        }
        eta = next.min(upper);
        jb = max_jb_at(scenario, assoc, alloc, eta);
        iterations += 1;
    }

    if iterations >= MAX_FIXED_POINT_ITERS {
        // eta - max JB(eta) is <= 0 at the iterate and > 0 at the upper end.
        let (mut lo, mut hi) = (eta, upper);
        while hi - lo > 1e-15 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mid - max_of(&max_jb_at(scenario, assoc, alloc, mid)) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            iterations += 1;
        }
        eta = hi;
        jb = max_jb_at(scenario, assoc, alloc, eta);
    }

    let max_jb = max_of(&jb);
    Ok(BandwidthSolution {
        eta_star: eta.max(max_jb).clamp(ETA_FLOOR, upper),
        clamped: max_jb <= ETA_FLOOR && eta == ETA_FLOOR,
        jb_values: jb,
        iterations,
    })
}

/// min over cells of backhaul rate minus uncached fronthaul traffic, at `eta`.
pub fn backhaul_residual(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation, eta: f64) -> f64 {
    let trial = ResourceAllocation { eta, ..alloc.clone() };
    utility(scenario, assoc, &trial, 0.0)
        .backhaul_slack
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Independent oracle for [`optimal_eta`]: bisection over (0, 1) for the
/// smallest eta whose backhaul residual is nonnegative in every cell.
pub fn bisection_eta(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("bisection tolerance must be positive, got {tol}")));
    }
    let (mut lo, mut hi) = (ETA_FLOOR, 1.0 - ETA_FLOOR);
    if backhaul_residual(scenario, assoc, alloc, lo) >= 0.0 {
        return Ok(lo);
    }
    if backhaul_residual(scenario, assoc, alloc, hi) < 0.0 {
        let trial = ResourceAllocation { eta: hi, ..alloc.clone() };
        let report = utility(scenario, assoc, &trial, 0.0);
        let rsu = (0..scenario.num_rsus())
            .min_by(|&a, &b| report.backhaul_slack[a].total_cmp(&report.backhaul_slack[b]))
            .unwrap_or(0);
        return Err(Error::InfeasibleBackhaul {
            rsu,
            required: 1.0,
            limit: hi,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if backhaul_residual(scenario, assoc, alloc, mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
