//! The outer loop: association, then bandwidth, then power, until the
//! utility settles.
//!
//! Every block result is kept only if F at the initial price does not drop,
//! with eta re-solved for the candidate association or powers first. The
//! incumbent is therefore always backhaul-consistent and F never decreases.

use std::io::Write;
use std::time::Instant;

use rand::Rng;

use crate::association::{refine_association, run_association, select_hap_users, AssociationConfig, AssociationOutcome};
use crate::bandwidth::{optimal_eta, ETA_FLOOR};
use crate::error::{Error, Result, Stage};
use crate::link::{fmt_f64, total_utility, utility, Association, ResourceAllocation, UtilityReport};
use crate::power::{sca_power_allocation, PowerSolveReport, ScaParams};
use crate::rng::{stream_rng, Stream};
use crate::scenario::{generate_scenario, Scenario, SystemConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop when |Delta F| <= outer_tol * |F| over one outer iteration.
    pub outer_tol: f64,
    pub outer_cap: usize,
    pub association: AssociationConfig,
    pub sca: ScaParams,
    /// Drop the backhaul constraint: eta stays at the floor.
    pub ideal_backhaul: bool,
    /// Keep the initial nearest-RSU association.
    pub fixed_association: bool,
    /// Seeded uniform powers in [0, P_max] instead of the power stage.
    pub random_power: bool,
    pub seed: u64,
}

impl SolverConfig {
    pub fn from_system(config: &SystemConfig) -> Self {
        Self {
            outer_tol: 1e-4,
            outer_cap: 20,
            association: AssociationConfig {
                resolve_eta: true,
                ..AssociationConfig::from_system(config)
            },
            sca: ScaParams::from_system(config),
            ideal_backhaul: false,
            fixed_association: false,
            random_power: false,
            seed: config.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Truncated,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Truncated => "truncated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    /// 0 is the initial point.
    pub iteration: usize,
    pub utility: f64,
    pub eta: f64,
    /// Price at the end of this iteration's power stage.
    pub omega: f64,
    /// VUEs whose access point changed in this iteration.
    pub association_changes: usize,
    pub association_events: usize,
    pub accepted_association: bool,
    pub accepted_power: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<OuterRecord>,
    pub status: SolveStatus,
    /// Evaluated at the initial price.
    pub final_report: UtilityReport,
}

impl SolveTrace {
    pub fn utility(&self) -> f64 {
        self.final_report.total_utility
    }

    /// Outer iterations run, the initial point excluded.
    pub fn outer_iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// Deterministic columns only; wall times go to [`Self::write_timings_csv`].
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "utility", "eta", "omega", "association_changes", "status"])?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                fmt_f64(r.utility),
                fmt_f64(r.eta),
                fmt_f64(r.omega),
                r.association_changes.to_string(),
                self.status.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_timings_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "wall_time_s"])?;
        for r in &self.records {
            w.write_record([r.iteration.to_string(), format!("{:.6}", r.wall_time_s)])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub association: Association,
    pub allocation: ResourceAllocation,
    pub trace: SolveTrace,
    /// Every association pass, accepted or not.
    pub association_runs: Vec<AssociationOutcome>,
    /// Every power stage run, accepted or not.
    pub power_runs: Vec<PowerSolveReport>,
}

impl Solution {
    pub fn utility(&self) -> f64 {
        self.trace.utility()
    }
}

/// Eta for the current block values: the floor under ideal backhaul, else the
/// closed form.
pub fn solve_eta(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation, cfg: &SolverConfig) -> Result<f64> {
    if cfg.ideal_backhaul {
        return Ok(ETA_FLOOR);
    }
    Ok(optimal_eta(scenario, assoc, alloc)?.eta_star)
}

fn changed(a: &Association, b: &Association) -> usize {
    a.assignment()
        .iter()
        .zip(b.assignment())
        .filter(|(x, y)| x != y)
        .count()
}

/// Alternates association, bandwidth and power until F settles.
pub fn three_stage_solve(scenario: &Scenario, cfg: &SolverConfig) -> Result<Solution> {
    scenario.config.validate()?;
    let clock = Instant::now();
    let omega0 = cfg.sca.omega0;

    let hap = select_hap_users(scenario, cfg.association.hap_user_count).map_err(|e| e.in_stage(Stage::Association))?;
    let mut assoc = Association::nearest_rsu(scenario, &hap);
    let mut alloc = ResourceAllocation::initial(scenario);
    if cfg.random_power {
        let mut rng = stream_rng(cfg.seed, Stream::RandomPower);
        let p_max = scenario.p_max();
        for p in alloc.power.iter_mut() {
            *p = rng.random::<f64>() * p_max;
        }
    }
    alloc.eta = solve_eta(scenario, &assoc, &alloc, cfg).map_err(|e| e.in_stage(Stage::Bandwidth))?;
    let mut f = total_utility(scenario, &assoc, &alloc, omega0);

    let mut records = vec![OuterRecord {
        iteration: 0,
        utility: f,
        eta: alloc.eta,
        omega: omega0,
        association_changes: 0,
        association_events: 0,
        accepted_association: false,
        accepted_power: false,
        wall_time_s: clock.elapsed().as_secs_f64(),
    }];
    let mut association_runs = Vec::new();
    let mut power_runs = Vec::new();
    let mut swap_rng = stream_rng(cfg.association.seed, Stream::Swap);
    let mut assoc_cfg = cfg.association.clone();
    assoc_cfg.resolve_eta &= !cfg.ideal_backhaul;
    let mut status = SolveStatus::Truncated;
    let mut truncated_stage = false;

    for iteration in 1..=cfg.outer_cap {
        let f_start = f;
        let mut record = OuterRecord {
            iteration,
            utility: f,
            eta: alloc.eta,
            omega: omega0,
            association_changes: 0,
            association_events: 0,
            accepted_association: false,
            accepted_power: false,
            wall_time_s: 0.0,
        };

        if !cfg.fixed_association {
            let out = if iteration == 1 {
                run_association(scenario, &alloc, &assoc_cfg)
            } else {
                refine_association(scenario, &alloc, &assoc_cfg, Some(assoc.clone()), &mut swap_rng)
            }
            .map_err(|e| e.in_stage(Stage::Association))?;
            truncated_stage |= out.truncated;
            record.association_events = out.events.len();
            let candidate = out.association.clone();
            association_runs.push(out);
            if candidate != assoc {
                if let Ok(eta) = solve_eta(scenario, &candidate, &alloc, cfg) {
                    let trial = ResourceAllocation { eta, ..alloc.clone() };
                    let f_new = total_utility(scenario, &candidate, &trial, omega0);
                    if f_new >= f {
                        record.association_changes = changed(&assoc, &candidate);
                        record.accepted_association = true;
                        assoc = candidate;
                        alloc = trial;
                        f = f_new;
                    }
                }
            }
        }

        if !cfg.random_power {
            let rep = sca_power_allocation(scenario, &assoc, alloc.eta, &cfg.sca, &alloc.power)
                .map_err(|e| e.in_stage(Stage::Power))?;
            record.omega = rep.final_omega;
            let mut trial = ResourceAllocation {
                power: rep.power.clone(),
                ..alloc.clone()
            };
            power_runs.push(rep);
            if let Ok(eta) = solve_eta(scenario, &assoc, &trial, cfg) {
                trial.eta = eta;
                let f_new = total_utility(scenario, &assoc, &trial, omega0);
                if f_new >= f {
                    record.accepted_power = true;
                    alloc = trial;
                    f = f_new;
                }
            }
        }

        record.utility = f;
        record.eta = alloc.eta;
        record.wall_time_s = clock.elapsed().as_secs_f64();
        records.push(record);
        if (f - f_start).abs() <= cfg.outer_tol * f_start.abs() {
            status = SolveStatus::Converged;
            break;
        }
    }
    if truncated_stage {
        status = SolveStatus::Truncated;
    }

    let final_report = utility(scenario, &assoc, &alloc, omega0);
    Ok(Solution {
        association: assoc,
        allocation: alloc,
        trace: SolveTrace {
            records,
            status,
            final_report,
        },
        association_runs,
        power_runs,
    })
}

/// Seeded uniform RSU choice for every terrestrial VUE, HAP set kept.
pub fn random_association(scenario: &Scenario, cfg: &SolverConfig) -> Result<Association> {
    let hap = select_hap_users(scenario, cfg.association.hap_user_count)?;
    let mut rng = stream_rng(cfg.seed, Stream::RandomAssociation);
    let assignment = (0..scenario.num_vues())
        .map(|n| {
            if hap.contains(&n) {
                crate::link::AccessPoint::Hap
            } else {
                crate::link::AccessPoint::Rsu(rng.random_range(0..scenario.num_rsus()))
            }
        })
        .collect();
    Association::new(scenario, assignment)
}

/// [`random_association`] with equal powers P_max / 2 and the matching eta;
/// the simplest reference point.
pub fn random_association_baseline(scenario: &Scenario, cfg: &SolverConfig) -> Result<f64> {
    let assoc = random_association(scenario, cfg)?;
    let mut alloc = ResourceAllocation::initial(scenario);
    alloc.eta = solve_eta(scenario, &assoc, &alloc, cfg)?;
    Ok(total_utility(scenario, &assoc, &alloc, cfg.sca.omega0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub num_vues: usize,
    pub num_rsus: usize,
    pub wall_time_s: f64,
    pub association_events: usize,
    pub outer_iterations: usize,
    pub sca_iterations: usize,
    pub inner_iterations: usize,
}

/// Solves one seeded snapshot per (N, M) pair and reports measured effort.
pub fn complexity_probe(base: &SystemConfig, sizes: &[(usize, usize)]) -> Result<Vec<ProbeRow>> {
    if sizes.is_empty() {
        return Err(Error::InvalidConfig("complexity probe needs at least one size".into()));
    }
    sizes
        .iter()
        .map(|&(n, m)| {
            let config = SystemConfig {
                num_vues: n,
                num_rsus: m,
                hap_user_count: None,
                ..base.clone()
            };
            let scenario = generate_scenario(&config)?;
            let start = Instant::now();
            let sol = three_stage_solve(&scenario, &SolverConfig::from_system(&config))?;
            Ok(ProbeRow {
                num_vues: n,
                num_rsus: m,
                wall_time_s: start.elapsed().as_secs_f64(),
                association_events: sol.association_runs.iter().map(|r| r.events.len()).sum(),
                outer_iterations: sol.trace.outer_iterations(),
                sca_iterations: sol.power_runs.iter().map(|r| r.iterations).sum(),
                inner_iterations: sol.power_runs.iter().map(|r| r.inner_iterations).sum(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{verify_theorem_1, AccessPoint};

    fn small(seed: u64) -> (Scenario, SolverConfig) {
        let config = SystemConfig {
            num_vues: 12,
            num_rsus: 3,
            seed,
            ..Default::default()
        };
        let s = generate_scenario(&config).unwrap();
        (s, SolverConfig::from_system(&config))
    }

    #[test]
    fn single_vue_goes_full_power() {
        let config = SystemConfig {
            num_vues: 1,
            num_rsus: 1,
            pricing_omega_init: 0.0,
            ..Default::default()
        };
        let s = generate_scenario(&config).unwrap();
        let sol = three_stage_solve(&s, &SolverConfig::from_system(&config)).unwrap();
        assert_eq!(sol.association.ap(0), AccessPoint::Rsu(0));
        assert_eq!(sol.allocation.power[0], s.p_max());
        assert_eq!(sol.trace.status, SolveStatus::Converged);
    }

    #[test]
    fn outer_trace_is_monotone() {
        for seed in 0..3 {
            let (s, cfg) = small(seed);
            let sol = three_stage_solve(&s, &cfg).unwrap();
            for w in sol.trace.records.windows(2) {
                assert!(w[1].utility >= w[0].utility - 1e-6 * w[0].utility.abs());
            }
            assert!(verify_theorem_1(&s, &sol.association));
            assert!((sol.utility() - sol.trace.records.last().unwrap().utility).abs() <= 1e-9 * sol.utility().abs());
        }
    }

    #[test]
    fn beats_random_association_with_equal_power() {
        for seed in 0..20 {
            let config = SystemConfig {
                num_vues: 5,
                num_rsus: 2,
                seed,
                ..Default::default()
            };
            let s = generate_scenario(&config).unwrap();
            let cfg = SolverConfig::from_system(&config);
            let sol = three_stage_solve(&s, &cfg).unwrap();
            let base = random_association_baseline(&s, &cfg).unwrap();
            assert!(sol.utility() >= base, "seed {seed}: {} < {base}", sol.utility());
        }
    }

    #[test]
    fn trace_csv_is_deterministic() {
        let (s, cfg) = small(4);
        let mut a = Vec::new();
        let mut b = Vec::new();
        three_stage_solve(&s, &cfg).unwrap().trace.write_csv(&mut a).unwrap();
        three_stage_solve(&s, &cfg).unwrap().trace.write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("iteration,utility,eta,omega,association_changes,status\n"));
    }

    #[test]
    fn ideal_backhaul_pins_eta_to_floor() {
        let (s, mut cfg) = small(2);
        cfg.ideal_backhaul = true;
        let sol = three_stage_solve(&s, &cfg).unwrap();
        assert_eq!(sol.allocation.eta, ETA_FLOOR);
    }

    #[test]
    fn single_rsu_has_no_inter_cell_terms() {
        let config = SystemConfig {
            num_vues: 6,
            num_rsus: 1,
            ..Default::default()
        };
        let s = generate_scenario(&config).unwrap();
        let sol = three_stage_solve(&s, &SolverConfig::from_system(&config)).unwrap();
        for l in sol.trace.final_report.links.iter().filter(|l| !l.ap.is_hap()) {
            assert_eq!(l.interference.inter, 0.0);
        }
    }

    #[test]
    fn probe_rejects_empty_size_list() {
        assert!(complexity_probe(&SystemConfig::default(), &[]).is_err());
    }
}
