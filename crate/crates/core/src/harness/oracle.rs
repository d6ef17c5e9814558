//! Brute-force references for the association and power stages.

use crate::association::{association_score, select_hap_users, AssociationConfig};
use crate::error::{Error, Result};
use crate::link::{utility, AccessPoint, Association, ResourceAllocation};
use crate::power::PowerProblem;
use crate::scenario::Scenario;

/// Largest number of assignments the association oracle will enumerate.
pub const MAX_ASSIGNMENTS: f64 = 1e6;
/// Most VUEs the power grid may span.
pub const MAX_GRID_VUES: usize = 3;

#[derive(Debug, Clone)]
pub struct AssociationOptimum {
    pub association: Association,
    pub utility: f64,
    pub evaluated: usize,
}

#[derive(Debug, Clone)]
pub struct PowerOptimum {
    /// Full per-VUE vector; HAP users keep their fixed power.
    pub power: Vec<f64>,
    pub utility: f64,
    pub evaluated: usize,
}

/// Every terrestrial assignment with the HAP set chosen by `cfg`, scored
/// exactly as the association stage scores its moves. Ties go to the
/// lexicographically smallest assignment.
pub fn exhaustive_association_oracle(
    scenario: &Scenario,
    alloc: &ResourceAllocation,
    cfg: &AssociationConfig,
) -> Result<AssociationOptimum> {
    let hap = select_hap_users(scenario, cfg.hap_user_count)?;
    let free: Vec<usize> = (0..scenario.num_vues()).filter(|n| !hap.contains(n)).collect();
    let m = scenario.num_rsus();
    let count = (m as f64).powi(free.len() as i32);
    if count > MAX_ASSIGNMENTS {
        return Err(Error::OracleTooLarge(format!(
            "{m}^{} = {count:e} assignments exceeds {MAX_ASSIGNMENTS:e}",
            free.len()
        )));
    }

    let mut digits = vec![0usize; free.len()];
    let mut best: Option<(Association, f64)> = None;
    let mut evaluated = 0;
    loop {
        let mut assignment = vec![AccessPoint::Hap; scenario.num_vues()];
        for (&n, &d) in free.iter().zip(&digits) {
            assignment[n] = AccessPoint::Rsu(d);
        }
        let assoc = Association::new(scenario, assignment)?;
        let f = association_score(scenario, &assoc, alloc, cfg);
        evaluated += 1;
        if best.as_ref().is_none_or(|(_, b)| f > *b) {
            best = Some((assoc, f));
        }
        // Odometer with the last free VUE as the fastest digit.
        let mut i = digits.len();
        loop {
            if i == 0 {
                let (association, utility) = best.expect("at least one assignment");
                return Ok(AssociationOptimum {
                    association,
                    utility,
                    evaluated,
                });
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < m {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Dense grid over [0, P_max]^k for the k terrestrial VUEs, `grid_points`
/// levels per axis, endpoints included. Points that miss a rate floor are
/// skipped.
pub fn grid_power_oracle(
    scenario: &Scenario,
    assoc: &Association,
    eta: f64,
    omega: f64,
    grid_points: usize,
) -> Result<PowerOptimum> {
    let problem = PowerProblem::new(scenario, assoc, eta);
    let k = problem.len();
    if k > MAX_GRID_VUES {
        return Err(Error::OracleTooLarge(format!(
            "{k} optimized VUEs, the grid allows at most {MAX_GRID_VUES}"
        )));
    }
    if grid_points < 2 {
        return Err(Error::OracleTooLarge("grid needs at least 2 points per axis".into()));
    }
    let p_max = scenario.p_max();
    let level = |i: usize| p_max * i as f64 / (grid_points - 1) as f64;
    let qos = scenario.config.qos_rate > 0.0;

    let mut power = vec![scenario.hap_vue_power(); scenario.num_vues()];
    let mut idx = vec![0usize; k];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluated = 0;
    loop {
        let p: Vec<f64> = idx.iter().map(|&i| level(i)).collect();
        problem.expand_into(&p, &mut power);
        evaluated += 1;
        let feasible = !qos || {
            let alloc = ResourceAllocation {
                eta,
                power: power.clone(),
                rsu_backhaul_power: vec![scenario.rsu_power(); scenario.num_rsus()],
            };
            utility(scenario, assoc, &alloc, omega).max_qos_violation() <= 0.0
        };
        if feasible {
            let f = problem.true_objective(&p, omega);
            if best.as_ref().is_none_or(|(_, b)| f > *b) {
                best = Some((power.clone(), f));
            }
        }
        let mut d = k;
        loop {
            if d == 0 {
                return match best {
                    Some((power, utility)) => Ok(PowerOptimum {
                        power,
                        utility,
                        evaluated,
                    }),
                    None => Err(Error::QosInfeasible {
                        vue: problem.vars.first().copied().unwrap_or(0),
                        violation: f64::INFINITY,
                    }),
                };
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < grid_points {
                break;
            }
            idx[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::fixtures;
    use crate::scenario::{generate_scenario, SystemConfig};

    fn cfg(hap: usize) -> AssociationConfig {
        AssociationConfig {
            hap_user_count: hap,
            omega: 0.0,
            alpha: 0.99,
            seed: 0,
            swap_patience: 10,
            max_events: 100_000,
            resolve_eta: false,
        }
    }

    #[test]
    fn one_vue_two_rsus_enumerates_two() {
        let s = fixtures::scenario(vec![vec![1.0, 2.0]], vec![1.0], vec![1.0, 1.0], 1.0);
        let alloc = ResourceAllocation::uniform(&s, 0.5, 0.5);
        let best = exhaustive_association_oracle(&s, &alloc, &cfg(0)).unwrap();
        assert_eq!(best.evaluated, 2);
        assert_eq!(best.association.ap(0), AccessPoint::Rsu(1));
    }

    #[test]
    fn mirror_assignment_scores_the_same() {
        let gains = vec![vec![2.0, 2.0], vec![1.0, 1.0], vec![0.5, 0.5]];
        let s = fixtures::scenario(gains, vec![1.0; 3], vec![1.0, 1.0], 0.1);
        let alloc = ResourceAllocation::uniform(&s, 0.5, 0.5);
        let c = cfg(0);
        let best = exhaustive_association_oracle(&s, &alloc, &c).unwrap();
        let mirrored: Vec<AccessPoint> = best
            .association
            .assignment()
            .iter()
            .map(|ap| AccessPoint::Rsu(1 - ap.rsu().unwrap()))
            .collect();
        let mirror = Association::new(&s, mirrored).unwrap();
        let f = association_score(&s, &mirror, &alloc, &c);
        assert!((f - best.utility).abs() <= 1e-12 * best.utility.abs());
        assert_eq!(best.association.ap(0), AccessPoint::Rsu(0));
    }

    #[test]
    fn guard_rejects_large_instances() {
        let s = generate_scenario(&SystemConfig {
            num_vues: 30,
            num_rsus: 3,
            ..Default::default()
        })
        .unwrap();
        let alloc = ResourceAllocation::initial(&s);
        let err = exhaustive_association_oracle(&s, &alloc, &cfg(1)).unwrap_err();
        assert!(matches!(err, Error::OracleTooLarge(_)));
        let a = Association::nearest_rsu(&s, &[0]);
        assert!(matches!(grid_power_oracle(&s, &a, 0.5, 0.0, 10), Err(Error::OracleTooLarge(_))));
    }

    #[test]
    fn single_vue_grid_extremes() {
        let s = fixtures::scenario(vec![vec![2.0]], vec![1.0], vec![1.0], 1.0);
        let a = Association::new(&s, vec![AccessPoint::Rsu(0)]).unwrap();
        let free = grid_power_oracle(&s, &a, 0.5, 0.0, 101).unwrap();
        assert_eq!(free.power[0], s.p_max());
        assert_eq!(free.evaluated, 101);
        let priced = grid_power_oracle(&s, &a, 0.5, 1e12, 101).unwrap();
        assert_eq!(priced.power[0], 0.0);
    }
}
