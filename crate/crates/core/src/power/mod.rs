//! Power allocation by successive convex approximation with adaptive
//! interference pricing.
//!
//! Each step maximizes the tangent minorant of F around the current powers.
//! After every step the price moves by delta: up when a cell's backhaul is
//! congested, otherwise down when the RSU tier interferes too much with the
//! HAP. HAP-served VUEs keep their fixed power throughout.

mod inner;
mod surrogate;

use std::io::Write;

use crate::error::Result;
use crate::link::{fmt_f64, utility, Association, ResourceAllocation};
use crate::scenario::{Scenario, SystemConfig};

pub use inner::{solve_inner, InnerOptions, InnerResult};
pub use surrogate::{build_surrogate, PowerProblem, SurrogateModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ScaParams {
    pub omega0: f64,
    pub delta: f64,
    pub omega_max: f64,
    pub t_max: usize,
    /// Stop once |F[t] - F[t-1]| <= epsilon (bit/s).
    pub epsilon: f64,
    pub congestion_threshold: f64,
    pub interference_threshold: f64,
    pub inner: InnerOptions,
}

impl ScaParams {
    pub fn from_system(config: &SystemConfig) -> Self {
        Self {
            omega0: config.pricing_omega_init,
            delta: config.omega_step(),
            omega_max: config.omega_max(),
            t_max: 100,
            epsilon: 1e-4 * config.total_bandwidth,
            congestion_threshold: config.congestion_threshold,
            interference_threshold: config.interference_threshold,
            inner: InnerOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerIteration {
    pub t: usize,
    /// F[t] at the price in force after step t.
    pub utility: f64,
    pub omega: f64,
    pub max_c1_violation: f64,
    pub max_c2_violation: f64,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolveReport {
    /// Per-VUE powers, watts. HAP users keep their entry from the start vector.
    pub power: Vec<f64>,
    /// F[0], F[1], ...; F[0] is the objective at the start point and Omega_0.
    pub objective_trace: Vec<f64>,
    pub omega_trace: Vec<f64>,
    /// One row per trace entry, t = 0 included.
    pub records: Vec<PowerIteration>,
    /// SCA steps taken.
    pub iterations: usize,
    pub converged: bool,
    pub inner_iterations: usize,
    pub final_omega: f64,
}

impl PowerSolveReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "F", "omega", "max_C1_violation", "max_C2_violation"])?;
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                fmt_f64(r.utility),
                fmt_f64(r.omega),
                fmt_f64(r.max_c1_violation),
                fmt_f64(r.max_c2_violation),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// SCA steps with price updates until |Delta F| <= epsilon or
/// `t_max` steps. `start_power` is a full per-VUE vector.
pub fn sca_power_allocation(
    scenario: &Scenario,
    assoc: &Association,
    eta: f64,
    params: &ScaParams,
    start_power: &[f64],
) -> Result<PowerSolveReport> {
    let problem = PowerProblem::new(scenario, assoc, eta);
    let mut power = start_power.to_vec();
    let mut p = problem.restrict(&power);
    let mut omega = params.omega0.clamp(0.0, params.omega_max.max(params.omega0));
    let omega_cap = params.omega_max.max(0.0);

    let evaluate = |power: &[f64], omega: f64| {
        let alloc = ResourceAllocation {
            eta,
            power: power.to_vec(),
            rsu_backhaul_power: vec![scenario.rsu_power(); scenario.num_rsus()],
        };
        utility(scenario, assoc, &alloc, omega)
    };

    let first = evaluate(&power, omega);
    let mut f_prev = problem.true_objective(&p, omega);
    let mut records = vec![PowerIteration {
        t: 0,
        utility: f_prev,
        omega,
        max_c1_violation: first.max_qos_violation(),
        max_c2_violation: first.max_backhaul_violation(),
        inner_iterations: 0,
    }];
    let mut converged = false;
    let mut inner_total = 0;
    let mut t = 0;
    while t < params.t_max {
        t += 1;
        let sur = build_surrogate(&problem, &p, omega);
        let step = solve_inner(&problem, &sur, &params.inner)?;
        inner_total += step.iterations;
        p = step.power;
        problem.expand_into(&p, &mut power);

        let report = evaluate(&power, omega);
        let congested = report
            .backhaul_slack
            .iter()
            .any(|&s| s < -params.congestion_threshold);
        if congested {
            omega += params.delta;
        } else if report.cross_tier_at_hap(scenario) > params.interference_threshold {
            omega -= params.delta;
        }
        omega = omega.clamp(0.0, omega_cap);

        let f = problem.true_objective(&p, omega);
        records.push(PowerIteration {
            t,
            utility: f,
            omega,
            max_c1_violation: report.max_qos_violation(),
            max_c2_violation: report.max_backhaul_violation(),
            inner_iterations: step.iterations,
        });
        if (f - f_prev).abs() <= params.epsilon {
            converged = true;
            break;
        }
        f_prev = f;
    }

    Ok(PowerSolveReport {
        power,
        objective_trace: records.iter().map(|r| r.utility).collect(),
        omega_trace: records.iter().map(|r| r.omega).collect(),
        records,
        iterations: t,
        converged,
        inner_iterations: inner_total,
        final_omega: omega,
    })
}

/// F for the powers in `power` (full vector) under `assoc` and `eta`.
pub fn true_objective(scenario: &Scenario, assoc: &Association, eta: f64, power: &[f64], omega: f64) -> f64 {
    let problem = PowerProblem::new(scenario, assoc, eta);
    problem.true_objective(&problem.restrict(power), omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{fixtures, AccessPoint};
    use crate::scenario::generate_scenario;

    fn params(omega: f64) -> ScaParams {
        ScaParams {
            omega0: omega,
            delta: 0.0,
            omega_max: omega,
            t_max: 100,
            epsilon: 1e-6,
            congestion_threshold: 0.0,
            interference_threshold: f64::INFINITY,
            inner: InnerOptions::default(),
        }
    }

    #[test]
    fn infinite_epsilon_stops_after_one_step() {
        let s = generate_scenario(&SystemConfig {
            num_vues: 8,
            num_rsus: 2,
            ..Default::default()
        })
        .unwrap();
        let a = Association::nearest_rsu(&s, &[0]);
        let mut p = params(1e20);
        p.epsilon = f64::INFINITY;
        let r = sca_power_allocation(&s, &a, 0.5, &p, &vec![s.p_max() / 2.0; 8]).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert_eq!(r.objective_trace.len(), 2);
    }

    #[test]
    fn lone_vue_reaches_full_power() {
        let s = fixtures::scenario(vec![vec![2.0]], vec![1.0], vec![1.0], 1.0);
        let a = Association::new(&s, vec![AccessPoint::Rsu(0)]).unwrap();
        let r = sca_power_allocation(&s, &a, 0.5, &params(0.0), &[0.5]).unwrap();
        assert_eq!(r.power[0], 1.0);
    }

    #[test]
    fn trace_is_monotone_without_price_steps() {
        for seed in 0..4 {
            let s = generate_scenario(&SystemConfig {
                num_vues: 20,
                num_rsus: 4,
                seed,
                ..Default::default()
            })
            .unwrap();
            let a = Association::nearest_rsu(&s, &[3, 9]);
            let r = sca_power_allocation(&s, &a, 0.6, &params(1e20), &vec![s.p_max() / 2.0; 20]).unwrap();
            for w in r.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-7 * w[0].abs(), "seed {seed}: {w:?}");
            }
            assert!(r.power.iter().all(|&p| (0.0..=s.p_max()).contains(&p)));
        }
    }

    #[test]
    fn rate_floor_is_met_or_reported() {
        let s = generate_scenario(&SystemConfig {
            num_vues: 10,
            num_rsus: 2,
            qos_rate: 1e5,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let a = Association::nearest_rsu(&s, &[0]);
        let eta = 0.5;
        match sca_power_allocation(&s, &a, eta, &params(1e20), &vec![s.p_max() / 2.0; 10]) {
            Ok(r) => {
                let alloc = ResourceAllocation {
                    eta,
                    power: r.power.clone(),
                    rsu_backhaul_power: vec![s.rsu_power(); 2],
                };
                let rep = utility(&s, &a, &alloc, 0.0);
                assert!(rep.max_qos_violation() <= 1e-6 * s.config.qos_rate);
            }
            Err(e) => assert!(e.is_infeasible()),
        }
    }

    #[test]
    fn impossible_floor_is_infeasible() {
        let s = fixtures::scenario(vec![vec![2.0], vec![1.0]], vec![1.0, 1.0], vec![1.0], 1.0);
        let mut s = s;
        s.config.qos_rate = 100.0;
        let a = Association::new(&s, vec![AccessPoint::Rsu(0); 2]).unwrap();
        let err = sca_power_allocation(&s, &a, 0.5, &params(0.0), &[0.5, 0.5]).unwrap_err();
        assert!(matches!(err, crate::error::Error::QosInfeasible { .. }));
    }

    #[test]
    fn csv_columns() {
        let s = fixtures::scenario(vec![vec![2.0]], vec![1.0], vec![1.0], 1.0);
        let a = Association::new(&s, vec![AccessPoint::Rsu(0)]).unwrap();
        let r = sca_power_allocation(&s, &a, 0.5, &params(0.0), &[0.5]).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,F,omega,max_C1_violation,max_C2_violation\n0,"));
    }
}
