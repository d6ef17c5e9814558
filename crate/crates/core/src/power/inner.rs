//! Maximizes one surrogate over the power box and the convexified rate
//! floors: projected gradient ascent with Barzilai-Borwein steps and
//! Armijo backtracking, plus a log barrier on the rate floors.
//!
//! Powers are scaled to x = p / P_max so the box is [0, 1]^K, and values
//! are in bit/s/Hz.

use crate::error::{Error, Result};

use super::surrogate::{PowerProblem, SurrogateModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    /// Stop when the projected-gradient step residual drops below this.
    pub tol: f64,
    /// Iteration cap per barrier stage.
    pub max_iter: usize,
    pub mu_start: f64,
    pub mu_end: f64,
    pub mu_factor: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 5000,
            mu_start: 1e-3,
            mu_end: 1e-10,
            mu_factor: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    /// Per-variable powers, watts.
    pub power: Vec<f64>,
    pub iterations: usize,
    /// Final projected-gradient residual.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Ascent {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn project(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn residual(x: &[f64], g: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .map(|(x, g)| (project(x + g) - x).abs())
        .fold(0.0, f64::max)
}

/// Projected gradient ascent over [0, 1]^K. `f` returns `None` outside its
/// domain; `x0` must lie inside it. `stop` can end the run early.
pub(crate) fn ascend<F, S>(mut f: F, x0: Vec<f64>, tol: f64, max_iter: usize, mut stop: S) -> Ascent
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    S: FnMut(&[f64]) -> bool,
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x).expect("start point inside the domain");
    let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut step = if gmax > 0.0 { 0.1 / gmax } else { 1.0 };
    let mut iterations = 0;
    let mut res = residual(&x, &g);
    while iterations < max_iter && res > tol && !stop(&x) {
        iterations += 1;
        let mut s = step;
        let mut accepted = None;
        for _ in 0..80 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(x, g)| project(x + s * g)).collect();
            let ascent: f64 = g.iter().zip(trial.iter().zip(&x)).map(|(g, (t, x))| g * (t - x)).sum();
            if ascent <= 0.0 {
                break;
            }
            if let Some((ft, gt)) = f(&trial) {
                if ft >= fx + 1e-4 * ascent {
                    accepted = Some((trial, ft, gt, s));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((xn, fxn, gn, s_used)) = accepted else {
            break;
        };
        let (mut sy, mut ss) = (0.0, 0.0);
        for k in 0..x.len() {
            let dx = xn[k] - x[k];
            sy += dx * (gn[k] - g[k]);
            ss += dx * dx;
        }
        step = if sy < 0.0 { ss / -sy } else { s_used * 4.0 };
        step = step.clamp(1e-12, 1e12);
        x = xn;
        fx = fxn;
        g = gn;
        res = residual(&x, &g);
    }
    Ascent {
        x,
        iterations,
        residual: res,
    }
}

/// Maximizes the surrogate, starting from its expansion point.
pub fn solve_inner(problem: &PowerProblem, surrogate: &SurrogateModel, opts: &InnerOptions) -> Result<InnerResult> {
    let pm = problem.p_max;
    let to_p = |x: &[f64]| -> Vec<f64> { x.iter().map(|v| v * pm).collect() };
    let x0: Vec<f64> = surrogate
        .expansion_point
        .iter()
        .map(|p| project(p / pm))
        .collect();
    let constrained = problem.constrained();

    let objective = |x: &[f64]| {
        let p = to_p(x);
        let g: Vec<f64> = surrogate.scaled_grad(problem, &p).iter().map(|v| v * pm).collect();
        Some((surrogate.scaled_value(problem, &p), g))
    };

    if constrained.is_empty() {
        let a = ascend(objective, x0.clone(), opts.tol, opts.max_iter, |_| false);
        return Ok(pick_better(problem, surrogate, &x0, true, a));
    }

    let margins = |x: &[f64]| -> Vec<f64> {
        let c = surrogate.qos_margin(problem, &to_p(x));
        constrained.iter().map(|&k| c[k]).collect()
    };
    let start_margin = margins(&x0);
    let start_feasible = start_margin.iter().all(|&c| c >= 0.0);
    let interior = |c: &[f64]| c.iter().all(|&v| v > 0.0);

    let mut x = x0.clone();
    let mut iterations = 0;
    if !interior(&start_margin) {
        let beta = 50.0;
        let soft_min = |x: &[f64]| {
            let p = to_p(x);
            let c_all = surrogate.qos_margin(problem, &p);
            let c: Vec<f64> = constrained.iter().map(|&k| c_all[k]).collect();
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let e: Vec<f64> = c.iter().map(|v| (-beta * (v - lo)).exp()).collect();
            let z: f64 = e.iter().sum();
            let mut w = vec![0.0; problem.len()];
            for (i, &k) in constrained.iter().enumerate() {
                w[k] = e[i] / z;
            }
            let g: Vec<f64> = surrogate.qos_adjoint(problem, &p, &w).iter().map(|v| v * pm).collect();
            Some((lo - z.ln() / beta, g))
        };
        let a = ascend(soft_min, x.clone(), opts.tol * 1e-3, opts.max_iter * 4, |x| {
            margins(x).iter().all(|&v| v > 1e-9)
        });
        iterations += a.iterations;
        let c = margins(&a.x);
        if !interior(&c) {
            let (i, worst) = c
                .iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty");
            return Err(Error::QosInfeasible {
                vue: problem.vars[constrained[i]],
                violation: -worst * problem.width,
            });
        }
        x = a.x;
    }

    let mut mu = opts.mu_start;
    let mut last = None;
    while mu >= opts.mu_end * (1.0 - 1e-9) {
        let barrier = |x: &[f64]| {
            let p = to_p(x);
            let c_all = surrogate.qos_margin(problem, &p);
            let mut w = vec![0.0; problem.len()];
            let mut log_sum = 0.0;
            for &k in &constrained {
                if c_all[k] <= 0.0 {
                    return None;
                }
                log_sum += c_all[k].ln();
                w[k] = mu / c_all[k];
            }
            let base = surrogate.scaled_grad(problem, &p);
            let extra = surrogate.qos_adjoint(problem, &p, &w);
            let g: Vec<f64> = base.iter().zip(&extra).map(|(a, b)| (a + b) * pm).collect();
            Some((surrogate.scaled_value(problem, &p) + mu * log_sum, g))
        };
        let a = ascend(barrier, x.clone(), opts.tol, opts.max_iter, |_| false);
        iterations += a.iterations;
        x = a.x.clone();
        last = Some(a);
        mu *= opts.mu_factor;
    }
    let mut a = last.expect("at least one barrier stage");
    a.iterations = iterations;
    Ok(pick_better(problem, surrogate, &x0, start_feasible, a))
}

/// The ascent result, or the expansion point if that scores higher on the
/// surrogate and is feasible. Keeps every SCA step monotone.
fn pick_better(problem: &PowerProblem, surrogate: &SurrogateModel, x0: &[f64], start_feasible: bool, a: Ascent) -> InnerResult {
    let pm = problem.p_max;
    let p_new: Vec<f64> = a.x.iter().map(|v| v * pm).collect();
    let p_old: Vec<f64> = x0.iter().map(|v| v * pm).collect();
    let use_old =
        start_feasible && surrogate.scaled_value(problem, &p_old) > surrogate.scaled_value(problem, &p_new);
    InnerResult {
        power: if use_old { p_old } else { p_new },
        iterations: a.iterations,
        residual: a.residual,
    }
}
