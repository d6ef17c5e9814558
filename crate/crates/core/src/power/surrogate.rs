//! The power sub-problem for a fixed association and bandwidth split, and
//! its concave minorant.
//!
//! For an RSU-served VUE n in cell m let
//!
//! Y2_n = sum over later users of the cell and all users of other cells of
//!        |h_{k,m}|^2 p_k, plus HAP-user interference and noise,
//! Y1_n = Y2_n + |h_{n,m}|^2 p_n.
//!
//! The rate is W log2(Y1_n / Y2_n) with W = (1 - eta) B. Both Y are affine
//! in p, so sum log2 Y1 is concave and gamma(p) = sum log2 Y2 is concave too;
//! replacing gamma by its tangent gives a concave global minorant.

use std::f64::consts::LN_2;

use crate::link::{fronthaul_noise, Association};
use crate::scenario::Scenario;

/// Fixed data of one power sub-problem. Only RSU-served VUEs are variables;
/// they are indexed in ascending VUE id.
#[derive(Debug, Clone)]
pub struct PowerProblem {
    /// VUE id of each variable.
    pub vars: Vec<usize>,
    index: Vec<Option<usize>>,
    /// Variables of each RSU in decoding order.
    cells: Vec<Vec<usize>>,
    cell_of: Vec<usize>,
    /// gain[k][m] = |h_{k,m}|^2 of variable k.
    gain: Vec<Vec<f64>>,
    /// HAP-user interference plus noise, per variable.
    base: Vec<f64>,
    /// |h_{k,l}|^2 per variable.
    hap_gain: Vec<f64>,
    pub p_max: f64,
    /// W = (1 - eta) B.
    pub width: f64,
    /// Rate floors R_n / W in bit/s/Hz; zero means no constraint.
    pub qos: Vec<f64>,
}

impl PowerProblem {
    pub fn new(scenario: &Scenario, assoc: &Association, eta: f64) -> Self {
        let m_count = scenario.num_rsus();
        let vars: Vec<usize> = assoc.terrestrial().collect();
        let mut index = vec![None; scenario.num_vues()];
        for (k, &n) in vars.iter().enumerate() {
            index[n] = Some(k);
        }
        let mut cells = vec![Vec::new(); m_count];
        let mut cell_of = vec![0; vars.len()];
        for (m, cell) in cells.iter_mut().enumerate() {
            for &n in assoc.cell(m) {
                let k = index[n].expect("cell members are terrestrial");
                cell.push(k);
                cell_of[k] = m;
            }
        }
        let noise = fronthaul_noise(scenario, eta);
        let hap_power = scenario.hap_vue_power();
        let base = vars
            .iter()
            .map(|&n| {
                let m = assoc.ap(n).rsu().expect("terrestrial");
                let cross: f64 = assoc.hap_users().iter().map(|&h| scenario.gain(h, m)).sum();
                cross * hap_power + noise
            })
            .collect();
        let width = (1.0 - eta) * scenario.config.total_bandwidth;
        let floor = scenario.config.qos_rate / width;
        Self {
            gain: vars.iter().map(|&n| scenario.channel.gain_vue_rsu[n].clone()).collect(),
            hap_gain: vars.iter().map(|&n| scenario.gain_hap(n)).collect(),
            qos: vec![floor; vars.len()],
            vars,
            index,
            cells,
            cell_of,
            base,
            p_max: scenario.p_max(),
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Variable vector from a full per-VUE power vector.
    pub fn restrict(&self, power: &[f64]) -> Vec<f64> {
        self.vars.iter().map(|&n| power[n]).collect()
    }

    /// Writes the variables back into a full per-VUE power vector.
    pub fn expand_into(&self, p: &[f64], power: &mut [f64]) {
        for (k, &n) in self.vars.iter().enumerate() {
            power[n] = p[k];
        }
    }

    pub fn var_of(&self, vue: usize) -> Option<usize> {
        self.index[vue]
    }

    pub fn hap_gain(&self) -> &[f64] {
        &self.hap_gain
    }

    /// (Y1, Y2) per variable, watts.
    pub fn upsilon(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut y1 = vec![0.0; n];
        let mut y2 = vec![0.0; n];
        for (m, cell) in self.cells.iter().enumerate() {
            let inter: f64 = (0..n)
                .filter(|&k| self.cell_of[k] != m)
                .map(|k| self.gain[k][m] * p[k])
                .sum();
            let mut later = 0.0;
            for &k in cell.iter().rev() {
                y2[k] = later + inter + self.base[k];
                let own = self.gain[k][m] * p[k];
                y1[k] = y2[k] + own;
                later += own;
            }
        }
        (y1, y2)
    }

    /// v_k = sum_n w_n d(Y_n)/d(p_k), with Y = Y1 if `inclusive`, else Y2.
    pub fn adjoint(&self, w: &[f64], inclusive: bool) -> Vec<f64> {
        let n = self.len();
        let cell_sum: Vec<f64> = self.cells.iter().map(|c| c.iter().map(|&k| w[k]).sum()).collect();
        let mut own_prefix = vec![0.0; n];
        for cell in &self.cells {
            let mut acc = 0.0;
            for &k in cell {
                own_prefix[k] = if inclusive { acc + w[k] } else { acc };
                acc += w[k];
            }
        }
        (0..n)
            .map(|k| {
                let mk = self.cell_of[k];
                let others: f64 = (0..self.cells.len())
                    .filter(|&m| m != mk)
                    .map(|m| self.gain[k][m] * cell_sum[m])
                    .sum();
                others + self.gain[k][mk] * own_prefix[k]
            })
            .collect()
    }

    /// sum_k |h_{k,l}|^2 p_k, watts.
    pub fn hap_interference(&self, p: &[f64]) -> f64 {
        self.hap_gain.iter().zip(p).map(|(g, p)| g * p).sum()
    }

    /// F(p) in bit/s: W sum log2 Y1 - W gamma(p) - Omega sum |h_l|^2 p.
    pub fn true_objective(&self, p: &[f64], omega: f64) -> f64 {
        let (y1, y2) = self.upsilon(p);
        let rate: f64 = y1.iter().zip(&y2).map(|(a, b)| (a / b).log2()).sum();
        self.width * rate - omega * self.hap_interference(p)
    }

    /// gamma(p) = sum log2 Y2.
    pub fn gamma(&self, p: &[f64]) -> f64 {
        self.upsilon(p).1.iter().map(|y| y.log2()).sum()
    }

    /// Gradient of gamma, per watt.
    pub fn gamma_grad(&self, p: &[f64]) -> Vec<f64> {
        let (_, y2) = self.upsilon(p);
        let w: Vec<f64> = y2.iter().map(|y| 1.0 / (y * LN_2)).collect();
        self.adjoint(&w, false)
    }

    /// True C1 margin log2(Y1 / Y2) - R_n / W per variable.
    pub fn qos_margin(&self, p: &[f64]) -> Vec<f64> {
        let (y1, y2) = self.upsilon(p);
        (0..self.len()).map(|k| (y1[k] / y2[k]).log2() - self.qos[k]).collect()
    }

    /// Variables whose rate floor is active.
    pub fn constrained(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.qos[k] > 0.0).collect()
    }

    #[cfg(test)]
    pub(crate) fn pos_in_cell(&self, k: usize) -> (usize, usize) {
        let m = self.cell_of[k];
        (m, self.cells[m].iter().position(|&v| v == k).expect("member of its cell"))
    }
}

/// Concave minorant of F around `expansion_point`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    /// p[t] per variable, watts.
    pub expansion_point: Vec<f64>,
    /// Gradient of gamma at p[t], per variable, 1/W.
    pub linear_coeffs: Vec<f64>,
    /// gamma(p[t]).
    pub constant_term: f64,
    pub omega: f64,
    /// Y2 at p[t]; anchors the tangent of each C1 constraint.
    pub y2_at_expansion: Vec<f64>,
}

impl SurrogateModel {
    /// Surrogate value in bit/s.
    pub fn value(&self, problem: &PowerProblem, p: &[f64]) -> f64 {
        let (y1, _) = problem.upsilon(p);
        let log_y1: f64 = y1.iter().map(|y| y.log2()).sum();
        let tangent = self.constant_term
            + self
                .linear_coeffs
                .iter()
                .zip(p.iter().zip(&self.expansion_point))
                .map(|(g, (p, p0))| g * (p - p0))
                .sum::<f64>();
        problem.width * (log_y1 - tangent) - self.omega * problem.hap_interference(p)
    }

    /// Value relative to F(p[t]) in bit/s/Hz: sum log2(Y1 / Y2(p[t])) minus
    /// the linear part. Summing ratios keeps the value well conditioned.
    pub(crate) fn scaled_value(&self, problem: &PowerProblem, p: &[f64]) -> f64 {
        let (y1, _) = problem.upsilon(p);
        let logs: f64 = y1
            .iter()
            .zip(&self.y2_at_expansion)
            .map(|(a, b)| (a / b).log2())
            .sum();
        let linear: f64 = self
            .linear_coeffs
            .iter()
            .zip(p.iter().zip(&self.expansion_point))
            .map(|(g, (p, p0))| g * (p - p0))
            .sum();
        logs - linear - self.omega / problem.width * problem.hap_interference(p)
    }

    /// Gradient of [`Self::scaled_value`] per watt.
    pub(crate) fn scaled_grad(&self, problem: &PowerProblem, p: &[f64]) -> Vec<f64> {
        let (y1, _) = problem.upsilon(p);
        let w: Vec<f64> = y1.iter().map(|y| 1.0 / (y * LN_2)).collect();
        let mut g = problem.adjoint(&w, true);
        let price = self.omega / problem.width;
        for k in 0..g.len() {
            g[k] -= self.linear_coeffs[k] + price * problem.hap_gain[k];
        }
        g
    }

    /// Convexified C1 margins: log2 Y1 minus the tangent of log2 Y2 at p[t],
    /// minus the floor. Nonnegative margins imply the true C1.
    pub fn qos_margin(&self, problem: &PowerProblem, p: &[f64]) -> Vec<f64> {
        let (y1, y2) = problem.upsilon(p);
        (0..problem.len())
            .map(|k| {
                let y0 = self.y2_at_expansion[k];
                (y1[k] / y0).log2() - (y2[k] / y0 - 1.0) / LN_2 - problem.qos[k]
            })
            .collect()
    }

    /// sum_k w_k grad(qos_margin_k), per watt.
    pub(crate) fn qos_adjoint(&self, problem: &PowerProblem, p: &[f64], w: &[f64]) -> Vec<f64> {
        let (y1, _) = problem.upsilon(p);
        let w1: Vec<f64> = (0..problem.len()).map(|k| w[k] / (y1[k] * LN_2)).collect();
        let w2: Vec<f64> = (0..problem.len())
            .map(|k| w[k] / (self.y2_at_expansion[k] * LN_2))
            .collect();
        let a = problem.adjoint(&w1, true);
        let b = problem.adjoint(&w2, false);
        a.iter().zip(&b).map(|(a, b)| a - b).collect()
    }
}

/// Tangent model of F at `p_t` (per-variable watts) with price `omega`.
pub fn build_surrogate(problem: &PowerProblem, p_t: &[f64], omega: f64) -> SurrogateModel {
    let (_, y2) = problem.upsilon(p_t);
    SurrogateModel {
        expansion_point: p_t.to_vec(),
        linear_coeffs: problem.gamma_grad(p_t),
        constant_term: y2.iter().map(|y| y.log2()).sum(),
        omega,
        y2_at_expansion: y2,
    }
}
