//! SINR, rate, interference and utility evaluation for a fixed association
//! and resource allocation.
//!
//! Interference terms use each interferer's own uplink gain toward the
//! receiver. SIC decodes the strongest |h|^2 first, so a VUE only sees
//! intra-cell interference from the users decoded after it.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AccessPoint {
    Rsu(usize),
    Hap,
}

impl AccessPoint {
    pub fn rsu(self) -> Option<usize> {
        match self {
            AccessPoint::Rsu(m) => Some(m),
            AccessPoint::Hap => None,
        }
    }

    pub fn is_hap(self) -> bool {
        self == AccessPoint::Hap
    }
}

impl fmt::Display for AccessPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccessPoint::Rsu(m) => write!(f, "{m}"),
            AccessPoint::Hap => f.write_str("hap"),
        }
    }
}

/// Decoding orders per access point: RSU cells first, then the HAP.
///
/// Within a cell VUEs are sorted by |h|^2 toward that access point,
/// strongest first; equal gains decode the lower VUE id first.
pub fn sic_decoding_order(scenario: &Scenario, assignment: &[AccessPoint]) -> Vec<Vec<usize>> {
    let m_count = scenario.num_rsus();
    let mut orders = vec![Vec::new(); m_count + 1];
    for (n, ap) in assignment.iter().enumerate() {
        match ap {
            AccessPoint::Rsu(m) => orders[*m].push(n),
            AccessPoint::Hap => orders[m_count].push(n),
        }
    }
    for (j, order) in orders.iter_mut().enumerate() {
        sort_order(scenario, j, order);
    }
    orders
}

fn order_gain(scenario: &Scenario, column: usize, n: usize) -> f64 {
    if column == scenario.num_rsus() {
        scenario.gain_hap(n)
    } else {
        scenario.gain(n, column)
    }
}

fn sort_order(scenario: &Scenario, column: usize, order: &mut [usize]) {
    order.sort_by(|&a, &b| {
        order_gain(scenario, column, b)
            .total_cmp(&order_gain(scenario, column, a))
            .then(a.cmp(&b))
    });
}

/// User association U with its SIC decoding orders W(L_m).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Association {
    assignment: Vec<AccessPoint>,
    orders: Vec<Vec<usize>>,
}

impl Association {
    pub fn new(scenario: &Scenario, assignment: Vec<AccessPoint>) -> Result<Self> {
        if assignment.len() != scenario.num_vues() {
            return Err(Error::InvalidConfig(format!(
                "assignment has {} rows for {} VUEs",
                assignment.len(),
                scenario.num_vues()
            )));
        }
        if let Some(bad) = assignment
            .iter()
            .find(|ap| ap.rsu().is_some_and(|m| m >= scenario.num_rsus()))
        {
            return Err(Error::InvalidConfig(format!("no such access point {bad:?}")));
        }
        let orders = sic_decoding_order(scenario, &assignment);
        Ok(Self { assignment, orders })
    }

    /// Builds an association with caller-supplied decoding orders. Orders
    /// must hold exactly the members of each access point but need not be
    /// sorted; use [`verify_theorem_1`] to check them.
    pub fn with_orders(assignment: Vec<AccessPoint>, orders: Vec<Vec<usize>>) -> Result<Self> {
        let m_count = orders.len().saturating_sub(1);
        let mut seen = vec![false; assignment.len()];
        for (j, order) in orders.iter().enumerate() {
            let ap = if j == m_count { AccessPoint::Hap } else { AccessPoint::Rsu(j) };
            for &n in order {
                if n >= assignment.len() || assignment[n] != ap || seen[n] {
                    return Err(Error::InvalidConfig(format!(
                        "decoding order of {ap} lists VUE {n} incorrectly"
                    )));
                }
                seen[n] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidConfig("decoding orders miss a VUE".into()));
        }
        Ok(Self { assignment, orders })
    }

    /// Every VUE on its nearest RSU except `hap_users`.
    pub fn nearest_rsu(scenario: &Scenario, hap_users: &[usize]) -> Self {
        let assignment = (0..scenario.num_vues())
            .map(|n| {
                if hap_users.contains(&n) {
                    AccessPoint::Hap
                } else {
                    AccessPoint::Rsu(scenario.nearest_rsu(n))
                }
            })
            .collect();
        Self::new(scenario, assignment).expect("nearest RSU is in range")
    }

    pub fn assignment(&self) -> &[AccessPoint] {
        &self.assignment
    }

    pub fn ap(&self, n: usize) -> AccessPoint {
        self.assignment[n]
    }

    pub fn num_vues(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_rsus(&self) -> usize {
        self.orders.len() - 1
    }

    /// Decoding order of RSU `m`.
    pub fn cell(&self, m: usize) -> &[usize] {
        &self.orders[m]
    }

    /// Decoding order at the HAP.
    pub fn hap_users(&self) -> &[usize] {
        &self.orders[self.num_rsus()]
    }

    pub fn orders(&self) -> &[Vec<usize>] {
        &self.orders
    }

    pub fn terrestrial(&self) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, ap)| !ap.is_hap())
            .map(|(n, _)| n)
    }

    /// u_{n,j} with column `num_rsus()` standing for the HAP.
    pub fn u(&self, n: usize, j: usize) -> bool {
        match self.assignment[n] {
            AccessPoint::Rsu(m) => m == j,
            AccessPoint::Hap => j == self.num_rsus(),
        }
    }

    pub fn matrix(&self) -> Vec<Vec<u8>> {
        (0..self.num_vues())
            .map(|n| (0..=self.num_rsus()).map(|j| u8::from(self.u(n, j))).collect())
            .collect()
    }

    fn column(&self, ap: AccessPoint) -> usize {
        ap.rsu().unwrap_or(self.num_rsus())
    }

    /// Moves VUE `n` to `ap` and refreshes the affected decoding orders.
    pub fn rebind(&mut self, scenario: &Scenario, n: usize, ap: AccessPoint) {
        let old = self.assignment[n];
        if old == ap {
            return;
        }
        let (from, to) = (self.column(old), self.column(ap));
        self.orders[from].retain(|&i| i != n);
        self.orders[to].push(n);
        sort_order(scenario, to, &mut self.orders[to]);
        self.assignment[n] = ap;
    }

    /// Exchanges the access points of `a` and `b`.
    pub fn swap(&mut self, scenario: &Scenario, a: usize, b: usize) {
        let (ap_a, ap_b) = (self.assignment[a], self.assignment[b]);
        if ap_a == ap_b {
            return;
        }
        let (ca, cb) = (self.column(ap_a), self.column(ap_b));
        for slot in self.orders[ca].iter_mut() {
            if *slot == a {
                *slot = b;
            }
        }
        for slot in self.orders[cb].iter_mut() {
            if *slot == b {
                *slot = a;
            }
        }
        self.assignment[a] = ap_b;
        self.assignment[b] = ap_a;
        sort_order(scenario, ca, &mut self.orders[ca]);
        sort_order(scenario, cb, &mut self.orders[cb]);
    }
}

/// Bandwidth split and transmit powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceAllocation {
    /// Fraction of B given to the backhaul.
    pub eta: f64,
    /// Uplink power of each VUE toward its access point, watts. Entries of
    /// HAP-served VUEs are ignored: those transmit at the fixed HAP power.
    pub power: Vec<f64>,
    /// Backhaul power of each RSU, watts.
    pub rsu_backhaul_power: Vec<f64>,
}

impl ResourceAllocation {
    /// eta = 0.5, every VUE at P_max / 2, RSUs at full power.
    pub fn initial(scenario: &Scenario) -> Self {
        Self::uniform(scenario, 0.5, scenario.p_max() / 2.0)
    }

    pub fn uniform(scenario: &Scenario, eta: f64, power: f64) -> Self {
        Self {
            eta,
            power: vec![power; scenario.num_vues()],
            rsu_backhaul_power: vec![scenario.rsu_power(); scenario.num_rsus()],
        }
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidConfig(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        let p_max = scenario.p_max();
        if self.power.len() != scenario.num_vues()
            || self.power.iter().any(|p| !(0.0..=p_max).contains(p))
        {
            return Err(Error::InvalidConfig("VUE powers must lie in [0, P_max]".into()));
        }
        if self.rsu_backhaul_power.len() != scenario.num_rsus()
            || self.rsu_backhaul_power.iter().any(|p| !(p.is_finite() && *p >= 0.0))
        {
            return Err(Error::InvalidConfig("RSU backhaul powers must be >= 0".into()));
        }
        Ok(())
    }
}

/// Transmit power of VUE `n` under `assoc`.
pub fn tx_power(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation, n: usize) -> f64 {
    match assoc.ap(n) {
        AccessPoint::Hap => scenario.hap_vue_power(),
        AccessPoint::Rsu(_) => alloc.power[n],
    }
}

/// Fronthaul noise power sigma^2 over the (1 - eta) B band.
pub fn fronthaul_noise(scenario: &Scenario, eta: f64) -> f64 {
    scenario.noise_psd_w() * (1.0 - eta) * scenario.config.total_bandwidth
}

/// Backhaul noise over one RSU's eta B / M sub-band.
pub fn backhaul_noise(scenario: &Scenario, eta: f64) -> f64 {
    scenario.noise_psd_w() * eta * scenario.config.total_bandwidth / scenario.num_rsus() as f64
}

/// Interference powers seen by one VUE, watts. For HAP users `inter` holds
/// the interference from RSU-served VUEs and `cross_tier` is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Interference {
    pub intra: f64,
    pub inter: f64,
    pub cross_tier: f64,
}

impl Interference {
    pub fn total(&self) -> f64 {
        self.intra + self.inter + self.cross_tier
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VueLink {
    pub vue: usize,
    pub ap: AccessPoint,
    pub power: f64,
    /// Received power of the VUE's own signal.
    pub signal: f64,
    pub interference: Interference,
    pub noise: f64,
    pub sinr: f64,
    pub rate: f64,
    /// F_{n,m} for RSU users; zero for HAP users, which are not in F.
    pub utility: f64,
}

/// R = (1 - eta) B log2(1 + sinr).
pub fn rate_fronthaul(sinr: f64, eta: f64, bandwidth: f64) -> f64 {
    (1.0 - eta) * bandwidth * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Link state of every VUE.
pub fn fronthaul_links(
    scenario: &Scenario,
    assoc: &Association,
    alloc: &ResourceAllocation,
    omega: f64,
) -> Vec<VueLink> {
    let n_vues = scenario.num_vues();
    let m_count = scenario.num_rsus();
    let power: Vec<f64> = (0..n_vues).map(|n| tx_power(scenario, assoc, alloc, n)).collect();
    let noise = fronthaul_noise(scenario, alloc.eta);
    let bandwidth = scenario.config.total_bandwidth;

    let mut inter = vec![0.0; m_count];
    let mut cross = vec![0.0; m_count];
    let mut terrestrial_at_hap = 0.0;
    for n in 0..n_vues {
        let row = &scenario.channel.gain_vue_rsu[n];
        match assoc.ap(n) {
            AccessPoint::Hap => {
                for m in 0..m_count {
                    cross[m] += row[m] * power[n];
                }
            }
            AccessPoint::Rsu(home) => {
                for m in (0..m_count).filter(|&m| m != home) {
                    inter[m] += row[m] * power[n];
                }
                terrestrial_at_hap += scenario.gain_hap(n) * power[n];
            }
        }
    }

    let mut links: Vec<Option<VueLink>> = vec![None; n_vues];
    let mut finish = |n: usize, ap: AccessPoint, signal: f64, interference: Interference| {
        let sinr = signal / (interference.total() + noise);
        let rate = rate_fronthaul(sinr, alloc.eta, bandwidth);
        let utility = match ap {
            AccessPoint::Rsu(_) => rate - omega * scenario.gain_hap(n) * power[n],
            AccessPoint::Hap => 0.0,
        };
        links[n] = Some(VueLink {
            vue: n,
            ap,
            power: power[n],
            signal,
            interference,
            noise,
            sinr,
            rate,
            utility,
        });
    };

    for m in 0..m_count {
        let mut later = 0.0;
        for &n in assoc.cell(m).iter().rev() {
            let received = scenario.gain(n, m) * power[n];
            let interference = Interference {
                intra: later,
                inter: inter[m],
                cross_tier: cross[m],
            };
            finish(n, AccessPoint::Rsu(m), received, interference);
            later += received;
        }
    }
    let mut later = 0.0;
    for &n in assoc.hap_users().iter().rev() {
        let received = scenario.gain_hap(n) * power[n];
        let interference = Interference {
            intra: later,
            inter: terrestrial_at_hap,
            cross_tier: 0.0,
        };
        finish(n, AccessPoint::Hap, received, interference);
        later += received;
    }
    links.into_iter().map(|l| l.expect("every VUE is in one order")).collect()
}

/// Link state of one VUE, evaluated term by term from the definitions.
fn single_link(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation, n: usize) -> VueLink {
    let p = |i: usize| tx_power(scenario, assoc, alloc, i);
    let noise = fronthaul_noise(scenario, alloc.eta);
    let ap = assoc.ap(n);
    let (signal, interference) = match ap {
        AccessPoint::Rsu(m) => {
            let order = assoc.cell(m);
            let pos = order.iter().position(|&i| i == n).expect("member of its cell");
            let intra = order[pos + 1..].iter().map(|&i| scenario.gain(i, m) * p(i)).sum();
            let inter = (0..scenario.num_vues())
                .filter(|&i| matches!(assoc.ap(i), AccessPoint::Rsu(j) if j != m))
                .map(|i| scenario.gain(i, m) * p(i))
                .sum();
            let cross_tier = assoc.hap_users().iter().map(|&i| scenario.gain(i, m) * p(i)).sum();
            (
                scenario.gain(n, m) * p(n),
                Interference {
                    intra,
                    inter,
                    cross_tier,
                },
            )
        }
        AccessPoint::Hap => {
            let order = assoc.hap_users();
            let pos = order.iter().position(|&i| i == n).expect("member of the HAP order");
            let intra = order[pos + 1..].iter().map(|&i| scenario.gain_hap(i) * p(i)).sum();
            let inter = assoc.terrestrial().map(|i| scenario.gain_hap(i) * p(i)).sum();
            (
                scenario.gain_hap(n) * p(n),
                Interference {
                    intra,
                    inter,
                    cross_tier: 0.0,
                },
            )
        }
    };
    let sinr = signal / (interference.total() + noise);
    VueLink {
        vue: n,
        ap,
        power: p(n),
        signal,
        interference,
        noise,
        sinr,
        rate: rate_fronthaul(sinr, alloc.eta, scenario.config.total_bandwidth),
        utility: 0.0,
    }
}

/// Gamma_{n,m} of an RSU-served VUE.
pub fn sinr_terrestrial(
    scenario: &Scenario,
    assoc: &Association,
    alloc: &ResourceAllocation,
    n: usize,
) -> Result<f64> {
    if assoc.ap(n).is_hap() {
        return Err(Error::NotTerrestrial(n));
    }
    Ok(single_link(scenario, assoc, alloc, n).sinr)
}

/// Gamma_{n,l} of a HAP-served VUE.
pub fn sinr_hap(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation, n: usize) -> Result<f64> {
    if !assoc.ap(n).is_hap() {
        return Err(Error::NotHapUser(n));
    }
    Ok(single_link(scenario, assoc, alloc, n).sinr)
}

/// SINR of the RSU `m` to HAP backhaul link. Other RSUs' backhaul power is
/// scaled by RSU `m`'s own gain, matching the backhaul SINR definition.
pub fn backhaul_sinr(scenario: &Scenario, alloc: &ResourceAllocation, m: usize) -> f64 {
    let gain = scenario.channel.gain_rsu_hap[m];
    let others: f64 = alloc
        .rsu_backhaul_power
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != m)
        .map(|(_, p)| p)
        .sum();
    alloc.rsu_backhaul_power[m] * gain / (others * gain + backhaul_noise(scenario, alloc.eta))
}

/// Share of cell `m` whose content is not cached at `m`; zero for an empty cell.
pub fn uncached_fraction(scenario: &Scenario, assoc: &Association, m: usize) -> f64 {
    let cell = assoc.cell(m);
    if cell.is_empty() {
        return 0.0;
    }
    let uncached = cell.iter().filter(|&&i| !scenario.cache.x(i, m)).count();
    uncached as f64 / cell.len() as f64
}

/// Psi_m = uncached fraction * eta B / M, in Hz.
pub fn psi(scenario: &Scenario, assoc: &Association, m: usize, eta: f64) -> f64 {
    uncached_fraction(scenario, assoc, m) * eta * scenario.config.total_bandwidth / scenario.num_rsus() as f64
}

/// R_{m,l} = Psi_m log2(1 + Gamma_{m,l}).
pub fn backhaul_rate(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation, m: usize) -> f64 {
    psi(scenario, assoc, m, alloc.eta) * backhaul_sinr(scenario, alloc, m).log2_1p()
}

/// R_l, the sum of all RSU backhaul rates.
pub fn total_backhaul_rate(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation) -> f64 {
    (0..scenario.num_rsus())
        .map(|m| backhaul_rate(scenario, assoc, alloc, m))
        .sum()
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityReport {
    pub eta: f64,
    pub omega: f64,
    pub links: Vec<VueLink>,
    /// R_m.
    pub cell_sum_rate: Vec<f64>,
    /// F_m.
    pub cell_utility: Vec<f64>,
    pub backhaul_sinr: Vec<f64>,
    /// R_{m,l}.
    pub backhaul_rate: Vec<f64>,
    /// R_l.
    pub total_backhaul_rate: f64,
    /// F.
    pub total_utility: f64,
    /// R_{n,m} - R_n for RSU users, `None` for HAP users.
    pub qos_slack: Vec<Option<f64>>,
    /// R_{m,l} minus the uncached fronthaul traffic of cell m.
    pub backhaul_slack: Vec<f64>,
}

impl UtilityReport {
    pub fn max_qos_violation(&self) -> f64 {
        self.qos_slack
            .iter()
            .flatten()
            .fold(0.0, |acc, s| acc.max(-s))
    }

    pub fn max_backhaul_violation(&self) -> f64 {
        self.backhaul_slack.iter().fold(0.0, |acc, s| acc.max(-s))
    }

    /// Interference from RSU-served VUEs received at the HAP, watts.
    pub fn cross_tier_at_hap(&self, scenario: &Scenario) -> f64 {
        self.links
            .iter()
            .filter(|l| !l.ap.is_hap())
            .map(|l| scenario.gain_hap(l.vue) * l.power)
            .sum()
    }

    pub const CSV_HEADER: [&'static str; 8] = [
        "vue_id", "ap_id", "sinr", "rate_bps", "phi_i1_w", "phi_i2_w", "phi_i3_w", "utility",
    ];

    /// One row per VUE plus a `total` footer holding sum rate and F.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for l in &self.links {
            w.write_record([
                l.vue.to_string(),
                l.ap.to_string(),
                fmt_f64(l.sinr),
                fmt_f64(l.rate),
                fmt_f64(l.interference.intra),
                fmt_f64(l.interference.inter),
                fmt_f64(l.interference.cross_tier),
                fmt_f64(l.utility),
            ])?;
        }
        let sum_rate: f64 = self.cell_sum_rate.iter().sum();
        w.write_record([
            "total".to_string(),
            String::new(),
            String::new(),
            fmt_f64(sum_rate),
            String::new(),
            String::new(),
            String::new(),
            fmt_f64(self.total_utility),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal form, switching to exponent notation for
/// very large or small magnitudes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Full evaluation: fronthaul, backhaul, utilities and constraint slacks.
pub fn utility(
    scenario: &Scenario,
    assoc: &Association,
    alloc: &ResourceAllocation,
    omega: f64,
) -> UtilityReport {
    let links = fronthaul_links(scenario, assoc, alloc, omega);
    let m_count = scenario.num_rsus();
    let mut cell_sum_rate = vec![0.0; m_count];
    let mut cell_utility = vec![0.0; m_count];
    let mut demand = vec![0.0; m_count];
    for m in 0..m_count {
        for &n in assoc.cell(m) {
            cell_sum_rate[m] += links[n].rate;
            cell_utility[m] += links[n].utility;
            if !scenario.cache.x(n, m) {
                demand[m] += links[n].rate;
            }
        }
    }
    let backhaul_sinr: Vec<f64> = (0..m_count).map(|m| backhaul_sinr(scenario, alloc, m)).collect();
    let backhaul_rate: Vec<f64> = (0..m_count)
        .map(|m| psi(scenario, assoc, m, alloc.eta) * backhaul_sinr[m].log2_1p())
        .collect();
    let qos_rate = scenario.config.qos_rate;
    UtilityReport {
        eta: alloc.eta,
        omega,
        qos_slack: links
            .iter()
            .map(|l| (!l.ap.is_hap()).then(|| l.rate - qos_rate))
            .collect(),
        backhaul_slack: (0..m_count).map(|m| backhaul_rate[m] - demand[m]).collect(),
        total_backhaul_rate: backhaul_rate.iter().sum(),
        total_utility: cell_utility.iter().sum(),
        links,
        cell_sum_rate,
        cell_utility,
        backhaul_sinr,
        backhaul_rate,
    }
}

/// F alone; what association search compares.
pub fn total_utility(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation, omega: f64) -> f64 {
    let links = fronthaul_links(scenario, assoc, alloc, omega);
    (0..scenario.num_rsus())
        .map(|m| assoc.cell(m).iter().map(|&n| links[n].utility).sum::<f64>())
        .sum()
}

/// True iff every decoding order, RSU cells and HAP alike, lists its VUEs
/// with non-increasing |h|^2 toward that access point.
pub fn verify_theorem_1(scenario: &Scenario, assoc: &Association) -> bool {
    assoc.orders().iter().enumerate().all(|(j, order)| {
        order
            .windows(2)
            .all(|w| order_gain(scenario, j, w[0]) >= order_gain(scenario, j, w[1]))
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::scenario::{CacheMatrix, ChannelSet, SystemConfig};

    /// A hand-built scenario with the given gains. Noise PSD is chosen so
    /// that sigma^2 = `noise` watts at eta = 0.5 and B = 2 Hz.
    pub fn scenario(gains: Vec<Vec<f64>>, hap: Vec<f64>, rsu_hap: Vec<f64>, noise: f64) -> Scenario {
        let n = gains.len();
        let m = rsu_hap.len();
        let psd_w: f64 = noise / 1.0;
        let config = SystemConfig {
            num_vues: n,
            num_rsus: m,
            total_bandwidth: 2.0,
            noise_psd: 10.0 * psd_w.log10() + 30.0,
            max_power_vue: 30.0,
            hap_vue_power: Some(30.0),
            hap_user_count: Some(0),
            pricing_omega_init: 0.0,
            cache_hit_prob: 0.0,
            ..SystemConfig::default()
        };
        Scenario {
            generator: "fixture".into(),
            config,
            rsu_positions: (0..m).map(|j| [j as f64 * 100.0, 0.0]).collect(),
            vue_positions: (0..n).map(|i| [i as f64, 1.0]).collect(),
            hap_position: [0.0, 0.0],
            channel: ChannelSet {
                gain_vue_rsu: gains,
                gain_vue_hap: hap,
                gain_rsu_hap: rsu_hap,
            },
            cache: CacheMatrix::empty(n, m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::scenario;
    use super::*;
    use crate::scenario::{generate_scenario, SystemConfig};

    fn alloc(s: &Scenario, eta: f64, p: &[f64]) -> ResourceAllocation {
        ResourceAllocation {
            eta,
            power: p.to_vec(),
            rsu_backhaul_power: vec![1.0; s.num_rsus()],
        }
    }

    #[test]
    fn two_element_order_and_tie_break() {
        let s = scenario(vec![vec![4.0], vec![1.0]], vec![1.0; 2], vec![1.0], 1.0);
        let orders = sic_decoding_order(&s, &[AccessPoint::Rsu(0); 2]);
        assert_eq!(orders[0], vec![0, 1]);
        let s = scenario(vec![vec![1.0], vec![4.0]], vec![1.0; 2], vec![1.0], 1.0);
        assert_eq!(sic_decoding_order(&s, &[AccessPoint::Rsu(0); 2])[0], vec![1, 0]);
        let s = scenario(vec![vec![2.0], vec![2.0]], vec![1.0; 2], vec![1.0], 1.0);
        assert_eq!(sic_decoding_order(&s, &[AccessPoint::Rsu(0); 2])[0], vec![0, 1]);
    }

    #[test]
    fn lone_vue_sinr() {
        // sigma^2 = psd * (1 - 0.5) * 2 = psd, so psd = 0.5 gives 0.5 W.
        let s = scenario(vec![vec![1.0]], vec![1.0], vec![1.0], 0.5);
        let a = Association::new(&s, vec![AccessPoint::Rsu(0)]).unwrap();
        let g = sinr_terrestrial(&s, &a, &alloc(&s, 0.5, &[1.0]), 0).unwrap();
        assert!((g - 2.0).abs() < 1e-12);
        let g0 = sinr_terrestrial(&s, &a, &alloc(&s, 0.5, &[0.0]), 0).unwrap();
        assert_eq!(g0, 0.0);
    }

    #[test]
    fn two_user_cell_hand_values() {
        let s = scenario(vec![vec![2.0], vec![1.0]], vec![1.0; 2], vec![1.0], 1.0);
        let a = Association::new(&s, vec![AccessPoint::Rsu(0); 2]).unwrap();
        let al = alloc(&s, 0.5, &[1.0, 1.0]);
        assert!((sinr_terrestrial(&s, &a, &al, 0).unwrap() - 1.0).abs() < 1e-12);
        assert!((sinr_terrestrial(&s, &a, &al, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hap_sinr_hand_values() {
        // VUEs 0, 1 on the HAP; 2 and 3 on RSU 0.
        let s = scenario(
            vec![vec![1.0], vec![1.0], vec![3.0], vec![2.0]],
            vec![4.0, 2.0, 0.5, 0.25],
            vec![1.0],
            1.0,
        );
        let a = Association::new(
            &s,
            vec![AccessPoint::Hap, AccessPoint::Hap, AccessPoint::Rsu(0), AccessPoint::Rsu(0)],
        )
        .unwrap();
        let al = alloc(&s, 0.5, &[0.0, 0.0, 2.0, 4.0]);
        // HAP users transmit at 30 dBm = 1 W.
        // VUE 0: 4 / (2*1 + 0.5*2 + 0.25*4 + 1) = 4 / 5
        assert!((sinr_hap(&s, &a, &al, 0).unwrap() - 0.8).abs() < 1e-12);
        // VUE 1: 2 / (0.5*2 + 0.25*4 + 1) = 2 / 3
        assert!((sinr_hap(&s, &a, &al, 1).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(sinr_hap(&s, &a, &al, 2).is_err());
        assert!(sinr_terrestrial(&s, &a, &al, 0).is_err());
        // HAP single user, no terrestrial: |h|^2 p / sigma^2
        let s1 = scenario(vec![vec![1.0], vec![1.0]], vec![3.0, 1.0], vec![1.0], 1.0);
        let a1 = Association::new(&s1, vec![AccessPoint::Hap, AccessPoint::Rsu(0)]).unwrap();
        let g = sinr_hap(&s1, &a1, &alloc(&s1, 0.5, &[0.0, 0.0]), 0).unwrap();
        assert!((g - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fronthaul_rate_values() {
        assert_eq!(rate_fronthaul(0.0, 0.3, 1e6), 0.0);
        assert!((rate_fronthaul(1.0, 0.5, 2.0) - 1.0).abs() < 1e-15);
        assert!((rate_fronthaul(3.0, 0.25, 20e6) - 3e7).abs() < 1e-6);
    }

    #[test]
    fn backhaul_hand_values() {
        // Two RSUs, one VUE each, nothing cached.
        let s = scenario(vec![vec![1.0, 0.1], vec![0.1, 1.0]], vec![1.0; 2], vec![2.0, 0.5], 1.0);
        let a = Association::new(&s, vec![AccessPoint::Rsu(0), AccessPoint::Rsu(1)]).unwrap();
        let mut al = alloc(&s, 0.5, &[1.0, 1.0]);
        al.rsu_backhaul_power = vec![1.0, 3.0];
        // backhaul noise = psd * eta * B / M = 1 * 0.5 * 2 / 2 = 0.5
        let g0 = 2.0 / (3.0 * 2.0 + 0.5);
        let g1 = 1.5 / (1.0 * 0.5 + 0.5);
        assert!((backhaul_sinr(&s, &al, 0) - g0).abs() < 1e-12);
        assert!((backhaul_sinr(&s, &al, 1) - g1).abs() < 1e-12);
        // Psi = 1 * eta B / M = 0.5
        let r0 = 0.5 * (1.0 + g0).log2();
        let r1 = 0.5 * (1.0 + g1).log2();
        assert!((backhaul_rate(&s, &a, &al, 0) - r0).abs() < 1e-12);
        assert!((total_backhaul_rate(&s, &a, &al) - (r0 + r1)).abs() < 1e-12);
    }

    #[test]
    fn cached_cells_need_no_backhaul() {
        let mut s = scenario(vec![vec![1.0]; 4], vec![1.0; 4], vec![1.0], 1.0);
        let a = Association::new(&s, vec![AccessPoint::Rsu(0); 4]).unwrap();
        let al = alloc(&s, 0.5, &[1.0; 4]);
        let full = s.config.total_bandwidth * 0.5;
        assert!((psi(&s, &a, 0, 0.5) - full).abs() < 1e-15);
        s.cache.cached_at = vec![Some(0); 4];
        assert_eq!(psi(&s, &a, 0, 0.5), 0.0);
        assert_eq!(backhaul_rate(&s, &a, &al, 0), 0.0);
        assert_eq!(total_backhaul_rate(&s, &a, &al), 0.0);
    }

    #[test]
    fn empty_cell_has_zero_backhaul() {
        let s = scenario(vec![vec![1.0, 1.0]], vec![1.0], vec![1.0, 1.0], 1.0);
        let a = Association::new(&s, vec![AccessPoint::Rsu(0)]).unwrap();
        assert_eq!(backhaul_rate(&s, &a, &alloc(&s, 0.5, &[1.0]), 1), 0.0);
    }

    #[test]
    fn two_cell_utility_by_hand() {
        // RSU 0 serves VUEs 0, 1; RSU 1 serves VUEs 2, 3.
        let gains = vec![
            vec![4.0, 0.5],
            vec![2.0, 0.25],
            vec![0.5, 3.0],
            vec![0.25, 1.0],
        ];
        let hap = vec![0.1, 0.2, 0.3, 0.4];
        let s = scenario(gains, hap.clone(), vec![1.0, 1.0], 1.0);
        let a = Association::new(
            &s,
            vec![AccessPoint::Rsu(0), AccessPoint::Rsu(0), AccessPoint::Rsu(1), AccessPoint::Rsu(1)],
        )
        .unwrap();
        let p = [1.0, 0.5, 0.8, 0.6];
        let al = alloc(&s, 0.5, &p);
        let omega = 0.7;
        // Spreadsheet-style: sigma^2 = 1, W = (1 - eta) B = 1.
        let g0 = 4.0 * 1.0 / (2.0 * 0.5 + (0.5 * 0.8 + 0.25 * 0.6) + 1.0);
        let g1 = 2.0 * 0.5 / ((0.5 * 0.8 + 0.25 * 0.6) + 1.0);
        let g2 = 3.0 * 0.8 / (1.0 * 0.6 + (0.5 * 1.0 + 0.25 * 0.5) + 1.0);
        let g3 = 1.0 * 0.6 / ((0.5 * 1.0 + 0.25 * 0.5) + 1.0);
        let f = |g: f64, n: usize| (1.0 + g).log2() - omega * hap[n] * p[n];
        let f0 = f(g0, 0) + f(g1, 1);
        let f1 = f(g2, 2) + f(g3, 3);
        let report = utility(&s, &a, &al, omega);
        assert!((report.cell_utility[0] - f0).abs() < 1e-12);
        assert!((report.cell_utility[1] - f1).abs() < 1e-12);
        assert!((report.total_utility - (f0 + f1)).abs() < 1e-12);
        assert!((total_utility(&s, &a, &al, omega) - (f0 + f1)).abs() < 1e-12);
    }

    #[test]
    fn zero_price_and_zero_power() {
        let s = generate_scenario(&SystemConfig {
            num_vues: 10,
            num_rsus: 3,
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        let hap = [2usize];
        let a = Association::nearest_rsu(&s, &hap);
        let al = ResourceAllocation::initial(&s);
        let r = utility(&s, &a, &al, 0.0);
        let sum_rate: f64 = r.cell_sum_rate.iter().sum();
        assert!((r.total_utility - sum_rate).abs() <= 1e-9 * sum_rate);
        let zero = ResourceAllocation::uniform(&s, 0.5, 0.0);
        assert_eq!(utility(&s, &a, &zero, 1e20).total_utility, 0.0);
    }

    #[test]
    fn order_check_detects_reversed_orders() {
        let s = scenario(vec![vec![4.0], vec![2.0], vec![1.0]], vec![1.0; 3], vec![1.0], 1.0);
        let assignment = vec![AccessPoint::Rsu(0); 3];
        let sorted = Association::new(&s, assignment.clone()).unwrap();
        assert!(verify_theorem_1(&s, &sorted));
        let reversed = Association::with_orders(assignment, vec![vec![2, 1, 0], vec![]]).unwrap();
        assert!(!verify_theorem_1(&s, &reversed));
    }

    #[test]
    fn rebind_and_swap_keep_orders_sorted() {
        let s = generate_scenario(&SystemConfig {
            num_vues: 15,
            num_rsus: 3,
            seed: 8,
            ..Default::default()
        })
        .unwrap();
        let mut a = Association::nearest_rsu(&s, &[0, 1]);
        a.rebind(&s, 5, AccessPoint::Rsu(2));
        a.swap(&s, 6, 7);
        a.swap(&s, 3, 12);
        assert!(verify_theorem_1(&s, &a));
        let fresh = Association::new(&s, a.assignment().to_vec()).unwrap();
        assert_eq!(fresh, a);
        for n in 0..15 {
            assert_eq!(a.matrix()[n].iter().map(|&v| v as usize).sum::<usize>(), 1);
        }
    }

    #[test]
    fn csv_has_row_per_vue_and_footer() {
        let s = scenario(vec![vec![2.0], vec![1.0]], vec![1.0; 2], vec![1.0], 1.0);
        let a = Association::new(&s, vec![AccessPoint::Rsu(0), AccessPoint::Hap]).unwrap();
        let r = utility(&s, &a, &alloc(&s, 0.5, &[1.0, 1.0]), 0.0);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "vue_id,ap_id,sinr,rate_bps,phi_i1_w,phi_i2_w,phi_i3_w,utility");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1,hap,"));
        assert!(lines[3].starts_with("total,"));
    }
}
