//! User association: HAP user selection, caching-aware sense-and-act and
//! swap matching.
//!
//! Every rebinding and every swap is kept only if the total utility F
//! strictly increases, so a run visits no association twice and stops.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::bandwidth::optimal_eta;
use crate::link::{backhaul_sinr, fronthaul_links, total_utility, AccessPoint, Association, ResourceAllocation};
use crate::rng::{stream_rng, Stream};
use crate::scenario::{Scenario, SystemConfig};

/// Relative margin an update must clear to count as a strict improvement.
const IMPROVEMENT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationConfig {
    /// |L_l|.
    pub hap_user_count: usize,
    /// Price used in every utility comparison.
    pub omega: f64,
    /// Fronthaul weight of the caching evaluation.
    pub alpha: f64,
    /// Seed of the swap sampler.
    pub seed: u64,
    /// A swap phase ends after `swap_patience * N` straight rejections.
    pub swap_patience: usize,
    /// Hard cap on logged events; hitting it marks the run truncated.
    pub max_events: usize,
    /// Score each candidate with eta re-solved for it instead of the
    /// allocation's eta. Candidates whose backhaul cannot be met score -inf.
    pub resolve_eta: bool,
}

impl AssociationConfig {
    pub fn from_system(config: &SystemConfig) -> Self {
        Self {
            hap_user_count: config.hap_user_count(),
            omega: config.pricing_omega_init,
            alpha: config.weight_alpha,
            seed: config.seed,
            swap_patience: 10,
            max_events: 100_000,
            resolve_eta: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    HapSelect,
    Rebind,
    SwapAccept,
    SwapReject,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::HapSelect => "hap_select",
            EventKind::Rebind => "rebind",
            EventKind::SwapAccept => "swap_accept",
            EventKind::SwapReject => "swap_reject",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationEvent {
    /// 1-based position in the log.
    pub iteration: usize,
    pub kind: EventKind,
    pub vues: Vec<usize>,
    /// F after the event minus F before it; zero for rejected swaps.
    pub delta_utility: f64,
    /// F after the event.
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationOutcome {
    pub association: Association,
    pub utility: f64,
    pub hap_users: Vec<usize>,
    pub events: Vec<AssociationEvent>,
    /// Sense-and-act sweeps plus swap phases run.
    pub rounds: usize,
    pub truncated: bool,
}

impl AssociationOutcome {
    pub fn accepted(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Rebind | EventKind::SwapAccept))
            .count()
    }
}

pub fn write_events_csv<W: Write>(events: &[AssociationEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "event_type", "vue_ids", "delta_utility"])?;
    for e in events {
        let ids: Vec<String> = e.vues.iter().map(usize::to_string).collect();
        w.write_record([
            e.iteration.to_string(),
            e.kind.as_str().to_string(),
            ids.join(";"),
            crate::link::fmt_f64(e.delta_utility),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// kappa_n = |h_{n,l}|^2 / |h_{n,m}|^2 with m the nearest RSU.
pub fn kappa(scenario: &Scenario, n: usize) -> f64 {
    scenario.gain_hap(n) / scenario.gain(n, scenario.nearest_rsu(n))
}

/// The `count` VUEs with the largest kappa, ties to the lower id.
pub fn select_hap_users(scenario: &Scenario, count: usize) -> Result<Vec<usize>> {
    if count >= scenario.num_vues() {
        return Err(Error::InvalidConfig(format!(
            "cannot serve {count} of {} VUEs from the HAP",
            scenario.num_vues()
        )));
    }
    let kappas: Vec<f64> = (0..scenario.num_vues()).map(|n| kappa(scenario, n)).collect();
    let mut ids: Vec<usize> = (0..scenario.num_vues()).collect();
    ids.sort_by(|&a, &b| kappas[b].total_cmp(&kappas[a]).then(a.cmp(&b)));
    ids.truncate(count);
    Ok(ids)
}

/// RSUs sorted by |h_{n,m}|^2, strongest first; ties to the lower index.
pub fn preference_list(scenario: &Scenario, n: usize) -> Vec<usize> {
    let mut list: Vec<usize> = (0..scenario.num_rsus()).collect();
    list.sort_by(|&a, &b| scenario.gain(n, b).total_cmp(&scenario.gain(n, a)).then(a.cmp(&b)));
    list
}

/// RSU the candidate set of `n` is measured against: its caching RSU if its
/// content is cached, else its current RSU.
pub fn reference_rsu(scenario: &Scenario, assoc: &Association, n: usize) -> Result<usize> {
    match scenario.cache.cached_at[n] {
        Some(m) => Ok(m),
        None => assoc.ap(n).rsu().ok_or(Error::NotTerrestrial(n)),
    }
}

/// RSUs strictly closer to `n` than its reference RSU.
pub fn candidate_set(scenario: &Scenario, assoc: &Association, n: usize) -> Result<Vec<usize>> {
    let m = reference_rsu(scenario, assoc, n)?;
    let d = scenario.distance(n, m);
    Ok((0..scenario.num_rsus())
        .filter(|&v| scenario.distance(n, v) < d)
        .collect())
}

/// Exponent of the backhaul factor (1 + Gamma_{v,l}) in the caching
/// evaluation.
pub fn backhaul_exponent(alpha: f64, eta: f64, num_rsus: usize) -> f64 {
    (1.0 - alpha) * eta / num_rsus as f64
}

/// omega from its ingredients. `cached` is x_{n,m}.
pub fn omega_from_sinrs(
    cached: bool,
    sinr_ref: f64,
    sinr_candidate: f64,
    sinr_backhaul: f64,
    alpha: f64,
    eta: f64,
    num_rsus: usize,
) -> f64 {
    if !cached {
        return 0.0;
    }
    let front = alpha * (1.0 - eta);
    let xi = (1.0 + sinr_candidate).powf(front)
        / (1.0 + sinr_backhaul).powf(backhaul_exponent(alpha, eta, num_rsus));
    (1.0 + sinr_ref).powf(front) / xi
}

/// SINR VUE `n` would see on RSU `m`, everything else unchanged.
fn sinr_if_bound(
    scenario: &Scenario,
    assoc: &Association,
    alloc: &ResourceAllocation,
    n: usize,
    m: usize,
) -> f64 {
    let mut trial = assoc.clone();
    trial.rebind(scenario, n, AccessPoint::Rsu(m));
    fronthaul_links(scenario, &trial, alloc, 0.0)[n].sinr
}

/// omega_{n,v} for a candidate RSU `v` of terrestrial VUE `n`.
pub fn caching_evaluation(
    scenario: &Scenario,
    assoc: &Association,
    alloc: &ResourceAllocation,
    alpha: f64,
    n: usize,
    v: usize,
) -> Result<f64> {
    if assoc.ap(n).is_hap() {
        return Err(Error::NotTerrestrial(n));
    }
    let m = reference_rsu(scenario, assoc, n)?;
    if !candidate_set(scenario, assoc, n)?.contains(&v) {
        return Err(Error::NotCandidate {
            vue: n,
            reference: m,
            candidate: v,
        });
    }
    let cached = scenario.cache.x(n, m);
    if !cached {
        return Ok(0.0);
    }
    Ok(omega_from_sinrs(
        cached,
        sinr_if_bound(scenario, assoc, alloc, n, m),
        sinr_if_bound(scenario, assoc, alloc, n, v),
        backhaul_sinr(scenario, alloc, v),
        alpha,
        alloc.eta,
        scenario.num_rsus(),
    ))
}

/// What sense-and-act proposes for one VUE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// Case 1: stay with (or move to) the caching RSU.
    Caching(usize),
    /// Case 2: the candidate with the lowest omega below one.
    Candidate(usize),
    /// Case 3: uncached, use the utility preference rule.
    Preference,
}

/// Chooses the case from the candidate evaluations of a cached VUE.
/// `caching_rsu` is `None` for an uncached VUE.
pub fn case_from_omegas(caching_rsu: Option<usize>, omegas: &[(usize, f64)]) -> Action {
    let Some(m) = caching_rsu else {
        return Action::Preference;
    };
    omegas
        .iter()
        .filter(|(_, w)| *w > 0.0 && *w < 1.0)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map_or(Action::Caching(m), |&(v, _)| Action::Candidate(v))
}

/// The value association moves are compared on: F at the allocation's
/// powers, with eta re-solved for `assoc` when `cfg.resolve_eta` is set.
/// An association whose backhaul cannot be met scores -inf.
pub fn association_score(scenario: &Scenario, assoc: &Association, alloc: &ResourceAllocation, cfg: &AssociationConfig) -> f64 {
    if !cfg.resolve_eta {
        return total_utility(scenario, assoc, alloc, cfg.omega);
    }
    match optimal_eta(scenario, assoc, alloc) {
        Ok(sol) => {
            let alloc = ResourceAllocation {
                eta: sol.eta_star,
                ..alloc.clone()
            };
            total_utility(scenario, assoc, &alloc, cfg.omega)
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

fn improves(new: f64, old: f64) -> bool {
    if old == f64::NEG_INFINITY {
        return new > old;
    }
    new > old + IMPROVEMENT_RTOL * old.abs()
}

struct Search<'a> {
    scenario: &'a Scenario,
    alloc: &'a ResourceAllocation,
    cfg: &'a AssociationConfig,
    assoc: Association,
    utility: f64,
    events: Vec<AssociationEvent>,
    truncated: bool,
}

impl<'a> Search<'a> {
    fn new(
        scenario: &'a Scenario,
        alloc: &'a ResourceAllocation,
        cfg: &'a AssociationConfig,
        assoc: Association,
        events: Vec<AssociationEvent>,
    ) -> Self {
        let mut search = Self {
            scenario,
            alloc,
            cfg,
            assoc,
            utility: 0.0,
            events,
            truncated: false,
        };
        search.utility = search.eval(&search.assoc);
        search
    }

    fn eval(&self, assoc: &Association) -> f64 {
        association_score(self.scenario, assoc, self.alloc, self.cfg)
    }

    fn better(&self, value: f64) -> bool {
        improves(value, self.utility)
    }

    fn adopt(&mut self, assoc: Association, value: f64) -> f64 {
        let delta = value - self.utility;
        self.assoc = assoc;
        self.utility = value;
        delta
    }

    fn log(&mut self, kind: EventKind, vues: Vec<usize>, delta_utility: f64) {
        self.events.push(AssociationEvent {
            iteration: self.events.len() + 1,
            kind,
            vues,
            delta_utility,
            utility: self.utility,
        });
        if self.events.len() >= self.cfg.max_events {
            self.truncated = true;
        }
    }

    /// Rebinds `n` to `m` if that strictly raises F.
    fn try_rebind(&mut self, n: usize, m: usize) -> bool {
        if self.assoc.ap(n) == AccessPoint::Rsu(m) {
            return false;
        }
        let mut trial = self.assoc.clone();
        trial.rebind(self.scenario, n, AccessPoint::Rsu(m));
        let value = self.eval(&trial);
        if !self.better(value) {
            return false;
        }
        let delta = self.adopt(trial, value);
        self.log(EventKind::Rebind, vec![n], delta);
        true
    }

    /// Case 3: best admissible RSU by utility, ties to the earlier preference.
    fn preference_rule(&mut self, n: usize) -> bool {
        let mut best: Option<(Association, f64)> = None;
        for m in preference_list(self.scenario, n) {
            if self.assoc.ap(n) == AccessPoint::Rsu(m) {
                continue;
            }
            let mut trial = self.assoc.clone();
            trial.rebind(self.scenario, n, AccessPoint::Rsu(m));
            let value = self.eval(&trial);
            if self.better(value) && best.as_ref().is_none_or(|(_, b)| value > *b) {
                best = Some((trial, value));
            }
        }
        let Some((trial, value)) = best else {
            return false;
        };
        let delta = self.adopt(trial, value);
        self.log(EventKind::Rebind, vec![n], delta);
        true
    }

    fn act(&mut self, n: usize) -> bool {
        let Some(caching) = self.scenario.cache.cached_at[n] else {
            return self.preference_rule(n);
        };
        let omegas: Vec<(usize, f64)> = candidate_set(self.scenario, &self.assoc, n)
            .expect("terrestrial VUE")
            .into_iter()
            .map(|v| {
                let w = caching_evaluation(self.scenario, &self.assoc, self.alloc, self.cfg.alpha, n, v)
                    .expect("v is a candidate");
                (v, w)
            })
            .collect();
        let target = match case_from_omegas(Some(caching), &omegas) {
            Action::Caching(m) | Action::Candidate(m) => m,
            Action::Preference => unreachable!("cached VUE"),
        };
        if self.assoc.ap(n) == AccessPoint::Rsu(target) {
            return false;
        }
        self.try_rebind(n, target) || self.preference_rule(n)
    }

    /// One ascending-id sweep; returns the number of rebinds.
    fn sense_and_act(&mut self) -> usize {
        let mut changed = 0;
        for n in 0..self.scenario.num_vues() {
            if self.truncated {
                break;
            }
            if !self.assoc.ap(n).is_hap() && self.act(n) {
                changed += 1;
            }
        }
        changed
    }

    fn swap_pairs(&self) -> Vec<(usize, usize)> {
        let terrestrial: Vec<usize> = self.assoc.terrestrial().collect();
        let mut pairs = Vec::new();
        for &a in &terrestrial {
            for &b in &terrestrial {
                if self.assoc.ap(a) != self.assoc.ap(b) {
                    pairs.push((a, b));
                }
            }
        }
        pairs
    }

    /// Samples swaps until `swap_patience * N` straight rejections; returns
    /// the number accepted.
    fn swap_phase(&mut self, rng: &mut ChaCha8Rng) -> usize {
        let patience = self.cfg.swap_patience * self.scenario.num_vues();
        let mut pairs = self.swap_pairs();
        let mut accepted = 0;
        let mut streak = 0;
        while !pairs.is_empty() && streak < patience && !self.truncated {
            let (a, b) = pairs[rng.random_range(0..pairs.len())];
            let mut trial = self.assoc.clone();
            trial.swap(self.scenario, a, b);
            let value = self.eval(&trial);
            if self.better(value) {
                let delta = self.adopt(trial, value);
                self.log(EventKind::SwapAccept, vec![a, b], delta);
                pairs = self.swap_pairs();
                accepted += 1;
                streak = 0;
            } else {
                self.log(EventKind::SwapReject, vec![a, b], 0.0);
                streak += 1;
            }
        }
        accepted
    }
}

/// Sense-and-act to a fixed point, then swap matching, repeated until a
/// swap phase accepts nothing or the following sweep changes nothing.
///
/// `start` fixes the HAP set and the starting association; `None` starts
/// from HAP selection plus nearest-RSU binding for everybody else.
pub fn refine_association(
    scenario: &Scenario,
    alloc: &ResourceAllocation,
    cfg: &AssociationConfig,
    start: Option<Association>,
    rng: &mut ChaCha8Rng,
) -> Result<AssociationOutcome> {
    let fresh = start.is_none();
    let (assoc, hap_users) = match start {
        Some(a) => {
            let hap = a.hap_users().to_vec();
            (a, hap)
        }
        None => {
            let hap = select_hap_users(scenario, cfg.hap_user_count)?;
            (Association::nearest_rsu(scenario, &hap), hap)
        }
    };
    let mut search = Search::new(scenario, alloc, cfg, assoc, Vec::new());
    if fresh {
        let before = search.eval(&Association::nearest_rsu(scenario, &[]));
        search.events.push(AssociationEvent {
            iteration: 1,
            kind: EventKind::HapSelect,
            vues: hap_users.clone(),
            delta_utility: search.utility - before,
            utility: search.utility,
        });
    }

    // Sense-and-act to a fixed point, then one swap phase to its own fixed
    // point. Further alternation is left to the caller.
    let mut rounds = 0;
    loop {
        rounds += 1;
        if search.sense_and_act() == 0 || search.truncated {
            break;
        }
    }
    if !search.truncated {
        rounds += 1;
        search.swap_phase(rng);
    }

    Ok(AssociationOutcome {
        utility: search.utility,
        association: search.assoc,
        hap_users,
        events: search.events,
        rounds,
        truncated: search.truncated,
    })
}

/// Full association run from scratch, with the swap sampler seeded from `cfg.seed`.
pub fn run_association(
    scenario: &Scenario,
    alloc: &ResourceAllocation,
    cfg: &AssociationConfig,
) -> Result<AssociationOutcome> {
    let mut rng = stream_rng(cfg.seed, Stream::Swap);
    refine_association(scenario, alloc, cfg, None, &mut rng)
}

/// Swap matching alone from `assoc`; returns the outcome of one phase.
pub fn swap_matching(
    scenario: &Scenario,
    assoc: &Association,
    alloc: &ResourceAllocation,
    cfg: &AssociationConfig,
    rng: &mut ChaCha8Rng,
) -> AssociationOutcome {
    let mut search = Search::new(scenario, alloc, cfg, assoc.clone(), Vec::new());
    search.swap_phase(rng);
    AssociationOutcome {
        utility: search.utility,
        association: search.assoc,
        hap_users: assoc.hap_users().to_vec(),
        events: search.events,
        rounds: 1,
        truncated: search.truncated,
    }
}

/// One sense-and-act decision for VUE `n`, applied in place if it raises F.
pub fn apply_action(
    scenario: &Scenario,
    assoc: &mut Association,
    alloc: &ResourceAllocation,
    cfg: &AssociationConfig,
    n: usize,
) -> Result<bool> {
    if assoc.ap(n).is_hap() {
        return Err(Error::NotTerrestrial(n));
    }
    let mut search = Search::new(scenario, alloc, cfg, assoc.clone(), Vec::new());
    let moved = search.act(n);
    *assoc = search.assoc;
    Ok(moved)
}
