//! Figure-style experiment presets and the sweep runner.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::association::{run_association, swap_matching, AssociationConfig};
use crate::error::{Error, Result};
use crate::link::{fmt_f64, Association, ResourceAllocation};
use crate::orchestrator::{random_association_baseline, solve_eta, three_stage_solve, SolverConfig};
use crate::power::sca_power_allocation;
use crate::rng::{stream_rng, Stream};
use crate::scenario::{generate_scenario, Scenario, SystemConfig};

use super::stats::{mean, spearman};

pub const PRESET_NAMES: [&str; 8] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"];

pub const RESULTS_HEADER: [&str; 5] = ["scheme", "param", "seed", "utility", "status"];
pub const TIMINGS_HEADER: [&str; 4] = ["scheme", "param", "seed", "runtime_s"];
pub const SUMMARY_HEADER: [&str; 5] = ["scheme", "param", "mean_utility", "runs", "failures"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    NumVues,
    NumRsus,
    /// N = value * M.
    VuesPerRsu,
    /// dBm.
    MaxPowerVue,
    /// dBm/Hz.
    NoisePsd,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::NumVues => "num_vues",
            SweepParam::NumRsus => "num_rsus",
            SweepParam::VuesPerRsu => "vues_per_rsu",
            SweepParam::MaxPowerVue => "max_power_vue",
            SweepParam::NoisePsd => "noise_psd",
        }
    }

    pub fn apply(self, config: &mut SystemConfig, value: f64) {
        match self {
            SweepParam::NumVues => config.num_vues = value as usize,
            SweepParam::NumRsus => config.num_rsus = value as usize,
            SweepParam::VuesPerRsu => config.num_vues = value as usize * config.num_rsus,
            SweepParam::MaxPowerVue => config.max_power_vue = value,
            SweepParam::NoisePsd => config.noise_psd = value,
        }
    }
}

/// Which solver variant a series runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Proposed,
    RandomPower,
    FixedAssociation,
    IdealBackhaul,
    RandomPowerIdealBackhaul,
    /// Random association, equal powers, no optimization.
    RandomAssociation,
    /// Swap matching alone from the nearest-RSU start (convergence presets).
    SwapOnly,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::RandomPower => "random_power",
            Scheme::FixedAssociation => "fixed_association",
            Scheme::IdealBackhaul => "ideal_backhaul",
            Scheme::RandomPowerIdealBackhaul => "random_power_ideal_backhaul",
            Scheme::RandomAssociation => "random_association",
            Scheme::SwapOnly => "swap_only",
        }
    }

    pub fn solver_config(self, config: &SystemConfig) -> SolverConfig {
        let mut cfg = SolverConfig::from_system(config);
        match self {
            Scheme::RandomPower => cfg.random_power = true,
            Scheme::FixedAssociation => cfg.fixed_association = true,
            Scheme::IdealBackhaul => cfg.ideal_backhaul = true,
            Scheme::RandomPowerIdealBackhaul => {
                cfg.random_power = true;
                cfg.ideal_backhaul = true;
            }
            Scheme::Proposed | Scheme::RandomAssociation | Scheme::SwapOnly => {}
        }
        cfg
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One curve: a scheme plus config overrides, labelled in the output.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub scheme: Scheme,
    pub overrides: Vec<(String, String)>,
}

impl Series {
    pub fn plain(scheme: Scheme) -> Self {
        Self {
            label: scheme.as_str().to_string(),
            scheme,
            overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    /// Utility after every association event; param is the event index.
    Association,
    /// SCA objective per step; param is t.
    Power,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PresetKind {
    Sweep { parameter: SweepParam, values: Vec<f64> },
    Convergence(Convergence),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: String,
    pub kind: PresetKind,
    pub base: SystemConfig,
    pub series: Vec<Series>,
    /// Seeds per point: base.seed, base.seed + 1, ...
    pub repetitions: usize,
}

impl ExperimentPreset {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
        }
        if self.series.is_empty() {
            return Err(Error::InvalidConfig(format!("preset {} has no series", self.name)));
        }
        if let PresetKind::Sweep { values, .. } = &self.kind {
            if values.is_empty() {
                return Err(Error::InvalidConfig(format!("preset {} sweeps no values", self.name)));
            }
        }
        for s in &self.series {
            let mut c = self.base.clone();
            for (k, v) in &s.overrides {
                c = c.with_override(k, v)?;
            }
        }
        self.base.validate()
    }

    pub fn param_name(&self) -> &'static str {
        match &self.kind {
            PresetKind::Sweep { parameter, .. } => parameter.name(),
            PresetKind::Convergence(Convergence::Association) => "event",
            PresetKind::Convergence(Convergence::Power) => "t",
        }
    }

    pub fn with_repetitions(mut self, reps: usize) -> Self {
        self.repetitions = reps;
        self
    }
}

fn sweep(name: &str, parameter: SweepParam, values: &[f64], base: SystemConfig, series: Vec<Series>) -> ExperimentPreset {
    ExperimentPreset {
        name: name.to_string(),
        kind: PresetKind::Sweep {
            parameter,
            values: values.to_vec(),
        },
        base,
        series,
        repetitions: 10,
    }
}

/// The figure presets at desk scale (N <= 50, M <= 10, 10 seeds per point).
pub fn preset(name: &str) -> Result<ExperimentPreset> {
    let base = SystemConfig {
        seed: 0,
        ..SystemConfig::default()
    };
    let with_m = |m: usize| SystemConfig {
        num_rsus: m,
        ..base.clone()
    };
    let vs_random = || vec![Series::plain(Scheme::Proposed), Series::plain(Scheme::RandomPower)];
    let p = match name {
        "fig2" => ExperimentPreset {
            name: name.into(),
            kind: PresetKind::Convergence(Convergence::Association),
            base,
            series: vec![Series::plain(Scheme::Proposed), Series::plain(Scheme::SwapOnly)],
            repetitions: 1,
        },
        "fig3" => ExperimentPreset {
            name: name.into(),
            kind: PresetKind::Convergence(Convergence::Power),
            base,
            series: vec![
                Series::plain(Scheme::Proposed),
                Series::plain(Scheme::FixedAssociation),
                Series::plain(Scheme::RandomAssociation),
            ],
            repetitions: 1,
        },
        "fig4" => sweep(
            name,
            SweepParam::NumVues,
            &[10.0, 20.0, 30.0, 40.0, 50.0],
            base,
            vec![
                Series::plain(Scheme::Proposed),
                Series::plain(Scheme::IdealBackhaul),
                Series::plain(Scheme::RandomPower),
                Series::plain(Scheme::RandomPowerIdealBackhaul),
            ],
        ),
        "fig5" => sweep(
            name,
            SweepParam::NumRsus,
            &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0],
            base,
            vec![Series::plain(Scheme::Proposed)],
        ),
        "fig6" => sweep(name, SweepParam::NumVues, &[10.0, 20.0, 30.0, 40.0, 50.0], base, vs_random()),
        "fig7" => sweep(name, SweepParam::VuesPerRsu, &[2.0, 4.0, 6.0, 8.0, 10.0], with_m(5), vs_random()),
        "fig8" => sweep(
            name,
            SweepParam::NumRsus,
            &[2.0, 4.0, 6.0, 8.0, 10.0],
            base,
            [10, 20, 25]
                .iter()
                .map(|dbm| Series {
                    label: format!("proposed_{dbm}dbm"),
                    scheme: Scheme::Proposed,
                    overrides: vec![("max_power_vue".into(), dbm.to_string())],
                })
                .collect(),
        ),
        "fig9" => sweep(
            name,
            SweepParam::NoisePsd,
            &[-184.0, -179.0, -174.0, -169.0, -164.0],
            with_m(5),
            vs_random(),
        ),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: String,
    pub param: f64,
    pub seed: u64,
    /// `None` when the run failed; `status` then names the failure.
    pub utility: Option<f64>,
    pub status: String,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: String,
    pub param: f64,
    pub mean_utility: Option<f64>,
    pub runs: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub preset: String,
    pub param_name: String,
    pub rows: Vec<ResultRow>,
}

fn failure_status(e: &Error) -> String {
    if e.is_infeasible() {
        "infeasible".into()
    } else if matches!(e.root(), Error::InvalidConfig(_)) {
        "invalid_config".into()
    } else {
        "error".into()
    }
}

fn series_config(base: &SystemConfig, series: &Series) -> Result<SystemConfig> {
    let mut c = base.clone();
    for (k, v) in &series.overrides {
        c = c.with_override(k, v)?;
    }
    Ok(c)
}

fn run_point(config: &SystemConfig, scheme: Scheme) -> Result<(f64, String)> {
    config.validate()?;
    let scenario = generate_scenario(config)?;
    let cfg = scheme.solver_config(config);
    if scheme == Scheme::RandomAssociation {
        return Ok((random_association_baseline(&scenario, &cfg)?, "baseline".into()));
    }
    let sol = three_stage_solve(&scenario, &cfg)?;
    Ok((sol.utility(), sol.trace.status.as_str().into()))
}

/// Starting allocation of the solver: equal powers, eta for `assoc`.
fn start_allocation(scenario: &Scenario, assoc: &Association, cfg: &SolverConfig) -> Result<ResourceAllocation> {
    let mut alloc = ResourceAllocation::initial(scenario);
    alloc.eta = solve_eta(scenario, assoc, &alloc, cfg)?;
    Ok(alloc)
}

fn convergence_rows(config: &SystemConfig, series: &Series, kind: Convergence) -> Result<Vec<(f64, f64)>> {
    let scenario = generate_scenario(config)?;
    let cfg = series.scheme.solver_config(config);
    let hap = crate::association::select_hap_users(&scenario, cfg.association.hap_user_count)?;
    let nearest = Association::nearest_rsu(&scenario, &hap);
    let alloc = start_allocation(&scenario, &nearest, &cfg)?;
    let assoc_cfg: &AssociationConfig = &cfg.association;
    match kind {
        Convergence::Association => {
            let out = match series.scheme {
                Scheme::SwapOnly => {
                    let mut rng = stream_rng(assoc_cfg.seed, Stream::Swap);
                    swap_matching(&scenario, &nearest, &alloc, assoc_cfg, &mut rng)
                }
                _ => run_association(&scenario, &alloc, assoc_cfg)?,
            };
            Ok(out
                .events
                .iter()
                .enumerate()
                .map(|(i, e)| ((i + 1) as f64, e.utility))
                .collect())
        }
        Convergence::Power => {
            let assoc = match series.scheme {
                Scheme::FixedAssociation => nearest,
                Scheme::RandomAssociation => crate::orchestrator::random_association(&scenario, &cfg)?,
                _ => run_association(&scenario, &alloc, assoc_cfg)?.association,
            };
            let alloc = start_allocation(&scenario, &assoc, &cfg)?;
            let rep = sca_power_allocation(&scenario, &assoc, alloc.eta, &cfg.sca, &alloc.power)?;
            Ok(rep
                .objective_trace
                .iter()
                .enumerate()
                .map(|(t, &f)| (t as f64, f))
                .collect())
        }
    }
}

/// Runs every (value, seed, series) job of the preset. Jobs run on the rayon
/// pool; rows come back in (param, seed, series) order whatever the finishing
/// order. A failing run becomes a row with its status, never an error.
pub fn run_experiment(preset: &ExperimentPreset) -> Result<ExperimentResult> {
    preset.validate()?;
    let seeds: Vec<u64> = (0..preset.repetitions as u64).map(|r| preset.base.seed + r).collect();
    let rows = match &preset.kind {
        PresetKind::Sweep { parameter, values } => {
            let mut jobs = Vec::new();
            for &v in values {
                for &seed in &seeds {
                    for s in &preset.series {
                        jobs.push((v, seed, s));
                    }
                }
            }
            jobs.par_iter()
                .map(|&(v, seed, series)| {
                    let clock = Instant::now();
                    let outcome = series_config(&preset.base, series).and_then(|mut c| {
                        c.seed = seed;
                        parameter.apply(&mut c, v);
                        run_point(&c, series.scheme)
                    });
                    let (utility, status) = match outcome {
                        Ok((f, status)) => (Some(f), status),
                        Err(e) => (None, failure_status(&e)),
                    };
                    ResultRow {
                        scheme: series.label.clone(),
                        param: v,
                        seed,
                        utility,
                        status,
                        runtime_s: clock.elapsed().as_secs_f64(),
                    }
                })
                .collect()
        }
        PresetKind::Convergence(kind) => {
            let mut jobs = Vec::new();
            for &seed in &seeds {
                for s in &preset.series {
                    jobs.push((seed, s));
                }
            }
            let per_job: Vec<Vec<ResultRow>> = jobs
                .par_iter()
                .map(|&(seed, series)| {
                    let clock = Instant::now();
                    let outcome = series_config(&preset.base, series).and_then(|mut c| {
                        c.seed = seed;
                        convergence_rows(&c, series, *kind)
                    });
                    let runtime_s = clock.elapsed().as_secs_f64();
                    match outcome {
                        Ok(points) => points
                            .into_iter()
                            .map(|(param, f)| ResultRow {
                                scheme: series.label.clone(),
                                param,
                                seed,
                                utility: Some(f),
                                status: "ok".into(),
                                runtime_s,
                            })
                            .collect(),
                        Err(e) => vec![ResultRow {
                            scheme: series.label.clone(),
                            param: 0.0,
                            seed,
                            utility: None,
                            status: failure_status(&e),
                            runtime_s,
                        }],
                    }
                })
                .collect();
            per_job.into_iter().flatten().collect()
        }
    };
    Ok(ExperimentResult {
        preset: preset.name.clone(),
        param_name: preset.param_name().into(),
        rows,
    })
}

impl ExperimentResult {
    /// Deterministic columns only; runtimes go to [`Self::write_timings_csv`].
    pub fn write_results_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RESULTS_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.scheme.clone(),
                fmt_f64(r.param),
                r.seed.to_string(),
                r.utility.map(fmt_f64).unwrap_or_default(),
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_timings_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TIMINGS_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.scheme.clone(),
                fmt_f64(r.param),
                r.seed.to_string(),
                format!("{:.6}", r.runtime_s),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per (scheme, param) means over successful runs, in first-seen order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out: Vec<(SummaryRow, Vec<f64>)> = Vec::new();
        for r in &self.rows {
            let i = match out.iter().position(|(s, _)| s.scheme == r.scheme && s.param == r.param) {
                Some(i) => i,
                None => {
                    out.push((
                        SummaryRow {
                            scheme: r.scheme.clone(),
                            param: r.param,
                            mean_utility: None,
                            runs: 0,
                            failures: 0,
                        },
                        Vec::new(),
                    ));
                    out.len() - 1
                }
            };
            let (row, values) = &mut out[i];
            row.runs += 1;
            match r.utility {
                Some(f) => values.push(f),
                None => row.failures += 1,
            }
        }
        out.into_iter()
            .map(|(mut row, values)| {
                row.mean_utility = mean(&values);
                row
            })
            .collect()
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUMMARY_HEADER)?;
        for r in self.summary() {
            w.write_record([
                r.scheme,
                fmt_f64(r.param),
                r.mean_utility.map(fmt_f64).unwrap_or_default(),
                r.runs.to_string(),
                r.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// (param, mean utility) points of one series, failed points dropped.
    pub fn curve(&self, scheme: &str) -> Vec<(f64, f64)> {
        self.summary()
            .into_iter()
            .filter(|r| r.scheme == scheme)
            .filter_map(|r| r.mean_utility.map(|m| (r.param, m)))
            .collect()
    }

    /// Spearman correlation between the swept value and the mean utility.
    pub fn trend(&self, scheme: &str) -> Option<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = self.curve(scheme).into_iter().unzip();
        spearman(&x, &y)
    }

    pub fn schemes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.scheme) {
                out.push(r.scheme.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: PresetKind, series: Vec<Series>) -> ExperimentPreset {
        ExperimentPreset {
            name: "tiny".into(),
            kind,
            base: SystemConfig {
                num_vues: 6,
                num_rsus: 2,
                seed: 3,
                ..Default::default()
            },
            series,
            repetitions: 1,
        }
    }

    #[test]
    fn every_preset_is_valid() {
        for name in PRESET_NAMES {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(preset("fig1").is_err());
    }

    #[test]
    fn one_value_one_rep_gives_one_row_per_scheme() {
        let schemes = [
            Scheme::Proposed,
            Scheme::RandomPower,
            Scheme::FixedAssociation,
            Scheme::IdealBackhaul,
            Scheme::RandomPowerIdealBackhaul,
        ];
        let p = tiny(
            PresetKind::Sweep {
                parameter: SweepParam::NumVues,
                values: vec![6.0],
            },
            schemes.iter().map(|&s| Series::plain(s)).collect(),
        );
        let r = run_experiment(&p).unwrap();
        assert_eq!(r.rows.len(), schemes.len());
        assert!(r.rows.iter().all(|row| row.utility.is_some()));
    }

    #[test]
    fn failures_become_rows() {
        let p = tiny(
            PresetKind::Sweep {
                parameter: SweepParam::NumVues,
                values: vec![0.0, 6.0],
            },
            vec![Series::plain(Scheme::Proposed)],
        );
        let r = run_experiment(&p).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].status, "invalid_config");
        assert_eq!(r.rows[0].utility, None);
        assert!(r.rows[1].utility.is_some());
    }

    #[test]
    fn csv_is_deterministic_and_schema_stable() {
        let p = tiny(
            PresetKind::Sweep {
                parameter: SweepParam::NoisePsd,
                values: vec![-174.0, -164.0],
            },
            vec![Series::plain(Scheme::Proposed), Series::plain(Scheme::RandomPower)],
        )
        .with_repetitions(2);
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_experiment(&p).unwrap().write_results_csv(&mut a).unwrap();
        run_experiment(&p).unwrap().write_results_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), RESULTS_HEADER.join(","));
        assert_eq!(lines.count(), 8);
        for line in text.lines().skip(1) {
            assert_eq!(line.split(',').count(), RESULTS_HEADER.len());
        }
    }

    #[test]
    fn convergence_presets_emit_traces() {
        for kind in [Convergence::Association, Convergence::Power] {
            let p = tiny(
                PresetKind::Convergence(kind),
                vec![Series::plain(Scheme::Proposed), Series::plain(Scheme::FixedAssociation)],
            );
            let r = run_experiment(&p).unwrap();
            assert!(r.rows.len() >= 2);
            assert!(r.rows.iter().all(|row| row.status == "ok"));
        }
    }

    #[test]
    fn summary_averages_successes() {
        let row = |scheme: &str, param: f64, u: Option<f64>| ResultRow {
            scheme: scheme.into(),
            param,
            seed: 0,
            utility: u,
            status: "x".into(),
            runtime_s: 0.0,
        };
        let r = ExperimentResult {
            preset: "t".into(),
            param_name: "p".into(),
            rows: vec![
                row("a", 1.0, Some(1.0)),
                row("a", 1.0, Some(3.0)),
                row("a", 2.0, None),
                row("a", 3.0, Some(5.0)),
            ],
        };
        let s = r.summary();
        assert_eq!(s[0].mean_utility, Some(2.0));
        assert_eq!(s[1].failures, 1);
        assert_eq!(r.curve("a"), vec![(1.0, 2.0), (3.0, 5.0)]);
        assert_eq!(r.trend("a"), Some(1.0));
    }
}
