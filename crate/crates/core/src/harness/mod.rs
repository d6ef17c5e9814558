//! Experiment presets, sweeps, brute-force oracles and output helpers.

pub mod experiment;
pub mod oracle;
pub mod plot;
pub mod stats;
pub mod validate;

pub use experiment::{
    preset, run_experiment, Convergence, ExperimentPreset, ExperimentResult, PresetKind, ResultRow, Scheme, Series,
    SummaryRow, SweepParam, PRESET_NAMES,
};
pub use oracle::{exhaustive_association_oracle, grid_power_oracle, AssociationOptimum, PowerOptimum};
pub use stats::spearman;
