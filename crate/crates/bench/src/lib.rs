//! Fixed workloads shared by the criterion benches.

use hetnet_core::{generate_scenario, Scenario, SystemConfig};

/// A seeded snapshot with `num_vues` VUEs and `num_rsus` RSUs, other
/// settings at their defaults.
pub fn workload(num_vues: usize, num_rsus: usize, seed: u64) -> Scenario {
    let config = SystemConfig {
        num_vues,
        num_rsus,
        seed,
        ..SystemConfig::default()
    };
    generate_scenario(&config).expect("default-based config is valid")
}
