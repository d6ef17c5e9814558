//! Seeded network snapshots: RSUs along a road, VUEs dropped in their disks,
//! one HAP overhead, squared channel gains and the caching state.

mod channel;
mod config;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

pub use channel::{free_space_gain, log_distance_gain, rayleigh_power, rician_power};
pub use config::SystemConfig;

pub fn dbm_to_watt(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

/// Thermal noise power over `bandwidth` Hz for a PSD given in dBm/Hz.
pub fn noise_power(noise_psd_dbm: f64, bandwidth: f64) -> Result<f64> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise bandwidth must be positive, got {bandwidth}"
        )));
    }
    Ok(dbm_to_watt(noise_psd_dbm) * bandwidth)
}

/// Squared channel magnitudes |h|^2. Complex coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// N rows of M gains, VUE to RSU.
    pub gain_vue_rsu: Vec<Vec<f64>>,
    /// VUE to HAP, length N.
    pub gain_vue_hap: Vec<f64>,
    /// RSU to HAP, length M.
    pub gain_rsu_hap: Vec<f64>,
}

/// Caching index x_{n,m}. Each VUE's content sits in at most one RSU, so the
/// matrix is stored as one optional RSU per VUE.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheMatrix {
    pub num_rsus: usize,
    pub cached_at: Vec<Option<usize>>,
}

impl CacheMatrix {
    pub fn empty(num_vues: usize, num_rsus: usize) -> Self {
        Self {
            num_rsus,
            cached_at: vec![None; num_vues],
        }
    }

    pub fn x(&self, n: usize, m: usize) -> bool {
        self.cached_at[n] == Some(m)
    }

    pub fn column_count(&self, m: usize) -> usize {
        self.cached_at.iter().filter(|c| **c == Some(m)).count()
    }

    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        self.cached_at
            .iter()
            .map(|c| (0..self.num_rsus).map(|m| u8::from(*c == Some(m))).collect())
            .collect()
    }

    pub fn check(&self, capacity: usize) -> bool {
        self.cached_at.iter().all(|c| c.is_none_or(|m| m < self.num_rsus))
            && (0..self.num_rsus).all(|m| self.column_count(m) <= capacity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub generator: String,
    pub config: SystemConfig,
    pub rsu_positions: Vec<[f64; 2]>,
    pub vue_positions: Vec<[f64; 2]>,
    /// Ground projection of the HAP; its altitude is `config.hap_altitude`.
    pub hap_position: [f64; 2],
    pub channel: ChannelSet,
    pub cache: CacheMatrix,
}

impl Scenario {
    pub fn num_vues(&self) -> usize {
        self.vue_positions.len()
    }

    pub fn num_rsus(&self) -> usize {
        self.rsu_positions.len()
    }

    pub fn gain(&self, n: usize, m: usize) -> f64 {
        self.channel.gain_vue_rsu[n][m]
    }

    pub fn gain_hap(&self, n: usize) -> f64 {
        self.channel.gain_vue_hap[n]
    }

    pub fn distance(&self, n: usize, m: usize) -> f64 {
        let [x, y] = self.vue_positions[n];
        let [rx, ry] = self.rsu_positions[m];
        (x - rx).hypot(y - ry)
    }

    /// RSU closest to VUE `n`; ties go to the lower index.
    pub fn nearest_rsu(&self, n: usize) -> usize {
        (0..self.num_rsus())
            .min_by(|&a, &b| self.distance(n, a).total_cmp(&self.distance(n, b)))
            .expect("at least one RSU")
    }

    pub fn noise_psd_w(&self) -> f64 {
        dbm_to_watt(self.config.noise_psd)
    }

    pub fn p_max(&self) -> f64 {
        self.config.max_power_vue_w()
    }

    pub fn hap_vue_power(&self) -> f64 {
        dbm_to_watt(self.config.hap_vue_power_dbm())
    }

    pub fn rsu_power(&self) -> f64 {
        dbm_to_watt(self.config.max_power_rsu)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.config.validate()?;
        Ok(s)
    }
}

/// Builds a snapshot from `config`. Deterministic in `(config, config.seed)`.
///
/// RSUs sit on the x axis, `rsu_spacing` apart; the HAP hovers above the
/// middle of the road. Each VUE picks an RSU disk uniformly and a uniform
/// point inside it. Positions, fading and caching draw from separate streams.
pub fn generate_scenario(config: &SystemConfig) -> Result<Scenario> {
    config.validate()?;
    if config.cache_capacity == 0 && config.cache_hit_prob >= 1.0 {
        return Err(Error::InfeasibleCaching);
    }
    let n_vues = config.num_vues;
    let n_rsus = config.num_rsus;

    let rsu_positions: Vec<[f64; 2]> = (0..n_rsus)
        .map(|m| [m as f64 * config.rsu_spacing, 0.0])
        .collect();
    let hap_position = [(n_rsus - 1) as f64 * config.rsu_spacing / 2.0, 0.0];

    let mut pos_rng = stream_rng(config.seed, Stream::Positions);
    let vue_positions: Vec<[f64; 2]> = (0..n_vues)
        .map(|_| {
            let home = pos_rng.random_range(0..n_rsus);
            let r = config.rsu_radius * pos_rng.random::<f64>().sqrt();
            let theta = std::f64::consts::TAU * pos_rng.random::<f64>();
            let [cx, cy] = rsu_positions[home];
            [cx + r * theta.cos(), cy + r * theta.sin()]
        })
        .collect();

    let mut fade_rng = stream_rng(config.seed, Stream::Fading);
    let terrestrial = |d: f64| {
        log_distance_gain(
            d.max(config.min_distance),
            config.path_loss_ref_db,
            config.path_loss_exponent,
            config.path_loss_ref_distance,
        )
    };
    let slant = |p: [f64; 2]| {
        let dx = p[0] - hap_position[0];
        let dy = p[1] - hap_position[1];
        (dx * dx + dy * dy + config.hap_altitude * config.hap_altitude).sqrt()
    };
    let k_linear = 10f64.powf(config.rician_k_db / 10.0);

    let gain_vue_rsu: Vec<Vec<f64>> = vue_positions
        .iter()
        .map(|&[x, y]| {
            rsu_positions
                .iter()
                .map(|&[rx, ry]| terrestrial((x - rx).hypot(y - ry)) * rayleigh_power(&mut fade_rng))
                .collect()
        })
        .collect();
    let gain_vue_hap: Vec<f64> = vue_positions
        .iter()
        .map(|&p| {
            free_space_gain(slant(p), config.carrier_frequency) * rician_power(&mut fade_rng, k_linear)
        })
        .collect();
    let gain_rsu_hap: Vec<f64> = rsu_positions
        .iter()
        .map(|&p| {
            free_space_gain(slant(p), config.carrier_frequency) * rician_power(&mut fade_rng, k_linear)
        })
        .collect();

    let mut cache_rng = stream_rng(config.seed, Stream::Cache);
    let mut cache = CacheMatrix::empty(n_vues, n_rsus);
    let mut load = vec![0usize; n_rsus];
    for slot in cache.cached_at.iter_mut() {
        let hit = cache_rng.random::<f64>() < config.cache_hit_prob;
        let m = cache_rng.random_range(0..n_rsus);
        if hit && load[m] < config.cache_capacity {
            load[m] += 1;
            *slot = Some(m);
        }
    }

    Ok(Scenario {
        generator: crate::rng::GENERATOR.to_string(),
        config: config.clone(),
        rsu_positions,
        vue_positions,
        hap_position,
        channel: ChannelSet {
            gain_vue_rsu,
            gain_vue_hap,
            gain_rsu_hap,
        },
        cache,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SystemConfig {
        SystemConfig {
            num_vues: 12,
            num_rsus: 3,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn dbm_conversions() {
        assert_eq!(dbm_to_watt(30.0), 1.0);
        assert!((dbm_to_watt(0.0) - 1e-3).abs() < 1e-18);
        // 10^(-0.7)
        let expected = 0.199_526_231_496_887_96;
        assert!((dbm_to_watt(23.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn thermal_noise() {
        let unit = noise_power(-174.0, 1.0).unwrap();
        assert!((unit / 10f64.powf(-20.4) - 1.0).abs() < 1e-12);
        let wide = noise_power(-174.0, 20e6).unwrap();
        assert!((wide / (10f64.powf(-20.4) * 2e7) - 1.0).abs() < 1e-12);
        assert!(noise_power(-174.0, 0.0).is_err());
    }

    #[test]
    fn same_seed_same_snapshot() {
        let a = generate_scenario(&small(9)).unwrap();
        let b = generate_scenario(&small(9)).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = generate_scenario(&small(10)).unwrap();
        assert_ne!(a.vue_positions, c.vue_positions);
    }

    #[test]
    fn json_round_trip() {
        let a = generate_scenario(&small(3)).unwrap();
        let b = Scenario::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_hit_probability_caches_nothing() {
        let cfg = SystemConfig {
            cache_hit_prob: 0.0,
            ..small(1)
        };
        let s = generate_scenario(&cfg).unwrap();
        assert!(s.cache.cached_at.iter().all(Option::is_none));
    }

    #[test]
    fn full_hit_probability_without_capacity_is_rejected() {
        let cfg = SystemConfig {
            cache_hit_prob: 1.0,
            cache_capacity: 0,
            ..small(1)
        };
        assert!(matches!(generate_scenario(&cfg), Err(Error::InfeasibleCaching)));
    }

    #[test]
    fn capacity_clips_columns() {
        let cfg = SystemConfig {
            num_vues: 40,
            num_rsus: 2,
            cache_hit_prob: 1.0,
            cache_capacity: 3,
            ..small(5)
        };
        let s = generate_scenario(&cfg).unwrap();
        assert!(s.cache.check(3));
        assert_eq!(s.cache.column_count(0) + s.cache.column_count(1), 6);
    }

    #[test]
    fn reference_setup_is_valid() {
        let cfg = SystemConfig::default();
        assert_eq!(cfg.num_vues, 50);
        assert_eq!(cfg.num_rsus, 5);
        assert_eq!(cfg.total_bandwidth, 20e6);
        let s = generate_scenario(&cfg).unwrap();
        assert_eq!(s.channel.gain_vue_rsu.len(), 50);
        assert!(s.channel.gain_vue_rsu.iter().all(|r| r.len() == 5));
        assert_eq!(s.channel.gain_vue_hap.len(), 50);
        assert_eq!(s.channel.gain_rsu_hap.len(), 5);
    }
}
