use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dbm_to_watt;

/// System constants for one network snapshot.
///
/// Field names double as the keys of the TOML config file and of the CLI
/// `--override key=value` flag. Optional fields fall back to values derived
/// from the others (see the accessor of the same name).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of VUEs, N.
    pub num_vues: usize,
    /// Number of RSUs, M.
    pub num_rsus: usize,
    /// RSU coverage radius in meters.
    pub rsu_radius: f64,
    /// Distance between neighbouring RSUs along the road, meters.
    pub rsu_spacing: f64,
    /// HAP altitude in meters.
    pub hap_altitude: f64,
    /// Total system bandwidth B in Hz.
    pub total_bandwidth: f64,
    /// Noise power spectral density in dBm/Hz.
    pub noise_psd: f64,
    /// VUE power budget P_max in dBm.
    pub max_power_vue: f64,
    /// RSU backhaul transmit power in dBm.
    pub max_power_rsu: f64,
    /// Fixed transmit power of HAP-served VUEs in dBm; defaults to `max_power_vue`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hap_vue_power: Option<f64>,
    /// Fronthaul weight alpha of the caching evaluation, in (0, 1).
    pub weight_alpha: f64,
    /// Initial interference price, utility (bit/s) per watt.
    pub pricing_omega_init: f64,
    /// Price step delta; defaults to 0.05 of the initial price.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_step: Option<f64>,
    /// Upper clamp for the price; defaults to 10x the initial price.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    /// A cell counts as congested when its backhaul slack drops below
    /// minus this many bit/s.
    pub congestion_threshold: f64,
    /// Cross-tier interference at the HAP (watts) above which the network
    /// counts as highly interfered.
    pub interference_threshold: f64,
    /// Cache capacity x_max, items per RSU.
    pub cache_capacity: usize,
    /// Probability that a VUE's content is cached somewhere.
    pub cache_hit_prob: f64,
    /// Number of HAP-served VUEs |L_l|; defaults to ceil(0.1 N) (at most N - 1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hap_user_count: Option<usize>,
    /// Per-VUE rate floor R_n in bit/s. Zero disables the QoS constraint.
    pub qos_rate: f64,
    pub seed: u64,
    /// Log-distance exponent of the terrestrial path loss.
    pub path_loss_exponent: f64,
    /// Terrestrial path loss at the reference distance, dB.
    pub path_loss_ref_db: f64,
    /// Reference distance d0, meters.
    pub path_loss_ref_distance: f64,
    /// Distances below this are clamped before computing path loss.
    pub min_distance: f64,
    /// Carrier frequency of the HAP links (free-space loss), Hz.
    pub carrier_frequency: f64,
    /// Rician K-factor of the HAP links, dB.
    pub rician_k_db: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_vues: 50,
            num_rsus: 5,
            rsu_radius: 50.0,
            rsu_spacing: 100.0,
            hap_altitude: 1_000_000.0,
            total_bandwidth: 20e6,
            noise_psd: -174.0,
            max_power_vue: 23.0,
            max_power_rsu: 43.0,
            hap_vue_power: None,
            weight_alpha: 0.99,
            pricing_omega_init: 1e20,
            omega_step: None,
            omega_max: None,
            congestion_threshold: 0.0,
            interference_threshold: 1e-13,
            cache_capacity: 10,
            cache_hit_prob: 0.3,
            hap_user_count: None,
            qos_rate: 0.0,
            seed: 42,
            path_loss_exponent: 3.5,
            path_loss_ref_db: 38.0,
            path_loss_ref_distance: 1.0,
            min_distance: 1.0,
            carrier_frequency: 2e9,
            rician_k_db: 10.0,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_vues < 1 {
            return bad("num_vues must be at least 1".into());
        }
        if self.num_rsus < 1 {
            return bad("num_rsus must be at least 1".into());
        }
        for (name, v) in [
            ("rsu_radius", self.rsu_radius),
            ("hap_altitude", self.hap_altitude),
            ("total_bandwidth", self.total_bandwidth),
            ("path_loss_ref_distance", self.path_loss_ref_distance),
            ("min_distance", self.min_distance),
            ("carrier_frequency", self.carrier_frequency),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and positive, got {v}"));
            }
        }
        if !(self.rsu_spacing.is_finite() && self.rsu_spacing >= 0.0) {
            return bad(format!("rsu_spacing must be finite and >= 0, got {}", self.rsu_spacing));
        }
        if !(self.weight_alpha > 0.0 && self.weight_alpha < 1.0) {
            return bad(format!("weight_alpha must lie in (0, 1), got {}", self.weight_alpha));
        }
        if !(0.0..=1.0).contains(&self.cache_hit_prob) {
            return bad(format!("cache_hit_prob must lie in [0, 1], got {}", self.cache_hit_prob));
        }
        let mut dbm = vec![
            ("noise_psd", self.noise_psd),
            ("max_power_vue", self.max_power_vue),
            ("max_power_rsu", self.max_power_rsu),
        ];
        if let Some(p) = self.hap_vue_power {
            dbm.push(("hap_vue_power", p));
        }
        for (name, v) in dbm {
            if !v.is_finite() || dbm_to_watt(v) <= 0.0 || !dbm_to_watt(v).is_finite() {
                return bad(format!("{name} must be a finite dBm value with positive watt equivalent, got {v}"));
            }
        }
        for (name, v) in [
            ("pricing_omega_init", self.pricing_omega_init),
            ("congestion_threshold", self.congestion_threshold),
            ("interference_threshold", self.interference_threshold),
            ("qos_rate", self.qos_rate),
            ("omega_step", self.omega_step()),
            ("omega_max", self.omega_max()),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for (name, v) in [
            ("path_loss_exponent", self.path_loss_exponent),
            ("path_loss_ref_db", self.path_loss_ref_db),
            ("rician_k_db", self.rician_k_db),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        if self.hap_user_count() >= self.num_vues {
            return bad(format!(
                "hap_user_count ({}) must be smaller than num_vues ({})",
                self.hap_user_count(),
                self.num_vues
            ));
        }
        Ok(())
    }

    pub fn hap_user_count(&self) -> usize {
        self.hap_user_count.unwrap_or_else(|| {
            let tenth = (self.num_vues as f64 * 0.1).ceil() as usize;
            tenth.min(self.num_vues.saturating_sub(1))
        })
    }

    pub fn hap_vue_power_dbm(&self) -> f64 {
        self.hap_vue_power.unwrap_or(self.max_power_vue)
    }

    pub fn omega_step(&self) -> f64 {
        self.omega_step.unwrap_or(0.05 * self.pricing_omega_init)
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max.unwrap_or(10.0 * self.pricing_omega_init)
    }

    pub fn max_power_vue_w(&self) -> f64 {
        dbm_to_watt(self.max_power_vue)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SystemConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Names of every settable field.
    pub fn field_names() -> Vec<&'static str> {
        vec![
            "num_vues",
            "num_rsus",
            "rsu_radius",
            "rsu_spacing",
            "hap_altitude",
            "total_bandwidth",
            "noise_psd",
            "max_power_vue",
            "max_power_rsu",
            "hap_vue_power",
            "weight_alpha",
            "pricing_omega_init",
            "omega_step",
            "omega_max",
            "congestion_threshold",
            "interference_threshold",
            "cache_capacity",
            "cache_hit_prob",
            "hap_user_count",
            "qos_rate",
            "seed",
            "path_loss_exponent",
            "path_loss_ref_db",
            "path_loss_ref_distance",
            "min_distance",
            "carrier_frequency",
            "rician_k_db",
        ]
    }

    /// Returns a copy with `key` set from its textual value.
    ///
    /// The value is parsed as a TOML literal, so `num_vues=20`,
    /// `noise_psd=-170.5` and `seed=7` all work. Integers are accepted for
    /// float fields.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        if !Self::field_names().contains(&key) {
            return Err(Error::InvalidConfig(format!("unknown config field `{key}`")));
        }
        let mut table: toml::Table = toml::from_str(&self.to_toml_string())
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let parsed: toml::Table = toml::from_str(&format!("v = {value}"))
            .map_err(|e| Error::InvalidConfig(format!("bad value for `{key}`: {e}")))?;
        let mut v = parsed["v"].clone();
        if let toml::Value::Integer(i) = v {
            if Self::default_is_float(key) {
                v = toml::Value::Float(i as f64);
            }
        }
        table.insert(key.to_string(), v);
        let cfg: SystemConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        Ok(cfg)
    }

    fn default_is_float(key: &str) -> bool {
        !matches!(
            key,
            "num_vues" | "num_rsus" | "cache_capacity" | "hap_user_count" | "seed"
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SystemConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = SystemConfig {
            hap_user_count: Some(3),
            ..Default::default()
        };
        let back = SystemConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn hap_count_default_is_a_tenth_rounded_up() {
        let mut cfg = SystemConfig::default();
        cfg.num_vues = 50;
        assert_eq!(cfg.hap_user_count(), 5);
        cfg.num_vues = 11;
        assert_eq!(cfg.hap_user_count(), 2);
        cfg.num_vues = 1;
        assert_eq!(cfg.hap_user_count(), 0);
    }

    #[test]
    fn rejects_out_of_range_fields() {
        let base = SystemConfig::default();
        for (k, v) in [
            ("weight_alpha", "1.0"),
            ("weight_alpha", "0"),
            ("num_vues", "0"),
            ("total_bandwidth", "0"),
            ("cache_hit_prob", "1.5"),
            ("hap_user_count", "50"),
        ] {
            let cfg = base.with_override(k, v).unwrap();
            assert!(cfg.validate().is_err(), "{k}={v} should be rejected");
        }
    }

    #[test]
    fn overrides_parse_numbers() {
        let cfg = SystemConfig::default()
            .with_override("noise_psd", "-170")
            .unwrap()
            .with_override("num_rsus", "7")
            .unwrap();
        assert_eq!(cfg.noise_psd, -170.0);
        assert_eq!(cfg.num_rsus, 7);
        assert!(SystemConfig::default().with_override("nope", "1").is_err());
        assert!(SystemConfig::default().with_override("seed", "\"x\"").is_err());
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        assert!(SystemConfig::from_toml_str("num_vuez = 3").is_err());
        let cfg = SystemConfig::from_toml_str("num_vues = 8\nnum_rsus = 2").unwrap();
        assert_eq!(cfg.num_vues, 8);
        assert_eq!(cfg.rsu_radius, 50.0);
    }
}
