//! Large-scale path loss and small-scale fading, all as linear power gains.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// PL(d) = PL0 + 10 gamma log10(d / d0), returned as a linear gain.
pub fn log_distance_gain(distance: f64, ref_loss_db: f64, exponent: f64, ref_distance: f64) -> f64 {
    let loss_db = ref_loss_db + 10.0 * exponent * (distance / ref_distance).log10();
    10f64.powf(-loss_db / 10.0)
}

/// Friis free-space gain (lambda / 4 pi d)^2.
pub fn free_space_gain(distance: f64, carrier_hz: f64) -> f64 {
    let lambda = SPEED_OF_LIGHT / carrier_hz;
    let g = lambda / (4.0 * std::f64::consts::PI * distance);
    g * g
}

/// |h|^2 of a unit-mean Rayleigh channel (exponential with mean 1).
pub fn rayleigh_power<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e.max(f64::MIN_POSITIVE)
}

/// |h|^2 of a unit-mean Rician channel with linear K-factor `k`.
pub fn rician_power<R: Rng + ?Sized>(rng: &mut R, k: f64) -> f64 {
    let los = (k / (k + 1.0)).sqrt();
    let sigma = (0.5 / (k + 1.0)).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    let (a, b) = (los + sigma * re, sigma * im);
    (a * a + b * b).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn free_space_matches_db_formula() {
        // FSPL[dB] = 20 log10 d + 20 log10 f - 147.55
        let g = free_space_gain(1e6, 2e9);
        let db = 20.0 * 1e6f64.log10() + 20.0 * 2e9f64.log10() - 147.55;
        assert!((-10.0 * g.log10() - db).abs() < 0.01);
    }

    #[test]
    fn log_distance_reference_point() {
        let g = log_distance_gain(1.0, 38.0, 3.5, 1.0);
        assert!((g - 10f64.powf(-3.8)).abs() < 1e-18);
        let g10 = log_distance_gain(10.0, 38.0, 3.5, 1.0);
        assert!((g / g10 - 10f64.powf(3.5)).abs() < 1e-6);
    }

    #[test]
    fn fading_has_unit_mean() {
        let mut rng = stream_rng(1, Stream::Sampling);
        let n = 200_000;
        let ray: f64 = (0..n).map(|_| rayleigh_power(&mut rng)).sum::<f64>() / n as f64;
        let ric: f64 = (0..n).map(|_| rician_power(&mut rng, 10.0)).sum::<f64>() / n as f64;
        assert!((ray - 1.0).abs() < 0.01, "rayleigh mean {ray}");
        assert!((ric - 1.0).abs() < 0.01, "rician mean {ric}");
    }
}
