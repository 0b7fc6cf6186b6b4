//! Electron-shelving fluorescence readout: shot noise, D5/2 decay during the
//! exposure and the (L − S)/(L − B) efficiency estimator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{StirapError, StirapResult};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Exposure time, s.
    pub exposure: f64,
    /// Detected 397 nm count rate of one unshelved ion, counts/s.
    pub bright_rate: f64,
    /// Background count rate per detection region, counts/s.
    pub background_rate: f64,
    /// D5/2 lifetime, s.
    pub d52_lifetime: f64,
}

impl DetectionConfig {
    pub const CCD_EXPOSURE: f64 = 8e-3;
    pub const PMT_EXPOSURE: f64 = 10e-3;

    pub fn validate(&self) -> StirapResult<()> {
        if !(self.exposure > 0.0) {
            return Err(StirapError::InvalidParameter(format!("exposure must be > 0, got {}", self.exposure)));
        }
        if !(self.bright_rate >= 0.0 && self.background_rate >= 0.0) {
            return Err(StirapError::InvalidParameter("count rates must be >= 0".into()));
        }
        if !(self.d52_lifetime > 0.0) {
            return Err(StirapError::InvalidParameter(format!(
                "D5/2 lifetime must be > 0, got {}",
                self.d52_lifetime
            )));
        }
        Ok(())
    }

    /// Time-averaged probability that a shelved ion is still shelved.
    pub fn survival(&self) -> f64 {
        let x = self.exposure / self.d52_lifetime;
        if x < 1e-8 {
            1.0 - 0.5 * x
        } else {
            -(-x).exp_m1() / x
        }
    }

    /// Count threshold halfway between a dark and a bright single-ion region.
    pub fn threshold(&self) -> f64 {
        self.exposure * (self.background_rate + 0.5 * self.bright_rate)
    }
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { exposure: Self::CCD_EXPOSURE, bright_rate: 5.0e4, background_rate: 2.0e3, d52_lifetime: 1.1 }
    }
}

fn check_fraction(p: f64) -> StirapResult<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(StirapError::InvalidParameter(format!("shelved fraction must lie in [0,1], got {p}")));
    }
    Ok(())
}

/// Shelved fraction seen by the exposure: p·(τ/T)(1 − e^(−T/τ)).
pub fn decay_during_detection(p_shelved: f64, cfg: &DetectionConfig) -> StirapResult<f64> {
    check_fraction(p_shelved)?;
    cfg.validate()?;
    Ok(p_shelved * cfg.survival())
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

fn draw_counts(rng: &mut ChaCha8Rng, q: f64, n_ions: usize, cfg: &DetectionConfig) -> u64 {
    let shelve = Bernoulli::new(q).expect("q checked to lie in [0,1]");
    let bright = (0..n_ions).filter(|_| !shelve.sample(rng)).count() as f64;
    poisson(rng, cfg.exposure * (cfg.background_rate + cfg.bright_rate * bright))
}

/// Counts of one exposure of `n_ions` ions, each shelved with probability
/// `p_shelved` corrected for decay during the exposure.
pub fn simulate_counts(p_shelved: f64, n_ions: usize, cfg: &DetectionConfig, seed: u64) -> StirapResult<u64> {
    let q = decay_during_detection(p_shelved, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_counts(&mut rng, q, n_ions, cfg))
}

/// Repeated exposures from one seeded stream.
pub fn simulate_count_series(
    p_shelved: f64,
    n_ions: usize,
    cfg: &DetectionConfig,
    n_shots: usize,
    seed: u64,
) -> StirapResult<Vec<u64>> {
    let q = decay_during_detection(p_shelved, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_shots).map(|_| draw_counts(&mut rng, q, n_ions, cfg)).collect())
}

/// (L − S)/(L − B) from the bright-reference, signal and background counts.
/// Not clamped: noise may push it outside [0, 1].
pub fn efficiency_estimator(bright: f64, signal: f64, background: f64) -> StirapResult<f64> {
    if !(bright > background) {
        return Err(StirapError::DegenerateCalibration { bright, background });
    }
    Ok((bright - signal) / (bright - background))
}

/// One (L, S, B) triple: an unshelved reference, the measurement and a
/// background exposure without ions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub bright: u64,
    pub signal: u64,
    pub background: u64,
}

impl Triple {
    pub fn estimate(&self) -> StirapResult<f64> {
        efficiency_estimator(self.bright as f64, self.signal as f64, self.background as f64)
    }
}

/// `n` independent (L, S, B) triples for shelved fraction `p_shelved`.
pub fn simulate_triples(
    p_shelved: f64,
    n_ions: usize,
    cfg: &DetectionConfig,
    n: usize,
    seed: u64,
) -> StirapResult<Vec<Triple>> {
    let q = decay_during_detection(p_shelved, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| Triple {
            bright: draw_counts(&mut rng, 0.0, n_ions, cfg),
            signal: draw_counts(&mut rng, q, n_ions, cfg),
            background: draw_counts(&mut rng, 0.0, 0, cfg),
        })
        .collect())
}

/// One detection region per ion, each an independent single-ion exposure.
pub fn per_ion_readout(p_shelved_per_ion: &[f64], cfg: &DetectionConfig, seed: u64) -> StirapResult<Vec<u64>> {
    if p_shelved_per_ion.is_empty() {
        return Err(StirapError::InvalidParameter("per-ion readout needs at least one ion".into()));
    }
    cfg.validate()?;
    let qs = p_shelved_per_ion
        .iter()
        .map(|&p| decay_during_detection(p, cfg))
        .collect::<StirapResult<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(qs.iter().map(|&q| draw_counts(&mut rng, q, 1, cfg)).collect())
}

/// Row of a detection CSV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub ion: usize,
    pub counts: u64,
    pub bright: bool,
}

pub fn classify(counts: &[u64], cfg: &DetectionConfig) -> Vec<DetectionRecord> {
    let thr = cfg.threshold();
    counts
        .iter()
        .enumerate()
        .map(|(ion, &c)| DetectionRecord { ion, counts: c, bright: c as f64 > thr })
        .collect()
}

/// Draws a seed for a sub-task from a parent seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.gen()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn survival_limits() {
        let mut cfg = DetectionConfig::default();
        assert_eq!(decay_during_detection(0.0, &cfg).unwrap(), 0.0);
        cfg.exposure = 1e-12;
        assert!((decay_during_detection(1.0, &cfg).unwrap() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn ccd_window_loss() {
        let cfg = DetectionConfig::default();
        // series of (1 - e^-x)/x = 1 - x/2 + x²/6 - x³/24 + x⁴/120
        let x: f64 = 8e-3 / 1.1;
        let series = 1.0 - x / 2.0 + x * x / 6.0 - x.powi(3) / 24.0 + x.powi(4) / 120.0;
        let s = decay_during_detection(1.0, &cfg).unwrap();
        assert!((s - series).abs() < 1e-12);
        assert!((1.0 - s - 0.0036).abs() < 1e-4);
    }

    #[test]
    fn estimator_examples() {
        assert_eq!(efficiency_estimator(1000.0, 1000.0, 100.0).unwrap(), 0.0);
        assert_eq!(efficiency_estimator(1000.0, 100.0, 100.0).unwrap(), 1.0);
        assert!((efficiency_estimator(1000.0, 163.0, 100.0).unwrap() - 0.93).abs() < 1e-12);
        assert!(matches!(
            efficiency_estimator(100.0, 50.0, 100.0),
            Err(StirapError::DegenerateCalibration { .. })
        ));
    }

    #[test]
    fn dark_config_gives_no_counts() {
        let cfg = DetectionConfig { bright_rate: 0.0, background_rate: 0.0, ..Default::default() };
        let c = simulate_count_series(0.3, 4, &cfg, 100, 5).unwrap();
        assert!(c.iter().all(|&x| x == 0));
    }

    #[test]
    fn unshelved_mean() {
        let cfg = DetectionConfig::default();
        let n = 10_000;
        let c = simulate_count_series(0.0, 1, &cfg, n, 11).unwrap();
        let mean = c.iter().sum::<u64>() as f64 / n as f64;
        let expect = cfg.exposure * (cfg.background_rate + cfg.bright_rate);
        assert!((mean - expect).abs() < 3.0 * (expect / n as f64).sqrt(), "{mean} vs {expect}");
    }

    #[test]
    fn shelved_mean_reflects_decay() {
        let cfg = DetectionConfig { background_rate: 0.0, ..Default::default() };
        let n = 10_000;
        let c = simulate_count_series(1.0, 3, &cfg, n, 12).unwrap();
        let mean = c.iter().sum::<u64>() as f64 / n as f64;
        let b = cfg.bright_rate * cfg.exposure;
        let f = 1.0 - cfg.survival();
        let expect = 3.0 * b * f;
        // each draw: number of bright ions ~ Binomial(3, f), then Poisson
        let var = expect + b * b * 3.0 * f * (1.0 - f);
        assert!((mean - expect).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {expect}");
    }

    #[test]
    fn per_ion_readout_is_deterministic() {
        let cfg = DetectionConfig::default();
        let ps = [1.0, 0.9, 0.5, 0.0];
        let a = per_ion_readout(&ps, &cfg, 99).unwrap();
        assert_eq!(a, per_ion_readout(&ps, &cfg, 99).unwrap());
        assert_eq!(a.len(), 4);
        assert!(per_ion_readout(&[], &cfg, 1).is_err());
    }

    #[test]
    fn classification_uses_midpoint() {
        let cfg = DetectionConfig::default();
        let thr = cfg.threshold();
        let rec = classify(&[0, (thr + 1.0) as u64], &cfg);
        assert!(!rec[0].bright && rec[1].bright);
    }

    proptest! {
        #[test]
        fn survival_monotone(t1 in 1e-4..0.1f64, t2 in 1e-4..0.1f64, tau in 0.1..5.0f64) {
            let mk = |t| DetectionConfig { exposure: t, d52_lifetime: tau, ..Default::default() };
            let (a, b) = (mk(t1.min(t2)).survival(), mk(t1.max(t2)).survival());
            prop_assert!(a >= b);
            let longer = DetectionConfig { d52_lifetime: 2.0 * tau, ..mk(t1) };
            prop_assert!(longer.survival() >= mk(t1).survival());
        }

        #[test]
        fn fraction_outside_unit_interval_rejected(p in 1.0001..10.0f64) {
            prop_assert!(decay_during_detection(p, &DetectionConfig::default()).is_err());
            prop_assert!(decay_during_detection(-p, &DetectionConfig::default()).is_err());
        }
    }
}
