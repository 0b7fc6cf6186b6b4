//! Rabi-frequency envelopes of the 850 nm (pump) and 854 nm (Stokes) beams.
//!
//! Each pulse is a Gaussian in intensity, `I(t) ∝ exp[-(t - t₀)²/σ²]`, so the
//! Rabi frequency is `Ω₀ exp[-(t - t₀)²/(2σ²)]`. Imperfect AOM extinction
//! leaves a residual Rabi floor until an RF switch suppresses the drive, and a
//! mechanical shutter blocks the beam completely later on.

use serde::{Deserialize, Serialize};

use crate::error::{StirapError, StirapResult};

/// Timing of the RF switch and shutter relative to a pulse sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoffs {
    /// RF switch-off delay after the peak of the later pulse, s.
    pub rf_delay: f64,
    /// Power suppression applied by the RF switch, dB.
    pub rf_suppression_db: f64,
    /// Shutter closing time after the start of the sequence, s.
    pub shutter_delay: f64,
    /// Sequence start, in units of σ before the earlier pulse center.
    pub lead_sigmas: f64,
}

impl Default for Cutoffs {
    fn default() -> Self {
        Self {
            rf_delay: 10e-6,
            rf_suppression_db: 100.0,
            shutter_delay: 100e-6,
            lead_sigmas: 5.0,
        }
    }
}

/// One Gaussian pulse on one beam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    /// Peak Rabi frequency Ω₀, rad/s.
    pub omega_peak: f64,
    /// Intensity maximum, s.
    pub center: f64,
    /// 1/e half-width of the intensity profile, s.
    pub sigma: f64,
    /// Residual Rabi frequency as a fraction of the peak.
    pub floor_fraction: f64,
    pub rf_off_time: f64,
    pub rf_suppression_db: f64,
    pub shutter_time: f64,
}

impl PulseParams {
    pub fn validate(&self) -> StirapResult<()> {
        let bad = |msg: String| Err(StirapError::InvalidParameter(msg));
        if !(self.omega_peak >= 0.0) || !self.omega_peak.is_finite() {
            return bad(format!("omega_peak must be >= 0, got {}", self.omega_peak));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be > 0, got {}", self.sigma));
        }
        if !(0.0..1.0).contains(&self.floor_fraction) {
            return bad(format!("floor_fraction must lie in [0,1), got {}", self.floor_fraction));
        }
        if !(self.rf_off_time <= self.shutter_time) {
            return bad(format!(
                "rf_off_time {} must not exceed shutter_time {}",
                self.rf_off_time, self.shutter_time
            ));
        }
        if !(self.rf_suppression_db >= 0.0) {
            return bad(format!("rf_suppression_db must be >= 0, got {}", self.rf_suppression_db));
        }
        Ok(())
    }

    fn gaussian(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.sigma;
        (-0.5 * x * x).exp()
    }

    /// Amplitude factor left after the RF switch.
    pub fn rf_factor(&self) -> f64 {
        10f64.powf(-self.rf_suppression_db / 20.0)
    }

    /// Rabi frequency at `t`, rad/s.
    pub fn rabi(&self, t: f64) -> f64 {
        if t >= self.shutter_time {
            return 0.0;
        }
        let shape = self.gaussian(t).max(self.floor_fraction);
        if t >= self.rf_off_time {
            self.omega_peak * shape * self.rf_factor()
        } else {
            self.omega_peak * shape
        }
    }

    /// Time derivative of [`PulseParams::rabi`], rad/s². Zero on the floor.
    pub fn rabi_rate(&self, t: f64) -> f64 {
        if t >= self.shutter_time {
            return 0.0;
        }
        let g = self.gaussian(t);
        if g <= self.floor_fraction {
            return 0.0;
        }
        let scale = if t >= self.rf_off_time { self.rf_factor() } else { 1.0 };
        -self.omega_peak * scale * g * (t - self.center) / (self.sigma * self.sigma)
    }

    fn shifted(mut self, dt: f64) -> Self {
        self.center += dt;
        self.rf_off_time += dt;
        self.shutter_time += dt;
        self
    }
}

/// Free-function form of [`PulseParams::rabi`].
pub fn rabi_envelope(p: &PulseParams, t: f64) -> f64 {
    p.rabi(t)
}

/// A pump (850 nm, D3/2–P3/2) and Stokes (854 nm, D5/2–P3/2) pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulsePair {
    pub pump: PulseParams,
    pub stokes: PulseParams,
    /// Pump center minus Stokes center, s. Positive means Stokes first.
    pub delta_tau: f64,
}

impl PulsePair {
    /// Builds a pair centered on t = 0 with the given cutoff timing.
    #[allow(clippy::too_many_arguments)]
    pub fn with_cutoffs(
        delta_tau: f64,
        sigma: f64,
        omega850: f64,
        omega854: f64,
        floor850: f64,
        floor854: f64,
        cutoffs: &Cutoffs,
    ) -> StirapResult<Self> {
        let later = delta_tau.abs() / 2.0;
        let start = -later - cutoffs.lead_sigmas * sigma;
        let rf_off_time = later + cutoffs.rf_delay;
        let shutter_time = (start + cutoffs.shutter_delay).max(rf_off_time);
        let make = |omega_peak, center, floor_fraction| PulseParams {
            omega_peak,
            center,
            sigma,
            floor_fraction,
            rf_off_time,
            rf_suppression_db: cutoffs.rf_suppression_db,
            shutter_time,
        };
        let pair = Self {
            pump: make(omega850, delta_tau / 2.0, floor850),
            stokes: make(omega854, -delta_tau / 2.0, floor854),
            delta_tau,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> StirapResult<()> {
        self.pump.validate()?;
        self.stokes.validate()?;
        let dt = self.pump.center - self.stokes.center;
        if (dt - self.delta_tau).abs() > 1e-12 * (1e-6 + self.delta_tau.abs()) {
            return Err(StirapError::InvalidParameter(format!(
                "pump-stokes separation {dt} disagrees with delta_tau {}",
                self.delta_tau
            )));
        }
        Ok(())
    }

    pub fn earlier_center(&self) -> f64 {
        self.pump.center.min(self.stokes.center)
    }

    pub fn later_center(&self) -> f64 {
        self.pump.center.max(self.stokes.center)
    }

    pub fn max_sigma(&self) -> f64 {
        self.pump.sigma.max(self.stokes.sigma)
    }

    /// Interval outside which both intensities are below e⁻⁴ of their peak.
    pub fn support(&self) -> (f64, f64) {
        (
            (self.pump.center - 2.0 * self.pump.sigma).min(self.stokes.center - 2.0 * self.stokes.sigma),
            (self.pump.center + 2.0 * self.pump.sigma).max(self.stokes.center + 2.0 * self.stokes.sigma),
        )
    }

    /// Same pulses with the roles of the two beams exchanged in time,
    /// i.e. the sign of Δτ flipped about the pair midpoint.
    pub fn reversed(&self) -> Self {
        let mid = 0.5 * (self.pump.center + self.stokes.center);
        let mut out = *self;
        out.pump.center = 2.0 * mid - self.pump.center;
        out.stokes.center = 2.0 * mid - self.stokes.center;
        out.delta_tau = -self.delta_tau;
        out
    }

    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            pump: self.pump.shifted(dt),
            stokes: self.stokes.shifted(dt),
            delta_tau: self.delta_tau,
        }
    }

    /// Multiplies both peak Rabi frequencies by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = *self;
        out.pump.omega_peak *= factor;
        out.stokes.omega_peak *= factor;
        out
    }
}

/// STIRAP pair with pump centered at +Δτ/2 and Stokes at −Δτ/2, default cutoffs.
pub fn stirap_pair(
    delta_tau: f64,
    sigma: f64,
    omega850: f64,
    omega854: f64,
    floor850: f64,
    floor854: f64,
) -> StirapResult<PulsePair> {
    PulsePair::with_cutoffs(delta_tau, sigma, omega850, omega854, floor850, floor854, &Cutoffs::default())
}

/// An ordered sequence of pulse pairs. Each beam's envelope is the maximum of
/// its pulses, so residual floors persist until the last RF switch-off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    pub pairs: Vec<PulsePair>,
    pub pair_spacing: f64,
}

impl PulseTrain {
    pub fn single(pair: PulsePair) -> Self {
        Self { pairs: vec![pair], pair_spacing: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// 850 nm Rabi frequency, rad/s.
    pub fn omega_850(&self, t: f64) -> f64 {
        self.pairs.iter().map(|p| p.pump.rabi(t)).fold(0.0, f64::max)
    }

    /// 854 nm Rabi frequency, rad/s.
    pub fn omega_854(&self, t: f64) -> f64 {
        self.pairs.iter().map(|p| p.stokes.rabi(t)).fold(0.0, f64::max)
    }

    /// Earliest time at which the sequence starts, given a lead of `lead_sigmas` σ.
    pub fn start_time(&self, lead_sigmas: f64) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.earlier_center() - lead_sigmas * p.max_sigma())
            .fold(f64::INFINITY, f64::min)
    }

    /// Latest RF switch-off of any pulse.
    pub fn rf_off_time(&self) -> f64 {
        self.pairs
            .iter()
            .flat_map(|p| [p.pump.rf_off_time, p.stokes.rf_off_time])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Multiplies every peak Rabi frequency by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            pairs: self.pairs.iter().map(|p| p.scaled(factor)).collect(),
            pair_spacing: self.pair_spacing,
        }
    }
}

/// `n_pairs` copies of `base`, `spacing` apart. Odd-numbered pairs (1st, 3rd, …)
/// keep the order of `base`; even-numbered pairs have it reversed and so drive
/// the population back. The RF switch-off of every pulse moves to the end of
/// the train.
pub fn multi_pair_train(n_pairs: usize, base: &PulsePair, spacing: f64) -> StirapResult<PulseTrain> {
    if n_pairs == 0 {
        return Err(StirapError::InvalidParameter("a pulse train needs at least one pair".into()));
    }
    base.validate()?;
    let (lo, hi) = base.support();
    if n_pairs > 1 && !(spacing >= hi - lo) {
        return Err(StirapError::InvalidParameter(format!(
            "pair spacing {spacing:.3e} s is shorter than the pair support {:.3e} s; pairs overlap",
            hi - lo
        )));
    }
    let rf_delay = base.pump.rf_off_time - base.later_center();
    let mut pairs: Vec<PulsePair> = (0..n_pairs)
        .map(|k| {
            let pair = if k % 2 == 0 { *base } else { base.reversed() };
            pair.shifted(k as f64 * spacing)
        })
        .collect();
    let last_center = pairs.last().map(|p| p.later_center()).unwrap_or_default();
    let rf_off = last_center + rf_delay;
    let shutter = base.pump.shutter_time.max(rf_off);
    for pair in &mut pairs {
        for p in [&mut pair.pump, &mut pair.stokes] {
            p.rf_off_time = rf_off;
            p.shutter_time = shutter;
        }
    }
    Ok(PulseTrain { pairs, pair_spacing: spacing })
}

/// Rabi-frequency scale of a Gaussian beam of waist `waist` at radial offset
/// `radial_offset`: intensity falls as exp(−2r²/w²), so Rabi as exp(−r²/w²).
pub fn beam_scale(radial_offset: f64, waist: f64) -> StirapResult<f64> {
    if !(waist > 0.0) {
        return Err(StirapError::InvalidParameter(format!("beam waist must be > 0, got {waist}")));
    }
    Ok((-(radial_offset * radial_offset) / (waist * waist)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    const MHZ: f64 = TAU * 1e6;
    const US: f64 = 1e-6;

    fn bare(omega_peak: f64, sigma: f64, floor: f64) -> PulseParams {
        PulseParams {
            omega_peak,
            center: 0.0,
            sigma,
            floor_fraction: floor,
            rf_off_time: f64::INFINITY,
            rf_suppression_db: 100.0,
            shutter_time: f64::INFINITY,
        }
    }

    #[test]
    fn envelope_peak_and_floor() {
        let p = bare(100.0 * MHZ, 1.5 * US, 0.0);
        assert_eq!(rabi_envelope(&p, 0.0), 100.0 * MHZ);
        let p = bare(90.0 * MHZ, 1.5 * US, 0.02);
        assert_eq!(rabi_envelope(&p, 0.0), 90.0 * MHZ);
        // exp(-50) ≈ 2e-22 is far below the 5% floor
        let p = bare(1.0, 1.0, 0.05);
        assert_eq!(rabi_envelope(&p, 10.0), 0.05);
    }

    #[test]
    fn envelope_is_rabi_not_intensity_width() {
        let p = bare(1.0, 2.0, 0.0);
        // intensity falls to 1/e at t = σ, so the Rabi frequency is e^{-1/2}
        assert!((p.rabi(2.0) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn cutoffs() {
        let mut p = bare(1.0, 1.0, 0.05);
        p.rf_off_time = 5.0;
        p.shutter_time = 8.0;
        assert_eq!(p.rabi(4.999), 0.05);
        assert!((p.rabi(5.0) - 0.05e-5).abs() < 1e-20);
        assert_eq!(p.rabi(8.0), 0.0);
        assert_eq!(p.rabi(1e3), 0.0);
    }

    #[test]
    fn pair_geometry() {
        let pair = stirap_pair(3.0 * US, 1.5 * US, 90.0 * MHZ, 225.0 * MHZ, 0.02, 0.05).unwrap();
        assert_eq!(pair.pump.center, 1.5 * US);
        assert_eq!(pair.stokes.center, -1.5 * US);
        assert_eq!(pair.pump.omega_peak, 90.0 * MHZ);
        assert_eq!(pair.stokes.floor_fraction, 0.05);
        assert!((pair.pump.rf_off_time - 11.5 * US).abs() < 1e-15);
        assert!((pair.pump.shutter_time - (-9.0 * US + 100.0 * US)).abs() < 1e-15);

        let overlap = stirap_pair(0.0, 1.5 * US, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(overlap.pump.center, overlap.stokes.center);

        let intuitive = stirap_pair(-3.0 * US, 1.5 * US, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(intuitive.pump.center < intuitive.stokes.center);
        assert!(stirap_pair(1.0, 0.0, 1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn train_alternates_and_rejects_overlap() {
        let base = stirap_pair(3.0 * US, 1.5 * US, 1.0, 1.0, 0.0, 0.0).unwrap();
        let single = multi_pair_train(1, &base, 0.0).unwrap();
        assert_eq!(single.pairs, vec![base]);

        let spacing = 9.0 * US;
        let train = multi_pair_train(3, &base, spacing).unwrap();
        assert!(train.pairs[0].delta_tau > 0.0);
        assert!(train.pairs[1].delta_tau < 0.0);
        assert!(train.pairs[2].delta_tau > 0.0);
        assert!((train.pairs[1].pump.center - (spacing - 1.5 * US)).abs() < 1e-15);
        let rf = train.rf_off_time();
        assert!((rf - (2.0 * spacing + 1.5 * US + 10.0 * US)).abs() < 1e-15);
        assert!(train.pairs.iter().all(|p| p.stokes.rf_off_time == rf));

        assert!(multi_pair_train(2, &base, 5.0 * US).is_err());
        assert!(multi_pair_train(0, &base, spacing).is_err());
    }

    #[test]
    fn beam_scale_values() {
        assert_eq!(beam_scale(0.0, 55e-6).unwrap(), 1.0);
        assert!((beam_scale(55e-6, 55e-6).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!((beam_scale(27.5e-6, 55e-6).unwrap() - 0.778_800_783_071_404_9).abs() < 1e-12);
        assert!(beam_scale(0.0, 0.0).is_err());
    }

    #[test]
    fn pulse_area_by_quadrature() {
        // composite Simpson over ±12σ against Ω₀σ√(2π)
        let p = bare(2.0, 1.3, 0.0);
        let (a, b, n) = (-12.0 * 1.3, 12.0 * 1.3, 20_000);
        let h = (b - a) / n as f64;
        let mut sum = p.rabi(a) + p.rabi(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * p.rabi(a + i as f64 * h);
        }
        let area = sum * h / 3.0;
        let exact = 2.0 * 1.3 * (2.0 * PI).sqrt();
        assert!(((area - exact) / exact).abs() < 1e-6);
    }

    #[test]
    fn rate_matches_finite_difference() {
        let p = bare(3.0, 0.7, 0.0);
        for &t in &[-1.1, -0.3, 0.2, 0.9] {
            let h = 1e-6;
            let fd = (p.rabi(t + h) - p.rabi(t - h)) / (2.0 * h);
            assert!((fd - p.rabi_rate(t)).abs() < 1e-6 * p.rabi_rate(t).abs().max(1.0));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symmetric_without_floor(delta in 0.0f64..10.0, sigma in 0.1f64..5.0) {
                let p = bare(1.0, sigma, 0.0);
                prop_assert_eq!(p.rabi(delta), p.rabi(-delta));
            }

            #[test]
            fn nonnegative_and_dark_after_shutter(t in -50.0f64..50.0, floor in 0.0f64..0.99) {
                let mut p = bare(5.0, 2.0, floor);
                p.rf_off_time = 10.0;
                p.shutter_time = 20.0;
                let v = p.rabi(t);
                prop_assert!(v >= 0.0);
                if t >= 20.0 {
                    prop_assert_eq!(v, 0.0);
                }
            }
        }
    }
}
