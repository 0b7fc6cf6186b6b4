//! Parameter scans over a pulse/detuning description of the experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom::{DensityMatrix, Level, LevelScheme};
use crate::detection::{derive_seed, simulate_triples, DetectionConfig};
use crate::dynamics::{evolve, transfer_efficiency, Integrity, RamanParams, SimModel};
use crate::error::{StirapError, StirapResult};
use crate::pulse::{multi_pair_train, Cutoffs, PulsePair, PulseTrain};

/// Shape of one STIRAP pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    /// s
    pub delta_tau: f64,
    /// s
    pub sigma: f64,
    /// rad/s
    pub omega_850: f64,
    /// rad/s
    pub omega_854: f64,
    pub floor_850: f64,
    pub floor_854: f64,
    pub cutoffs: Cutoffs,
}

impl PairSpec {
    pub fn pair(&self) -> StirapResult<PulsePair> {
        PulsePair::with_cutoffs(
            self.delta_tau,
            self.sigma,
            self.omega_850,
            self.omega_854,
            self.floor_850,
            self.floor_854,
            &self.cutoffs,
        )
    }

    /// Width of the interval outside which both intensities are below e⁻⁴.
    pub fn support_width(&self) -> f64 {
        self.delta_tau.abs() + 4.0 * self.sigma
    }
}

/// Everything a scan point is rebuilt from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub scheme: LevelScheme,
    pub raman: RamanParams,
    pub pulses: PairSpec,
    pub n_pairs: usize,
    /// Start-to-start separation of consecutive pairs, s. `None` means the
    /// pair support width.
    pub pair_spacing: Option<f64>,
    /// Common factor on both peak Rabi frequencies (beam position).
    pub rabi_scale: f64,
    pub tol_rel: f64,
    pub tol_abs: f64,
}

impl ModelSpec {
    pub fn new(scheme: LevelScheme, raman: RamanParams, pulses: PairSpec) -> Self {
        Self {
            scheme,
            raman,
            pulses,
            n_pairs: 1,
            pair_spacing: None,
            rabi_scale: 1.0,
            tol_rel: SimModel::DEFAULT_TOL_REL,
            tol_abs: SimModel::DEFAULT_TOL_ABS,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.pair_spacing.unwrap_or_else(|| self.pulses.support_width())
    }

    pub fn train(&self) -> StirapResult<PulseTrain> {
        let pair = self.pulses.pair()?;
        let train = multi_pair_train(self.n_pairs, &pair, self.spacing())?;
        Ok(if self.rabi_scale == 1.0 { train } else { train.scaled(self.rabi_scale) })
    }

    pub fn build(&self) -> StirapResult<SimModel> {
        if !(self.rabi_scale >= 0.0) {
            return Err(StirapError::InvalidParameter(format!("rabi_scale must be >= 0, got {}", self.rabi_scale)));
        }
        let model = SimModel::new(self.scheme.clone(), self.train()?, self.raman)
            .with_tolerances(self.tol_rel, self.tol_abs);
        model.validate()?;
        Ok(model)
    }

    pub fn with_delay(&self, delta_tau: f64) -> Self {
        let mut out = self.clone();
        out.pulses.delta_tau = delta_tau;
        out
    }

    pub fn with_detuning(&self, delta_two: f64) -> Self {
        let mut out = self.clone();
        out.raman.delta_two = delta_two;
        out
    }

    /// Sets σ; with `delay_ratio = Some(r)` also sets Δτ = rσ.
    pub fn with_width(&self, sigma: f64, delay_ratio: Option<f64>) -> Self {
        let mut out = self.clone();
        out.pulses.sigma = sigma;
        if let Some(r) = delay_ratio {
            out.pulses.delta_tau = r * sigma;
        }
        out
    }

    pub fn with_pairs(&self, n_pairs: usize) -> Self {
        let mut out = self.clone();
        out.n_pairs = n_pairs;
        out
    }

    /// Same laser dephasing rate on both optical coherences.
    pub fn with_dephasing(&self, rate: f64) -> Self {
        let mut out = self.clone();
        out.raman.dephase_850 = rate;
        out.raman.dephase_854 = rate;
        out
    }

    pub fn with_floors(&self, floor_850: f64, floor_854: f64) -> Self {
        let mut out = self.clone();
        out.pulses.floor_850 = floor_850;
        out.pulses.floor_854 = floor_854;
        out
    }
}

/// Ratio Δτ/σ kept fixed by the width scan.
pub const WIDTH_DELAY_RATIO: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    /// Δτ, s
    Delay,
    /// Δ_two, rad/s
    TwoPhotonDetuning,
    /// σ, s, with Δτ = 2σ
    Width,
    NPairs,
}

impl ScanParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Delay => "delay",
            Self::TwoPhotonDetuning => "two_photon_detuning",
            Self::Width => "width",
            Self::NPairs => "n_pairs",
        }
    }

    /// Model for one grid value.
    pub fn apply(self, base: &ModelSpec, value: f64) -> StirapResult<ModelSpec> {
        Ok(match self {
            Self::Delay => base.with_delay(value),
            Self::TwoPhotonDetuning => base.with_detuning(value),
            Self::Width => base.with_width(value, Some(WIDTH_DELAY_RATIO)),
            Self::NPairs => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(StirapError::InvalidParameter(format!("n_pairs must be a positive integer, got {value}")));
                }
                base.with_pairs(value as usize)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub parameter: ScanParameter,
    pub grid: Vec<f64>,
    pub base: ModelSpec,
}

impl ScanSpec {
    pub fn validate(&self) -> StirapResult<()> {
        if self.grid.is_empty() {
            return Err(StirapError::InvalidParameter("scan grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(StirapError::InvalidParameter("scan grid contains a non-finite value".into()));
        }
        let up = self.grid.windows(2).all(|w| w[1] > w[0]);
        let down = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(StirapError::InvalidParameter("scan grid must be strictly monotone".into()));
        }
        Ok(())
    }
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub value: f64,
    pub model_efficiency: f64,
    pub measured_efficiency: Option<f64>,
    #[serde(skip)]
    pub integrity: Integrity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    pub parameter: ScanParameter,
    pub rows: Vec<CurveRow>,
    pub base: ModelSpec,
    pub version: String,
}

impl EfficiencyCurve {
    /// Row with the largest model efficiency (first one on ties).
    pub fn best(&self) -> Option<&CurveRow> {
        self.rows.iter().fold(None, |best: Option<&CurveRow>, r| match best {
            Some(b) if b.model_efficiency >= r.model_efficiency => Some(b),
            _ => Some(r),
        })
    }

    pub fn value_at(&self, value: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| (r.value - value).abs() <= 1e-9 * value.abs().max(1e-12))
            .map(|r| r.model_efficiency)
    }

    pub fn integrity(&self) -> Integrity {
        let mut out = Integrity::default();
        for r in &self.rows {
            out.merge(&r.integrity);
        }
        out
    }

    /// Adds a simulated measurement to every row: the mean estimator over
    /// `shots` seeded (L, S, B) triples.
    pub fn with_measurements(mut self, cfg: &DetectionConfig, shots: usize, seed: u64) -> StirapResult<Self> {
        for (k, row) in self.rows.iter_mut().enumerate() {
            let p = row.model_efficiency.clamp(0.0, 1.0);
            let triples = simulate_triples(p, 1, cfg, shots, derive_seed(seed, k as u64))?;
            let mut sum = 0.0;
            for t in &triples {
                sum += t.estimate()?;
            }
            row.measured_efficiency = Some(sum / shots.max(1) as f64);
        }
        Ok(self)
    }
}

/// Efficiency and integrity of one model run from D3/2.
pub fn run_point(spec: &ModelSpec) -> StirapResult<(f64, Integrity)> {
    let model = spec.build()?;
    let evo = evolve(&model, &DensityMatrix::pure_state(Level::D32), &[])?;
    Ok((transfer_efficiency(&evo.final_state)?, evo.integrity))
}

fn point(parameter: ScanParameter, base: &ModelSpec, value: f64) -> StirapResult<CurveRow> {
    let wrap = |e: StirapError| StirapError::ScanPoint { param: parameter.name().into(), value, source: Box::new(e) };
    let spec = parameter.apply(base, value).map_err(wrap)?;
    let (eff, integrity) = run_point(&spec).map_err(wrap)?;
    Ok(CurveRow { value, model_efficiency: eff, measured_efficiency: None, integrity })
}

/// Runs every grid point in parallel; rows keep the grid order.
pub fn scan(spec: &ScanSpec) -> StirapResult<EfficiencyCurve> {
    spec.validate()?;
    let rows = spec
        .grid
        .par_iter()
        .map(|&v| point(spec.parameter, &spec.base, v))
        .collect::<StirapResult<Vec<_>>>()?;
    Ok(EfficiencyCurve {
        parameter: spec.parameter,
        rows,
        base: spec.base.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// Width scan; `delay_ratio = Some(r)` sets Δτ = rσ, `None` keeps the base Δτ.
pub fn width_scan(sigmas: &[f64], base: &ModelSpec, delay_ratio: Option<f64>) -> StirapResult<EfficiencyCurve> {
    let spec = ScanSpec { parameter: ScanParameter::Width, grid: sigmas.to_vec(), base: base.clone() };
    spec.validate()?;
    let rows = sigmas
        .par_iter()
        .map(|&s| {
            let wrap = |e| StirapError::ScanPoint { param: "width".into(), value: s, source: Box::new(e) };
            let (eff, integrity) = run_point(&base.with_width(s, delay_ratio)).map_err(wrap)?;
            Ok(CurveRow { value: s, model_efficiency: eff, measured_efficiency: None, integrity })
        })
        .collect::<StirapResult<Vec<_>>>()?;
    Ok(EfficiencyCurve {
        parameter: ScanParameter::Width,
        rows,
        base: base.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// Final populations after an alternating train of `n_pairs` pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub n_pairs: usize,
    pub d32: f64,
    pub d52: f64,
    /// Population in the level the last pair transfers to: D5/2 for odd
    /// `n_pairs`, D3/2 for even.
    pub target: f64,
    /// target^(1/n_pairs)
    pub per_pair: f64,
    #[serde(skip)]
    pub integrity: Integrity,
}

pub fn train_study(base: &ModelSpec, counts: &[usize]) -> StirapResult<Vec<TrainRow>> {
    counts
        .par_iter()
        .map(|&n| {
            let wrap = |e| StirapError::ScanPoint { param: "n_pairs".into(), value: n as f64, source: Box::new(e) };
            if n == 0 {
                return Err(wrap(StirapError::InvalidParameter("n_pairs must be >= 1".into())));
            }
            let model = base.with_pairs(n).build().map_err(wrap)?;
            let evo = evolve(&model, &DensityMatrix::pure_state(Level::D32), &[]).map_err(wrap)?;
            let d32 = evo.final_state.population(Level::D32).map_err(wrap)?;
            let d52 = evo.final_state.population(Level::D52).map_err(wrap)?;
            let target = if n % 2 == 1 { d52 } else { d32 };
            Ok(TrainRow { n_pairs: n, d32, d52, target, per_pair: target.max(0.0).powf(1.0 / n as f64), integrity: evo.integrity })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    const MHZ: f64 = TAU * 1e6;
    const US: f64 = 1e-6;

    fn toy() -> ModelSpec {
        // weak, short pulses: cheap to integrate
        ModelSpec::new(
            LevelScheme::default(),
            RamanParams { delta_one: 600.0 * MHZ, delta_two: 0.0, dephase_850: 0.0, dephase_854: 0.0 },
            PairSpec {
                delta_tau: 0.3 * US,
                sigma: 0.2 * US,
                omega_850: 40.0 * MHZ,
                omega_854: 40.0 * MHZ,
                floor_850: 0.0,
                floor_854: 0.0,
                cutoffs: Cutoffs { rf_delay: 0.5 * US, ..Cutoffs::default() },
            },
        )
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(1.0, 2.0, 3), vec![1.0, 1.5, 2.0]);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
        assert!(linspace(1.0, 2.0, 0).is_empty());
    }

    #[test]
    fn grid_must_be_monotone() {
        let base = toy();
        let bad = ScanSpec { parameter: ScanParameter::Delay, grid: vec![0.0, 1.0, 0.5], base: base.clone() };
        assert!(bad.validate().is_err());
        let empty = ScanSpec { parameter: ScanParameter::Delay, grid: vec![], base: base.clone() };
        assert!(empty.validate().is_err());
        let down = ScanSpec { parameter: ScanParameter::Delay, grid: vec![1.0, 0.0], base };
        assert!(down.validate().is_ok());
    }

    #[test]
    fn width_parameter_couples_delay() {
        let s = ScanParameter::Width.apply(&toy(), 0.7 * US).unwrap();
        assert_eq!(s.pulses.sigma, 0.7 * US);
        assert!((s.pulses.delta_tau - 1.4 * US).abs() < 1e-18);
        assert!(ScanParameter::NPairs.apply(&toy(), 2.5).is_err());
    }

    #[test]
    fn scan_matches_single_runs_in_order() {
        let spec = ScanSpec {
            parameter: ScanParameter::Delay,
            grid: vec![-0.3 * US, 0.0, 0.3 * US],
            base: toy(),
        };
        let curve = scan(&spec).unwrap();
        assert_eq!(curve.rows.len(), 3);
        for (row, &v) in curve.rows.iter().zip(&spec.grid) {
            assert_eq!(row.value, v);
            let (eff, _) = run_point(&toy().with_delay(v)).unwrap();
            assert_eq!(row.model_efficiency, eff);
        }
    }

    #[test]
    fn failing_point_names_value() {
        let spec = ScanSpec { parameter: ScanParameter::Width, grid: vec![-1.0 * US, 0.2 * US], base: toy() };
        match scan(&spec) {
            Err(StirapError::ScanPoint { param, value, .. }) => {
                assert_eq!(param, "width");
                assert_eq!(value, -1.0 * US);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn best_row_and_lookup() {
        let mk = |v, e| CurveRow { value: v, model_efficiency: e, measured_efficiency: None, integrity: Integrity::default() };
        let curve = EfficiencyCurve {
            parameter: ScanParameter::Delay,
            rows: vec![mk(1.0, 0.2), mk(2.0, 0.9), mk(3.0, 0.9)],
            base: toy(),
            version: "x".into(),
        };
        assert_eq!(curve.best().unwrap().value, 2.0);
        assert_eq!(curve.value_at(3.0), Some(0.9));
        assert_eq!(curve.value_at(4.0), None);
    }
}
