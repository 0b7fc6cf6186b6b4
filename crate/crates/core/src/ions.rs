//! Linear Coulomb strings in a harmonic trap and per-ion scans.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{StirapError, StirapResult};
use crate::pulse::beam_scale;
use crate::scan::{run_point, CurveRow, EfficiencyCurve, ScanSpec};

const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
const VACUUM_PERMITTIVITY: f64 = 8.854_187_8128e-12;
const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
const ELECTRON_MASS: f64 = 9.109_383_7015e-31;

/// Mass of a ⁴⁰Ca⁺ ion, kg.
pub const CA40_ION_MASS: f64 = 39.962_590_863 * ATOMIC_MASS_UNIT - ELECTRON_MASS;

/// ℓ = (e²/(4πε₀ m ω²))^(1/3), m.
pub fn length_scale(axial_freq: f64) -> f64 {
    let k = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY);
    (k / (CA40_ION_MASS * axial_freq * axial_freq)).cbrt()
}

fn gradient(u: &DVector<f64>) -> DVector<f64> {
    let n = u.len();
    DVector::from_fn(n, |i, _| {
        let mut g = u[i];
        for j in 0..n {
            if j != i {
                let d = u[i] - u[j];
                g -= d.signum() / (d * d);
            }
        }
        g
    })
}

fn hessian(u: &DVector<f64>) -> DMatrix<f64> {
    let n = u.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = 1.0;
        for j in 0..n {
            if j != i {
                let c = 2.0 / (u[i] - u[j]).abs().powi(3);
                h[(i, i)] += c;
                h[(i, j)] = -c;
            }
        }
    }
    h
}

/// Equilibrium positions in units of ℓ: minimizes Σuᵢ²/2 + Σᵢ<ⱼ 1/|uᵢ − uⱼ|.
pub fn scaled_positions(n_ions: usize) -> StirapResult<Vec<f64>> {
    if n_ions == 0 {
        return Err(StirapError::InvalidParameter("an ion string needs at least one ion".into()));
    }
    // spacing at the center grows roughly as n^-0.56
    let a = 2.0 * (n_ions as f64).powf(-0.56);
    let mut u = DVector::from_fn(n_ions, |i, _| a * (i as f64 - 0.5 * (n_ions - 1) as f64));
    for _ in 0..100 {
        let g = gradient(&u);
        if g.norm() < 1e-13 {
            break;
        }
        let step = hessian(&u)
            .cholesky()
            .ok_or_else(|| StirapError::NoConvergence("ion string Hessian lost definiteness".into()))?
            .solve(&g);
        // keep the ordering intact
        let mut lambda = 1.0;
        loop {
            let trial = &u - &step * lambda;
            let ordered = trial.as_slice().windows(2).all(|w| w[1] > w[0]);
            if ordered && gradient(&trial).norm() < g.norm() {
                u = trial;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(StirapError::NoConvergence("ion string line search stalled".into()));
            }
        }
    }
    // average with the mirror image, which is the same equilibrium
    let v: Vec<f64> = (0..n_ions).map(|i| 0.5 * (u[i] - u[n_ions - 1 - i])).collect();
    let gn = gradient(&DVector::from_vec(v.clone())).norm();
    if !(gn < 1e-10) {
        return Err(StirapError::NoConvergence(format!("ion string gradient {gn:.3e} above 1e-10")));
    }
    Ok(v)
}

/// Equilibrium positions along the trap axis, m.
pub fn string_positions(n_ions: usize, axial_freq: f64) -> StirapResult<Vec<f64>> {
    if !(axial_freq > 0.0) {
        return Err(StirapError::InvalidParameter(format!("axial frequency must be > 0, got {axial_freq}")));
    }
    let l = length_scale(axial_freq);
    Ok(scaled_positions(n_ions)?.into_iter().map(|u| u * l).collect())
}

/// Ions on the trap axis, addressed by a beam whose axis crosses the string
/// at right angles, `beam_offset` from the string center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IonString {
    pub n_ions: usize,
    /// rad/s
    pub axial_freq: f64,
    /// m
    pub positions: Vec<f64>,
    /// m
    pub beam_offset: f64,
    /// m
    pub waist: f64,
}

impl IonString {
    pub fn new(n_ions: usize, axial_freq: f64, beam_offset: f64, waist: f64) -> StirapResult<Self> {
        let positions = string_positions(n_ions, axial_freq)?;
        Ok(Self { n_ions, axial_freq, positions, beam_offset, waist })
    }

    /// Rabi-frequency scale of each ion.
    pub fn rabi_scales(&self) -> StirapResult<Vec<f64>> {
        self.positions.iter().map(|&z| beam_scale(z - self.beam_offset, self.waist)).collect()
    }
}

/// One curve per ion, with both peak Rabi frequencies scaled by the beam
/// profile at that ion.
pub fn string_scan(string: &IonString, spec: &ScanSpec) -> StirapResult<Vec<EfficiencyCurve>> {
    spec.validate()?;
    let scales = string.rabi_scales()?;
    let jobs: Vec<(usize, f64)> =
        (0..scales.len()).flat_map(|i| spec.grid.iter().map(move |&v| (i, v))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, v)| {
            let wrap = |e| StirapError::ScanPoint { param: spec.parameter.name().into(), value: v, source: Box::new(e) };
            let mut point = spec.parameter.apply(&spec.base, v).map_err(wrap)?;
            point.rabi_scale *= scales[i];
            let (eff, integrity) = run_point(&point).map_err(wrap)?;
            Ok(CurveRow { value: v, model_efficiency: eff, measured_efficiency: None, integrity })
        })
        .collect::<StirapResult<Vec<_>>>()?;
    Ok(rows
        .chunks(spec.grid.len())
        .zip(&scales)
        .map(|(chunk, &s)| {
            let mut base = spec.base.clone();
            base.rabi_scale *= s;
            EfficiencyCurve {
                parameter: spec.parameter,
                rows: chunk.to_vec(),
                base,
                version: env!("CARGO_PKG_VERSION").to_string(),
            }
        })
        .collect())
}
