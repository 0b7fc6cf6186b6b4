//! Rotating-frame Hamiltonian, Lindblad generator and time evolution of the
//! five-level density matrix during a STIRAP sequence.

use nalgebra::Matrix5;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::atom::{DensityMatrix, Level, LevelScheme, N_LEVELS};
use crate::error::{StirapError, StirapResult};
use crate::ode::{integrate_adaptive, integrate_rk4, AdaptiveConfig, StepStats};
use crate::pulse::{PulsePair, PulseTrain};

const D32: usize = Level::D32.index();
const P32: usize = Level::P32.index();
const D52: usize = Level::D52.index();

/// Time after the RF switch-off that is still integrated, so that the
/// excited state has decayed before the final state is read.
pub const DEFAULT_SETTLE: f64 = 1e-6;

/// Detunings and laser dephasing of the Raman transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamanParams {
    /// One-photon detuning, rad/s. Positive: both lasers red of the P3/2 resonance.
    pub delta_one: f64,
    /// Two-photon detuning, rad/s. Enters H as −Δ_two on D5/2, which puts the
    /// bright resonance on the positive side.
    pub delta_two: f64,
    /// Dephasing rate of the D3/2–P3/2 coherence from the 850 nm linewidth, s⁻¹.
    pub dephase_850: f64,
    /// Dephasing rate of the D5/2–P3/2 coherence from the 854 nm linewidth, s⁻¹.
    pub dephase_854: f64,
}

impl RamanParams {
    pub fn validate(&self) -> StirapResult<()> {
        if !(self.dephase_850 >= 0.0 && self.dephase_854 >= 0.0) {
            return Err(StirapError::InvalidParameter("dephasing rates must be >= 0".into()));
        }
        if !(self.delta_one.is_finite() && self.delta_two.is_finite()) {
            return Err(StirapError::InvalidParameter("detunings must be finite".into()));
        }
        Ok(())
    }
}

/// Everything needed to integrate one STIRAP sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimModel {
    pub scheme: LevelScheme,
    pub train: PulseTrain,
    pub raman: RamanParams,
    pub t_start: f64,
    pub t_end: f64,
    pub tol_rel: f64,
    pub tol_abs: f64,
}

impl SimModel {
    pub const DEFAULT_TOL_REL: f64 = 1e-9;
    pub const DEFAULT_TOL_ABS: f64 = 1e-11;
    pub const DEFAULT_LEAD_SIGMAS: f64 = 5.0;

    /// Model with the default window: from 5σ before the first pulse to
    /// [`DEFAULT_SETTLE`] after the last RF switch-off.
    pub fn new(scheme: LevelScheme, train: PulseTrain, raman: RamanParams) -> Self {
        let (t_start, t_end) = default_window(&train);
        Self {
            scheme,
            train,
            raman,
            t_start,
            t_end,
            tol_rel: Self::DEFAULT_TOL_REL,
            tol_abs: Self::DEFAULT_TOL_ABS,
        }
    }

    pub fn single(scheme: LevelScheme, pair: PulsePair, raman: RamanParams) -> Self {
        Self::new(scheme, PulseTrain::single(pair), raman)
    }

    /// Replaces the pulse train and recomputes the default window.
    pub fn with_train(&self, train: PulseTrain) -> Self {
        let mut out = self.clone();
        (out.t_start, out.t_end) = default_window(&train);
        out.train = train;
        out
    }

    pub fn with_pair(&self, pair: PulsePair) -> Self {
        self.with_train(PulseTrain::single(pair))
    }

    pub fn with_tolerances(mut self, tol_rel: f64, tol_abs: f64) -> Self {
        self.tol_rel = tol_rel;
        self.tol_abs = tol_abs;
        self
    }

    pub fn validate(&self) -> StirapResult<()> {
        if !(self.t_start < self.t_end) {
            return Err(StirapError::InvalidParameter(format!(
                "t_start {} must precede t_end {}",
                self.t_start, self.t_end
            )));
        }
        if !(self.tol_rel > 0.0 && self.tol_abs > 0.0) {
            return Err(StirapError::InvalidParameter("tolerances must be > 0".into()));
        }
        if self.train.is_empty() {
            return Err(StirapError::InvalidParameter("pulse train is empty".into()));
        }
        for pair in &self.train.pairs {
            pair.validate()?;
        }
        self.raman.validate()
    }

    /// (Ω₈₅₀, Ω₈₅₄) at `t`, rad/s.
    pub fn rabi(&self, t: f64) -> (f64, f64) {
        (self.train.omega_850(t), self.train.omega_854(t))
    }
}

fn default_window(train: &PulseTrain) -> (f64, f64) {
    (train.start_time(SimModel::DEFAULT_LEAD_SIGMAS), train.rf_off_time() + DEFAULT_SETTLE)
}

/// Rotating-wave Hamiltonian H/ħ in rad/s, level order S1/2, P1/2, D3/2, P3/2, D5/2.
pub fn build_hamiltonian(model: &SimModel, t: f64) -> Matrix5<C64> {
    let (o850, o854) = model.rabi(t);
    hamiltonian_from(o850, o854, &model.raman)
}

pub(crate) fn hamiltonian_from(o850: f64, o854: f64, raman: &RamanParams) -> Matrix5<C64> {
    let mut h = Matrix5::zeros();
    h[(P32, P32)] = C64::new(raman.delta_one, 0.0);
    h[(D52, D52)] = C64::new(-raman.delta_two, 0.0);
    h[(P32, D32)] = C64::new(0.5 * o850, 0.0);
    h[(D32, P32)] = C64::new(0.5 * o850, 0.0);
    h[(P32, D52)] = C64::new(0.5 * o854, 0.0);
    h[(D52, P32)] = C64::new(0.5 * o854, 0.0);
    h
}

/// Precomputed Lindblad generator for one model.
///
/// Each decay channel `L = |l⟩⟨u|` damps coherence ρᵢⱼ at (γᵢ + γⱼ)/2 and feeds
/// ρₗₗ at Γρᵤᵤ. Each dephasing operator `L = |P3/2⟩⟨P3/2| − |D⟩⟨D|` at rate r
/// damps ρᵢⱼ at r(lᵢ − lⱼ)²/2.
#[derive(Clone, Debug)]
pub struct Liouvillian<'a> {
    model: &'a SimModel,
    damping: [[f64; N_LEVELS]; N_LEVELS],
    feeds: Vec<(usize, usize, f64)>,
}

impl<'a> Liouvillian<'a> {
    pub fn new(model: &'a SimModel) -> Self {
        let mut gamma = [0.0; N_LEVELS];
        let mut feeds = Vec::new();
        for d in &model.scheme.decays {
            gamma[d.upper.index()] += d.rate;
            if d.rate > 0.0 {
                feeds.push((d.lower.index(), d.upper.index(), d.rate));
            }
        }
        let dephasers = [
            (D32, 0.5 * model.raman.dephase_850),
            (D52, 0.5 * model.raman.dephase_854),
        ];
        let mut damping = [[0.0; N_LEVELS]; N_LEVELS];
        for (i, row) in damping.iter_mut().enumerate() {
            for (j, d) in row.iter_mut().enumerate() {
                *d = 0.5 * (gamma[i] + gamma[j]);
                for &(lower, rate) in &dephasers {
                    let l = |k: usize| -> f64 {
                        if k == P32 {
                            1.0
                        } else if k == lower {
                            -1.0
                        } else {
                            0.0
                        }
                    };
                    *d += 0.5 * rate * (l(i) - l(j)).powi(2);
                }
            }
        }
        Self { model, damping, feeds }
    }

    /// dρ/dt at `t`. The coherent part is evaluated as −i(Hρ − (Hρ)†), so
    /// the result is exactly Hermitian whenever ρ is.
    #[inline]
    pub fn apply(&self, t: f64, rho: &Matrix5<C64>, out: &mut Matrix5<C64>) {
        let (o850, o854) = self.model.rabi(t);
        let (a, b) = (0.5 * o850, 0.5 * o854);
        let (d1, d2) = (self.model.raman.delta_one, -self.model.raman.delta_two);

        // H is real with nonzero entries only in the D3/2, P3/2, D5/2 block.
        let mut hr = Matrix5::<C64>::zeros();
        for j in 0..N_LEVELS {
            let (x, p, y) = (rho[(D32, j)], rho[(P32, j)], rho[(D52, j)]);
            hr[(D32, j)] = p * a;
            hr[(P32, j)] = x * a + p * d1 + y * b;
            hr[(D52, j)] = p * b + y * d2;
        }
        for i in 0..N_LEVELS {
            for j in 0..N_LEVELS {
                let c = hr[(i, j)] - hr[(j, i)].conj();
                // −i·c
                out[(i, j)] = C64::new(c.im, -c.re) - rho[(i, j)] * self.damping[i][j];
            }
        }
        for &(lower, upper, rate) in &self.feeds {
            out[(lower, lower)].re += rate * rho[(upper, upper)].re;
        }
    }
}

/// Right-hand side of the master equation, dρ/dt in s⁻¹.
pub fn lindblad_rhs(model: &SimModel, rho: &DensityMatrix, t: f64) -> Matrix5<C64> {
    let mut out = Matrix5::zeros();
    Liouvillian::new(model).apply(t, rho.matrix(), &mut out);
    out
}

/// Worst deviations from a physical state seen during an evolution.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Integrity {
    pub max_trace_drift: f64,
    pub max_hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl Integrity {
    fn observe(&mut self, rho: &DensityMatrix, trace0: C64) {
        self.max_trace_drift = self.max_trace_drift.max((rho.trace() - trace0).norm());
        self.max_hermiticity = self.max_hermiticity.max(rho.hermiticity_error().0);
        self.min_eigenvalue = self.min_eigenvalue.min(rho.eigenvalues()[0]);
    }

    pub fn merge(&mut self, other: &Integrity) {
        self.max_trace_drift = self.max_trace_drift.max(other.max_trace_drift);
        self.max_hermiticity = self.max_hermiticity.max(other.max_hermiticity);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub final_state: DensityMatrix,
    pub samples: Vec<(f64, DensityMatrix)>,
    pub stats: StepStats,
    pub integrity: Integrity,
}

/// Bound applied to the final state of every evolution; no renormalization.
pub const EVOLVE_TOL: f64 = 1e-8;

/// Integrates the master equation over `[t_start, t_end]` with the adaptive
/// Dormand–Prince 8(5,3) pair, recording ρ at each of `sample_times`.
pub fn evolve(model: &SimModel, rho0: &DensityMatrix, sample_times: &[f64]) -> StirapResult<Evolution> {
    model.validate()?;
    rho0.validate(1e-9, 1e-9).into_result()?;
    let gen = Liouvillian::new(model);
    let cfg = AdaptiveConfig::new(model.tol_rel, model.tol_abs);
    let sol = integrate_adaptive(
        |t, y: &Matrix5<C64>, dy: &mut Matrix5<C64>| gen.apply(t, y, dy),
        model.t_start,
        *rho0.matrix(),
        model.t_end,
        sample_times,
        &cfg,
    )?;

    let trace0 = rho0.trace();
    let mut integrity = Integrity::default();
    let samples: Vec<(f64, DensityMatrix)> =
        sol.samples.into_iter().map(|(t, m)| (t, DensityMatrix(m))).collect();
    for (_, rho) in &samples {
        integrity.observe(rho, trace0);
    }
    let final_state = DensityMatrix(sol.y);
    integrity.observe(&final_state, trace0);

    let report = final_state.validate(EVOLVE_TOL, EVOLVE_TOL);
    if let Some(v) = report.worst() {
        return Err(StirapError::InvariantDrift { t: sol.t, detail: v.to_string() });
    }
    Ok(Evolution { final_state, samples, stats: sol.stats, integrity })
}

/// Final state with a uniform fourth-order Runge–Kutta step of at most `h`.
pub fn evolve_fixed_step(model: &SimModel, rho0: &DensityMatrix, h: f64) -> StirapResult<DensityMatrix> {
    model.validate()?;
    let gen = Liouvillian::new(model);
    let y = integrate_rk4(
        |t, y: &Matrix5<C64>, dy: &mut Matrix5<C64>| gen.apply(t, y, dy),
        model.t_start,
        *rho0.matrix(),
        model.t_end,
        h,
    );
    Ok(DensityMatrix(y))
}

/// Model-level transfer efficiency: the population shelved in D5/2.
pub fn transfer_efficiency(rho_final: &DensityMatrix) -> StirapResult<f64> {
    rho_final.population(Level::D52)
}

/// Efficiency of one run from D3/2.
pub fn run_efficiency(model: &SimModel) -> StirapResult<f64> {
    let evo = evolve(model, &DensityMatrix::pure_state(Level::D32), &[])?;
    transfer_efficiency(&evo.final_state)
}
