//! Five-level structure of ⁴⁰Ca⁺, its spontaneous decay channels and the
//! density-matrix type evolved by the master equation.

use std::fmt;

use nalgebra::{Matrix5, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{StirapError, StirapResult};

/// Number of atomic levels kept in the model.
pub const N_LEVELS: usize = 5;

/// Hermiticity bound enforced by [`DensityMatrix::validate`].
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Atomic levels in matrix-index order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    S12,
    P12,
    D32,
    P32,
    D52,
}

impl Level {
    pub const ALL: [Level; N_LEVELS] = [Level::S12, Level::P12, Level::D32, Level::P32, Level::D52];

    pub const fn index(self) -> usize {
        match self {
            Level::S12 => 0,
            Level::P12 => 1,
            Level::D32 => 2,
            Level::P32 => 3,
            Level::D52 => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Level::S12 => "4S1/2",
            Level::P12 => "4P1/2",
            Level::D32 => "3D3/2",
            Level::P32 => "4P3/2",
            Level::D52 => "3D5/2",
        }
    }

    pub fn is_p(self) -> bool {
        matches!(self, Level::P12 | Level::P32)
    }

    /// Ordering used to reject unphysical decay channels: S < D < P.
    fn energy_rank(self) -> u8 {
        match self {
            Level::S12 => 0,
            Level::D32 => 1,
            Level::D52 => 2,
            Level::P12 => 3,
            Level::P32 => 4,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Laser wavelengths addressing the ion, in nm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wavelength {
    Nm397,
    Nm850,
    Nm854,
    Nm866,
}

/// A single spontaneous-emission channel `upper -> lower` with partial rate in s⁻¹.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayChannel {
    pub upper: Level,
    pub lower: Level,
    pub rate: f64,
}

impl DecayChannel {
    pub fn new(upper: Level, lower: Level, rate: f64) -> StirapResult<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(StirapError::InvalidParameter(format!(
                "decay rate {upper}->{lower} must be finite and >= 0, got {rate}"
            )));
        }
        if upper == lower || upper.energy_rank() <= lower.energy_rank() {
            return Err(StirapError::InvalidParameter(format!(
                "decay channel {upper}->{lower} does not go down in energy"
            )));
        }
        if upper == Level::D52 && lower != Level::S12 {
            return Err(StirapError::InvalidParameter(format!(
                "3D5/2 may only decay to 4S1/2, got {upper}->{lower}"
            )));
        }
        Ok(Self { upper, lower, rate })
    }
}

/// Laser coupling between two levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coupling {
    pub lower: Level,
    pub upper: Level,
    pub wavelength: Wavelength,
}

/// Total decay rate and branching fractions of one P level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branching {
    /// Total spontaneous decay rate, s⁻¹.
    pub total_rate: f64,
    pub to_s12: f64,
    pub to_d32: f64,
    pub to_d52: f64,
}

impl Branching {
    /// 4P3/2: τ ≈ 6.9 ns, branching to S1/2 / D3/2 / D5/2.
    pub const P32_DEFAULT: Branching = Branching {
        total_rate: 1.45e8,
        to_s12: 0.9347,
        to_d32: 0.00661,
        to_d52: 0.05869,
    };

    /// 4P1/2: τ ≈ 7.1 ns, branching to S1/2 / D3/2.
    pub const P12_DEFAULT: Branching = Branching {
        total_rate: 1.41e8,
        to_s12: 0.93565,
        to_d32: 0.06435,
        to_d52: 0.0,
    };

    fn check(&self, name: &str) -> StirapResult<()> {
        let fractions = [self.to_s12, self.to_d32, self.to_d52];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || !(self.total_rate >= 0.0) {
            return Err(StirapError::InvalidParameter(format!(
                "{name} branching must have rate >= 0 and fractions in [0,1]"
            )));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(StirapError::InvalidParameter(format!(
                "{name} branching fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// The five levels, their decay channels and laser couplings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    pub levels: Vec<Level>,
    pub decays: Vec<DecayChannel>,
    pub couplings: Vec<Coupling>,
}

impl LevelScheme {
    /// Builds the scheme from the P-level branching data and the D5/2 lifetime.
    /// D3/2 is treated as stable.
    pub fn new(p32: Branching, p12: Branching, d52_lifetime: f64) -> StirapResult<Self> {
        p32.check("P3/2")?;
        p12.check("P1/2")?;
        if !(d52_lifetime > 0.0) {
            return Err(StirapError::InvalidParameter(format!(
                "D5/2 lifetime must be > 0, got {d52_lifetime}"
            )));
        }
        let mut decays = Vec::new();
        for (upper, b) in [(Level::P32, p32), (Level::P12, p12)] {
            for (lower, frac) in [(Level::S12, b.to_s12), (Level::D32, b.to_d32), (Level::D52, b.to_d52)] {
                if frac > 0.0 {
                    decays.push(DecayChannel::new(upper, lower, b.total_rate * frac)?);
                }
            }
        }
        decays.push(DecayChannel::new(Level::D52, Level::S12, 1.0 / d52_lifetime)?);
        Ok(Self {
            levels: Level::ALL.to_vec(),
            decays,
            couplings: Self::couplings(),
        })
    }

    /// Laser couplings of the ion: 397 and 866 nm close the cooling cycle,
    /// 850 and 854 nm drive the Raman transition through 4P3/2.
    pub fn couplings() -> Vec<Coupling> {
        vec![
            Coupling { lower: Level::S12, upper: Level::P12, wavelength: Wavelength::Nm397 },
            Coupling { lower: Level::D32, upper: Level::P12, wavelength: Wavelength::Nm866 },
            Coupling { lower: Level::D32, upper: Level::P32, wavelength: Wavelength::Nm850 },
            Coupling { lower: Level::D52, upper: Level::P32, wavelength: Wavelength::Nm854 },
        ]
    }

    /// Sum of partial rates out of `level`.
    pub fn total_decay_rate(&self, level: Level) -> f64 {
        self.decays.iter().filter(|d| d.upper == level).map(|d| d.rate).sum()
    }

    /// Removes every channel (used for unitary-limit checks).
    pub fn without_decay(mut self) -> Self {
        self.decays.clear();
        self
    }
}

impl Default for LevelScheme {
    fn default() -> Self {
        Self::new(Branching::P32_DEFAULT, Branching::P12_DEFAULT, 1.1)
            .expect("default branching is valid")
    }
}

/// One failed check of [`DensityMatrix::validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// Largest |ρᵢⱼ − ρⱼᵢ*| and where it occurs.
    Hermiticity { magnitude: f64, row: usize, col: usize },
    /// |tr ρ − 1|.
    Trace { magnitude: f64 },
    /// Magnitude of the most negative eigenvalue.
    Positivity { magnitude: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Hermiticity { magnitude, row, col } => {
                write!(f, "hermiticity violation {magnitude:.3e} at ({row},{col})")
            }
            Violation::Trace { magnitude } => write!(f, "trace violation {magnitude:.3e}"),
            Violation::Positivity { magnitude } => write!(f, "positivity violation {magnitude:.3e}"),
        }
    }
}

/// Measured deviations of a density matrix from the physical bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub hermiticity: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// The violation with the largest magnitude.
    pub fn worst(&self) -> Option<&Violation> {
        let mag = |v: &Violation| match v {
            Violation::Hermiticity { magnitude, .. }
            | Violation::Trace { magnitude }
            | Violation::Positivity { magnitude } => *magnitude,
        };
        self.violations.iter().max_by(|a, b| mag(a).total_cmp(&mag(b)))
    }

    pub fn into_result(self) -> StirapResult<()> {
        match self.worst() {
            None => Ok(()),
            Some(v) => Err(StirapError::InvalidState(v.to_string())),
        }
    }
}

/// 5×5 density matrix in the level order of [`Level::ALL`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(pub Matrix5<C64>);

impl DensityMatrix {
    pub fn from_matrix(m: Matrix5<C64>) -> Self {
        Self(m)
    }

    /// |level⟩⟨level|
    pub fn pure_state(level: Level) -> Self {
        let mut m = Matrix5::zeros();
        m[(level.index(), level.index())] = C64::new(1.0, 0.0);
        Self(m)
    }

    /// Projector onto a normalized state vector.
    pub fn from_state_vector(psi: &nalgebra::Vector5<C64>) -> Self {
        Self(psi * psi.adjoint())
    }

    /// Diagonal density matrix with the given (unchecked) populations.
    pub fn diagonal(pops: [f64; N_LEVELS]) -> Self {
        let mut m = Matrix5::zeros();
        for (i, p) in pops.iter().enumerate() {
            m[(i, i)] = C64::new(*p, 0.0);
        }
        Self(m)
    }

    pub fn maximally_mixed() -> Self {
        Self::diagonal([1.0 / N_LEVELS as f64; N_LEVELS])
    }

    pub fn matrix(&self) -> &Matrix5<C64> {
        &self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// tr ρ²
    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; N_LEVELS] {
        let herm = (self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev.try_into().expect("five eigenvalues")
    }

    /// Diagonal entry for `level`, without any validation.
    pub fn population_unchecked(&self, level: Level) -> f64 {
        self.0[(level.index(), level.index())].re
    }

    pub fn populations(&self) -> [f64; N_LEVELS] {
        Level::ALL.map(|l| self.population_unchecked(l))
    }

    /// Population of `level`; fails if ρ is not a valid state to 1e−9.
    pub fn population(&self, level: Level) -> StirapResult<f64> {
        self.validate(1e-9, 1e-9).into_result()?;
        Ok(self.population_unchecked(level))
    }

    pub fn coherence(&self, row: Level, col: Level) -> C64 {
        self.0[(row.index(), col.index())]
    }

    /// Largest |ρᵢⱼ − ρⱼᵢ*| with its location.
    pub fn hermiticity_error(&self) -> (f64, usize, usize) {
        let mut worst = (0.0, 0, 0);
        for i in 0..N_LEVELS {
            for j in i..N_LEVELS {
                let d = (self.0[(i, j)] - self.0[(j, i)].conj()).norm();
                if d > worst.0 {
                    worst = (d, i, j);
                }
            }
        }
        worst
    }

    /// Checks Hermiticity (to [`HERMITICITY_TOL`]), unit trace and positivity.
    pub fn validate(&self, tol_trace: f64, tol_psd: f64) -> ValidationReport {
        let (herm, row, col) = self.hermiticity_error();
        let trace_error = (self.trace() - C64::new(1.0, 0.0)).norm();
        let min_eigenvalue = self.eigenvalues()[0];
        let mut violations = Vec::new();
        if !(herm <= HERMITICITY_TOL) {
            violations.push(Violation::Hermiticity { magnitude: herm, row, col });
        }
        if !(trace_error <= tol_trace) {
            violations.push(Violation::Trace { magnitude: trace_error });
        }
        if !(min_eigenvalue >= -tol_psd) {
            violations.push(Violation::Positivity { magnitude: -min_eigenvalue });
        }
        ValidationReport { hermiticity: herm, trace_error, min_eigenvalue, violations }
    }
}
