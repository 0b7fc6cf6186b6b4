//! Run configuration in lab units (MHz for frequencies divided by 2π, μs, ms,
//! counts/s), converted to SI and rad/s at the parse boundary.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stirap::atom::{Branching, LevelScheme};
use stirap::detection::DetectionConfig;
use stirap::dynamics::RamanParams;
use stirap::ions::IonString;
use stirap::optimize::{Bounds, NelderMeadOptions};
use stirap::pulse::Cutoffs;
use stirap::scan::{linspace, ModelSpec, PairSpec};
use stirap::{StirapError, StirapResult};

const MHZ: f64 = TAU * 1e6;
const US: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomSection {
    pub p32_rate_per_s: f64,
    pub p32_to_s12: f64,
    pub p32_to_d32: f64,
    pub p32_to_d52: f64,
    pub p12_rate_per_s: f64,
    pub p12_to_s12: f64,
    pub p12_to_d32: f64,
    pub d52_lifetime_s: f64,
}

impl Default for AtomSection {
    fn default() -> Self {
        let (p, q) = (Branching::P32_DEFAULT, Branching::P12_DEFAULT);
        Self {
            p32_rate_per_s: p.total_rate,
            p32_to_s12: p.to_s12,
            p32_to_d32: p.to_d32,
            p32_to_d52: p.to_d52,
            p12_rate_per_s: q.total_rate,
            p12_to_s12: q.to_s12,
            p12_to_d32: q.to_d32,
            d52_lifetime_s: 1.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulsesSection {
    pub omega_850_peak_mhz: f64,
    pub omega_854_peak_mhz: f64,
    pub sigma_us: f64,
    pub delta_tau_us: f64,
    pub floor_850: f64,
    pub floor_854: f64,
    pub rf_delay_us: f64,
    pub rf_suppression_db: f64,
    pub shutter_delay_us: f64,
    pub lead_sigmas: f64,
    pub n_pairs: usize,
    /// Start-to-start pair separation; 0 selects the pair support width.
    pub pair_spacing_us: f64,
}

impl Default for PulsesSection {
    fn default() -> Self {
        let c = Cutoffs::default();
        Self {
            omega_850_peak_mhz: 90.0,
            omega_854_peak_mhz: 225.0,
            sigma_us: 1.5,
            delta_tau_us: 3.0,
            floor_850: 0.02,
            floor_854: 0.05,
            rf_delay_us: c.rf_delay / US,
            rf_suppression_db: c.rf_suppression_db,
            shutter_delay_us: c.shutter_delay / US,
            lead_sigmas: c.lead_sigmas,
            n_pairs: 1,
            pair_spacing_us: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamanSection {
    pub delta_one_mhz: f64,
    pub delta_two_mhz: f64,
    pub dephase_850_per_s: f64,
    pub dephase_854_per_s: f64,
}

impl Default for RamanSection {
    fn default() -> Self {
        Self { delta_one_mhz: 600.0, delta_two_mhz: -1.0, dephase_850_per_s: 0.0, dephase_854_per_s: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol_rel: f64,
    pub tol_abs: f64,
    /// Trajectory samples written by `simulate` and `envelopes`.
    pub samples: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { tol_rel: 1e-9, tol_abs: 1e-11, samples: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub exposure_ms: f64,
    pub bright_rate_per_s: f64,
    pub background_rate_per_s: f64,
    /// Shelved fraction used by `detect`.
    pub p_shelved: f64,
    /// (L, S, B) triples per `detect` run and per measured scan point.
    pub shots: usize,
    pub n_ions: usize,
}

impl Default for DetectionSection {
    fn default() -> Self {
        let d = DetectionConfig::default();
        Self {
            exposure_ms: d.exposure * 1e3,
            bright_rate_per_s: d.bright_rate,
            background_rate_per_s: d.background_rate,
            p_shelved: 0.93,
            shots: 1000,
            n_ions: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.count)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub delay_us: Grid,
    pub detuning_mhz: Grid,
    pub width_us: Vec<f64>,
    pub max_pairs: usize,
    /// Attach a simulated (L − S)/(L − B) measurement to every row.
    pub measure: bool,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            delay_us: Grid { min: -6.0, max: 10.0, count: 33 },
            detuning_mhz: Grid { min: -3.0, max: 3.0, count: 61 },
            width_us: vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 7.5, 10.0],
            max_pairs: 7,
            measure: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StringSection {
    pub n_ions: usize,
    pub axial_freq_mhz: f64,
    /// Beam axis distance from the string center along the trap axis.
    pub beam_offset_um: f64,
    pub waist_um: f64,
}

impl Default for StringSection {
    fn default() -> Self {
        Self { n_ions: 9, axial_freq_mhz: 0.5, beam_offset_um: 0.0, waist_um: 55.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub delta_tau_min_us: f64,
    pub delta_tau_max_us: f64,
    pub sigma_min_us: f64,
    pub sigma_max_us: f64,
    pub max_iter: usize,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        let o = NelderMeadOptions::default();
        Self {
            delta_tau_min_us: 0.5,
            delta_tau_max_us: 6.0,
            sigma_min_us: 1.5,
            sigma_max_us: 1.5,
            max_iter: o.max_iter,
            f_tol: o.f_tol,
            x_tol: o.x_tol,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub plot: bool,
}

/// Complete configuration as written in a file, every key defaulted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub atom: AtomSection,
    pub pulses: PulsesSection,
    pub raman: RamanSection,
    pub solver: SolverSection,
    pub detection: DetectionSection,
    pub scan: ScanSection,
    pub string: StringSection,
    pub optimize: OptimizeSection,
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Fig3,
    Fig4,
    Width,
    Train,
    Experimental,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Fig3, Preset::Fig4, Preset::Width, Preset::Train, Preset::Experimental];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Width => "width",
            Preset::Train => "train",
            Preset::Experimental => "experimental",
        }
    }

    pub fn parse(name: &str) -> StirapResult<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| StirapError::InvalidParameter(format!("unknown preset '{name}'")))
    }

    /// Overrides on top of the defaults, in file syntax.
    pub fn source(self) -> &'static str {
        match self {
            // the defaults are the delay-scan fit parameters
            Preset::Fig3 => "",
            Preset::Fig4 => "[pulses]\ndelta_tau_us = 2.0\n",
            // dephasing from the σ = 10 μs fit to 80 %
            Preset::Width => "[raman]\ndephase_850_per_s = 0.0\ndephase_854_per_s = 0.0\n",
            Preset::Train => "[pulses]\nn_pairs = 7\n",
            Preset::Experimental => "[pulses]\nomega_850_peak_mhz = 100.0\nomega_854_peak_mhz = 250.0\n",
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` of `text`, or 0 when absent.
fn line_of_key(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        let k = line.split('=').next().unwrap_or("").trim();
        if current == section && k == key {
            return i + 1;
        }
    }
    0
}

fn parse_table(text: &str) -> StirapResult<toml::Table> {
    let table: toml::Table = toml::from_str(text).map_err(|e| StirapError::Config {
        line: e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    // checks key names and types against the schema
    RunConfig::deserialize(toml::Value::Table(table.clone())).map_err(|e| {
        let message = e.message().to_string();
        let line = text
            .lines()
            .position(|l| {
                message
                    .split('`')
                    .nth(1)
                    .is_some_and(|k| l.trim_start().starts_with(k) && l.contains('='))
            })
            .map(|i| i + 1)
            .unwrap_or(0);
        StirapError::Config { line, message }
    })?;
    Ok(table)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Defaults, then the preset, then `text`.
    pub fn from_sources(preset: Option<Preset>, text: &str) -> StirapResult<Self> {
        let mut table = toml::Table::new();
        if let Some(p) = preset {
            merge(&mut table, parse_table(p.source())?);
        }
        merge(&mut table, parse_table(text)?);
        let cfg = RunConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| StirapError::Config { line: 0, message: e.message().to_string() })?;
        cfg.check(text)?;
        Ok(cfg)
    }

    pub fn from_file(preset: Option<Preset>, path: &Path) -> StirapResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| StirapError::Io { path: path.display().to_string(), source })?;
        Self::from_sources(preset, &text)
    }

    /// Resolved configuration as a `#`-prefixed block.
    pub fn header(&self) -> String {
        let body = toml::to_string(self).expect("config serializes");
        body.lines().map(|l| if l.is_empty() { "#".to_string() } else { format!("# {l}") }).collect::<Vec<_>>().join("\n")
            + "\n"
    }

    fn check(&self, text: &str) -> StirapResult<()> {
        let fail = |section: &str, key: &str, message: String| {
            Err(StirapError::Config { line: line_of_key(text, section, key), message: format!("{section}.{key}: {message}") })
        };
        let p = &self.pulses;
        for (key, v) in [("sigma_us", p.sigma_us)] {
            if !(v > 0.0) {
                return fail("pulses", key, format!("must be > 0 μs, got {v}"));
            }
        }
        for (key, v) in [("omega_850_peak_mhz", p.omega_850_peak_mhz), ("omega_854_peak_mhz", p.omega_854_peak_mhz)] {
            if !(v >= 0.0) {
                return fail("pulses", key, format!("must be >= 0 MHz, got {v}"));
            }
        }
        for (key, v) in [("floor_850", p.floor_850), ("floor_854", p.floor_854)] {
            if !(0.0..1.0).contains(&v) {
                return fail("pulses", key, format!("must be a fraction in [0, 1), got {v}"));
            }
        }
        if p.n_pairs == 0 {
            return fail("pulses", "n_pairs", "must be >= 1".into());
        }
        for (key, v) in [("rf_delay_us", p.rf_delay_us), ("shutter_delay_us", p.shutter_delay_us), ("pair_spacing_us", p.pair_spacing_us)] {
            if !(v >= 0.0) {
                return fail("pulses", key, format!("must be >= 0 μs, got {v}"));
            }
        }
        let r = &self.raman;
        for (key, v) in [("dephase_850_per_s", r.dephase_850_per_s), ("dephase_854_per_s", r.dephase_854_per_s)] {
            if !(v >= 0.0) {
                return fail("raman", key, format!("must be >= 0 s⁻¹, got {v}"));
            }
        }
        let s = &self.solver;
        if !(s.tol_rel > 0.0) {
            return fail("solver", "tol_rel", format!("must be > 0, got {}", s.tol_rel));
        }
        if !(s.tol_abs > 0.0) {
            return fail("solver", "tol_abs", format!("must be > 0, got {}", s.tol_abs));
        }
        if s.samples < 2 {
            return fail("solver", "samples", "must be >= 2".into());
        }
        let d = &self.detection;
        if !(d.exposure_ms > 0.0) {
            return fail("detection", "exposure_ms", format!("must be > 0 ms, got {}", d.exposure_ms));
        }
        if !(0.0..=1.0).contains(&d.p_shelved) {
            return fail("detection", "p_shelved", format!("must lie in [0, 1], got {}", d.p_shelved));
        }
        if !(d.bright_rate_per_s > d.background_rate_per_s && d.background_rate_per_s >= 0.0) {
            return fail("detection", "bright_rate_per_s", "must exceed background_rate_per_s >= 0".into());
        }
        if d.shots == 0 {
            return fail("detection", "shots", "must be >= 1".into());
        }
        if self.scan.width_us.iter().any(|&w| !(w > 0.0)) {
            return fail("scan", "width_us", "widths must be > 0 μs".into());
        }
        for (key, g) in [("delay_us", self.scan.delay_us), ("detuning_mhz", self.scan.detuning_mhz)] {
            if g.count == 0 || (g.count > 1 && !(g.max > g.min)) {
                return fail("scan", key, "needs count >= 1 and max > min".into());
            }
        }
        let st = &self.string;
        if st.n_ions == 0 {
            return fail("string", "n_ions", "must be >= 1".into());
        }
        if !(st.axial_freq_mhz > 0.0) {
            return fail("string", "axial_freq_mhz", format!("must be > 0 MHz, got {}", st.axial_freq_mhz));
        }
        if !(st.waist_um > 0.0) {
            return fail("string", "waist_um", format!("must be > 0 μm, got {}", st.waist_um));
        }
        let o = &self.optimize;
        if !(o.delta_tau_min_us <= o.delta_tau_max_us) {
            return fail("optimize", "delta_tau_max_us", "must be >= delta_tau_min_us".into());
        }
        if !(o.sigma_min_us <= o.sigma_max_us && o.sigma_min_us > 0.0) {
            return fail("optimize", "sigma_max_us", "needs 0 < sigma_min_us <= sigma_max_us".into());
        }
        self.model().map(|_| ()).map_err(|e| StirapError::Config { line: 0, message: e.to_string() })
    }

    pub fn scheme(&self) -> StirapResult<LevelScheme> {
        let a = &self.atom;
        LevelScheme::new(
            Branching { total_rate: a.p32_rate_per_s, to_s12: a.p32_to_s12, to_d32: a.p32_to_d32, to_d52: a.p32_to_d52 },
            Branching { total_rate: a.p12_rate_per_s, to_s12: a.p12_to_s12, to_d32: a.p12_to_d32, to_d52: 0.0 },
            a.d52_lifetime_s,
        )
    }

    pub fn model(&self) -> StirapResult<ModelSpec> {
        let p = &self.pulses;
        let r = &self.raman;
        let pulses = PairSpec {
            delta_tau: p.delta_tau_us * US,
            sigma: p.sigma_us * US,
            omega_850: p.omega_850_peak_mhz * MHZ,
            omega_854: p.omega_854_peak_mhz * MHZ,
            floor_850: p.floor_850,
            floor_854: p.floor_854,
            cutoffs: Cutoffs {
                rf_delay: p.rf_delay_us * US,
                rf_suppression_db: p.rf_suppression_db,
                shutter_delay: p.shutter_delay_us * US,
                lead_sigmas: p.lead_sigmas,
            },
        };
        let raman = RamanParams {
            delta_one: r.delta_one_mhz * MHZ,
            delta_two: r.delta_two_mhz * MHZ,
            dephase_850: r.dephase_850_per_s,
            dephase_854: r.dephase_854_per_s,
        };
        let mut spec = ModelSpec::new(self.scheme()?, raman, pulses);
        spec.n_pairs = p.n_pairs;
        spec.pair_spacing = (p.pair_spacing_us > 0.0).then_some(p.pair_spacing_us * US);
        spec.tol_rel = self.solver.tol_rel;
        spec.tol_abs = self.solver.tol_abs;
        spec.build()?;
        Ok(spec)
    }

    pub fn detection(&self) -> DetectionConfig {
        let d = &self.detection;
        DetectionConfig {
            exposure: d.exposure_ms * 1e-3,
            bright_rate: d.bright_rate_per_s,
            background_rate: d.background_rate_per_s,
            d52_lifetime: self.atom.d52_lifetime_s,
        }
    }

    pub fn ion_string(&self) -> StirapResult<IonString> {
        let s = &self.string;
        IonString::new(s.n_ions, s.axial_freq_mhz * MHZ, s.beam_offset_um * 1e-6, s.waist_um * 1e-6)
    }

    pub fn optimize_bounds(&self) -> StirapResult<(Bounds, Bounds, NelderMeadOptions)> {
        let o = &self.optimize;
        Ok((
            Bounds::new(o.delta_tau_min_us * US, o.delta_tau_max_us * US)?,
            Bounds::new(o.sigma_min_us * US, o.sigma_max_us * US)?,
            NelderMeadOptions { max_iter: o.max_iter, f_tol: o.f_tol, x_tol: o.x_tol, ..NelderMeadOptions::default() },
        ))
    }
}
