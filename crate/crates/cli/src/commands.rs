//! One function per subcommand. Each writes its CSV (and optionally an SVG)
//! into the output directory and returns a short summary.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use stirap::analysis::adiabaticity_trace;
use stirap::atom::{DensityMatrix, Level};
use stirap::detection::{classify, decay_during_detection, derive_seed, per_ion_readout, simulate_triples};
use stirap::dynamics::evolve;
use stirap::ions::string_scan;
use stirap::optimize::optimize_pulses;
use stirap::scan::{scan, train_study, EfficiencyCurve, ScanParameter, ScanSpec};
use stirap::StirapResult;

use crate::config::RunConfig;
use crate::output::{fmt, fmt_opt, write_csv, Table};
use crate::plot::{write_plot, Series};

const MHZ: f64 = TAU * 1e6;
const US: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    ScanDelay,
    ScanDetuning,
    ScanWidth,
    PulseTrain,
    StringScan,
    Optimize,
    Detect,
    Envelopes,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Simulate,
        Command::ScanDelay,
        Command::ScanDetuning,
        Command::ScanWidth,
        Command::PulseTrain,
        Command::StringScan,
        Command::Optimize,
        Command::Detect,
        Command::Envelopes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::ScanDelay => "scan-delay",
            Command::ScanDetuning => "scan-detuning",
            Command::ScanWidth => "scan-width",
            Command::PulseTrain => "pulse-train",
            Command::StringScan => "string-scan",
            Command::Optimize => "optimize",
            Command::Detect => "detect",
            Command::Envelopes => "envelopes",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    plot: bool,
    header: String,
    report: Report,
}

impl Ctx<'_> {
    fn csv(&mut self, name: &str, table: &Table) -> StirapResult<()> {
        let p = write_csv(self.out, name, &self.header, table)?;
        self.report.files.push(p);
        Ok(())
    }

    fn svg(&mut self, name: &str, title: &str, x: &str, y: &str, series: Vec<Series>) -> StirapResult<()> {
        if self.plot {
            let p = write_plot(self.out, name, title, x, y, &series)?;
            self.report.files.push(p);
        }
        Ok(())
    }

    fn say(&mut self, line: String) {
        self.report.summary.push(line);
    }
}

pub fn run(command: Command, cfg: &RunConfig, out: &Path, plot: bool) -> StirapResult<Report> {
    let mut ctx = Ctx { cfg, out, plot, header: format!("# stirap {} {}\n{}", env!("CARGO_PKG_VERSION"), command.name(), cfg.header()), report: Report::default() };
    match command {
        Command::Simulate => simulate(&mut ctx)?,
        Command::ScanDelay => curve_command(&mut ctx, ScanParameter::Delay)?,
        Command::ScanDetuning => curve_command(&mut ctx, ScanParameter::TwoPhotonDetuning)?,
        Command::ScanWidth => curve_command(&mut ctx, ScanParameter::Width)?,
        Command::PulseTrain => pulse_train(&mut ctx)?,
        Command::StringScan => string(&mut ctx)?,
        Command::Optimize => optimize(&mut ctx)?,
        Command::Detect => detect(&mut ctx)?,
        Command::Envelopes => envelopes(&mut ctx)?,
    }
    Ok(ctx.report)
}

fn sample_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { t1 } else { t0 + (t1 - t0) * k as f64 / (n - 1) as f64 }).collect()
}

fn simulate(ctx: &mut Ctx) -> StirapResult<()> {
    let model = ctx.cfg.model()?.build()?;
    let times = sample_times(model.t_start, model.t_end, ctx.cfg.solver.samples);
    let evo = evolve(&model, &DensityMatrix::pure_state(Level::D32), &times)?;
    let mut t = Table::new(&["t_us", "p_s12", "p_p12", "p_d32", "p_p32", "p_d52", "re_d32_d52", "im_d32_d52"]);
    for (time, rho) in &evo.samples {
        let p = rho.populations();
        let c = rho.coherence(Level::D32, Level::D52);
        let mut row = vec![fmt(time / US)];
        row.extend(p.iter().map(|&x| fmt(x)));
        row.extend([fmt(c.re), fmt(c.im)]);
        t.push(row);
    }
    ctx.csv("trajectory.csv", &t)?;
    let series = [Level::D32, Level::P32, Level::D52, Level::S12]
        .iter()
        .map(|&l| Series {
            label: l.label().to_string(),
            points: evo.samples.iter().map(|(time, r)| (time / US, r.population_unchecked(l))).collect(),
        })
        .collect();
    ctx.svg("trajectory.svg", "populations", "t (μs)", "population", series)?;
    let eff = evo.final_state.population(Level::D52)?;
    ctx.say(format!("transfer efficiency (D5/2 population): {eff:.6}"));
    ctx.say(format!(
        "steps accepted {} rejected {}; max trace drift {:.2e}, min eigenvalue {:.2e}",
        evo.stats.accepted, evo.stats.rejected, evo.integrity.max_trace_drift, evo.integrity.min_eigenvalue
    ));
    Ok(())
}

fn param_unit(p: ScanParameter) -> (&'static str, f64) {
    match p {
        ScanParameter::Delay => ("delta_tau_us", US),
        ScanParameter::TwoPhotonDetuning => ("delta_two_mhz", MHZ),
        ScanParameter::Width => ("sigma_us", US),
        ScanParameter::NPairs => ("n_pairs", 1.0),
    }
}

fn curve_table(curve: &EfficiencyCurve) -> Table {
    let (name, unit) = param_unit(curve.parameter);
    let mut t = Table::new(&["param", "model_efficiency", "measured_efficiency"]);
    t.note(format!("param: {name}"));
    for r in &curve.rows {
        t.push(vec![fmt(r.value / unit), fmt(r.model_efficiency), fmt_opt(r.measured_efficiency)]);
    }
    t
}

fn curve_series(curve: &EfficiencyCurve) -> Vec<Series> {
    let (_, unit) = param_unit(curve.parameter);
    let mut s = vec![Series { label: "model".into(), points: curve.rows.iter().map(|r| (r.value / unit, r.model_efficiency)).collect() }];
    if curve.rows.iter().any(|r| r.measured_efficiency.is_some()) {
        s.push(Series {
            label: "simulated measurement".into(),
            points: curve.rows.iter().filter_map(|r| r.measured_efficiency.map(|m| (r.value / unit, m))).collect(),
        });
    }
    s
}

fn measured(ctx: &Ctx, curve: EfficiencyCurve) -> StirapResult<EfficiencyCurve> {
    if ctx.cfg.scan.measure {
        curve.with_measurements(&ctx.cfg.detection(), ctx.cfg.detection.shots, ctx.cfg.seed)
    } else {
        Ok(curve)
    }
}

fn grid_for(cfg: &RunConfig, p: ScanParameter) -> Vec<f64> {
    match p {
        ScanParameter::Delay => cfg.scan.delay_us.values().into_iter().map(|v| v * US).collect(),
        ScanParameter::TwoPhotonDetuning => cfg.scan.detuning_mhz.values().into_iter().map(|v| v * MHZ).collect(),
        ScanParameter::Width => cfg.scan.width_us.iter().map(|v| v * US).collect(),
        ScanParameter::NPairs => (1..=cfg.scan.max_pairs).map(|n| n as f64).collect(),
    }
}

fn curve_command(ctx: &mut Ctx, parameter: ScanParameter) -> StirapResult<()> {
    let spec = ScanSpec { parameter, grid: grid_for(ctx.cfg, parameter), base: ctx.cfg.model()? };
    let curve = measured(ctx, scan(&spec)?)?;
    let stem = format!("scan_{}", parameter.name());
    ctx.csv(&format!("{stem}.csv"), &curve_table(&curve))?;
    let (name, unit) = param_unit(parameter);
    ctx.svg(&format!("{stem}.svg"), &format!("efficiency vs {name}"), name, "efficiency", curve_series(&curve))?;
    if let Some(b) = curve.best() {
        ctx.say(format!("best {name} = {:.4}: efficiency {:.6}", b.value / unit, b.model_efficiency));
    }
    Ok(())
}

fn pulse_train(ctx: &mut Ctx) -> StirapResult<()> {
    let counts: Vec<usize> = (1..=ctx.cfg.scan.max_pairs.max(1)).collect();
    let base = ctx.cfg.model()?;
    let rows = train_study(&base, &counts)?;
    let mut t = Table::new(&["n_pairs", "p_d32", "p_d52", "target_population", "per_pair_efficiency"]);
    t.note(format!("pair_spacing_us: {}", fmt(base.spacing() / US)));
    for r in &rows {
        t.push(vec![r.n_pairs.to_string(), fmt(r.d32), fmt(r.d52), fmt(r.target), fmt(r.per_pair)]);
    }
    ctx.csv("pulse_train.csv", &t)?;
    let series = vec![
        Series { label: "target population".into(), points: rows.iter().map(|r| (r.n_pairs as f64, r.target)).collect() },
        Series { label: "per-pair efficiency".into(), points: rows.iter().map(|r| (r.n_pairs as f64, r.per_pair)).collect() },
    ];
    ctx.svg("pulse_train.svg", "alternating pulse train", "pairs", "population", series)?;
    if let Some(last) = rows.last() {
        ctx.say(format!(
            "{} pairs: target population {:.6}, per-pair efficiency {:.6}",
            last.n_pairs, last.target, last.per_pair
        ));
    }
    Ok(())
}

fn string(ctx: &mut Ctx) -> StirapResult<()> {
    let string = ctx.cfg.ion_string()?;
    let spec = ScanSpec { parameter: ScanParameter::Delay, grid: grid_for(ctx.cfg, ScanParameter::Delay), base: ctx.cfg.model()? };
    let curves = string_scan(&string, &spec)?;
    let scales = string.rabi_scales()?;
    let mut t = Table::new(&["ion", "position_um", "rabi_scale", "param", "model_efficiency", "measured_efficiency"]);
    t.note("param: delta_tau_us");
    let mut series = Vec::new();
    for (i, curve) in curves.into_iter().enumerate() {
        let curve = measured(ctx, curve)?;
        for r in &curve.rows {
            t.push(vec![
                (i + 1).to_string(),
                fmt(string.positions[i] / 1e-6),
                fmt(scales[i]),
                fmt(r.value / US),
                fmt(r.model_efficiency),
                fmt_opt(r.measured_efficiency),
            ]);
        }
        if let Some(b) = curve.best() {
            ctx.say(format!("ion {}: z = {:+.2} μm, peak {:.4} at Δτ = {:.2} μs", i + 1, string.positions[i] / 1e-6, b.model_efficiency, b.value / US));
        }
        series.push(Series { label: format!("ion {}", i + 1), points: curve.rows.iter().map(|r| (r.value / US, r.model_efficiency)).collect() });
    }
    ctx.csv("string_scan.csv", &t)?;
    ctx.svg("string_scan.svg", "per-ion efficiency", "delta_tau_us", "efficiency", series)?;
    Ok(())
}

fn optimize(ctx: &mut Ctx) -> StirapResult<()> {
    let (delay, width, opts) = ctx.cfg.optimize_bounds()?;
    let res = optimize_pulses(delay, width, &ctx.cfg.model()?, &opts)?;
    let mut t = Table::new(&["restart", "iteration", "delta_tau_us", "sigma_us", "efficiency"]);
    for e in &res.trace {
        t.push(vec![e.restart.to_string(), e.iteration.to_string(), fmt(e.delta_tau / US), fmt(e.sigma / US), fmt(e.efficiency)]);
    }
    ctx.csv("optimize_trace.csv", &t)?;
    let mut r = Table::new(&["delta_tau_us", "sigma_us", "efficiency", "evaluations", "warning"]);
    r.push(vec![fmt(res.delta_tau / US), fmt(res.sigma / US), fmt(res.efficiency), res.evaluations.to_string(), res.warning.to_string()]);
    ctx.csv("optimize_result.csv", &r)?;
    ctx.say(format!(
        "optimum Δτ = {:.4} μs, σ = {:.4} μs, efficiency {:.6} ({} evaluations{})",
        res.delta_tau / US,
        res.sigma / US,
        res.efficiency,
        res.evaluations,
        if res.warning { ", WARNING: no restart converged" } else { "" }
    ));
    Ok(())
}

fn detect(ctx: &mut Ctx) -> StirapResult<()> {
    let det = ctx.cfg.detection();
    let d = &ctx.cfg.detection;
    let triples = simulate_triples(d.p_shelved, d.n_ions, &det, d.shots, ctx.cfg.seed)?;
    let mut t = Table::new(&["shot", "bright_l", "signal_s", "background_b", "estimate"]);
    let mut sum = 0.0;
    for (k, tr) in triples.iter().enumerate() {
        let e = tr.estimate()?;
        sum += e;
        t.push(vec![k.to_string(), tr.bright.to_string(), tr.signal.to_string(), tr.background.to_string(), fmt(e)]);
    }
    ctx.csv("detect.csv", &t)?;
    let mean = sum / triples.len() as f64;
    let expected = decay_during_detection(d.p_shelved, &det)?;
    ctx.say(format!("mean estimate {mean:.6}; decay-corrected shelved fraction {expected:.6}"));

    let ions = vec![d.p_shelved; ctx.cfg.string.n_ions];
    let counts = per_ion_readout(&ions, &det, derive_seed(ctx.cfg.seed, 1))?;
    let mut r = Table::new(&["ion", "counts", "bright"]);
    r.note(format!("threshold_counts: {}", fmt(det.threshold())));
    for rec in classify(&counts, &det) {
        r.push(vec![(rec.ion + 1).to_string(), rec.counts.to_string(), rec.bright.to_string()]);
    }
    ctx.csv("detect_ions.csv", &r)?;
    let est: Vec<(f64, f64)> = triples.iter().enumerate().filter_map(|(k, tr)| tr.estimate().ok().map(|e| (k as f64, e))).collect();
    ctx.svg("detect.svg", "estimator per shot", "shot", "(L-S)/(L-B)", vec![Series { label: "estimate".into(), points: est }])?;
    Ok(())
}

fn envelopes(ctx: &mut Ctx) -> StirapResult<()> {
    let spec = ctx.cfg.model()?;
    let model = spec.build()?;
    let times = sample_times(model.t_start, model.t_end, ctx.cfg.solver.samples);
    let mut t = Table::new(&["t_us", "omega_850_mhz", "omega_854_mhz"]);
    t.note("Rabi frequencies divided by 2π");
    for &time in &times {
        let (a, b) = model.rabi(time);
        t.push(vec![fmt(time / US), fmt(a / MHZ), fmt(b / MHZ)]);
    }
    ctx.csv("envelopes.csv", &t)?;
    let series = vec![
        Series { label: "850 nm".into(), points: times.iter().map(|&s| (s / US, model.rabi(s).0 / MHZ)).collect() },
        Series { label: "854 nm".into(), points: times.iter().map(|&s| (s / US, model.rabi(s).1 / MHZ)).collect() },
    ];
    ctx.svg("envelopes.svg", "Rabi envelopes", "t (μs)", "Ω/2π (MHz)", series)?;

    let pair = &model.train.pairs[0];
    let trace = adiabaticity_trace(pair, &times);
    let mut a = Table::new(&["t_us", "theta", "theta_dot", "omega_eff", "adiabaticity_ratio"]);
    a.note("first pair only; rad, rad/s");
    for s in &trace.samples {
        a.push(vec![fmt(s.t / US), fmt(s.theta), fmt(s.theta_dot), fmt(s.omega_eff), fmt(s.ratio)]);
    }
    ctx.csv("adiabaticity.csv", &a)?;
    ctx.say(format!("max adiabaticity ratio where ω_eff > 1% of peak: {:.4e}", trace.max_ratio()));
    Ok(())
}
