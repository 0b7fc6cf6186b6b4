//! Bounded Nelder–Mead search over (Δτ, σ) and the one-parameter dephasing fit.

use serde::{Deserialize, Serialize};

use crate::error::{StirapError, StirapResult};
use crate::scan::{run_point, ModelSpec, WIDTH_DELAY_RATIO};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> StirapResult<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(StirapError::InvalidParameter(format!("bad bounds [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    fn to_real(&self, u: f64) -> f64 {
        self.lo + (self.hi - self.lo) * u.clamp(0.0, 1.0)
    }

    fn is_point(&self) -> bool {
        self.hi == self.lo
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter (unit-box coordinates) falls below this.
    pub x_tol: f64,
    /// Initial edge length in unit-box coordinates.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iter: 60, f_tol: 1e-5, x_tol: 2e-3, initial_step: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub history: Vec<(Vec<f64>, f64)>,
}

/// Minimizes `f` over the unit box [0, 1]ⁿ; trial points are projected onto it.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> StirapResult<NelderMeadResult>
where
    F: FnMut(&[f64]) -> StirapResult<f64>,
{
    let n = x0.len();
    let clamp = |x: Vec<f64>| -> Vec<f64> { x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect() };
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let start = clamp(x0.to_vec());
    simplex.push((start.clone(), eval(&start, &mut evals)?));
    for i in 0..n {
        let mut p = start.clone();
        // step into the box
        p[i] += if p[i] + opts.initial_step <= 1.0 { opts.initial_step } else { -opts.initial_step };
        let p = clamp(p);
        let v = eval(&p, &mut evals)?;
        simplex.push((p, v));
    }

    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= opts.f_tol && diameter <= opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> =
            (0..n).map(|k| simplex[..n].iter().map(|(p, _)| p[k]).sum::<f64>() / n as f64).collect();
        let along = |c: f64| -> Vec<f64> {
            clamp((0..n).map(|k| centroid[k] + c * (simplex[n].0[k] - centroid[k])).collect())
        };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals)?;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = along(-0.5);
                let v = eval(&x, &mut evals)?;
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x, &mut evals)?;
                (x, v)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = item.0.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    let v = eval(&p, &mut evals)?;
                    *item = (p, v);
                }
            }
        }
        let best = simplex.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("simplex is non-empty");
        history.push(best.clone());
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fbest) = simplex.swap_remove(0);
    Ok(NelderMeadResult { x, f: fbest, iterations, evaluations: evals, converged, history })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub restart: usize,
    pub iteration: usize,
    pub delta_tau: f64,
    pub sigma: f64,
    pub efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub delta_tau: f64,
    pub sigma: f64,
    pub efficiency: f64,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
    /// Set when no restart converged.
    pub warning: bool,
}

/// Restart points in the unit box: the centroid, then the four corners
/// pulled a quarter of the way in.
pub fn restart_points() -> Vec<[f64; 2]> {
    vec![[0.5, 0.5], [0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]]
}

/// Maximizes transfer efficiency over Δτ ∈ `delay`, σ ∈ `width`, keeping
/// every other parameter of `base`. A degenerate bound fixes that coordinate.
pub fn optimize_pulses(
    delay: Bounds,
    width: Bounds,
    base: &ModelSpec,
    opts: &NelderMeadOptions,
) -> StirapResult<OptimizeResult> {
    let at = |u: &[f64], free: &[usize]| -> (f64, f64) {
        let mut x = [0.5, 0.5];
        for (k, &i) in free.iter().enumerate() {
            x[i] = u[k];
        }
        (delay.to_real(x[0]), width.to_real(x[1]))
    };
    let objective = |dt: f64, s: f64| -> StirapResult<f64> {
        Ok(run_point(&base.with_delay(dt).with_width(s, None))?.0)
    };
    let free: Vec<usize> = [(0, delay), (1, width)].iter().filter(|(_, b)| !b.is_point()).map(|(i, _)| *i).collect();

    if free.is_empty() {
        let (dt, s) = at(&[], &free);
        let eff = objective(dt, s)?;
        let trace = vec![TraceEntry { restart: 0, iteration: 0, delta_tau: dt, sigma: s, efficiency: eff }];
        return Ok(OptimizeResult { delta_tau: dt, sigma: s, efficiency: eff, evaluations: 1, trace, warning: false });
    }

    let mut starts: Vec<Vec<f64>> = Vec::new();
    for p in restart_points() {
        let s: Vec<f64> = free.iter().map(|&i| p[i]).collect();
        if !starts.contains(&s) {
            starts.push(s);
        }
    }

    let mut best: Option<(f64, f64, f64)> = None;
    let mut trace = Vec::new();
    let mut evaluations = 0;
    let mut any_converged = false;
    for (r, x0) in starts.iter().enumerate() {
        let res = nelder_mead(
            |u| {
                let (dt, s) = at(u, &free);
                objective(dt, s).map(|e| -e)
            },
            x0,
            opts,
        )?;
        evaluations += res.evaluations;
        any_converged |= res.converged;
        for (k, (u, f)) in res.history.iter().enumerate() {
            let (dt, s) = at(u, &free);
            trace.push(TraceEntry { restart: r, iteration: k + 1, delta_tau: dt, sigma: s, efficiency: -f });
        }
        let (dt, s) = at(&res.x, &free);
        if best.map_or(true, |b| -res.f > b.2) {
            best = Some((dt, s, -res.f));
        }
    }
    let (delta_tau, sigma, efficiency) = best.expect("at least one restart");
    Ok(OptimizeResult { delta_tau, sigma, efficiency, evaluations, trace, warning: !any_converged })
}

/// Width-study efficiency at σ with Δτ = 2σ and a common dephasing `rate`.
pub fn width_point(base: &ModelSpec, sigma: f64, rate: f64) -> StirapResult<f64> {
    Ok(run_point(&base.with_width(sigma, Some(WIDTH_DELAY_RATIO)).with_dephasing(rate))?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingFit {
    /// s⁻¹, applied to both optical coherences.
    pub rate: f64,
    pub efficiency: f64,
    pub target: f64,
    /// False when the target lies outside the efficiency range over the
    /// bracket and the nearer end was returned.
    pub bracketed: bool,
}

/// Dephasing rate in [0, `max_rate`] for which the width-study run at `sigma`
/// reaches `target`. Efficiency falls with dephasing, so a bracketed target
/// is found by bisection on log-rate; otherwise the nearer end is returned.
pub fn fit_dephasing(base: &ModelSpec, sigma: f64, target: f64, max_rate: f64) -> StirapResult<DephasingFit> {
    if !(max_rate > 0.0) {
        return Err(StirapError::InvalidParameter(format!("max_rate must be > 0, got {max_rate}")));
    }
    let e0 = width_point(base, sigma, 0.0)?;
    if e0 <= target {
        return Ok(DephasingFit { rate: 0.0, efficiency: e0, target, bracketed: false });
    }
    let emax = width_point(base, sigma, max_rate)?;
    if emax >= target {
        return Ok(DephasingFit { rate: max_rate, efficiency: emax, target, bracketed: false });
    }
    let (mut lo, mut hi) = ((max_rate * 1e-6).ln(), max_rate.ln());
    let mut best = (lo.exp(), width_point(base, sigma, lo.exp())?);
    if best.1 <= target {
        return Ok(DephasingFit { rate: best.0, efficiency: best.1, target, bracketed: true });
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        let e = width_point(base, sigma, mid.exp())?;
        if (e - target).abs() < (best.1 - target).abs() {
            best = (mid.exp(), e);
        }
        if e > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DephasingFit { rate: best.0, efficiency: best.1, target, bracketed: true })
}
