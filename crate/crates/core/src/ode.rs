//! Explicit Runge–Kutta integrators: the Dormand–Prince 8(5,3) embedded pair
//! with PI step-size control, and a classical fixed-step RK4 used as a
//! reference.

use nalgebra::Matrix5;
use num_complex::Complex64 as C64;

use crate::error::{StirapError, StirapResult};

/// Vector-space operations the integrators need from a state.
pub trait OdeState: Clone {
    fn zeros_like(&self) -> Self;
    /// `self += a * x`
    fn add_scaled(&mut self, a: f64, x: &Self);
    /// Real components, in a fixed order, for error norms.
    fn components(&self) -> impl Iterator<Item = f64> + '_;
    fn n_components(&self) -> usize;
}

impl OdeState for Matrix5<C64> {
    fn zeros_like(&self) -> Self {
        Matrix5::zeros()
    }

    #[inline]
    fn add_scaled(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x.iter()) {
            s.re += a * v.re;
            s.im += a * v.im;
        }
    }

    fn components(&self) -> impl Iterator<Item = f64> + '_ {
        self.iter().flat_map(|z| [z.re, z.im])
    }

    fn n_components(&self) -> usize {
        50
    }
}

impl<const N: usize> OdeState for [f64; N] {
    fn zeros_like(&self) -> Self {
        [0.0; N]
    }

    fn add_scaled(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += a * v;
        }
    }

    fn components(&self) -> impl Iterator<Item = f64> + '_ {
        self.iter().copied()
    }

    fn n_components(&self) -> usize {
        N
    }
}

/// Settings for [`integrate_adaptive`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated from the right-hand side when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
    /// Exponent on the previous error ratio (PI / Lund stabilization).
    pub beta: f64,
    pub safety: f64,
}

impl AdaptiveConfig {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
            beta: 0.04,
            safety: 0.9,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

/// Result of an adaptive run: the final state plus the state at each
/// requested sample time.
#[derive(Clone, Debug)]
pub struct Solution<S> {
    pub t: f64,
    pub y: S,
    pub samples: Vec<(f64, S)>,
    pub stats: StepStats,
}

// Dormand–Prince 8(5,3) tableau (Hairer, Nørsett & Wanner).
const C2: f64 = 0.526001519587677318785587544488e-1;
const C3: f64 = 0.789002279381515978178381316732e-1;
const C4: f64 = 0.118350341907227396726757197510;
const C5: f64 = 0.281649658092772603273242802490;
const C6: f64 = 0.333333333333333333333333333333;
const C7: f64 = 0.25;
const C8: f64 = 0.307692307692307692307692307692;
const C9: f64 = 0.651282051282051282051282051282;
const C10: f64 = 0.6;
const C11: f64 = 0.857142857142857142857142857142;

const A21: f64 = 5.26001519587677318785587544488e-2;
const A31: f64 = 1.97250569845378994544595329183e-2;
const A32: f64 = 5.91751709536136983633785987549e-2;
const A41: f64 = 2.95875854768068491816892993775e-2;
const A43: f64 = 8.87627564304205475450678981324e-2;
const A51: f64 = 2.41365134159266685502369798665e-1;
const A53: f64 = -8.84549479328286085344864962717e-1;
const A54: f64 = 9.24834003261792003115737966543e-1;
const A61: f64 = 3.7037037037037037037037037037e-2;
const A64: f64 = 1.70828608729473871279604482173e-1;
const A65: f64 = 1.25467687566822425016691814123e-1;
const A71: f64 = 3.7109375e-2;
const A74: f64 = 1.70252211019544039314978060272e-1;
const A75: f64 = 6.02165389804559606850219397283e-2;
const A76: f64 = -1.7578125e-2;
const A81: f64 = 3.70920001185047927108779319836e-2;
const A84: f64 = 1.70383925712239993810214054705e-1;
const A85: f64 = 1.07262030446373284651809199168e-1;
const A86: f64 = -1.53194377486244017527936158236e-2;
const A87: f64 = 8.27378916381402288758473766002e-3;
const A91: f64 = 6.24110958716075717114429577812e-1;
const A94: f64 = -3.36089262944694129406857109825;
const A95: f64 = -8.68219346841726006818189891453e-1;
const A96: f64 = 2.75920996994467083049415600797e1;
const A97: f64 = 2.01540675504778934086186788979e1;
const A98: f64 = -4.34898841810699588477366255144e1;
const A101: f64 = 4.77662536438264365890433908527e-1;
const A104: f64 = -2.48811461997166764192642586468;
const A105: f64 = -5.90290826836842996371446475743e-1;
const A106: f64 = 2.12300514481811942347288949897e1;
const A107: f64 = 1.52792336328824235832596922938e1;
const A108: f64 = -3.32882109689848629194453265587e1;
const A109: f64 = -2.03312017085086261358222928593e-2;
const A111: f64 = -9.3714243008598732571704021658e-1;
const A114: f64 = 5.18637242884406370830023853209;
const A115: f64 = 1.09143734899672957818500254654;
const A116: f64 = -8.14978701074692612513997267357;
const A117: f64 = -1.85200656599969598641566180701e1;
const A118: f64 = 2.27394870993505042818970056734e1;
const A119: f64 = 2.49360555267965238987089396762;
const A1110: f64 = -3.0467644718982195003823669022;
const A121: f64 = 2.27331014751653820792359768449;
const A124: f64 = -1.05344954667372501984066689879e1;
const A125: f64 = -2.00087205822486249909675718444;
const A126: f64 = -1.79589318631187989172765950534e1;
const A127: f64 = 2.79488845294199600508499808837e1;
const A128: f64 = -2.85899827713502369474065508674;
const A129: f64 = -8.87285693353062954433549289258;
const A1210: f64 = 1.23605671757943030647266201528e1;
const A1211: f64 = 6.43392746015763530355970484046e-1;

const B1: f64 = 5.42937341165687622380535766363e-2;
const B6: f64 = 4.45031289275240888144113950566;
const B7: f64 = 1.89151789931450038304281599044;
const B8: f64 = -5.8012039600105847814672114227;
const B9: f64 = 3.1116436695781989440891606237e-1;
const B10: f64 = -1.52160949662516078556178806805e-1;
const B11: f64 = 2.01365400804030348374776537501e-1;
const B12: f64 = 4.47106157277725905176885569043e-2;

const BHH1: f64 = 0.244094488188976377952755905512;
const BHH2: f64 = 0.733846688281611857341361741547;
const BHH3: f64 = 0.220588235294117647058823529412e-1;

const ER1: f64 = 0.1312004499419488073250102996e-1;
const ER6: f64 = -0.1225156446376204440720569753e1;
const ER7: f64 = -0.4957589496572501915214079952;
const ER8: f64 = 0.1664377182454986536961530415e1;
const ER9: f64 = -0.3503288487499736816886487290;
const ER10: f64 = 0.3341791187130174790297318841;
const ER11: f64 = 0.8192320648511571246570742613e-1;
const ER12: f64 = -0.2235530786388629525884427845e-1;

fn combo<S: OdeState>(y: &S, h: f64, terms: &[(f64, &S)]) -> S {
    let mut out = y.clone();
    for (a, k) in terms {
        out.add_scaled(h * a, k);
    }
    out
}

fn weighted_rms<S: OdeState>(x: &S, y: &S, atol: f64, rtol: f64) -> f64 {
    let n = x.n_components() as f64;
    let sum: f64 = x
        .components()
        .zip(y.components())
        .map(|(xi, yi)| {
            let sk = atol + rtol * yi.abs();
            (xi / sk).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<S, F>(f: &mut F, t0: f64, y0: &S, f0: &S, dir_span: f64, cfg: &AdaptiveConfig) -> f64
where
    S: OdeState,
    F: FnMut(f64, &S, &mut S),
{
    let d0 = weighted_rms(y0, y0, cfg.atol, cfg.rtol);
    let d1 = weighted_rms(f0, y0, cfg.atol, cfg.rtol);
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 * dir_span } else { 0.01 * d0 / d1 };
    h0 = h0.min(dir_span).min(cfg.h_max);
    let y1 = combo(y0, h0, &[(1.0, f0)]);
    let mut f1 = y0.zeros_like();
    f(t0 + h0, &y1, &mut f1);
    let mut diff = f1.clone();
    diff.add_scaled(-1.0, f0);
    let d2 = weighted_rms(&diff, y0, cfg.atol, cfg.rtol) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 { (1e-6f64).max(h0 * 1e-3) } else { (0.01 / dmax).powf(1.0 / 8.0) };
    (100.0 * h0).min(h1).min(dir_span).min(cfg.h_max)
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1 > t0` with the Dormand–Prince
/// 8(5,3) pair. Steps are shortened to land exactly on each entry of
/// `sample_times` (which must be sorted and lie in `[t0, t1]`).
pub fn integrate_adaptive<S, F>(
    mut f: F,
    t0: f64,
    y0: S,
    t1: f64,
    sample_times: &[f64],
    cfg: &AdaptiveConfig,
) -> StirapResult<Solution<S>>
where
    S: OdeState,
    F: FnMut(f64, &S, &mut S),
{
    if !(t1 > t0) {
        return Err(StirapError::InvalidParameter(format!("integration interval [{t0}, {t1}] is empty")));
    }
    if !(cfg.rtol > 0.0 && cfg.atol > 0.0) {
        return Err(StirapError::InvalidParameter("tolerances must be > 0".into()));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0])
        || sample_times.iter().any(|&s| s < t0 || s > t1)
    {
        return Err(StirapError::InvalidParameter(
            "sample times must be sorted and inside the integration interval".into(),
        ));
    }

    let mut stats = StepStats::default();
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0;
    while next_sample < sample_times.len() && sample_times[next_sample] <= t0 {
        samples.push((sample_times[next_sample], y0.clone()));
        next_sample += 1;
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = y.zeros_like();
    f(t, &y, &mut k1);
    stats.evals += 1;

    let mut h = match cfg.h_init {
        Some(h) => h.min(t1 - t0),
        None => {
            stats.evals += 1;
            initial_step(&mut f, t0, &y, &k1, t1 - t0, cfg)
        }
    };

    let expo1 = 1.0 / 8.0 - cfg.beta * 0.2;
    let (facc1, facc2): (f64, f64) = (1.0 / 0.333, 1.0 / 6.0);
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;

    let (mut k2, mut k3, mut k4, mut k5, mut k6) =
        (y.zeros_like(), y.zeros_like(), y.zeros_like(), y.zeros_like(), y.zeros_like());
    let (mut k7, mut k8, mut k9, mut k10, mut k11, mut k12) = (
        y.zeros_like(),
        y.zeros_like(),
        y.zeros_like(),
        y.zeros_like(),
        y.zeros_like(),
        y.zeros_like(),
    );
    let mut k13 = y.zeros_like();

    while t < t1 {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(StirapError::StepBudget { t, max_steps: cfg.max_steps });
        }
        let target = if next_sample < sample_times.len() { sample_times[next_sample] } else { t1 };
        let mut landing = false;
        h = h.min(cfg.h_max);
        if t + h >= target {
            h = target - t;
            landing = true;
        }
        if h <= 1e-14 * t.abs().max(t1 - t0) {
            return Err(StirapError::StepUnderflow { t, h });
        }

        f(t + C2 * h, &combo(&y, h, &[(A21, &k1)]), &mut k2);
        f(t + C3 * h, &combo(&y, h, &[(A31, &k1), (A32, &k2)]), &mut k3);
        f(t + C4 * h, &combo(&y, h, &[(A41, &k1), (A43, &k3)]), &mut k4);
        f(t + C5 * h, &combo(&y, h, &[(A51, &k1), (A53, &k3), (A54, &k4)]), &mut k5);
        f(t + C6 * h, &combo(&y, h, &[(A61, &k1), (A64, &k4), (A65, &k5)]), &mut k6);
        f(t + C7 * h, &combo(&y, h, &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)]), &mut k7);
        f(
            t + C8 * h,
            &combo(&y, h, &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)]),
            &mut k8,
        );
        f(
            t + C9 * h,
            &combo(&y, h, &[(A91, &k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)]),
            &mut k9,
        );
        f(
            t + C10 * h,
            &combo(
                &y,
                h,
                &[(A101, &k1), (A104, &k4), (A105, &k5), (A106, &k6), (A107, &k7), (A108, &k8), (A109, &k9)],
            ),
            &mut k10,
        );
        f(
            t + C11 * h,
            &combo(
                &y,
                h,
                &[
                    (A111, &k1),
                    (A114, &k4),
                    (A115, &k5),
                    (A116, &k6),
                    (A117, &k7),
                    (A118, &k8),
                    (A119, &k9),
                    (A1110, &k10),
                ],
            ),
            &mut k11,
        );
        let t_new = if landing { target } else { t + h };
        f(
            t_new,
            &combo(
                &y,
                h,
                &[
                    (A121, &k1),
                    (A124, &k4),
                    (A125, &k5),
                    (A126, &k6),
                    (A127, &k7),
                    (A128, &k8),
                    (A129, &k9),
                    (A1210, &k10),
                    (A1211, &k11),
                ],
            ),
            &mut k12,
        );
        stats.evals += 11;

        let y_new = combo(
            &y,
            h,
            &[(B1, &k1), (B6, &k6), (B7, &k7), (B8, &k8), (B9, &k9), (B10, &k10), (B11, &k11), (B12, &k12)],
        );

        // Fifth- and third-order error estimates, combined as in DOP853.
        let zero = y.zeros_like();
        let e3 = combo(
            &zero,
            1.0,
            &[
                (B1 - BHH1, &k1),
                (B6, &k6),
                (B7, &k7),
                (B8, &k8),
                (B9 - BHH2, &k9),
                (B10, &k10),
                (B11, &k11),
                (B12 - BHH3, &k12),
            ],
        );
        let e5 = combo(
            &zero,
            1.0,
            &[(ER1, &k1), (ER6, &k6), (ER7, &k7), (ER8, &k8), (ER9, &k9), (ER10, &k10), (ER11, &k11), (ER12, &k12)],
        );
        let mut err5 = 0.0;
        let mut err3 = 0.0;
        for (((yi, yni), a3), a5) in y.components().zip(y_new.components()).zip(e3.components()).zip(e5.components()) {
            let sk = cfg.atol + cfg.rtol * yi.abs().max(yni.abs());
            err3 += (a3 / sk).powi(2);
            err5 += (a5 / sk).powi(2);
        }
        let n = y.n_components() as f64;
        let mut deno = err5 + 0.01 * err3;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err5 * (1.0 / (n * deno)).sqrt();

        let fac11 = err.powf(expo1);
        let fac = facc2.max(facc1.min(fac11 / facold.powf(cfg.beta) / cfg.safety));
        let mut h_new = h / fac;

        if err <= 1.0 {
            facold = err.max(1e-4);
            stats.accepted += 1;
            f(t_new, &y_new, &mut k13);
            stats.evals += 1;
            std::mem::swap(&mut k1, &mut k13);
            y = y_new;
            t = t_new;
            if landing && next_sample < sample_times.len() {
                while next_sample < sample_times.len() && sample_times[next_sample] <= t {
                    samples.push((sample_times[next_sample], y.clone()));
                    next_sample += 1;
                }
            }
            if last_rejected {
                h_new = h_new.min(h);
                last_rejected = false;
            }
            if landing {
                // a shortened landing step says nothing about the natural step size
                h_new = h_new.max(h);
            }
        } else {
            h_new = h / facc1.min(fac11 / cfg.safety);
            last_rejected = true;
            stats.rejected += 1;
        }
        h = h_new;
    }

    Ok(Solution { t, y, samples, stats })
}

/// Classical fourth-order Runge–Kutta with a uniform step no larger than `h`.
pub fn integrate_rk4<S, F>(mut f: F, t0: f64, y0: S, t1: f64, h: f64) -> S
where
    S: OdeState,
    F: FnMut(f64, &S, &mut S),
{
    let n = ((t1 - t0) / h).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    let mut y = y0;
    let (mut k1, mut k2, mut k3, mut k4) = (y.zeros_like(), y.zeros_like(), y.zeros_like(), y.zeros_like());
    for i in 0..n {
        let t = t0 + i as f64 * h;
        f(t, &y, &mut k1);
        f(t + 0.5 * h, &combo(&y, h, &[(0.5, &k1)]), &mut k2);
        f(t + 0.5 * h, &combo(&y, h, &[(0.5, &k2)]), &mut k3);
        f(t + h, &combo(&y, h, &[(1.0, &k3)]), &mut k4);
        y.add_scaled(h / 6.0, &k1);
        y.add_scaled(h / 3.0, &k2);
        y.add_scaled(h / 3.0, &k3);
        y.add_scaled(h / 6.0, &k4);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_t: f64, y: &[f64; 2], dy: &mut [f64; 2]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }

    #[test]
    fn harmonic_oscillator_to_tolerance() {
        let cfg = AdaptiveConfig::new(1e-12, 1e-12);
        let sol = integrate_adaptive(oscillator, 0.0, [1.0, 0.0], 20.0, &[], &cfg).unwrap();
        assert!((sol.y[0] - 20f64.cos()).abs() < 1e-9, "{:?}", sol.y);
        assert!((sol.y[1] + 20f64.sin()).abs() < 1e-9);
        assert!(sol.stats.rejected < sol.stats.accepted);
    }

    #[test]
    fn samples_land_exactly() {
        let cfg = AdaptiveConfig::new(1e-10, 1e-10);
        let times = [0.0, 0.5, 1.7, 3.0];
        let sol = integrate_adaptive(oscillator, 0.0, [1.0, 0.0], 3.0, &times, &cfg).unwrap();
        assert_eq!(sol.samples.len(), 4);
        for ((ts, y), t) in sol.samples.iter().zip(times) {
            assert_eq!(*ts, t);
            assert!((y[0] - t.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        // RK4 error should drop ~16x when h halves
        let exact = 2f64.cos();
        let e1 = (integrate_rk4(oscillator, 0.0, [1.0, 0.0], 2.0, 0.1)[0] - exact).abs();
        let e2 = (integrate_rk4(oscillator, 0.0, [1.0, 0.0], 2.0, 0.05)[0] - exact).abs();
        let ratio = e1 / e2;
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn exponential_decay_complex_matrix() {
        let cfg = AdaptiveConfig::new(1e-11, 1e-13);
        let mut y0 = Matrix5::zeros();
        y0[(1, 2)] = C64::new(1.0, 0.0);
        let sol = integrate_adaptive(
            |_t, y: &Matrix5<C64>, dy: &mut Matrix5<C64>| *dy = y * C64::new(-1.0, 3.0),
            0.0,
            y0,
            2.0,
            &[],
            &cfg,
        )
        .unwrap();
        let exact = (C64::new(-1.0, 3.0) * 2.0).exp();
        assert!((sol.y[(1, 2)] - exact).norm() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = AdaptiveConfig::new(1e-8, 1e-8);
        assert!(integrate_adaptive(oscillator, 1.0, [1.0, 0.0], 0.0, &[], &cfg).is_err());
        assert!(integrate_adaptive(oscillator, 0.0, [1.0, 0.0], 1.0, &[2.0], &cfg).is_err());
        let mut tiny = cfg;
        tiny.max_steps = 3;
        let err = integrate_adaptive(oscillator, 0.0, [1.0, 0.0], 100.0, &[], &tiny).unwrap_err();
        assert!(matches!(err, StirapError::StepBudget { .. }));
    }
}
