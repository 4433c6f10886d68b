//! Event-driven simulation of the zigzag process, with occupation-time
//! marginals and autocorrelation estimates computed exactly along the
//! piecewise-linear path.
//!
//! Random numbers come from ChaCha8 seeded with `seed_from_u64(seed)`;
//! trajectory `k` of a batch uses stream `k` of that generator.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::potential::{switching_rate, Direction, PotentialModel, SwitchingRateSpec, Velocity};
use crate::quadrature::{integrate_finite, integrate_semiinfinite, DecayProfile, QuadratureConfig};

/// Thinning window length, in units of time (equivalently, of distance).
const WINDOW: f64 = 1.0;

/// Samples per window used to bound the rate for non-Gaussian potentials.
const BOUND_SAMPLES: usize = 16;

/// Velocity switch at time `t` and position `x`; `theta` is the velocity
/// afterwards. The first event of a path is its initial state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub t: f64,
    pub x: f64,
    pub theta: Velocity,
}

#[derive(Clone, Debug)]
pub struct ZigzagPath {
    events: Vec<Event>,
    horizon: f64,
    seed: u64,
    stream: u64,
    model: PotentialModel,
    spec: SwitchingRateSpec,
}

/// Linear piece of a path: `x(t) = x + theta (t - start)` on `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub x: f64,
    pub theta: Velocity,
}

impl Segment {
    pub fn position(&self, t: f64) -> f64 {
        self.x + self.theta.sign() * (t - self.start)
    }

    /// Range of positions visited, as `(low, high)`.
    pub fn span(&self) -> (f64, f64) {
        let y = self.position(self.end);
        (self.x.min(y), self.x.max(y))
    }
}

impl ZigzagPath {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Number of velocity switches.
    pub fn switches(&self) -> usize {
        self.events.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn model(&self) -> &PotentialModel {
        &self.model
    }

    pub fn spec(&self) -> &SwitchingRateSpec {
        &self.spec
    }

    pub fn segment(&self, k: usize) -> Segment {
        let e = self.events[k];
        let end = self.events.get(k + 1).map_or(self.horizon, |n| n.t);
        Segment { start: e.t, end, x: e.x, theta: e.theta }
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        (0..self.events.len()).map(|k| self.segment(k))
    }

    /// Index of the segment containing `t` (the last one at the horizon).
    fn segment_index(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.t <= t).saturating_sub(1)
    }

    pub fn state_at(&self, t: f64) -> (f64, Velocity) {
        let s = self.segment(self.segment_index(t));
        (s.position(t), s.theta)
    }

    /// Fraction of `[0, T]` spent in states satisfying `pred`, for predicates
    /// that are constant on each segment.
    pub fn time_fraction(&self, pred: impl Fn(&Segment) -> bool) -> f64 {
        self.segments().filter(|s| pred(s)).map(|s| s.end - s.start).sum::<f64>() / self.horizon
    }

    /// Fraction of time with `x > 0`.
    pub fn positive_fraction(&self) -> f64 {
        let mut total = 0.0;
        for s in self.segments() {
            let y = s.position(s.end);
            let (lo, hi) = (s.x.min(y), s.x.max(y));
            total += (hi.max(0.0) - lo.max(0.0)).max(0.0);
        }
        total / self.horizon
    }
}

fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    // (0, 1]
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn exponential(rng: &mut ChaCha8Rng) -> f64 {
    -uniform_open(rng).ln()
}

/// Time until the next switch for a Gaussian potential with scale `sigma`,
/// by inverting the integrated rate `int_0^s max(a + u, 0) / sigma^2 + r du = e`
/// with `a = theta x`.
fn gaussian_switch_time(a: f64, sigma: f64, r: f64, e: f64) -> f64 {
    let s2 = sigma * sigma;
    let (offset, e) = if a < 0.0 {
        // rate is r until the mode is reached
        if r * -a >= e {
            return e / r;
        }
        (-a, e - r * -a)
    } else {
        (0.0, e)
    };
    let b = a.max(0.0) + r * s2;
    // s^2 / 2 + b s - sigma^2 e = 0, in cancellation-free form
    offset + 2.0 * s2 * e / (b + (b * b + 2.0 * s2 * e).sqrt())
}

/// Simulates one trajectory on `[0, horizon]` from `(x0, theta0)`, using
/// stream 0 of the generator seeded with `seed`.
pub fn simulate(
    model: &PotentialModel,
    spec: &SwitchingRateSpec,
    x0: f64,
    theta0: Velocity,
    horizon: f64,
    seed: u64,
) -> Result<ZigzagPath> {
    simulate_stream(model, spec, x0, theta0, horizon, seed, 0)
}

pub fn simulate_stream(
    model: &PotentialModel,
    spec: &SwitchingRateSpec,
    x0: f64,
    theta0: Velocity,
    horizon: f64,
    seed: u64,
    stream: u64,
) -> Result<ZigzagPath> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain { what: "simulation horizon", value: horizon });
    }
    if !x0.is_finite() {
        return Err(Error::Domain { what: "initial position", value: x0 });
    }
    spec_check(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut events = alloc::vec![Event { t: 0.0, x: x0, theta: theta0 }];
    if model.is_gaussian() {
        run_gaussian(model, spec, &mut rng, horizon, &mut events);
    } else {
        run_thinning(model, spec, &mut rng, horizon, &mut events)?;
    }
    Ok(ZigzagPath { events, horizon, seed, stream, model: model.clone(), spec: *spec })
}

fn spec_check(spec: &SwitchingRateSpec) -> Result<()> {
    SwitchingRateSpec::with_refreshment(spec.refreshment).map(|_| ())
}

fn run_gaussian(
    model: &PotentialModel,
    spec: &SwitchingRateSpec,
    rng: &mut ChaCha8Rng,
    horizon: f64,
    events: &mut Vec<Event>,
) {
    let sigma = model.sigma();
    let Event { mut t, mut x, mut theta } = events[0];
    loop {
        let s = gaussian_switch_time(theta.sign() * x, sigma, spec.refreshment, exponential(rng));
        if t + s >= horizon {
            break;
        }
        t += s;
        x += theta.sign() * s;
        theta = theta.flip();
        events.push(Event { t, x, theta });
    }
}

fn run_thinning(
    model: &PotentialModel,
    spec: &SwitchingRateSpec,
    rng: &mut ChaCha8Rng,
    horizon: f64,
    events: &mut Vec<Event>,
) -> Result<()> {
    let Event { mut t, mut x, mut theta } = events[0];
    while t < horizon {
        let w = WINDOW.min(horizon - t);
        let rate_at = |u: f64| switching_rate(model, spec, x + theta.sign() * u, theta);
        let sampled = (0..=BOUND_SAMPLES).map(|k| rate_at(w * k as f64 / BOUND_SAMPLES as f64)).fold(0.0, f64::max);
        let bound = 1.05 * sampled;
        if !bound.is_finite() {
            return Err(Error::RateBound { window_start: t, window_end: t + w, bound, rate: sampled });
        }
        let mut elapsed = 0.0;
        let mut switched = false;
        if bound > 0.0 {
            loop {
                elapsed += exponential(rng) / bound;
                if elapsed >= w {
                    break;
                }
                let rate = rate_at(elapsed);
                if rate > bound {
                    return Err(Error::RateBound { window_start: t, window_end: t + w, bound, rate });
                }
                if uniform_open(rng) * bound <= rate {
                    switched = true;
                    break;
                }
            }
        }
        let step = if switched { elapsed } else { w };
        t += step;
        x += theta.sign() * step;
        if switched {
            theta = theta.flip();
            events.push(Event { t, x, theta });
        }
    }
    Ok(())
}

/// Three-point Gauss-Legendre rule on `[a, b]`, exact for polynomials of degree 5.
fn gauss3(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    const NODE: f64 = 0.7745966692414834;
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * (5.0 * f(m - h * NODE) + 8.0 * f(m) + 5.0 * f(m + h * NODE)) / 9.0
}

/// Normalized autocorrelation `Corr[g(Z_s), g(Z_{s+t})]` of a stationary
/// path at each lag `t`, from time averages over `[0, T - t]`.
pub fn autocorrelation(path: &ZigzagPath, observable: impl Fn(f64, Velocity) -> f64, lags: &[f64]) -> Result<Vec<f64>> {
    let horizon = path.horizon;
    let max_lag = lags.iter().copied().fold(0.0, f64::max);
    if max_lag > horizon / 10.0 {
        return Err(Error::InsufficientHorizon { max_lag, horizon });
    }
    if let Some(&bad) = lags.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::Domain { what: "autocorrelation lag", value: bad });
    }
    let g = |s: &Segment, t: f64| observable(s.position(t), s.theta);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for s in path.segments() {
        sum += gauss3(s.start, s.end, |t| g(&s, t));
        sum_sq += gauss3(s.start, s.end, |t| g(&s, t).powi(2));
    }
    let mean = sum / horizon;
    let variance = sum_sq / horizon - mean * mean;
    if !(variance > 1e-12 * (sum_sq / horizon)) {
        return Err(Error::DegenerateObservable);
    }
    let mut out = Vec::with_capacity(lags.len());
    for &lag in lags {
        let end = horizon - lag;
        let mut i = 0;
        let mut j = path.segment_index(lag);
        let mut s = 0.0;
        let mut acc = 0.0;
        while s < end {
            let (a, b) = (path.segment(i), path.segment(j));
            let next = a.end.min(b.end - lag).min(end);
            if next > s {
                acc += gauss3(s, next, |t| (g(&a, t) - mean) * (g(&b, t + lag) - mean));
            }
            s = next;
            if a.end <= s {
                i += 1;
            }
            if b.end - lag <= s && j + 1 < path.events.len() {
                j += 1;
            }
            if i >= path.events.len() {
                break;
            }
        }
        out.push(acc / end / variance);
    }
    Ok(out)
}

/// Exponential rate fitted to the envelope of an oscillating
/// autocorrelation: least squares on `ln |acf|` at its local maxima.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeFit {
    pub rate: f64,
    pub intercept: f64,
    /// `(lag, |acf|)` at the peaks used.
    pub peaks: Vec<(f64, f64)>,
}

/// Fits `|acf| ~ e^{intercept - rate t}` through the interior local maxima of
/// `|acf|` above `floor`, refined by parabolic interpolation. Lag 0 is used
/// only when fewer than two interior peaks exist.
pub fn fit_envelope_decay(lags: &[f64], acf: &[f64], floor: f64) -> Result<EnvelopeFit> {
    if lags.len() != acf.len() || lags.len() < 3 {
        return Err(Error::Domain { what: "autocorrelation samples", value: lags.len() as f64 });
    }
    let a: Vec<f64> = acf.iter().map(|v| v.abs()).collect();
    let mut peaks = Vec::new();
    for i in 1..a.len() - 1 {
        if a[i] > floor && a[i] >= a[i - 1] && a[i] > a[i + 1] {
            let denom = a[i - 1] - 2.0 * a[i] + a[i + 1];
            let (dt, da) = if denom < 0.0 {
                let d = 0.5 * (a[i - 1] - a[i + 1]) / denom;
                (d * (lags[i + 1] - lags[i - 1]) / 2.0, -0.25 * (a[i - 1] - a[i + 1]) * d)
            } else {
                (0.0, 0.0)
            };
            peaks.push((lags[i] + dt, a[i] + da));
        }
    }
    if peaks.len() < 2 && a[0] > floor {
        peaks.insert(0, (lags[0], a[0]));
    }
    if peaks.len() < 2 {
        return Err(Error::Domain { what: "envelope peaks above floor", value: peaks.len() as f64 });
    }
    let n = peaks.len() as f64;
    let (st, sy) = peaks.iter().fold((0.0, 0.0), |(st, sy), &(t, v)| (st + t, sy + v.ln()));
    let (mt, my) = (st / n, sy / n);
    let (sxy, sxx) =
        peaks.iter().fold((0.0, 0.0), |(sxy, sxx), &(t, v)| (sxy + (t - mt) * (v.ln() - my), sxx + (t - mt).powi(2)));
    let slope = sxy / sxx;
    Ok(EnvelopeFit { rate: -slope, intercept: my - slope * mt, peaks })
}

/// Occupation-time histogram of the position and its Kolmogorov-Smirnov
/// distance to the target marginal `e^{-U} / int e^{-U}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginal {
    /// `bins + 1` increasing edges spanning the visited positions.
    pub edges: Vec<f64>,
    /// Fraction of time spent in each bin.
    pub masses: Vec<f64>,
    pub ks: f64,
}

/// Bins used to evaluate the occupation CDF for the KS distance.
const KS_BINS: usize = 8192;

/// Time spent in each of `bins` equal bins of `[lo, hi]`, divided by `T`.
fn occupation(path: &ZigzagPath, lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let width = (hi - lo) / bins as f64;
    let mut mass = alloc::vec![0.0; bins];
    // diff[k] accumulates bins fully covered by a segment
    let mut diff = alloc::vec![0.0; bins + 1];
    let bin_of = |y: f64| (((y - lo) / width) as usize).min(bins - 1);
    for s in path.segments() {
        let (a, b) = s.span();
        let (ia, ib) = (bin_of(a), bin_of(b));
        if ia == ib {
            mass[ia] += b - a;
            continue;
        }
        mass[ia] += lo + (ia + 1) as f64 * width - a;
        mass[ib] += b - (lo + ib as f64 * width);
        diff[ia + 1] += 1.0;
        diff[ib] -= 1.0;
    }
    let mut covering = 0.0;
    for k in 0..bins {
        covering += diff[k];
        mass[k] += covering * width;
        mass[k] /= path.horizon;
    }
    mass
}

pub fn empirical_marginal(path: &ZigzagPath, bins: usize) -> Result<Marginal> {
    if bins < 10 {
        return Err(Error::Domain { what: "histogram bins (at least 10)", value: bins as f64 });
    }
    let (lo, hi) = path
        .segments()
        .map(|s| s.span())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (a, b)| (l.min(a), h.max(b)));
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let edges: Vec<f64> = (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect();
    let masses = occupation(path, lo, hi, bins);

    let model = &path.model;
    let cfg = QuadratureConfig::default();
    let density = |x: f64| (-model.value(x)).exp();
    let norm = model.normalizer()?;
    let left = integrate_semiinfinite(density, lo, &DecayProfile::potential(model, 0.0, Direction::Negative), &cfg)?;
    let fine = occupation(path, lo, hi, KS_BINS);
    let width = (hi - lo) / KS_BINS as f64;
    let mut target = left.value / norm;
    let mut empirical = 0.0;
    let mut ks = target.abs();
    for (k, m) in fine.iter().enumerate() {
        let a = lo + k as f64 * width;
        target += integrate_finite(density, a, a + width, &cfg)?.value / norm;
        empirical += m;
        ks = ks.max((target - empirical).abs());
    }
    Ok(Marginal { edges, masses, ks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gauss() -> PotentialModel {
        PotentialModel::gaussian(1.0).unwrap()
    }

    fn canonical() -> SwitchingRateSpec {
        SwitchingRateSpec::canonical()
    }

    #[test]
    fn waits_until_the_mode() {
        for seed in 0..50 {
            let p = simulate(&gauss(), &canonical(), -3.0, Velocity::Plus, 50.0, seed).unwrap();
            assert!(p.events()[1].t > 3.0);
        }
    }

    #[test]
    fn path_invariants() {
        for model in [gauss(), PotentialModel::beta_family(2.5).unwrap()] {
            let p = simulate(&model, &canonical(), 0.5, Velocity::Minus, 500.0, 1).unwrap();
            assert!(p.switches() > 50);
            for w in p.events().windows(2) {
                assert!(w[1].t > w[0].t);
                assert_ne!(w[1].theta, w[0].theta);
                let expected = w[0].x + w[0].theta.sign() * (w[1].t - w[0].t);
                assert!((w[1].x - expected).abs() < 1e-9);
                // canonical switches only happen while moving uphill
                assert!(w[0].theta.sign() * model.slope(w[1].x) >= 0.0);
            }
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = simulate(&gauss(), &canonical(), 0.0, Velocity::Plus, 1000.0, 42).unwrap();
        let b = simulate(&gauss(), &canonical(), 0.0, Velocity::Plus, 1000.0, 42).unwrap();
        assert_eq!(a.events(), b.events());
        let c = simulate_stream(&gauss(), &canonical(), 0.0, Velocity::Plus, 1000.0, 42, 1).unwrap();
        assert_ne!(a.events(), c.events());
    }

    proptest! {
        #[test]
        fn gaussian_inversion_hits_target(a in -5.0f64..5.0, sigma in 0.3f64..3.0, r in 0.0f64..2.0, e in 1e-6f64..20.0) {
            let s = gaussian_switch_time(a, sigma, r, e);
            let integrated = |s: f64| {
                let u0 = (-a).max(0.0).min(s);
                let pos = |u: f64| (a + u).max(0.0);
                (pos(s) * pos(s) - pos(u0) * pos(u0)) / (2.0 * sigma * sigma) + r * s
            };
            prop_assert!((integrated(s) - e).abs() <= 1e-9 * e.max(1.0));
        }
    }

    #[test]
    fn gaussian_marginal_and_balance() {
        let p = simulate(&gauss(), &canonical(), 0.0, Velocity::Plus, 1e5, 7).unwrap();
        let m = empirical_marginal(&p, 40).unwrap();
        assert!(m.ks < 0.01, "{}", m.ks);
        assert!((m.masses.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let batches = 100;
        let len = p.horizon() / batches as f64;
        let fractions: Vec<f64> = (0..batches)
            .map(|k| {
                let (a, b) = (k as f64 * len, (k + 1) as f64 * len);
                let mut pos = 0.0;
                for s in p.segments().filter(|s| s.end > a && s.start < b) {
                    let (t0, t1) = (s.start.max(a), s.end.min(b));
                    let (y0, y1) = (s.position(t0), s.position(t1));
                    pos += (y0.max(y1).max(0.0) - y0.min(y1).max(0.0)).max(0.0);
                }
                pos / len
            })
            .collect();
        let mean = fractions.iter().sum::<f64>() / batches as f64;
        let se =
            (fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (batches - 1) as f64 / batches as f64).sqrt();
        assert!((mean - p.positive_fraction()).abs() < 1e-9);
        assert!((mean - 0.5).abs() <= 3.0 * se, "{mean} {se}");
        let plus = p.time_fraction(|s| s.theta == Velocity::Plus);
        assert!((plus - 0.5).abs() < 0.01, "{plus}");
    }

    #[test]
    fn beta_marginal() {
        let model = PotentialModel::beta_family(2.5).unwrap();
        let p = simulate(&model, &canonical(), 0.0, Velocity::Plus, 1e5, 11).unwrap();
        let m = empirical_marginal(&p, 50).unwrap();
        assert!(m.ks < 0.02, "{}", m.ks);
    }

    #[test]
    fn refreshment_is_supported() {
        let spec = SwitchingRateSpec::with_refreshment(0.5).unwrap();
        let p = simulate(&gauss(), &spec, 0.0, Velocity::Plus, 2e4, 3).unwrap();
        assert!(empirical_marginal(&p, 20).unwrap().ks < 0.03);
        let q = simulate(&PotentialModel::beta_family(1.5).unwrap(), &spec, 0.0, Velocity::Plus, 100.0, 3).unwrap();
        assert!(q.switches() > 10);
    }

    #[test]
    fn autocorrelation_basics() {
        let p = simulate(&gauss(), &canonical(), 0.0, Velocity::Plus, 2e4, 5).unwrap();
        let acf = autocorrelation(&p, |x, _| x, &[0.0, 0.5]).unwrap();
        assert!((acf[0] - 1.0).abs() < 1e-12);
        assert!(matches!(autocorrelation(&p, |_, _| 1.0, &[0.0]), Err(Error::DegenerateObservable)));
        assert!(matches!(autocorrelation(&p, |x, _| x, &[3000.0]), Err(Error::InsufficientHorizon { .. })));
    }

    #[test]
    fn autocorrelation_matches_direct_sum() {
        // Oracle: Riemann sum on a fine time grid.
        let p = simulate(&gauss(), &canonical(), 0.0, Velocity::Plus, 2000.0, 9).unwrap();
        let g = |x: f64, th: Velocity| x * x + 0.3 * th.sign();
        let lag = 1.3;
        let acf = autocorrelation(&p, g, &[lag]).unwrap()[0];
        let dt = 1e-3;
        let n = (p.horizon() / dt) as usize;
        let vals: Vec<f64> = (0..n)
            .map(|k| {
                let (x, th) = p.state_at((k as f64 + 0.5) * dt);
                g(x, th)
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let shift = (lag / dt).round() as usize;
        let cov = (0..n - shift).map(|k| (vals[k] - mean) * (vals[k + shift] - mean)).sum::<f64>() / (n - shift) as f64;
        assert!((acf - cov / var).abs() < 5e-3, "{acf} {}", cov / var);
    }

    #[test]
    fn envelope_fit_on_synthetic_data() {
        let lags: Vec<f64> = (0..=160).map(|k| k as f64 * 0.05).collect();
        let acf: Vec<f64> = lags.iter().map(|t| 1.1 * (-0.4 * t).exp() * (1.02 * t - 0.3).cos()).collect();
        let fit = fit_envelope_decay(&lags, &acf, 0.01).unwrap();
        assert!((fit.rate - 0.4).abs() < 1e-3, "{}", fit.rate);
        assert!(fit.peaks.len() >= 2);
    }

    #[test]
    fn gaussian_decay_rate() {
        let p = simulate(&gauss(), &canonical(), 0.0, Velocity::Plus, 2e5, 7).unwrap();
        let lags: Vec<f64> = (0..=160).map(|k| k as f64 * 0.05).collect();
        let acf = autocorrelation(&p, |x, _| x, &lags).unwrap();
        let fit = fit_envelope_decay(&lags, &acf, 0.01).unwrap();
        assert!((fit.rate - 0.425665).abs() <= 0.2 * 0.425665, "{fit:?}");
    }
}
