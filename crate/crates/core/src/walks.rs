//! The centred compound-Poisson walk `X_s`, its log-drifting variant `Y`,
//! hitting times and the ballot-type probability `z(t, x)`.
//!
//! Paths are simulated exactly: between jumps the position is a jump sum
//! plus a deterministic curve with at most one critical point, so
//! positivity on each inter-jump interval is decided in closed form.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{KernelMeasure, TiltedKernel};
use crate::sampling::{exponential, trial_rng, KernelSampler};

/// Tolerance of the mean-zero condition `ν·mean(K̄) + c = 0`.
pub const MEAN_ZERO_TOLERANCE: f64 = 1e-8;
/// Grid points whose relative standard error exceeds this are inconclusive.
pub const MAX_RELATIVE_STDERR: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("walk is not centred: nu * mean(Kbar) + c = {0:e}")]
    NotCentred(f64),
    #[error("invalid walk parameter: {0}")]
    Parameter(String),
}

/// `X_s = Σ_{jumps ≤ s} ξ_i + c·s` with jumps at rate `ν` drawn from `K̄`,
/// and `Y_s^x = X_s + x + D log((t + 1)/(t − s + 1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftWalkSpec {
    pub nu: f64,
    pub kbar: KernelMeasure,
    pub drift_c: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub t: f64,
    #[serde(rename = "L", default = "default_l")]
    pub l: f64,
}

fn default_l() -> f64 {
    2.0
}

impl DriftWalkSpec {
    pub fn new(nu: f64, kbar: KernelMeasure, drift_c: f64, d: f64, t: f64, l: f64) -> Result<Self, WalkError> {
        let spec = DriftWalkSpec {
            nu,
            kbar,
            drift_c,
            d,
            t,
            l,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Walk built from a tilt: rate `ν`, jumps from the reversed tilted
    /// kernel and drift `c*`.
    pub fn from_tilt(tilt: &TiltedKernel, c_star: f64, d: f64, t: f64, l: f64) -> Result<Self, WalkError> {
        Self::new(tilt.nu, tilt.reverse().base, c_star, d, t, l)
    }

    pub fn validate(&self) -> Result<(), WalkError> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(WalkError::Parameter(format!("nu = {}", self.nu)));
        }
        if !(self.t >= 0.0 && self.l > 0.0) {
            return Err(WalkError::Parameter(format!("t = {}, L = {}", self.t, self.l)));
        }
        let drift = self.nu * self.kbar.mean() + self.drift_c;
        if drift.abs() > MEAN_ZERO_TOLERANCE {
            return Err(WalkError::NotCentred(drift));
        }
        Ok(())
    }

    pub fn with_t(&self, t: f64) -> Self {
        DriftWalkSpec { t, ..self.clone() }
    }

    pub fn with_d(&self, d: f64) -> Self {
        DriftWalkSpec { d, ..self.clone() }
    }

    /// `ν 𝔼𝒳²`, the variance rate of `X`.
    pub fn variance_rate(&self) -> f64 {
        self.nu * self.kbar.second_moment()
    }
}

/// Deterministic barrier added to `X_s + x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Barrier {
    Zero,
    /// `a log((t + 1)/((t − s)₊ + 1))`.
    ToHorizon { coef: f64, t: f64 },
    /// `a log(s + 1)`.
    FromStart { coef: f64 },
}

impl Barrier {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Barrier::Zero => 0.0,
            Barrier::ToHorizon { coef, t } => coef * ((t + 1.0) / ((t - s).max(0.0) + 1.0)).ln(),
            Barrier::FromStart { coef } => coef * s.ln_1p(),
        }
    }

    /// Points in `(a, b)` where `c·s + barrier(s)` may change direction.
    fn turning_points(&self, c: f64, a: f64, b: f64, out: &mut Vec<f64>) {
        let mut push = |s: f64| {
            if s > a && s < b {
                out.push(s);
            }
        };
        match *self {
            Barrier::Zero => {}
            Barrier::ToHorizon { coef, t } => {
                if c != 0.0 {
                    let s = t + 1.0 + coef / c;
                    if s < t {
                        push(s);
                    }
                }
                push(t);
            }
            Barrier::FromStart { coef } => {
                if c != 0.0 {
                    push(-coef / c - 1.0);
                }
            }
        }
    }
}

/// The four drifted hitting-time variants: `x ± f₁` and `x ± |f₂|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftVariant {
    F1Plus,
    F1Minus,
    F2Plus,
    F2Minus,
}

impl DriftVariant {
    /// `f₁(s) = |D| log((t + 1)/((t − s)₊ + 1))`, `|f₂|(s) = |D| log(s + 1)`.
    pub fn barrier(&self, d: f64, t: f64) -> Barrier {
        let a = d.abs();
        match self {
            DriftVariant::F1Plus => Barrier::ToHorizon { coef: a, t },
            DriftVariant::F1Minus => Barrier::ToHorizon { coef: -a, t },
            DriftVariant::F2Plus => Barrier::FromStart { coef: a },
            DriftVariant::F2Minus => Barrier::FromStart { coef: -a },
        }
    }
}

/// Monte Carlo probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkEstimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
    pub hits: u64,
}

impl WalkEstimate {
    fn from_hits(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        WalkEstimate {
            value: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
            hits,
        }
    }

    pub fn relative_stderr(&self) -> f64 {
        if self.value > 0.0 {
            self.stderr / self.value
        } else {
            f64::INFINITY
        }
    }
}

/// Lazily generated jump sequence of one path.
struct JumpStream<'a> {
    rng: ChaCha8Rng,
    sampler: &'a KernelSampler,
    nu: f64,
}

impl JumpStream<'_> {
    fn next(&mut self) -> (f64, f64) {
        let dt = exponential(&mut self.rng, self.nu);
        (dt, self.sampler.sample(&mut self.rng))
    }
}

/// How a path ends relative to the barrier.
enum Outcome {
    /// First time the path is below zero (or at zero when `strict`).
    Killed(f64),
    Survived { end: f64 },
}

struct PathRule {
    x: f64,
    c: f64,
    barrier: Barrier,
    horizon: f64,
    /// Killed at `≤ 0` rather than `< 0`.
    strict: bool,
}

impl PathRule {
    fn position(&self, jump_sum: f64, s: f64) -> f64 {
        self.x + jump_sum + self.c * s + self.barrier.value(s)
    }

    fn dead(&self, v: f64) -> bool {
        if self.strict {
            v <= 0.0
        } else {
            v < 0.0
        }
    }

    /// First killing time in `[a, b]` for a fixed jump sum, if any.
    fn first_kill(&self, jump_sum: f64, a: f64, b: f64, points: &mut Vec<f64>) -> Option<f64> {
        points.clear();
        points.push(a);
        self.barrier.turning_points(self.c, a, b, points);
        points.push(b);
        points.sort_by(f64::total_cmp);
        if self.dead(self.position(jump_sum, a)) {
            return Some(a);
        }
        for w in points.windows(2) {
            let right = self.position(jump_sum, w[1]);
            if self.dead(right) {
                // monotone on the piece: bisect for the crossing
                let (mut lo, mut hi) = (w[0], w[1]);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.dead(self.position(jump_sum, mid)) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(hi);
            }
        }
        None
    }

    fn run(&self, jumps: &mut JumpStream<'_>, points: &mut Vec<f64>) -> Outcome {
        let mut s = 0.0;
        let mut sum = 0.0;
        loop {
            let (dt, xi) = jumps.next();
            let next = (s + dt).min(self.horizon);
            if let Some(k) = self.first_kill(sum, s, next, points) {
                return Outcome::Killed(k);
            }
            if s + dt >= self.horizon {
                return Outcome::Survived {
                    end: self.position(sum, self.horizon),
                };
            }
            s += dt;
            sum += xi;
        }
    }
}

fn estimate(trials: u64, seed: u64, kbar: &KernelMeasure, nu: f64, f: impl Fn(&mut JumpStream<'_>, &mut Vec<f64>) -> bool + Sync) -> WalkEstimate {
    let sampler = KernelSampler::new(kbar);
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map_init(Vec::new, |points, i| {
            let mut jumps = JumpStream {
                rng: trial_rng(seed, i),
                sampler: &sampler,
                nu,
            };
            f(&mut jumps, points) as u64
        })
        .sum();
    WalkEstimate::from_hits(hits, trials)
}

/// `z(t, x) = P[Y_t^x ∈ (L, 2L), Y_s^x > 0 for all s ≤ t]`.
pub fn sample_path_functional(spec: &DriftWalkSpec, x: f64, trials: u64, seed: u64) -> Result<WalkEstimate, WalkError> {
    spec.validate()?;
    if !(x >= 0.0) || trials == 0 {
        return Err(WalkError::Parameter(format!("x = {x}, trials = {trials}")));
    }
    let rule = PathRule {
        x,
        c: spec.drift_c,
        barrier: Barrier::ToHorizon {
            coef: spec.d,
            t: spec.t,
        },
        horizon: spec.t,
        strict: true,
    };
    let (lo, hi) = (spec.l, 2.0 * spec.l);
    Ok(estimate(trials, seed, &spec.kbar, spec.nu, |jumps, points| {
        matches!(rule.run(jumps, points), Outcome::Survived { end } if end > lo && end < hi)
    }))
}

/// `P[T_x > s]` with `T_x = inf{r ≥ 0 : X_r + x < 0}`.
pub fn hitting_tail(spec: &DriftWalkSpec, x: f64, s: f64, trials: u64, seed: u64) -> Result<WalkEstimate, WalkError> {
    survival(spec, Barrier::Zero, x, s, trials, seed)
}

/// `P[S_x^{i±} > s]` with `S = inf{r ≥ 0 : X_r + x ± f_i(r) < 0}`, using
/// `spec.D` and, for `f₁`, `spec.t`.
pub fn drift_hitting_tail(
    spec: &DriftWalkSpec,
    variant: DriftVariant,
    x: f64,
    s: f64,
    trials: u64,
    seed: u64,
) -> Result<WalkEstimate, WalkError> {
    if matches!(variant, DriftVariant::F1Plus | DriftVariant::F1Minus) && s > spec.t {
        return Err(WalkError::Parameter(format!("s = {s} exceeds t = {} for f1", spec.t)));
    }
    survival(spec, variant.barrier(spec.d, spec.t), x, s, trials, seed)
}

fn survival(spec: &DriftWalkSpec, barrier: Barrier, x: f64, s: f64, trials: u64, seed: u64) -> Result<WalkEstimate, WalkError> {
    spec.validate()?;
    if !(x >= 0.0 && s > 0.0) || trials == 0 {
        return Err(WalkError::Parameter(format!("x = {x}, s = {s}, trials = {trials}")));
    }
    let rule = PathRule {
        x,
        c: spec.drift_c,
        barrier,
        horizon: s,
        strict: false,
    };
    Ok(estimate(trials, seed, &spec.kbar, spec.nu, |jumps, points| {
        matches!(rule.run(jumps, points), Outcome::Survived { .. })
    }))
}

/// Hitting times of one path under the `−`, zero and `+` barriers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderedTimes {
    pub minus: f64,
    pub plain: f64,
    pub plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub paths: u64,
    pub violations: u64,
    pub survival_minus: f64,
    pub survival_plain: f64,
    pub survival_plus: f64,
}

/// Runs `S^{i−}`, `T_x` and `S^{i+}` on shared jump sequences up to time
/// `s` and counts paths where `S^{i−} ≤ T_x ≤ S^{i+}` fails. A path that
/// never crosses is given time `+∞`.
pub fn ordering_check(
    spec: &DriftWalkSpec,
    use_f1: bool,
    x: f64,
    s: f64,
    paths: u64,
    seed: u64,
) -> Result<OrderingReport, WalkError> {
    spec.validate()?;
    let (minus, plus) = if use_f1 {
        (DriftVariant::F1Minus, DriftVariant::F1Plus)
    } else {
        (DriftVariant::F2Minus, DriftVariant::F2Plus)
    };
    let rules = [minus.barrier(spec.d, spec.t), Barrier::Zero, plus.barrier(spec.d, spec.t)].map(|barrier| PathRule {
        x,
        c: spec.drift_c,
        barrier,
        horizon: s,
        strict: false,
    });
    let sampler = KernelSampler::new(&spec.kbar);
    let times: Vec<OrderedTimes> = (0..paths)
        .into_par_iter()
        .map_init(Vec::new, |points, i| {
            let [a, b, c] = rules.each_ref().map(|rule| {
                let mut jumps = JumpStream {
                    rng: trial_rng(seed, i),
                    sampler: &sampler,
                    nu: spec.nu,
                };
                match rule.run(&mut jumps, points) {
                    Outcome::Killed(k) => k,
                    Outcome::Survived { .. } => f64::INFINITY,
                }
            });
            OrderedTimes {
                minus: a,
                plain: b,
                plus: c,
            }
        })
        .collect();
    let n = paths as f64;
    let frac = |f: fn(&OrderedTimes) -> f64| times.iter().filter(|o| f(o).is_infinite()).count() as f64 / n;
    Ok(OrderingReport {
        paths,
        violations: times
            .iter()
            .filter(|o| !(o.minus <= o.plain && o.plain <= o.plus))
            .count() as u64,
        survival_minus: frac(|o| o.minus),
        survival_plain: frac(|o| o.plain),
        survival_plus: frac(|o| o.plus),
    })
}

/// Samples of `X_s` without killing.
pub fn sample_increments(spec: &DriftWalkSpec, s: f64, trials: u64, seed: u64) -> Vec<f64> {
    let sampler = KernelSampler::new(&spec.kbar);
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let mut sum = spec.drift_c * s;
            let mut r = exponential(&mut rng, spec.nu);
            while r <= s {
                sum += sampler.sample(&mut rng);
                r += exponential(&mut rng, spec.nu);
            }
            sum
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallotPoint {
    pub t: f64,
    pub x: f64,
    pub estimate: WalkEstimate,
    /// `ẑ(t, x)(t + 1)^{3/2}/(x + 1)`.
    pub ratio: f64,
    /// Relative stderr above 20%.
    pub inconclusive: bool,
    /// Trials suggested by `100 / p_est` with `p_est = (x + 1)/(t + 1)^{3/2}`.
    pub suggested_trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallotReport {
    #[serde(rename = "D")]
    pub d: f64,
    pub points: Vec<BallotPoint>,
    pub band_min: f64,
    pub band_max: f64,
    /// Empirical `C*`-type constant `max/min` over conclusive points.
    pub band_ratio: f64,
    /// `(x, t, ẑ(t, x)/ẑ(4t, x))` for each traced pair.
    pub decay: Vec<(f64, f64, f64)>,
}

/// Estimates `ẑ` on `t_list × x_list` and summarizes the band of
/// `ẑ(t, x)(t + 1)^{3/2}/(x + 1)`.
pub fn ballot_band_check(
    spec: &DriftWalkSpec,
    t_list: &[f64],
    x_list: &[f64],
    trials: u64,
    seed: u64,
) -> Result<BallotReport, WalkError> {
    let t_max = t_list.iter().copied().fold(0.0, f64::max);
    for &x in x_list {
        if !(1.0..=t_max.sqrt()).contains(&x) {
            return Err(WalkError::Parameter(format!("x = {x} outside [1, sqrt(t_max)]")));
        }
    }
    if t_list.iter().any(|&t| t <= 0.0) {
        return Err(WalkError::Parameter("t must be positive".into()));
    }
    let mut points = Vec::new();
    for &t in t_list {
        let s = spec.with_t(t);
        for &x in x_list {
            let est = sample_path_functional(&s, x, trials, seed)?;
            let scale = (t + 1.0).powf(1.5) / (x + 1.0);
            points.push(BallotPoint {
                t,
                x,
                estimate: est,
                ratio: est.value * scale,
                inconclusive: est.relative_stderr() > MAX_RELATIVE_STDERR,
                suggested_trials: (100.0 * scale).ceil() as u64,
            });
        }
    }
    let good: Vec<f64> = points.iter().filter(|p| !p.inconclusive).map(|p| p.ratio).collect();
    let band_min = good.iter().copied().fold(f64::INFINITY, f64::min);
    let band_max = good.iter().copied().fold(0.0, f64::max);
    let mut decay = Vec::new();
    for p in &points {
        if let Some(q) = points
            .iter()
            .find(|q| q.x == p.x && (q.t - 4.0 * p.t).abs() < 1e-9)
        {
            decay.push((p.x, p.t, p.estimate.value / q.estimate.value));
        }
    }
    Ok(BallotReport {
        d: spec.d,
        points,
        band_min,
        band_max,
        band_ratio: band_max / band_min,
        decay,
    })
}
