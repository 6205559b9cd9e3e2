//! Closed-form oracles for the critical family `(δ₋₁, μ = 1, u − u^p)` and
//! tabulated stationary fronts for trapping kernels.

use serde::Serialize;
use thiserror::Error;

use crate::evolve::ALIGNMENT_TOLERANCE;
use crate::kernel::Bin;
use crate::problem::{Problem, ProblemError};

/// Levels passed to `U⁻¹` are clamped into `[θ_CLAMP, 1 − θ_CLAMP]`.
pub const THETA_CLAMP: f64 = 1e-12;
/// Default tabulation depth, in unit intervals.
pub const DEFAULT_DEPTH: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("exponent p must exceed 1, got {0}")]
    BadExponent(f64),
    #[error("level must lie in (0, 1), got {0}")]
    BadLevel(f64),
    #[error("f'(0) = {fprime0} does not exceed mu = {mu}; the forbidden band is empty")]
    EmptyBand { fprime0: f64, mu: f64 },
    #[error("stationary recursion saturates at x = {x}: needs U > 1")]
    Saturated { x: f64 },
    #[error("unsupported configuration for a tabulated front: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// `U(x) = exp(−p^x)`, the monotone stationary front of the critical
/// family, satisfying `U(x + 1) = U(x)^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalFront {
    pub p: f64,
    /// Use the staircase `Ũ(x) = U(⌊x⌋)` instead.
    pub floor_variant: bool,
}

impl CriticalFront {
    pub fn new(p: f64) -> Result<Self, AnalyticError> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(AnalyticError::BadExponent(p));
        }
        Ok(CriticalFront {
            p,
            floor_variant: false,
        })
    }

    pub fn floor(self) -> Self {
        CriticalFront {
            floor_variant: true,
            ..self
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let x = if self.floor_variant { x.floor() } else { x };
        (-self.p.powf(x)).exp()
    }

    /// `U⁻¹(θ) = log(−log θ) / log p` for the smooth front.
    pub fn inverse(&self, theta: f64) -> Result<f64, AnalyticError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(AnalyticError::BadLevel(theta));
        }
        Ok(front_inverse_unchecked(self.p, theta))
    }
}

fn front_inverse_unchecked(p: f64, theta: f64) -> f64 {
    (-theta.ln()).ln() / p.ln()
}

fn check_p(p: f64) -> Result<(), AnalyticError> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(AnalyticError::BadExponent(p))
    }
}

/// `[(p − 1)t + 1]^{−1/(p−1)}`, the solution on `[−1, 0)` from step data.
pub fn riccati_u(p: f64, t: f64) -> f64 {
    ((p - 1.0) * t + 1.0).powf(-1.0 / (p - 1.0))
}

/// `Ω = ((p + 1)/p)^{1/(p−1)}`.
pub fn omega(p: f64) -> f64 {
    ((p + 1.0) / p).powf(1.0 / (p - 1.0))
}

/// `σ₊(t) = −log log(t + 1)/log p + 1`; infinite at `t = 0`.
pub fn sigma_plus(p: f64, t: f64) -> f64 {
    -(t.ln_1p()).ln() / p.ln() + 1.0
}

/// Shift of the subsolution `U(x − σ₋(t))`, chosen so that it agrees with
/// `u(t, −1)` at `x = −1`: `σ₋ = −U⁻¹(u(t, −1)) − 1`.
pub fn sigma_minus_from_value(p: f64, u_at_minus_one: f64) -> f64 {
    let theta = u_at_minus_one.clamp(THETA_CLAMP, 1.0 - THETA_CLAMP);
    -front_inverse_unchecked(p, theta) - 1.0
}

/// [`sigma_minus_from_value`] with the exact Riccati value.
pub fn sigma_minus(p: f64, t: f64) -> f64 {
    sigma_minus_from_value(p, riccati_u(p, t))
}

/// `w̄(t, x) = Ω U(x − σ₊(t)) = Ω (t + 1)^{−p^{x−1}}`.
pub fn supersolution(p: f64, t: f64, x: f64) -> f64 {
    omega(p) * (t + 1.0).powf(-p.powf(x - 1.0))
}

/// `w̲(t, x) = U(x − σ₋(t))`.
pub fn subsolution(p: f64, t: f64, x: f64) -> f64 {
    (-p.powf(x - sigma_minus(p, t))).exp()
}

/// Level-set bounds implied by `w̲ ≤ u ≤ w̄`:
/// `σ₋ + U⁻¹(θ) ≤ σ_θ ≤ σ₊ + U⁻¹(θ/Ω)`.
pub fn level_set_bounds(p: f64, t: f64, theta: f64) -> Result<(f64, f64), AnalyticError> {
    check_p(p)?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(AnalyticError::BadLevel(theta));
    }
    let lower = sigma_minus(p, t) + front_inverse_unchecked(p, theta);
    let upper = sigma_plus(p, t) + front_inverse_unchecked(p, theta / omega(p));
    Ok((lower, upper))
}

/// `sup |σ_±(t) + log log t / log p|` over a log grid of `[2, 10⁶]`.
pub fn shift_gap_constant(p: f64) -> Result<(f64, f64), AnalyticError> {
    check_p(p)?;
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..=600 {
        let t = 2.0 * (5e5f64).powf(i as f64 / 600.0);
        let centre = t.ln().ln() / p.ln();
        worst.0 = worst.0.max((sigma_minus(p, t) + centre).abs());
        worst.1 = worst.1.max((sigma_plus(p, t) + centre).abs());
    }
    Ok(worst)
}

/// `θ₀ = sup` of the component of `{s ∈ [0, 1] : f(s) > μs}` at `0⁺`.
pub fn forbidden_band(problem: &Problem) -> Result<f64, AnalyticError> {
    let f = &problem.reaction;
    let mu = problem.mu;
    let fprime0 = f.fprime0();
    if !(fprime0 > mu) {
        return Err(AnalyticError::EmptyBand { fprime0, mu });
    }
    let inside = |s: f64| f.eval(s) > mu * s;
    const N: usize = 10_000;
    let mut lo = 0.0;
    let mut hi = 1.0;
    for i in 1..=N {
        let s = i as f64 / N as f64;
        if !inside(s) {
            hi = s;
            break;
        }
        lo = s;
    }
    while hi - lo > 1e-16 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Stationary front `U` tabulated on `x_i = −depth + i·dx`, `i = 0..=N`,
/// with `U ≡ 0` on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrappingFront {
    pub dx: f64,
    pub depth: usize,
    pub values: Vec<f64>,
}

impl TrappingFront {
    pub fn x(&self, i: usize) -> f64 {
        -(self.depth as f64) + i as f64 * self.dx
    }

    /// `U` at the table point nearest `x`; `None` left of the table.
    pub fn at(&self, x: f64) -> Option<f64> {
        if x >= 0.0 {
            return Some(0.0);
        }
        let i = ((x + self.depth as f64) / self.dx).round();
        if i < 0.0 {
            return None;
        }
        self.values.get(i as usize).copied()
    }

    /// Linear interpolation; `0` on `[0, ∞)`.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        if x >= 0.0 {
            return Some(0.0);
        }
        let s = (x + self.depth as f64) / self.dx;
        if s < 0.0 {
            return None;
        }
        let i = s.floor() as usize;
        let w = s - i as f64;
        let a = *self.values.get(i)?;
        let b = self.values.get(i + 1).copied().unwrap_or(0.0);
        Some(a + w * (b - a))
    }

    fn n(&self) -> usize {
        self.values.len() - 1
    }
}

fn is_worked_uniform_case(problem: &Problem) -> bool {
    let unit_bin = [Bin {
        left: -1.0,
        right: 0.0,
        height: 1.0,
    }];
    problem.kernel.atoms().is_empty()
        && problem.kernel.bins() == unit_bin
        && problem.mu == 1.0
        && problem.reaction.polynomial_coeffs() == Some(&[0.0, 1.0, -1.0][..])
}

/// Tabulates a stationary front on `[−depth, 0]`.
///
/// Supported: the uniform case `μ = 1, J = 1_{[−1,0]}, f = u − u²`, where
/// `∫_x^{x+1} U = U(x)²` is integrated leftward interval by interval from
/// `U = −x/2` on `[−1, 0]`; and purely atomic `J` on `[−1, 0)` with
/// `f'(0) > μ`, where `μU − f(U) = μ Σ m_k U(x − a_k)` is solved cell by
/// cell on `[θ₀, 1]`.
pub fn trapping_front(problem: &Problem, depth: usize, dx: f64) -> Result<TrappingFront, AnalyticError> {
    let cells = 1.0 / dx;
    if !(dx > 0.0 && (cells - cells.round()).abs() < 1e-9 && depth >= 1) {
        return Err(AnalyticError::Unsupported(format!(
            "dx = {dx} must divide 1 and depth = {depth} must be positive"
        )));
    }
    if is_worked_uniform_case(problem) {
        return Ok(uniform_front(depth, cells.round() as usize));
    }
    let problem = problem.normalized()?;
    if !problem.kernel.is_atomic() {
        return Err(AnalyticError::Unsupported(
            "density kernels other than 1_[-1,0] with mu = 1 and f = u - u^2".into(),
        ));
    }
    let mut taps = Vec::new();
    for a in problem.kernel.atoms() {
        let k = (-a.pos / dx).round();
        if a.pos >= 0.0 || a.pos < -1.0 || (a.pos + k * dx).abs() > ALIGNMENT_TOLERANCE {
            return Err(AnalyticError::Unsupported(format!(
                "atom at {} must lie in [-1, 0) on the grid",
                a.pos
            )));
        }
        taps.push((k as usize, a.mass));
    }
    let theta0 = forbidden_band(&problem)?;
    let mu = problem.mu;
    let f = &problem.reaction;
    let g = |s: f64| mu * s - f.eval(s);
    let n = depth * cells.round() as usize;
    let mut values = vec![0.0; n + 1];
    for i in (0..n).rev() {
        let rhs: f64 = mu
            * taps
                .iter()
                .map(|&(k, m)| m * values.get(i + k).copied().unwrap_or(0.0))
                .sum::<f64>();
        let x = -(depth as f64) + i as f64 * dx;
        if rhs > g(1.0) + 1e-14 {
            return Err(AnalyticError::Saturated { x });
        }
        let (mut lo, mut hi) = (theta0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < rhs {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        values[i] = if (g(lo) - rhs).abs() <= (g(hi) - rhs).abs() { lo } else { hi };
    }
    Ok(TrappingFront { dx, depth, values })
}

/// Leftward RK4 for `U'(x) = (U(x + 1) − U(x)) / (2U(x))`, the derivative
/// of `∫_x^{x+1} U = U(x)²`.
fn uniform_front(depth: usize, cells: usize) -> TrappingFront {
    let dx = 1.0 / cells as f64;
    let n = depth * cells;
    let mut values = vec![0.0; n + 1];
    for j in 0..=cells {
        // x = -j dx on [-1, 0]
        values[n - j] = 0.5 * j as f64 * dx;
    }
    // value of U at x = x_i + 1 + s·dx, s ∈ [-1, 0], by cubic interpolation
    let shifted = |values: &[f64], i: usize, s: f64| -> f64 {
        let c = i + cells;
        let pts: [usize; 4] = if c < n {
            [c - 2, c - 1, c, c + 1]
        } else {
            [c - 3, c - 2, c - 1, c]
        };
        let x = c as f64 + s;
        let mut acc = 0.0;
        for (a, &pa) in pts.iter().enumerate() {
            let mut w = 1.0;
            for (b, &pb) in pts.iter().enumerate() {
                if a != b {
                    w *= (x - pb as f64) / (pa as f64 - pb as f64);
                }
            }
            acc += w * values[pa];
        }
        acc
    };
    let rhs = |u: f64, ushift: f64| (ushift - u) / (2.0 * u);
    for i in (0..n - cells).rev() {
        // step from x_{i+1} to x_i = x_{i+1} − dx
        let u = values[i + 1];
        let h = -dx;
        let s1 = shifted(&values, i + 1, 0.0);
        let s2 = shifted(&values, i + 1, -0.5);
        let s3 = values[i + cells];
        let k1 = rhs(u, s1);
        let k2 = rhs(u + 0.5 * h * k1, s2);
        let k3 = rhs(u + 0.5 * h * k2, s2);
        let k4 = rhs(u + h * k3, s3);
        values[i] = u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    TrappingFront { dx, depth, values }
}

/// `max |μ(J∗U − U) + f(U)|` over table points in `[−depth + 1, −dx]`.
/// Bins are integrated with the trapezoid rule on the table.
pub fn stationary_residual(problem: &Problem, front: &TrappingFront) -> f64 {
    let n = front.n();
    let cells = (1.0 / front.dx).round() as usize;
    let at = |i: usize| front.values.get(i).copied().unwrap_or(0.0);
    let mut worst: f64 = 0.0;
    for i in cells..n {
        let mut conv = 0.0;
        for a in problem.kernel.atoms() {
            let k = (-a.pos / front.dx).round() as usize;
            conv += a.mass * at(i + k);
        }
        for b in problem.kernel.bins() {
            // ∫_{l}^{r} U(x − y) dy over table points x − y
            let lo = (-b.right / front.dx).round() as usize;
            let hi = (-b.left / front.dx).round() as usize;
            let mut s = 0.5 * (at(i + lo) + at(i + hi));
            for k in lo + 1..hi {
                s += at(i + k);
            }
            conv += b.height * s * front.dx;
        }
        let u = at(i);
        let r = problem.mu * (conv - u) + problem.reaction.eval(u);
        worst = worst.max(r.abs());
    }
    worst
}
