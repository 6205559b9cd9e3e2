//! Dispersion relation `Γ(λ) = [μ∫e^{λx}J(dx) − μ + f'(0)] / λ`, the
//! regular/trapping/critical trichotomy and the minimal speed `c*`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{KernelMeasure, MASS_TOLERANCE};

/// Tolerance on `f'(0) − μ` below which a triple is critical.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;
/// Largest `λ` considered before the exponential moments overflow.
pub const LAMBDA_MAX: f64 = 700.0;
/// Required accuracy of the critical-point identity at `λ*`.
pub const ROOT_RESIDUAL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("triple is {0:?}; c* = inf Γ is not attained")]
    NotRegular(Classification),
    #[error("no sign change of Γ' below lambda = {LAMBDA_MAX}; regular case is numerically degenerate")]
    Degenerate,
    #[error("critical-point residual {residual:e} at lambda = {lambda} exceeds tolerance")]
    Residual { lambda: f64, residual: f64 },
    #[error("lambda = {0} is not a local minimum of Γ")]
    NotMinimum(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Regular,
    Trapping,
    Critical,
}

/// `Γ(λ)` for `λ > 0`.
pub fn gamma(j: &KernelMeasure, mu: f64, fprime0: f64, lambda: f64) -> Result<f64, DispersionError> {
    if !(lambda > 0.0) {
        return Err(DispersionError::NonPositiveLambda(lambda));
    }
    Ok(gamma_unchecked(j, mu, fprime0, lambda))
}

fn gamma_unchecked(j: &KernelMeasure, mu: f64, fprime0: f64, lambda: f64) -> f64 {
    (mu * j.exp_moment(lambda) + (fprime0 - mu)) / lambda
}

/// `h(λ) = μ∫e^{λx}(λx − 1)J(dx) − f'(0) + μ`, which is `λ²Γ'(λ)`.
pub fn critical_residual(j: &KernelMeasure, mu: f64, fprime0: f64, lambda: f64) -> f64 {
    let m0 = j.exp_moment(lambda);
    let m1 = j.weighted_exp_moment(1, lambda);
    mu * (lambda * m1 - m0) - fprime0 + mu
}

/// Labels the triple. An atom of `J` at the origin is folded into `μ`
/// first, since it does not move mass.
pub fn classify(j: &KernelMeasure, mu: f64, fprime0: f64) -> Classification {
    let mu_eff = mu * (1.0 - j.zero_atom_mass());
    let mu_eff = if mu_eff <= mu * MASS_TOLERANCE { 0.0 } else { mu_eff };
    if j.positive_mass() > 0.0 || fprime0 < mu_eff - CRITICAL_TOLERANCE {
        Classification::Regular
    } else if (fprime0 - mu_eff).abs() <= CRITICAL_TOLERANCE {
        Classification::Critical
    } else {
        Classification::Trapping
    }
}

/// `Ξ = exp[f'(0) − μ]`.
pub fn xi(mu: f64, fprime0: f64) -> f64 {
    (fprime0 - mu).exp()
}

/// `(λ*, c*)` for a regular triple, from bisection on the increasing
/// function `h`.
pub fn minimize_gamma(j: &KernelMeasure, mu: f64, fprime0: f64) -> Result<(f64, f64), DispersionError> {
    let class = classify(j, mu, fprime0);
    if class != Classification::Regular {
        return Err(DispersionError::NotRegular(class));
    }
    let h = |l: f64| critical_residual(j, mu, fprime0, l);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while h(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > LAMBDA_MAX {
            hi = LAMBDA_MAX;
            if h(hi) <= 0.0 {
                return Err(DispersionError::Degenerate);
            }
            break;
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (hl, hh) = (h(lo), h(hi));
    let lambda = if hl.abs() <= hh.abs() { lo } else { hi };
    let residual = h(lambda);
    // h grows like e^λ, so its rounding noise does too.
    let scale = 1.0 + mu * j.exp_moment(lambda) * (1.0 + lambda);
    if residual.abs() > ROOT_RESIDUAL * scale {
        return Err(DispersionError::Residual { lambda, residual });
    }
    let c = gamma_unchecked(j, mu, fprime0, lambda);
    let step = 1e-4_f64.min(0.5 * lambda);
    let slack = 1e-13 * (1.0 + c.abs());
    if gamma_unchecked(j, mu, fprime0, lambda - step) < c - slack
        || gamma_unchecked(j, mu, fprime0, lambda + step) < c - slack
    {
        return Err(DispersionError::NotMinimum(lambda));
    }
    Ok((lambda, c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub classification: Classification,
    pub lambda_star: Option<f64>,
    pub c_star: Option<f64>,
    pub nu: Option<f64>,
    pub m: Option<f64>,
    #[serde(rename = "varK")]
    pub var_k: Option<f64>,
    #[serde(rename = "Xi")]
    pub xi: f64,
    /// Set for regular triples with `c* < 0`.
    pub negative_speed: bool,
}

/// Classification plus, for regular triples, `λ*`, `c*` and the tilt
/// constants `ν`, `m`, `Var K`.
pub fn report(j: &KernelMeasure, mu: f64, fprime0: f64) -> Result<DispersionReport, DispersionError> {
    let classification = classify(j, mu, fprime0);
    let mut rep = DispersionReport {
        classification,
        lambda_star: None,
        c_star: None,
        nu: None,
        m: None,
        var_k: None,
        xi: xi(mu, fprime0),
        negative_speed: false,
    };
    if classification == Classification::Regular {
        let (lambda, c) = minimize_gamma(j, mu, fprime0)?;
        let m0 = j.exp_moment(lambda);
        let m = j.weighted_exp_moment(1, lambda) / m0;
        rep.lambda_star = Some(lambda);
        rep.c_star = Some(c);
        rep.nu = Some(mu * m0);
        rep.m = Some(m);
        rep.var_k = Some(j.weighted_exp_moment(2, lambda) / m0 - m * m);
        rep.negative_speed = c < 0.0;
    }
    Ok(rep)
}

/// Discrete-time view of the same linearization,
/// `R(λ) = r(𝔼𝒵 − 1) + μ(∫e^{λx}J(dx) − 1)`.
#[derive(Debug, Clone)]
pub struct DiscreteTranslation {
    kernel: KernelMeasure,
    mu: f64,
    /// `r(𝔼𝒵 − 1)`, equal to `f'(0)`.
    pub growth: f64,
    pub xi: f64,
    /// `inf R(λ)/λ` when attained.
    pub c_star_discrete: Option<f64>,
}

impl DiscreteTranslation {
    pub fn rate(&self, lambda: f64) -> f64 {
        self.mu * self.kernel.exp_moment(lambda) + (self.growth - self.mu)
    }
}

/// `branching = Some((r, 𝔼𝒵))` uses the offspring parameters; otherwise
/// `r(𝔼𝒵 − 1)` is replaced by `f'(0)`. The speed is found by golden-section
/// search on `R(λ)/λ`, independently of [`minimize_gamma`].
pub fn discrete_translation(
    j: &KernelMeasure,
    mu: f64,
    fprime0: f64,
    branching: Option<(f64, f64)>,
) -> DiscreteTranslation {
    let growth = branching.map_or(fprime0, |(r, ez)| r * (ez - 1.0));
    let mut out = DiscreteTranslation {
        kernel: j.clone(),
        mu,
        growth,
        xi: xi(mu, growth),
        c_star_discrete: None,
    };
    if classify(j, mu, growth) == Classification::Regular {
        let speed = |l: f64| out.rate(l) / l;
        // Γ is unimodal: walk right until it turns upward.
        let mut a = 1e-6;
        let mut b = 1.0;
        while speed(2.0 * b) < speed(b) && 2.0 * b <= LAMBDA_MAX {
            a = 0.5 * b;
            b *= 2.0;
        }
        let hi = (2.0 * b).min(LAMBDA_MAX);
        let lambda = golden_section(speed, a, hi, 1e-12);
        out.c_star_discrete = Some(speed(lambda));
    }
    out
}

/// Minimizer of a unimodal `f` on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > tol * (1.0 + a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
