//! KPP reactions and offspring laws.
//!
//! A reaction `f` on `[0, 1]` is checked against the KPP hypotheses on a
//! dense grid. Reactions coming from a branching mechanism
//! `f(u) = r[1 − u − g(1 − u)]` are represented exactly as polynomials, and
//! polynomial reactions can be decomposed back into `(r, g)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Interior points of the validation grid.
pub const VALIDATION_GRID: usize = 10_000;

const EXACT_TOLERANCE: f64 = 1e-12;
const MAX_POLY_DEGREE: f64 = 64.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReactionError {
    #[error("offspring law must be supported on k >= 2, got k = {0}")]
    OffspringTooSmall(u32),
    #[error("offspring probability for k = {k} must be positive, got {p}")]
    OffspringProbability { k: u32, p: f64 },
    #[error("offspring probabilities sum to {0}, not 1")]
    OffspringMass(f64),
    #[error("branching rate must be positive, got {0}")]
    BadRate(f64),
    #[error("reaction parameter {name} = {value} is invalid")]
    BadParameter { name: &'static str, value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error("reaction is not a polynomial; analyticity cannot be verified")]
    NotPolynomial,
    #[error("f'(1-) = {0} is not negative")]
    NotDecreasingAtOne(f64),
    #[error("g has coefficient {value:e} at degree {degree}; not a generating function")]
    NegativeCoefficient { degree: usize, value: f64 },
    #[error("g violates g(0) = g'(0) = 0, g(1) = 1 (g(0) = {g0:e}, g'(0) = {g1:e}, g(1) = {g_at_one})")]
    Normalization { g0: f64, g1: f64, g_at_one: f64 },
}

/// Offspring distribution `κ` on `{2, 3, ...}` with finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, f64)>", into = "Vec<(u32, f64)>")]
pub struct OffspringLaw {
    probs: Vec<(u32, f64)>,
}

impl TryFrom<Vec<(u32, f64)>> for OffspringLaw {
    type Error = ReactionError;

    fn try_from(v: Vec<(u32, f64)>) -> Result<Self, Self::Error> {
        OffspringLaw::new(v)
    }
}

impl From<OffspringLaw> for Vec<(u32, f64)> {
    fn from(k: OffspringLaw) -> Self {
        k.probs
    }
}

impl OffspringLaw {
    pub fn new(mut probs: Vec<(u32, f64)>) -> Result<Self, ReactionError> {
        for &(k, p) in &probs {
            if k < 2 {
                return Err(ReactionError::OffspringTooSmall(k));
            }
            if !(p > 0.0 && p.is_finite()) {
                return Err(ReactionError::OffspringProbability { k, p });
            }
        }
        probs.sort_by_key(|&(k, _)| k);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(probs.len());
        for (k, p) in probs {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += p,
                _ => merged.push((k, p)),
            }
        }
        let total: f64 = merged.iter().map(|&(_, p)| p).sum();
        if merged.is_empty() || (total - 1.0).abs() > EXACT_TOLERANCE {
            return Err(ReactionError::OffspringMass(total));
        }
        Ok(OffspringLaw { probs: merged })
    }

    /// Deterministic `k` offspring.
    pub fn dirac(k: u32) -> Result<Self, ReactionError> {
        Self::new(vec![(k, 1.0)])
    }

    pub fn probabilities(&self) -> &[(u32, f64)] {
        &self.probs
    }

    pub fn max_offspring(&self) -> u32 {
        self.probs.last().map_or(0, |&(k, _)| k)
    }

    /// `𝔼𝒵`.
    pub fn mean(&self) -> f64 {
        self.probs.iter().map(|&(k, p)| k as f64 * p).sum()
    }

    /// `𝔼𝒵^q`; always finite here because the support is finite.
    pub fn moment(&self, q: f64) -> f64 {
        self.probs.iter().map(|&(k, p)| (k as f64).powf(q) * p).sum()
    }

    /// Generating function `g(s) = 𝔼 s^𝒵`.
    pub fn pgf(&self, s: f64) -> f64 {
        self.probs.iter().map(|&(k, p)| p * s.powi(k as i32)).sum()
    }
}

/// Closed-form reaction families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ReactionSpec {
    /// `a (u − u^p)`.
    MinusPower { a: f64, p: f64 },
    /// `a u (1 − u)`.
    Logistic { a: f64 },
    /// `r [1 − u − g(1 − u)]` with `g` the generating function of `kappa`.
    Offspring { r: f64, kappa: OffspringLaw },
    /// `Σ coeffs[k] u^k`.
    Polynomial { coeffs: Vec<f64> },
}

/// A reaction term `f` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReactionSpec", into = "ReactionSpec")]
pub struct Reaction {
    spec: ReactionSpec,
    /// Monomial coefficients when `f` is a polynomial.
    poly: Option<Vec<f64>>,
}

impl TryFrom<ReactionSpec> for Reaction {
    type Error = ReactionError;

    fn try_from(spec: ReactionSpec) -> Result<Self, Self::Error> {
        Reaction::from_spec(spec)
    }
}

impl From<Reaction> for ReactionSpec {
    fn from(r: Reaction) -> Self {
        r.spec
    }
}

fn check_param(name: &'static str, value: f64) -> Result<f64, ReactionError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ReactionError::BadParameter { name, value })
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

fn horner(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}

impl Reaction {
    pub fn from_spec(spec: ReactionSpec) -> Result<Self, ReactionError> {
        let poly = match &spec {
            ReactionSpec::MinusPower { a, p } => {
                check_param("a", *a)?;
                if !(*p > 0.0 && p.is_finite()) {
                    return Err(ReactionError::BadParameter { name: "p", value: *p });
                }
                if p.fract() == 0.0 && *p <= MAX_POLY_DEGREE {
                    let deg = *p as usize;
                    let mut c = vec![0.0; deg.max(1) + 1];
                    c[1] += a;
                    c[deg] -= a;
                    Some(c)
                } else {
                    None
                }
            }
            ReactionSpec::Logistic { a } => {
                check_param("a", *a)?;
                Some(vec![0.0, *a, -*a])
            }
            ReactionSpec::Offspring { r, kappa } => {
                if !(*r > 0.0 && r.is_finite()) {
                    return Err(ReactionError::BadRate(*r));
                }
                Some(offspring_polynomial(*r, kappa))
            }
            ReactionSpec::Polynomial { coeffs } => {
                for &c in coeffs {
                    check_param("coeffs", c)?;
                }
                Some(coeffs.clone())
            }
        };
        Ok(Reaction { spec, poly })
    }

    pub fn minus_power(a: f64, p: f64) -> Result<Self, ReactionError> {
        Self::from_spec(ReactionSpec::MinusPower { a, p })
    }

    pub fn logistic(a: f64) -> Result<Self, ReactionError> {
        Self::from_spec(ReactionSpec::Logistic { a })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self, ReactionError> {
        Self::from_spec(ReactionSpec::Polynomial { coeffs })
    }

    /// `f ≡ 0`; not a KPP reaction, but handy for the pure-jump equation.
    pub fn zero() -> Self {
        Self::polynomial(vec![]).expect("empty polynomial is valid")
    }

    /// `f(u) = r[1 − u − g(1 − u)]`, so that `f'(0) = r(𝔼𝒵 − 1)`.
    pub fn from_offspring(r: f64, kappa: &OffspringLaw) -> Result<Self, ReactionError> {
        Self::from_spec(ReactionSpec::Offspring {
            r,
            kappa: kappa.clone(),
        })
    }

    pub fn spec(&self) -> &ReactionSpec {
        &self.spec
    }

    pub fn polynomial_coeffs(&self) -> Option<&[f64]> {
        self.poly.as_deref()
    }

    pub fn eval(&self, u: f64) -> f64 {
        match (&self.spec, &self.poly) {
            (_, Some(c)) => horner(c, u),
            (ReactionSpec::MinusPower { a, p }, None) => a * (u - u.max(0.0).powf(*p)),
            _ => unreachable!("only minus-power reactions lack a polynomial form"),
        }
    }

    /// `f'(0)`; `-∞` for `u − u^p` with `p < 1`.
    pub fn fprime0(&self) -> f64 {
        match &self.spec {
            ReactionSpec::MinusPower { a, p } if *p < 1.0 => {
                if *a == 0.0 {
                    0.0
                } else {
                    -a.signum() * f64::INFINITY
                }
            }
            ReactionSpec::MinusPower { p, .. } if *p == 1.0 => 0.0,
            ReactionSpec::MinusPower { a, .. } => *a,
            ReactionSpec::Logistic { a } => *a,
            ReactionSpec::Offspring { r, kappa } => r * (kappa.mean() - 1.0),
            ReactionSpec::Polynomial { coeffs } => coeffs.get(1).copied().unwrap_or(0.0),
        }
    }

    /// `f'(u)` for `u ∈ (0, 1]`.
    pub fn derivative(&self, u: f64) -> f64 {
        match (&self.spec, &self.poly) {
            (_, Some(c)) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * u + k as f64 * ck),
            (ReactionSpec::MinusPower { a, p }, None) => a * (1.0 - p * u.powf(p - 1.0)),
            _ => unreachable!(),
        }
    }

    /// `F(u) = f(u) − f'(0) u`, evaluated without cancellation.
    pub fn nonlinear_part(&self, u: f64) -> f64 {
        match (&self.spec, &self.poly) {
            (ReactionSpec::MinusPower { a, p }, _) if *p > 1.0 => -a * u.powf(*p),
            (_, Some(c)) => {
                let mut rest = c.clone();
                if rest.len() > 1 {
                    rest[1] = 0.0;
                }
                horner(&rest, u)
            }
            _ => self.eval(u) - self.fprime0() * u,
        }
    }

    /// Checks the KPP hypotheses on a grid of `10^4` interior points plus
    /// the endpoints, and estimates a Hölder pair `(γ, C_F)` near zero.
    pub fn validate(&self) -> ValidationReport {
        let n = VALIDATION_GRID;
        let fp0 = self.fprime0();
        let grid = (1..=n).map(|i| i as f64 / (n + 1) as f64);

        let f0 = self.eval(0.0);
        let f1 = self.eval(1.0);
        let mut f2 = HypothesisCheck::pass("F2");
        if f0.abs() > EXACT_TOLERANCE {
            f2.fail(0.0, f0);
        } else if f1.abs() > EXACT_TOLERANCE {
            f2.fail(1.0, f1);
        } else {
            let (u, v) = grid
                .clone()
                .map(|u| (u, self.eval(u)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("grid is non-empty");
            if !(v > 0.0) {
                f2.fail(u, v);
            }
        }

        let mut f3 = HypothesisCheck::pass("F3");
        if fp0.is_finite() {
            let (u, excess) = std::iter::once(0.0)
                .chain(grid)
                .chain(std::iter::once(1.0))
                .map(|u| (u, self.eval(u) - fp0 * u))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("grid is non-empty");
            if excess > EXACT_TOLERANCE {
                f3.fail(u, excess);
            }
        } else {
            f3.fail(0.0, fp0);
        }

        let holder = if fp0.is_finite() { self.holder_estimate() } else { None };
        let mut f1_check = HypothesisCheck::pass("F1");
        if !fp0.is_finite() {
            f1_check.fail(0.0, fp0);
        } else if holder.is_none() {
            f1_check.fail(0.0, f64::NAN);
        }

        let probabilistic = match self.probabilistic_decompose() {
            Ok(form) => ProbabilisticStatus::Probabilistic { r: form.r, g: form.g },
            Err(DecomposeError::NotPolynomial) => ProbabilisticStatus::Undetermined,
            Err(e) => ProbabilisticStatus::NotProbabilistic {
                reason: e.to_string(),
            },
        };

        ValidationReport {
            fprime0: fp0,
            holder_gamma: holder.map(|h| h.0),
            holder_cf: holder.map(|h| h.1),
            checks: vec![f1_check, f2, f3],
            probabilistic,
        }
    }

    /// Largest `γ ≤ 0.99` (in steps of 0.01) for which `|F(u)| / u^{1+γ}`
    /// does not grow as `u → 0` on a log grid over `[1e-8, 0.1]`, together
    /// with `C_F = 1.1 · sup |F(u)| / u^{1+γ}` over that grid.
    fn holder_estimate(&self) -> Option<(f64, f64)> {
        const POINTS: usize = 400;
        let us: Vec<f64> = (0..POINTS)
            .map(|i| 10f64.powf(-8.0 + 7.0 * i as f64 / (POINTS - 1) as f64))
            .collect();
        let fs: Vec<f64> = us.iter().map(|&u| self.nonlinear_part(u).abs()).collect();
        if fs.iter().any(|f| !f.is_finite()) {
            return None;
        }
        let split = POINTS / 2;
        for step in (1..=99).rev() {
            let gamma = step as f64 / 100.0;
            let ratios: Vec<f64> = us
                .iter()
                .zip(&fs)
                .map(|(&u, &f)| f / u.powf(1.0 + gamma))
                .collect();
            let lower = ratios[..split].iter().cloned().fold(0.0, f64::max);
            let upper = ratios[split..].iter().cloned().fold(0.0, f64::max);
            if lower <= 1.05 * upper || lower == 0.0 {
                return Some((gamma, 1.1 * lower.max(upper)));
            }
        }
        None
    }

    /// Recovers `r = −f'(1⁻)` and the coefficients of `g(s) = s − f(1 − s)/r`.
    ///
    /// Succeeds iff `f` is a polynomial, `f'(1) < 0`, `g(0) = g'(0) = 0`,
    /// `g(1) = 1` and every coefficient of degree ≥ 2 is ≥ −1e-12.
    pub fn probabilistic_decompose(&self) -> Result<ProbabilisticForm, DecomposeError> {
        let c = self.poly.as_ref().ok_or(DecomposeError::NotPolynomial)?;
        let n = c.len();
        let fprime1: f64 = c.iter().enumerate().map(|(k, &ck)| k as f64 * ck).sum();
        if !(fprime1 < 0.0) {
            return Err(DecomposeError::NotDecreasingAtOne(fprime1));
        }
        let r = -fprime1;
        // f(1 - s) = Σ_i d_i s^i
        let mut d = vec![0.0; n.max(2)];
        for (j, &cj) in c.iter().enumerate() {
            for (i, di) in d.iter_mut().enumerate().take(j + 1) {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                *di += cj * binomial(j, i) * sign;
            }
        }
        let mut g: Vec<f64> = d.iter().map(|&di| -di / r).collect();
        g[1] += 1.0;
        let g_at_one: f64 = g.iter().sum();
        if g[0].abs() > EXACT_TOLERANCE
            || g[1].abs() > EXACT_TOLERANCE
            || (g_at_one - 1.0).abs() > EXACT_TOLERANCE
        {
            return Err(DecomposeError::Normalization {
                g0: g[0],
                g1: g[1],
                g_at_one,
            });
        }
        if let Some((degree, &value)) = g
            .iter()
            .enumerate()
            .skip(2)
            .find(|(_, &v)| v < -EXACT_TOLERANCE)
        {
            return Err(DecomposeError::NegativeCoefficient { degree, value });
        }
        g[0] = 0.0;
        g[1] = 0.0;
        while g.len() > 2 && g.last() == Some(&0.0) {
            g.pop();
        }
        Ok(ProbabilisticForm { r, g })
    }
}

fn offspring_polynomial(r: f64, kappa: &OffspringLaw) -> Vec<f64> {
    let deg = kappa.max_offspring() as usize;
    let mut c = vec![0.0; deg + 1];
    // r[1 - u - Σ p_k (1 - u)^k]; the constant term cancels exactly.
    c[1] = -r;
    for &(k, p) in kappa.probabilities() {
        let k = k as usize;
        for (j, cj) in c.iter_mut().enumerate().take(k + 1).skip(1) {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            *cj -= r * p * binomial(k, j) * sign;
        }
    }
    c
}

/// `f = r[1 − u − g(1 − u)]` with `g` given by its power series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilisticForm {
    pub r: f64,
    /// Coefficients of `g` in ascending degree; `g[0] = g[1] = 0`.
    pub g: Vec<f64>,
}

impl ProbabilisticForm {
    /// The offspring law whose generating function is `g`.
    pub fn offspring_law(&self) -> Result<OffspringLaw, ReactionError> {
        let probs = self
            .g
            .iter()
            .enumerate()
            .skip(2)
            .filter(|(_, &p)| p > EXACT_TOLERANCE)
            .map(|(k, &p)| (k as u32, p))
            .collect::<Vec<_>>();
        let total: f64 = probs.iter().map(|&(_, p)| p).sum();
        OffspringLaw::new(probs.into_iter().map(|(k, p)| (k, p / total)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Worst violating sample `(u, value)` when the check fails.
    pub worst: Option<(f64, f64)>,
}

impl HypothesisCheck {
    fn pass(name: &'static str) -> Self {
        HypothesisCheck {
            name,
            passed: true,
            worst: None,
        }
    }

    fn fail(&mut self, u: f64, value: f64) {
        self.passed = false;
        self.worst = Some((u, value));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ProbabilisticStatus {
    Probabilistic { r: f64, g: Vec<f64> },
    NotProbabilistic { reason: String },
    /// Non-polynomial reactions are never decomposed.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub fprime0: f64,
    pub holder_gamma: Option<f64>,
    pub holder_cf: Option<f64>,
    pub checks: Vec<HypothesisCheck>,
    pub probabilistic: ProbabilisticStatus,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn classical_kpp_passes() {
        let f = Reaction::minus_power(1.0, 2.0).unwrap();
        let rep = f.validate();
        assert!(rep.all_passed(), "{rep:?}");
        assert_eq!(rep.fprime0, 1.0);
        assert_eq!(rep.holder_gamma, Some(0.99));
    }

    #[test]
    fn square_root_reaction_fails_f2() {
        let f = Reaction::minus_power(1.0, 0.5).unwrap();
        let rep = f.validate();
        assert!(!rep.check("F2").unwrap().passed);
        assert!(!rep.check("F1").unwrap().passed);
    }

    #[test]
    fn scaled_logistic_passes() {
        let f = Reaction::logistic(2.0).unwrap();
        let rep = f.validate();
        assert!(rep.all_passed());
        assert_eq!(rep.fprime0, 2.0);
    }

    #[test]
    fn holder_exponent_detects_power() {
        let f = Reaction::minus_power(1.0, 1.5).unwrap();
        let rep = f.validate();
        let g = rep.holder_gamma.unwrap();
        assert!((0.45..=0.52).contains(&g), "gamma = {g}");
    }

    #[test]
    fn binary_offspring_is_classical() {
        let f = Reaction::from_offspring(1.0, &OffspringLaw::dirac(2).unwrap()).unwrap();
        for i in 0..=20 {
            let u = i as f64 / 20.0;
            assert_relative_eq!(f.eval(u), u - u * u, epsilon = 1e-15);
        }
        assert_eq!(f.fprime0(), 1.0);
    }

    #[test]
    fn p_offspring_matches_closed_form() {
        for p in 2..=6u32 {
            let f = Reaction::from_offspring(1.0, &OffspringLaw::dirac(p).unwrap()).unwrap();
            for i in 0..=20 {
                let u = i as f64 / 20.0;
                let expected = 1.0 - u - (1.0 - u).powi(p as i32);
                assert_relative_eq!(f.eval(u), expected, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn rate_two_binary_has_slope_two() {
        let f = Reaction::from_offspring(2.0, &OffspringLaw::dirac(2).unwrap()).unwrap();
        assert_eq!(f.fprime0(), 2.0);
    }

    #[test]
    fn decompose_classical() {
        let form = Reaction::minus_power(1.0, 2.0)
            .unwrap()
            .probabilistic_decompose()
            .unwrap();
        assert_eq!(form.r, 1.0);
        assert_eq!(form.g, vec![0.0, 0.0, 1.0]);
        assert_eq!(form.offspring_law().unwrap(), OffspringLaw::dirac(2).unwrap());
    }

    #[test]
    fn cubic_is_not_probabilistic() {
        let err = Reaction::minus_power(1.0, 3.0)
            .unwrap()
            .probabilistic_decompose()
            .unwrap_err();
        match err {
            DecomposeError::NegativeCoefficient { degree, value } => {
                assert_eq!(degree, 3);
                assert_relative_eq!(value, -0.5, epsilon = 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cubic_g_series() {
        // s - f(1-s)/2 with f = u - u^3 is (3/2)s^2 - (1/2)s^3
        let f = Reaction::minus_power(1.0, 3.0).unwrap();
        let c = f.polynomial_coeffs().unwrap();
        assert_eq!(c, &[0.0, 1.0, 0.0, -1.0]);
        let rep = f.validate();
        assert!(matches!(rep.probabilistic, ProbabilisticStatus::NotProbabilistic { .. }));
    }

    #[test]
    fn higher_minus_powers_not_probabilistic() {
        for p in 3..=8 {
            let f = Reaction::minus_power(1.0, p as f64).unwrap();
            assert!(f.probabilistic_decompose().is_err(), "p = {p}");
        }
        let f = Reaction::minus_power(1.0, 2.5).unwrap();
        assert_eq!(f.probabilistic_decompose(), Err(DecomposeError::NotPolynomial));
    }

    #[test]
    fn not_decreasing_at_one() {
        let f = Reaction::polynomial(vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            f.probabilistic_decompose(),
            Err(DecomposeError::NotDecreasingAtOne(_))
        ));
    }

    #[test]
    fn offspring_law_validation() {
        assert!(OffspringLaw::new(vec![(1, 1.0)]).is_err());
        assert!(OffspringLaw::new(vec![(2, 0.5)]).is_err());
        let k = OffspringLaw::new(vec![(3, 0.25), (2, 0.75)]).unwrap();
        assert_eq!(k.probabilities(), &[(2, 0.75), (3, 0.25)]);
        assert_relative_eq!(k.mean(), 2.25);
        assert_relative_eq!(k.pgf(1.0), 1.0);
    }

    #[test]
    fn json_forms() {
        let f: Reaction = serde_json::from_str(r#"{"family":"minus_power","a":1.0,"p":2.0}"#).unwrap();
        assert_eq!(f.fprime0(), 1.0);
        let g: Reaction =
            serde_json::from_str(r#"{"family":"offspring","r":1.0,"kappa":[[2,1.0]]}"#).unwrap();
        assert_eq!(g.polynomial_coeffs().unwrap(), f.polynomial_coeffs().unwrap());
        let h: Reaction =
            serde_json::from_str(r#"{"family":"polynomial","coeffs":[0.0,2.0,-2.0]}"#).unwrap();
        assert_eq!(h.fprime0(), 2.0);
    }
}
