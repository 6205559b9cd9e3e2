//! Continuous-time branching random walks and the McKean duality with the
//! nonlocal KPP equation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolve::{Field, Stencil};
use crate::kernel::KernelMeasure;
use crate::problem::Problem;
use crate::reaction::{OffspringLaw, Reaction};
use crate::sampling::{exponential, trial_rng, DiscreteSampler, KernelSampler};

/// Minimum ratio between the population cap and `𝔼Z_horizon`.
pub const CAP_FACTOR: f64 = 10.0;
/// Poisson tail mass at which the displacement series is truncated.
pub const SERIES_TAIL: f64 = 1e-12;
/// Asymptotic 5% Kolmogorov–Smirnov constant.
pub const KS_CONSTANT: f64 = 1.358;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrwError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("population cap {cap} is below {CAP_FACTOR} x E[Z_t] = {needed:.0}; raise the cap or shorten the horizon")]
    CapTooSmall { cap: u64, needed: f64 },
    #[error("BRW and PDE disagree on {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrwConfig {
    pub mu: f64,
    pub kernel: KernelMeasure,
    pub r: f64,
    pub kappa: OffspringLaw,
    pub horizon: f64,
    pub trials: u64,
    pub seed: u64,
    pub population_cap: u64,
}

impl BrwConfig {
    /// A configuration with the cap set to `1000 𝔼Z_horizon` (at least 10⁴).
    pub fn new(
        mu: f64,
        kernel: KernelMeasure,
        r: f64,
        kappa: OffspringLaw,
        horizon: f64,
        trials: u64,
        seed: u64,
    ) -> Self {
        let growth = (r * (kappa.mean() - 1.0) * horizon).exp();
        let cap = (1000.0 * growth).clamp(1e4, 1e9) as u64;
        BrwConfig {
            mu,
            kernel,
            r,
            kappa,
            horizon,
            trials,
            seed,
            population_cap: cap,
        }
    }

    /// `𝔼Z_t = exp[r(𝔼𝒵 − 1)t]`.
    pub fn expected_population(&self, t: f64) -> f64 {
        (self.r * (self.kappa.mean() - 1.0) * t).exp()
    }

    /// The reaction `r[1 − u − g(1 − u)]` dual to this process.
    pub fn reaction(&self) -> Reaction {
        Reaction::from_offspring(self.r, &self.kappa).expect("validated rate")
    }

    pub fn validate(&self) -> Result<(), BrwError> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(BrwError::Config(format!("mu = {}", self.mu)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(BrwError::Config(format!("r = {}", self.r)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(BrwError::Config(format!("horizon = {}", self.horizon)));
        }
        if self.trials == 0 {
            return Err(BrwError::Config("trials = 0".into()));
        }
        let needed = CAP_FACTOR * self.expected_population(self.horizon);
        if (self.population_cap as f64) < needed {
            return Err(BrwError::CapTooSmall {
                cap: self.population_cap,
                needed,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrwStats {
    /// Maxima of completed trials, ascending.
    pub maxima: Vec<f64>,
    /// `Z_horizon` of completed trials, in trial order.
    pub populations: Vec<u64>,
    /// Trials stopped at the population cap.
    pub aborted: u64,
    pub mean_population: f64,
    pub population_stderr: f64,
}

impl BrwStats {
    pub fn completed(&self) -> usize {
        self.maxima.len()
    }

    /// `P[max > x]` with its binomial standard error.
    pub fn p_max_gt(&self, x: f64) -> (f64, f64) {
        let n = self.maxima.len() as f64;
        let above = self.maxima.len() - self.maxima.partition_point(|&m| m <= x);
        let p = above as f64 / n;
        (p, (p * (1.0 - p) / n).sqrt())
    }

    /// `(x, P[max ≤ x], stderr)` at each `x`.
    pub fn max_cdf_points(&self, xs: &[f64]) -> Vec<(f64, f64, f64)> {
        xs.iter()
            .map(|&x| {
                let (p, se) = self.p_max_gt(x);
                (x, 1.0 - p, se)
            })
            .collect()
    }
}

enum Trial {
    Done { max: f64, population: u64 },
    Aborted,
}

fn run_trial(cfg: &BrwConfig, jumps: &KernelSampler, offspring: &DiscreteSampler, trial: u64) -> Trial {
    let mut rng = trial_rng(cfg.seed, trial);
    let mut pos = vec![0.0f64];
    let total = cfg.mu + cfg.r;
    let jump_prob = cfg.mu / total;
    let mut t = 0.0;
    loop {
        let z = pos.len();
        t += exponential(&mut rng, total * z as f64);
        if t > cfg.horizon {
            break;
        }
        let i = rng.random_range(0..z);
        if rng.random::<f64>() < jump_prob {
            pos[i] += jumps.sample(&mut rng);
        } else {
            let k = offspring.sample(&mut rng) as usize;
            if z + k - 1 > cfg.population_cap as usize {
                return Trial::Aborted;
            }
            let x = pos[i];
            pos.extend(std::iter::repeat_n(x, k - 1));
        }
    }
    let max = pos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Trial::Done {
        max,
        population: pos.len() as u64,
    }
}

/// Event-driven simulation: the next event time is drawn from the aggregate
/// rate `(μ + r)Z`, then a uniform particle either jumps by a `J`-sample or
/// is replaced by `𝒵` copies at its position.
pub fn simulate(cfg: &BrwConfig) -> Result<BrwStats, BrwError> {
    cfg.validate()?;
    let jumps = KernelSampler::new(&cfg.kernel);
    let offspring = DiscreteSampler::new(cfg.kappa.probabilities());
    let results: Vec<Trial> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, &jumps, &offspring, i))
        .collect();
    let mut maxima = Vec::with_capacity(results.len());
    let mut populations = Vec::with_capacity(results.len());
    let mut aborted = 0;
    for r in results {
        match r {
            Trial::Done { max, population } => {
                maxima.push(max);
                populations.push(population);
            }
            Trial::Aborted => aborted += 1,
        }
    }
    maxima.sort_by(f64::total_cmp);
    let n = populations.len() as f64;
    let mean = populations.iter().map(|&z| z as f64).sum::<f64>() / n;
    let var = populations
        .iter()
        .map(|&z| (z as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    Ok(BrwStats {
        maxima,
        populations,
        aborted,
        mean_population: mean,
        population_stderr: (var / n).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityPoint {
    pub x: f64,
    pub pde: f64,
    pub mc: f64,
    /// `sqrt(u(1 − u)/n)` with `u` the PDE value.
    pub stderr: f64,
    /// `(mc − pde)/stderr`; zero when both sides agree exactly.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub t: f64,
    pub trials: usize,
    pub aborted: u64,
    pub points: Vec<DualityPoint>,
    pub max_abs_z: f64,
}

impl DualityReport {
    pub fn passed(&self, z_limit: f64) -> bool {
        self.max_abs_z <= z_limit
    }
}

/// Checks that `cfg` is the branching process dual to `problem`.
pub fn check_dual(cfg: &BrwConfig, problem: &Problem) -> Result<(), BrwError> {
    if (cfg.mu - problem.mu).abs() > 1e-12 * problem.mu {
        return Err(BrwError::Mismatch(format!("mu: {} vs {}", cfg.mu, problem.mu)));
    }
    if cfg.kernel != problem.kernel {
        return Err(BrwError::Mismatch("jump kernel".into()));
    }
    let brw = cfg.reaction();
    let a = brw.polynomial_coeffs().expect("offspring reactions are polynomial");
    let b = problem
        .reaction
        .polynomial_coeffs()
        .ok_or_else(|| BrwError::Mismatch("PDE reaction is not a polynomial".into()))?;
    let n = a.len().max(b.len());
    for k in 0..n {
        let ak = a.get(k).copied().unwrap_or(0.0);
        let bk = b.get(k).copied().unwrap_or(0.0);
        if (ak - bk).abs() > 1e-12 * (1.0 + ak.abs()) {
            return Err(BrwError::Mismatch(format!(
                "reaction coefficient of u^{k}: {ak} vs {bk}"
            )));
        }
    }
    Ok(())
}

/// Compares `P[max > x]` from the BRW with the PDE field at every grid
/// point in `[x_lo, x_hi]`.
///
/// The grid solution is the dual of a walk whose jumps are rounded to the
/// nearest grid point, so `u(x_i)` estimates `P[max ≥ x_{i+1}]`; the
/// continuous process is read at the cell edge `x_i + dx/2`.
pub fn duality_check(
    cfg: &BrwConfig,
    problem: &Problem,
    field: &Field,
    x_range: (f64, f64),
) -> Result<DualityReport, BrwError> {
    check_dual(cfg, problem)?;
    if (field.t - cfg.horizon).abs() > 1e-9 * (1.0 + cfg.horizon) {
        return Err(BrwError::Mismatch(format!(
            "time: PDE at {} vs BRW at {}",
            field.t, cfg.horizon
        )));
    }
    let stats = simulate(cfg)?;
    Ok(compare_with_field(&stats, field, x_range, cfg.horizon))
}

/// The comparison step of [`duality_check`] on precomputed statistics.
pub fn compare_with_field(stats: &BrwStats, field: &Field, x_range: (f64, f64), t: f64) -> DualityReport {
    let n = stats.completed() as f64;
    let mut points = Vec::new();
    for i in 0..field.len() {
        let x = field.x(i);
        if x < x_range.0 - 1e-12 || x > x_range.1 + 1e-12 {
            continue;
        }
        let pde = field.values[i];
        let (mc, _) = stats.p_max_gt(x + 0.5 * field.dx);
        let stderr = (pde * (1.0 - pde) / n).sqrt();
        let diff = mc - pde;
        let z = if diff == 0.0 {
            0.0
        } else if stderr > 0.0 {
            diff / stderr
        } else {
            f64::INFINITY
        };
        points.push(DualityPoint {
            x,
            pde,
            mc,
            stderr,
            z,
        });
    }
    let max_abs_z = points.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
    DualityReport {
        t,
        trials: stats.completed(),
        aborted: stats.aborted,
        points,
        max_abs_z,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonizationReport {
    pub ks_distance: f64,
    pub ks_critical: f64,
    pub samples: u64,
    /// Largest Poisson index kept in the series.
    pub terms: usize,
}

impl PoissonizationReport {
    pub fn passed(&self, factor: f64) -> bool {
        self.ks_distance < factor * self.ks_critical
    }
}

/// Law of one particle's displacement at `t = 1`,
/// `e^{−μ} Σ_k μ^k/k! J^{∗k}`, on the lattice `h ℤ`: returns the index of
/// the first cell and the cell masses. Density bins are spread over cells by
/// exact overlap; the series stops once the Poisson tail is below 1e-12.
pub fn displacement_law(mu: f64, j: &KernelMeasure, h: f64) -> Result<(i64, Vec<f64>, usize), BrwError> {
    let stencil = Stencil::from_kernel(j, h).map_err(|e| BrwError::Config(e.to_string()))?;
    let taps = stencil.taps();
    let kmin = taps.first().map_or(0, |t| t.0) as i64;
    let kmax = taps.last().map_or(0, |t| t.0) as i64;
    let mut weight = (-mu).exp();
    let mut cum = weight;
    // power = J^{*k} on indices [k·kmin, k·kmax]
    let mut power = vec![1.0];
    let mut power_lo = 0i64;
    let mut terms = vec![(0i64, vec![weight])];
    let mut k = 0usize;
    while 1.0 - cum > SERIES_TAIL && k < 10_000 {
        k += 1;
        let mut next = vec![0.0; power.len() + (kmax - kmin) as usize];
        for (i, &p) in power.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(o, w) in taps {
                next[i + (o as i64 - kmin) as usize] += p * w;
            }
        }
        power = next;
        power_lo += kmin;
        weight *= mu / k as f64;
        cum += weight;
        terms.push((power_lo, power.iter().map(|&p| p * weight).collect()));
    }
    let lo = terms.iter().map(|t| t.0).min().unwrap_or(0);
    let hi = terms
        .iter()
        .map(|t| t.0 + t.1.len() as i64)
        .max()
        .unwrap_or(1);
    let mut law = vec![0.0; (hi - lo) as usize];
    for (start, masses) in terms {
        for (i, m) in masses.into_iter().enumerate() {
            law[(start - lo) as usize + i] += m;
        }
    }
    Ok((lo, law, k))
}

/// KS distance between simulated single-particle displacements at `t = 1`
/// and [`displacement_law`], evaluated at cell edges of a lattice of width
/// `h`.
pub fn poissonization_check(
    mu: f64,
    j: &KernelMeasure,
    h: f64,
    samples: u64,
    seed: u64,
) -> Result<PoissonizationReport, BrwError> {
    if !(mu >= 0.0 && mu.is_finite()) || samples == 0 {
        return Err(BrwError::Config(format!("mu = {mu}, samples = {samples}")));
    }
    let (lo, law, terms) = displacement_law(mu, j, h)?;
    let sampler = KernelSampler::new(j);
    let mut xs: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let mut t = exponential(&mut rng, mu);
            let mut x = 0.0;
            while t <= 1.0 {
                x += sampler.sample(&mut rng);
                t += exponential(&mut rng, mu);
            }
            x
        })
        .collect();
    xs.sort_by(f64::total_cmp);
    let n = samples as f64;
    let mut cdf = 0.0;
    let mut ks: f64 = 0.0;
    for (i, &m) in law.iter().enumerate() {
        cdf += m;
        let edge = (lo + i as i64) as f64 * h + 0.5 * h;
        let emp = xs.partition_point(|&x| x <= edge) as f64 / n;
        ks = ks.max((emp - cdf).abs());
    }
    Ok(PoissonizationReport {
        ks_distance: ks,
        ks_critical: KS_CONSTANT / n.sqrt(),
        samples,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(kernel: KernelMeasure, horizon: f64, trials: u64) -> BrwConfig {
        BrwConfig::new(1.0, kernel, 1.0, OffspringLaw::dirac(2).unwrap(), horizon, trials, 17)
    }

    #[test]
    fn growth_at_time_one() {
        let cfg = binary(KernelMeasure::uniform(-1.0, 1.0).unwrap(), 1.0, 40_000);
        let s = simulate(&cfg).unwrap();
        let e = std::f64::consts::E;
        assert!((s.mean_population - e).abs() < 3.0 * s.population_stderr);
        assert_eq!(s.aborted, 0);
    }

    #[test]
    fn time_zero_is_single_particle() {
        let cfg = binary(KernelMeasure::uniform(-1.0, 1.0).unwrap(), 0.0, 100);
        let s = simulate(&cfg).unwrap();
        assert!(s.maxima.iter().all(|&m| m == 0.0));
        assert_eq!(s.p_max_gt(-1e-12).0, 1.0);
        assert_eq!(s.p_max_gt(0.0).0, 0.0);
    }

    #[test]
    fn cap_must_cover_growth() {
        let mut cfg = binary(KernelMeasure::uniform(-1.0, 1.0).unwrap(), 5.0, 10);
        cfg.population_cap = 100;
        assert!(matches!(simulate(&cfg), Err(BrwError::CapTooSmall { .. })));
    }

    #[test]
    fn seeds_are_deterministic() {
        let cfg = binary(KernelMeasure::uniform(-1.0, 1.0).unwrap(), 2.0, 2000);
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
    }

    #[test]
    fn max_cdf_is_monotone() {
        let cfg = binary(KernelMeasure::uniform(-1.0, 1.0).unwrap(), 2.0, 2000);
        let s = simulate(&cfg).unwrap();
        let xs: Vec<f64> = (-30..=30).map(|i| i as f64 * 0.1).collect();
        let pts = s.max_cdf_points(&xs);
        for w in pts.windows(2) {
            assert!(w[0].1 <= w[1].1);
        }
    }

    #[test]
    fn rare_branching_is_a_compound_poisson_walk() {
        let cfg = BrwConfig::new(
            1.0,
            KernelMeasure::uniform(-1.0, 0.5).unwrap(),
            1e-12,
            OffspringLaw::dirac(2).unwrap(),
            3.0,
            50_000,
            4,
        );
        let s = simulate(&cfg).unwrap();
        let mean = s.maxima.iter().sum::<f64>() / s.maxima.len() as f64;
        // Wald: μ t mean(J), second moment μ t E[X²] = 3 · 0.25
        let se = (0.75f64 / 50_000.0).sqrt();
        assert!((mean + 0.75).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn dual_mismatch_rejected() {
        let cfg = binary(KernelMeasure::uniform(-1.0, 1.0).unwrap(), 1.0, 10);
        let p = Problem::new(
            KernelMeasure::uniform(-1.0, 1.0).unwrap(),
            1.0,
            Reaction::minus_power(1.0, 3.0).unwrap(),
        )
        .unwrap();
        assert!(matches!(check_dual(&cfg, &p), Err(BrwError::Mismatch(_))));
        let q = Problem::new(
            KernelMeasure::uniform(-1.0, 1.0).unwrap(),
            1.0,
            Reaction::minus_power(1.0, 2.0).unwrap(),
        )
        .unwrap();
        assert!(check_dual(&cfg, &q).is_ok());
    }

    #[test]
    fn poisson_point_mass_law() {
        let (lo, law, _) = displacement_law(1.0, &KernelMeasure::dirac(-1.0).unwrap(), 1.0).unwrap();
        let zero = (0 - lo) as usize;
        assert!((law[zero] - (-1f64).exp()).abs() < 1e-15);
        assert!((law[zero - 1] - (-1f64).exp()).abs() < 1e-15);
        assert!((law[zero - 2] - 0.5 * (-1f64).exp()).abs() < 1e-15);
        let (lo, law, _) = displacement_law(0.0, &KernelMeasure::dirac(-1.0).unwrap(), 1.0).unwrap();
        assert_eq!(lo, 0);
        assert_eq!(law, vec![1.0]);
    }

    #[test]
    fn poissonization_uniform() {
        let rep = poissonization_check(1.0, &KernelMeasure::uniform(-1.0, 0.0).unwrap(), 1e-3, 100_000, 21).unwrap();
        assert!(rep.passed(3.0), "{rep:?}");
    }
}
