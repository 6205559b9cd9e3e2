//! End-to-end pipelines shared by the command line and the test suites.
//!
//! Each returns a serializable report with the raw numbers; thresholds are
//! applied by the caller.

use serde::Serialize;
use thiserror::Error;

use crate::analytic::{self, AnalyticError, CriticalFront};
use crate::brw::{self, BrwConfig, BrwError, DualityReport};
use crate::dispersion::{self, DispersionError};
use crate::evolve::{fit_bramson, sample_times, EvolveError, Field, FitError, ShiftFit, Simulation, EDGE_TOLERANCE};
use crate::kernel::KernelMeasure;
use crate::problem::{Problem, ProblemError};
use crate::reaction::{Reaction, ReactionError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Brw(#[from] BrwError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
    #[error("{0}")]
    Setup(String),
}

type Result<T> = std::result::Result<T, ExperimentError>;

/// `(δ₋₁, μ = 1, u − u^p)`.
pub fn critical_problem(p: f64) -> Result<Problem> {
    Ok(Problem::new(
        KernelMeasure::dirac(-1.0).expect("unit atom"),
        1.0,
        Reaction::minus_power(1.0, p)?,
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiPoint {
    pub t: f64,
    /// `sup |u(t, x) − [(p − 1)t + 1]^{−1/(p−1)}|` over grid points in `[−1, 0)`.
    pub sup_error: f64,
}

/// Runs the critical problem from step data and compares `u` on `[−1, 0)`
/// with the Riccati solution at each of `times`.
pub fn riccati_errors(p: f64, times: &[f64], dx: f64, dt: f64) -> Result<Vec<RiccatiPoint>> {
    let problem = critical_problem(p)?;
    let field = Field::step_initial(dx, -4.0, 2.0)?;
    let mut sim = Simulation::new(&problem, field, dt)?.with_edge_monitor(EDGE_TOLERANCE);
    let mut out = Vec::new();
    for &t in times {
        sim.advance_to(t)?;
        let f = sim.field();
        let exact = analytic::riccati_u(p, f.t);
        let sup_error = (0..f.len())
            .filter(|&i| f.x(i) >= -1.0 - 1e-12 && f.x(i) < -1e-12)
            .map(|i| (f.values[i] - exact).abs())
            .fold(0.0, f64::max);
        out.push(RiccatiPoint { t: f.t, sup_error });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichPoint {
    pub t: f64,
    /// `σ_{1/2}(t)` of the grid solution.
    pub sigma: f64,
    /// `σ₋(t) + U⁻¹(1/2)` with `σ₋` read from the computed `u(t, −1)`.
    pub lower: f64,
    /// `σ₊(t) + U⁻¹(1/(2Ω))`.
    pub upper: f64,
    /// `σ_{1/2}(t) + log log t / log p`.
    pub gap: f64,
    pub inside: bool,
    /// `max (w̲ − u)` over window points left of the origin.
    pub sub_excess: f64,
    /// `max (u − w̄)` over window points left of the origin.
    pub super_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub p: f64,
    pub dx: f64,
    pub dt: f64,
    pub points: Vec<SandwichPoint>,
    pub violations: usize,
    pub worst_sub_excess: f64,
    pub worst_super_excess: f64,
    /// `C(T) = max |gap|` over sampled `t ∈ [t_min, T]`, at each decade `T`.
    pub c_by_decade: Vec<(f64, f64)>,
    /// `C(T_last) / C(T_last / 10)`.
    pub c_last_decade_ratio: f64,
}

/// Checks `σ₋ + U⁻¹(½) ≤ σ_{1/2} ≤ σ₊ + U⁻¹(½Ω⁻¹)` at the geometric
/// sample times in `[t_min, horizon]`, evaluates `w̲ ≤ u ≤ w̄` on the
/// negative half-line and tracks the `log log t` gap.
pub fn critical_sandwich(p: f64, t_min: f64, horizon: f64, dx: f64, dt: f64) -> Result<SandwichReport> {
    let problem = critical_problem(p)?;
    let front = CriticalFront::new(p)?;
    let half_inv = front.inverse(0.5)?;
    let upper_off = front.inverse(0.5 / analytic::omega(p))?;
    let depth = 6.0 + 2.0 * (horizon.max(3.0).ln().ln() / p.ln()).max(0.0);
    let field = Field::step_initial(dx, -depth.ceil(), 2.0)?;
    let mut sim = Simulation::new(&problem, field, dt)?.with_edge_monitor(EDGE_TOLERANCE);
    let mut points = Vec::new();
    for t in sample_times(horizon).into_iter().filter(|&t| t >= t_min) {
        sim.advance_to(t)?;
        let f = sim.field();
        let level = f.level_set(0.5)?;
        if level.flagged {
            return Err(ExperimentError::Setup(format!("level set left the window at t = {}", f.t)));
        }
        let lower = analytic::sigma_minus_from_value(p, f.at(-1.0)) + half_inv;
        let upper = analytic::sigma_plus(p, f.t) + upper_off;
        let sigma = level.position;
        let mut sub_excess = f64::NEG_INFINITY;
        let mut super_excess = f64::NEG_INFINITY;
        for i in (0..f.len()).filter(|&i| f.x(i) < -1e-12) {
            let (x, u) = (f.x(i), f.values[i]);
            sub_excess = sub_excess.max(analytic::subsolution(p, f.t, x) - u);
            super_excess = super_excess.max(u - analytic::supersolution(p, f.t, x));
        }
        points.push(SandwichPoint {
            t: f.t,
            sigma,
            lower,
            upper,
            gap: sigma + f.t.ln().ln() / p.ln(),
            inside: sigma >= lower && sigma <= upper,
            sub_excess,
            super_excess,
        });
    }
    let mut c_by_decade = Vec::new();
    let mut decade = t_min * 10.0;
    while decade <= horizon * (1.0 + 1e-9) {
        let c = points
            .iter()
            .filter(|q| q.t <= decade * (1.0 + 1e-9))
            .map(|q| q.gap.abs())
            .fold(0.0, f64::max);
        c_by_decade.push((decade, c));
        decade *= 10.0;
    }
    let c_last_decade_ratio = match c_by_decade.as_slice() {
        [.., (_, a), (_, b)] => b / a,
        _ => f64::NAN,
    };
    Ok(SandwichReport {
        p,
        dx,
        dt,
        violations: points.iter().filter(|q| !q.inside).count(),
        worst_sub_excess: points.iter().map(|q| q.sub_excess).fold(f64::NEG_INFINITY, f64::max),
        worst_super_excess: points.iter().map(|q| q.super_excess).fold(f64::NEG_INFINITY, f64::max),
        points,
        c_by_decade,
        c_last_decade_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrappingReport {
    pub thetas: Vec<f64>,
    pub horizon: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `sigma_max − sigma_min` over all levels and sample times.
    pub width: f64,
    /// Largest `U(x) − u(t, x)` over table points and sample times.
    pub worst_front_excess: f64,
    pub front_depth: usize,
    pub stationary_residual: f64,
}

/// Runs a trapping problem from step data to `horizon`, tracking the
/// level-set envelope and comparing `u` with the tabulated stationary
/// front on the same grid.
pub fn trapping_check(problem: &Problem, thetas: &[f64], horizon: f64, dx: f64, dt: f64, depth: usize) -> Result<TrappingReport> {
    let front = analytic::trapping_front(problem, depth, dx)?;
    let field = Field::step_initial(dx, -(depth as f64) - 10.0, 2.0)?;
    let mut sim = Simulation::new(problem, field, dt)?.with_edge_monitor(EDGE_TOLERANCE);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut excess = f64::NEG_INFINITY;
    for t in sample_times(horizon) {
        sim.advance_to(t)?;
        let f = sim.field();
        for &theta in thetas {
            let l = f.level_set(theta)?;
            if l.flagged {
                return Err(ExperimentError::Setup(format!("level set {theta} left the window at t = {}", f.t)));
            }
            lo = lo.min(l.position);
            hi = hi.max(l.position);
        }
        for i in 0..f.len() {
            if let Some(u_front) = front.at(f.x(i)).filter(|_| f.x(i) >= -(depth as f64) - 1e-9) {
                excess = excess.max(u_front - f.values[i]);
            }
        }
    }
    Ok(TrappingReport {
        thetas: thetas.to_vec(),
        horizon,
        sigma_min: lo,
        sigma_max: hi,
        width: hi - lo,
        worst_front_excess: excess,
        front_depth: depth,
        stationary_residual: analytic::stationary_residual(problem, &front),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BramsonReport {
    pub lambda_star: f64,
    /// `c*` of the grid-discretized kernel, used to detrend.
    pub c_star_grid: f64,
    pub c_star: f64,
    /// `−3/(2λ*)`.
    pub slope_target: f64,
    pub fits: Vec<ShiftFit>,
    /// Largest increase of `σ_θ(t) − c*t` between consecutive samples
    /// after `transient`.
    pub worst_increase: f64,
    pub transient: f64,
    pub recenterings: u64,
}

/// Runs a regular problem to the largest window end and fits
/// `σ_θ − c*t` on `{1, log t}` over each window.
#[allow(clippy::too_many_arguments)]
pub fn bramson_check(
    problem: &Problem,
    theta: f64,
    dx: f64,
    dt: f64,
    window_width: f64,
    anchor: f64,
    windows: &[(f64, f64)],
) -> Result<BramsonReport> {
    let fp0 = problem.fprime0();
    let (lambda_star, c_star) = dispersion::minimize_gamma(&problem.kernel, problem.mu, fp0)?;
    let field = Field::step_initial(dx, -anchor * window_width, (1.0 - anchor) * window_width)?;
    let mut sim = Simulation::new(problem, field, dt)?
        .with_edge_monitor(EDGE_TOLERANCE)
        .with_recentering(anchor)?;
    let grid_kernel = sim
        .stencil()
        .to_measure()
        .map_err(|e| ExperimentError::Setup(e.to_string()))?;
    let (_, c_star_grid) = dispersion::minimize_gamma(&grid_kernel, problem.mu, fp0)?;
    let horizon = windows.iter().map(|w| w.1).fold(0.0, f64::max);
    let trace = sim.trace(&sample_times(horizon), &[theta])?;
    let fits = windows
        .iter()
        .map(|&w| fit_bramson(&trace, theta, c_star_grid, w))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let transient = windows.iter().map(|w| w.0).fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = trace
        .samples
        .iter()
        .filter(|s| s.t >= transient)
        .map(|s| s.sigma[0] - c_star_grid * s.t)
        .collect();
    let worst_increase = shifted.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(BramsonReport {
        lambda_star,
        c_star_grid,
        c_star,
        slope_target: -1.5 / lambda_star,
        fits,
        worst_increase,
        transient,
        recenterings: sim.recenterings(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthPoint {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    /// `exp((r(𝔼𝒵 − 1)) t)`.
    pub expected: f64,
    pub z: f64,
}

/// Empirical `𝔼Z_t` against the exact growth at the config's horizon.
pub fn growth_point(cfg: &BrwConfig) -> Result<GrowthPoint> {
    let stats = brw::simulate(cfg)?;
    let expected = cfg.expected_population(cfg.horizon);
    Ok(GrowthPoint {
        t: cfg.horizon,
        mean: stats.mean_population,
        stderr: stats.population_stderr,
        expected,
        z: (stats.mean_population - expected) / stats.population_stderr,
    })
}

/// Solves the dual equation on a window wide enough for `cfg.horizon` and
/// compares it with BRW maxima over `x_range`.
pub fn duality_experiment(cfg: &BrwConfig, dx: f64, dt: f64, x_range: (f64, f64)) -> Result<DualityReport> {
    let problem = Problem::new(cfg.kernel.clone(), cfg.mu, cfg.reaction())?;
    let (a, b) = cfg.kernel.support();
    let reach = (cfg.mu + cfg.r * cfg.kappa.mean()) * cfg.horizon * a.abs().max(b.abs()) * 4.0 + 10.0;
    let left = ((x_range.0 - reach) / dx).floor() * dx;
    let right = ((x_range.1 + reach) / dx).ceil() * dx;
    let field = Field::step_initial(dx, left, right)?;
    let mut sim = Simulation::new(&problem, field, dt)?.with_edge_monitor(EDGE_TOLERANCE);
    let steps = (cfg.horizon / dt).round();
    if (steps * dt - cfg.horizon).abs() > 1e-9 * (1.0 + cfg.horizon) {
        return Err(ExperimentError::Setup(format!(
            "dt = {dt} does not divide t = {}",
            cfg.horizon
        )));
    }
    sim.advance_to(cfg.horizon)?;
    let mut field = sim.field().clone();
    field.t = cfg.horizon;
    Ok(brw::duality_check(cfg, &problem, &field, x_range)?)
}
