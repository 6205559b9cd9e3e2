//! Method-of-lines integration of `∂ₜu = μ(J∗u − u) + f(u)` with classical
//! RK4 on a moving window, and level-set tracking.

mod field;
mod stencil;
mod trace;

pub use field::{Field, LevelSet};
pub use stencil::{Stencil, ALIGNMENT_TOLERANCE};
pub use trace::{fit_bramson, FitError, FrontTrace, ShiftFit, TraceSample, MIN_FIT_SAMPLES, MIN_FIT_START};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::Problem;
use crate::reaction::Reaction;

/// Overshoot outside `[0, 1]` that is silently clamped.
pub const OVERSHOOT_TOLERANCE: f64 = 1e-9;
/// Allowed distance between an edge cell and its boundary constant.
pub const EDGE_TOLERANCE: f64 = 1e-12;
/// The front is recentred when it comes this close (as a window fraction)
/// to either edge.
pub const RECENTER_MARGIN: f64 = 0.2;
/// Ratio between consecutive trace sample times.
pub const SAMPLE_RATIO: f64 = 1.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("atom at {pos} is not a multiple of dx = {dx}")]
    Misaligned { pos: f64, dx: f64 },
    #[error("theta must lie in (0, 1), got {0}")]
    BadTheta(f64),
    #[error("dt = {dt} exceeds the stability budget {budget}")]
    DtTooLarge { dt: f64, budget: f64 },
    #[error("instability at t = {t}, x = {x}: value {value} left [0, 1]")]
    Instability { t: f64, x: f64, value: f64 },
    #[error("boundary contamination at t = {t}: {side} edge value {value} (bc {bc})")]
    Contamination {
        t: f64,
        side: &'static str,
        value: f64,
        bc: f64,
    },
    #[error("recentring anchor {0} must lie in [0.25, 0.75]")]
    BadAnchor(f64),
}

/// `0.5 / (μ + f'(0))`.
pub fn dt_budget(mu: f64, fprime0: f64) -> f64 {
    0.5 / (mu + fprime0)
}

/// The default step `0.4 / (μ + f'(0))`.
pub fn auto_dt(mu: f64, fprime0: f64) -> f64 {
    0.4 / (mu + fprime0)
}

/// RK4 integrator for one problem on one window.
#[derive(Debug, Clone)]
pub struct Simulation {
    stencil: Stencil,
    mu: f64,
    reaction: Reaction,
    field: Field,
    dt: f64,
    t0: f64,
    steps: u64,
    /// Window fraction at which the front is re-placed, if recentring.
    anchor: Option<f64>,
    edge_tolerance: Option<f64>,
    reads_left: bool,
    reads_right: bool,
    recenterings: u64,
    scratch: [Vec<f64>; 3],
}

impl Simulation {
    pub fn new(problem: &Problem, field: Field, dt: f64) -> Result<Self, EvolveError> {
        let budget = dt_budget(problem.mu, problem.fprime0());
        if !(dt > 0.0 && dt <= budget * (1.0 + 1e-12)) {
            return Err(EvolveError::DtTooLarge { dt, budget });
        }
        if field.is_empty() {
            return Err(EvolveError::BadGrid("empty window".into()));
        }
        let stencil = Stencil::from_kernel(&problem.kernel, field.dx)?;
        let reads_left = stencil.taps().iter().any(|&(k, _)| k > 0);
        let reads_right = stencil.taps().iter().any(|&(k, _)| k < 0);
        let n = field.len();
        Ok(Simulation {
            stencil,
            mu: problem.mu,
            reaction: problem.reaction.clone(),
            t0: field.t,
            field,
            dt,
            steps: 0,
            anchor: None,
            edge_tolerance: None,
            reads_left,
            reads_right,
            recenterings: 0,
            scratch: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        })
    }

    /// Keeps `σ_{1/2}` away from the edges by re-placing it at `anchor`
    /// (a fraction of the window) whenever it gets within 20% of an edge.
    pub fn with_recentering(mut self, anchor: f64) -> Result<Self, EvolveError> {
        if !(0.25..=0.75).contains(&anchor) {
            return Err(EvolveError::BadAnchor(anchor));
        }
        self.anchor = Some(anchor);
        Ok(self)
    }

    /// Aborts when an edge cell the stencil reads through drifts from its
    /// boundary constant by more than `tol`.
    pub fn with_edge_monitor(mut self, tol: f64) -> Self {
        self.edge_tolerance = Some(tol);
        self
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn t(&self) -> f64 {
        self.field.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn recenterings(&self) -> u64 {
        self.recenterings
    }

    fn rhs(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.stencil
            .accumulate(u, self.field.left_bc, self.field.right_bc, out);
        for (o, &ui) in out.iter_mut().zip(u) {
            *o = self.mu * *o + self.reaction.eval(ui);
        }
    }

    /// One classical RK4 step.
    pub fn step(&mut self) -> Result<(), EvolveError> {
        let dt = self.dt;
        let mut scratch = std::mem::take(&mut self.scratch);
        let [acc, stage, k] = &mut scratch;
        let u = &self.field.values;

        self.rhs(u, k);
        for ((a, s), (&ui, &ki)) in acc.iter_mut().zip(stage.iter_mut()).zip(u.iter().zip(k.iter())) {
            *a = ki;
            *s = ui + 0.5 * dt * ki;
        }
        self.rhs(stage, k);
        for ((a, s), (&ui, &ki)) in acc.iter_mut().zip(stage.iter_mut()).zip(u.iter().zip(k.iter())) {
            *a += 2.0 * ki;
            *s = ui + 0.5 * dt * ki;
        }
        self.rhs(stage, k);
        for ((a, s), (&ui, &ki)) in acc.iter_mut().zip(stage.iter_mut()).zip(u.iter().zip(k.iter())) {
            *a += 2.0 * ki;
            *s = ui + dt * ki;
        }
        self.rhs(stage, k);
        for (a, &ki) in acc.iter_mut().zip(k.iter()) {
            *a += ki;
        }

        self.steps += 1;
        let t = self.t0 + self.steps as f64 * dt;
        let field = &mut self.field;
        for (i, (v, &a)) in field.values.iter_mut().zip(acc.iter()).enumerate() {
            let next = *v + dt / 6.0 * a;
            if !(-OVERSHOOT_TOLERANCE..=1.0 + OVERSHOOT_TOLERANCE).contains(&next) {
                let x = field.x(i);
                self.scratch = scratch;
                return Err(EvolveError::Instability { t, x, value: next });
            }
            *v = next.clamp(0.0, 1.0);
        }
        self.scratch = scratch;
        self.field.t = t;
        self.check_edges()?;
        self.recenter();
        Ok(())
    }

    fn check_edges(&self) -> Result<(), EvolveError> {
        let Some(tol) = self.edge_tolerance else {
            return Ok(());
        };
        let f = &self.field;
        let first = f.values[0];
        let last = f.values[f.len() - 1];
        if self.reads_left && (first - f.left_bc).abs() > tol {
            return Err(EvolveError::Contamination {
                t: f.t,
                side: "left",
                value: first,
                bc: f.left_bc,
            });
        }
        if self.reads_right && (last - f.right_bc).abs() > tol {
            return Err(EvolveError::Contamination {
                t: f.t,
                side: "right",
                value: last,
                bc: f.right_bc,
            });
        }
        Ok(())
    }

    fn recenter(&mut self) {
        let Some(anchor) = self.anchor else { return };
        let n = self.field.len();
        let Ok(level) = self.field.level_set(0.5) else { return };
        if level.flagged {
            return;
        }
        let pos = (level.position - self.field.x_left()) / self.field.dx;
        let frac = pos / n as f64;
        if !(RECENTER_MARGIN..=1.0 - RECENTER_MARGIN).contains(&frac) {
            let cells = (pos - anchor * n as f64).round() as i64;
            self.field.shift_window(cells);
            self.recenterings += 1;
        }
    }

    /// Steps until `t` is within half a step of `target`.
    pub fn advance_to(&mut self, target: f64) -> Result<(), EvolveError> {
        while self.field.t + 0.5 * self.dt < target {
            self.step()?;
        }
        Ok(())
    }

    /// Advances through `times` (ascending), recording `σ_θ` at each.
    pub fn trace(&mut self, times: &[f64], thetas: &[f64]) -> Result<FrontTrace, EvolveError> {
        for &theta in thetas {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(EvolveError::BadTheta(theta));
            }
        }
        let mut out = FrontTrace {
            thetas: thetas.to_vec(),
            samples: Vec::with_capacity(times.len()),
        };
        for &t in times {
            self.advance_to(t)?;
            let mut flagged = false;
            let mut sigma = Vec::with_capacity(thetas.len());
            for &theta in thetas {
                let l = self.field.level_set(theta)?;
                flagged |= l.flagged;
                sigma.push(l.position);
            }
            out.samples.push(TraceSample {
                t: self.field.t,
                sigma,
                flagged,
            });
        }
        Ok(out)
    }
}

/// `0`, then `1, 1.05, 1.05², …` below `horizon`, then `horizon`.
pub fn sample_times(horizon: f64) -> Vec<f64> {
    let mut times = vec![0.0];
    let mut t = 1.0;
    while t < horizon {
        times.push(t);
        t *= SAMPLE_RATIO;
    }
    if horizon > 0.0 {
        times.push(horizon);
    }
    times
}

/// Initial window and recentring policy for [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dx: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Keep the front at its initial window fraction.
    #[serde(default = "default_true")]
    pub recenter: bool,
}

fn default_true() -> bool {
    true
}

/// Integrates from step data `1_{x<0}` and samples `σ_θ` at
/// [`sample_times`], monitoring both edges at 1e-12.
pub fn run(
    problem: &Problem,
    grid: &GridSpec,
    dt: f64,
    horizon: f64,
    thetas: &[f64],
) -> Result<FrontTrace, EvolveError> {
    let field = Field::step_initial(grid.dx, grid.x_min, grid.x_max)?;
    let mut sim = Simulation::new(problem, field, dt)?.with_edge_monitor(EDGE_TOLERANCE);
    if grid.recenter {
        let anchor = -grid.x_min / (grid.x_max - grid.x_min);
        sim = sim.with_recentering(anchor)?;
    }
    sim.trace(&sample_times(horizon), thetas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelMeasure;

    fn problem(j: KernelMeasure, f: Reaction) -> Problem {
        Problem::new(j, 1.0, f).unwrap()
    }

    #[test]
    fn equilibria_are_fixed() {
        let p = problem(
            KernelMeasure::uniform(-1.0, 1.0).unwrap(),
            Reaction::minus_power(1.0, 2.0).unwrap(),
        );
        for c in [0.0, 1.0] {
            let f = Field::constant(0.1, -5.0, 5.0, c).unwrap();
            let mut sim = Simulation::new(&p, f, 0.1).unwrap();
            sim.advance_to(5.0).unwrap();
            assert!(sim.field().values.iter().all(|&v| v == c));
        }
    }

    #[test]
    fn pure_jump_buffer_decays() {
        let p = Problem {
            kernel: KernelMeasure::dirac(-1.0).unwrap(),
            mu: 1.0,
            reaction: Reaction::zero(),
        };
        let f = Field::step_initial(0.25, -4.0, 2.0).unwrap();
        let mut sim = Simulation::new(&p, f, 0.01).unwrap();
        sim.advance_to(1.0).unwrap();
        for x in [-1.0, -0.75, -0.5, -0.25] {
            assert!((sim.field().at(x) - (-1f64).exp()).abs() < 1e-9);
        }
        // P[N_1 <= 1] on [-2, -1)
        assert!((sim.field().at(-1.5) - 2.0 * (-1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn dt_budget_enforced() {
        let p = problem(
            KernelMeasure::dirac(-1.0).unwrap(),
            Reaction::minus_power(1.0, 2.0).unwrap(),
        );
        let f = Field::step_initial(0.5, -4.0, 2.0).unwrap();
        assert!(matches!(
            Simulation::new(&p, f, 0.3),
            Err(EvolveError::DtTooLarge { .. })
        ));
    }

    #[test]
    fn sample_times_are_geometric() {
        let ts = sample_times(10.0);
        assert_eq!(ts[0], 0.0);
        assert_eq!(ts[1], 1.0);
        assert_eq!(*ts.last().unwrap(), 10.0);
        assert!((ts[2] / ts[1] - 1.05).abs() < 1e-15);
    }

    #[test]
    fn recentring_follows_front() {
        let p = problem(
            KernelMeasure::uniform(-1.0, 1.0).unwrap(),
            Reaction::minus_power(1.0, 2.0).unwrap(),
        );
        let grid = GridSpec {
            dx: 0.05,
            x_min: -30.0,
            x_max: 50.0,
            recenter: true,
        };
        let tr = run(&p, &grid, 0.1, 80.0, &[0.1, 0.5, 0.9]).unwrap();
        let last = tr.samples.last().unwrap();
        assert!(!last.flagged);
        assert!(last.sigma[0] > last.sigma[1] && last.sigma[1] > last.sigma[2]);
        // c* ≈ 0.9 for this triple
        assert!(last.sigma[1] > 50.0 && last.sigma[1] < 80.0);
    }

    #[test]
    fn contamination_is_detected() {
        let p = problem(
            KernelMeasure::uniform(-1.0, 1.0).unwrap(),
            Reaction::minus_power(1.0, 2.0).unwrap(),
        );
        let grid = GridSpec {
            dx: 0.1,
            x_min: -5.0,
            x_max: 5.0,
            recenter: false,
        };
        assert!(matches!(
            run(&p, &grid, 0.1, 20.0, &[0.5]),
            Err(EvolveError::Contamination { .. })
        ));
    }
}
