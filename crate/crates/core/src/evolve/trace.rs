//! Level-set traces and the logarithmic-shift fit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum number of samples inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 30;
/// Earliest admissible start of a fit window.
pub const MIN_FIT_START: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("fit window must start at t >= {MIN_FIT_START}, got {0}")]
    EarlyWindow(f64),
    #[error("fit window [{0}, {1}] spans less than one decade")]
    NarrowWindow(f64, f64),
    #[error("only {0} samples in the fit window, need {MIN_FIT_SAMPLES}")]
    TooFewSamples(usize),
    #[error("theta {0} is not in the trace")]
    UnknownTheta(f64),
    #[error("sample at t = {0} is flagged (level set left the window)")]
    FlaggedSample(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    /// `σ_θ(t)`, one entry per traced `θ`.
    pub sigma: Vec<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrontTrace {
    pub thetas: Vec<f64>,
    pub samples: Vec<TraceSample>,
}

impl FrontTrace {
    pub fn theta_index(&self, theta: f64) -> Option<usize> {
        self.thetas.iter().position(|&t| (t - theta).abs() < 1e-12)
    }

    /// `(t, σ_θ(t))` pairs for one level.
    pub fn series(&self, theta: f64) -> Option<Vec<(f64, f64)>> {
        let k = self.theta_index(theta)?;
        Some(self.samples.iter().map(|s| (s.t, s.sigma[k])).collect())
    }
}

/// `σ_θ(t) − c*·t ≈ intercept + slope·log t` over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftFit {
    /// Speed from an unconstrained fit on `{1, t, log t}` (diagnostic).
    pub c_hat: f64,
    pub slope_hat: f64,
    pub intercept_hat: f64,
    pub residual_sup: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Least-squares fit of `σ_θ(t) − c*t` against `{1, log t}` for samples
/// with `t ∈ [t_min, t_max]`.
pub fn fit_bramson(
    trace: &FrontTrace,
    theta: f64,
    c_star: f64,
    window: (f64, f64),
) -> Result<ShiftFit, FitError> {
    let (t_min, t_max) = window;
    if t_min < MIN_FIT_START {
        return Err(FitError::EarlyWindow(t_min));
    }
    if t_max < 10.0 * t_min {
        return Err(FitError::NarrowWindow(t_min, t_max));
    }
    let k = trace
        .theta_index(theta)
        .ok_or(FitError::UnknownTheta(theta))?;
    let mut pts = Vec::new();
    for s in &trace.samples {
        if s.t >= t_min && s.t <= t_max {
            if s.flagged {
                return Err(FitError::FlaggedSample(s.t));
            }
            pts.push((s.t, s.sigma[k]));
        }
    }
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(FitError::TooFewSamples(pts.len()));
    }
    let xs: Vec<[f64; 2]> = pts.iter().map(|&(t, _)| [1.0, t.ln()]).collect();
    let ys: Vec<f64> = pts.iter().map(|&(t, s)| s - c_star * t).collect();
    let [intercept, slope] = least_squares(&xs, &ys);
    let residual_sup = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x[1]).abs())
        .fold(0.0, f64::max);

    let xs3: Vec<[f64; 3]> = pts.iter().map(|&(t, _)| [1.0, t, t.ln()]).collect();
    let ys3: Vec<f64> = pts.iter().map(|&(_, s)| s).collect();
    let [_, c_hat, _] = least_squares(&xs3, &ys3);

    Ok(ShiftFit {
        c_hat,
        slope_hat: slope,
        intercept_hat: intercept,
        residual_sup,
        window,
        samples: pts.len(),
    })
}

/// Ordinary least squares through column-scaled normal equations.
fn least_squares<const N: usize>(xs: &[[f64; N]], ys: &[f64]) -> [f64; N] {
    let mut scale = [0.0f64; N];
    for x in xs {
        for j in 0..N {
            scale[j] = scale[j].max(x[j].abs());
        }
    }
    for s in &mut scale {
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    let mut a = [[0.0f64; N]; N];
    let mut b = [0.0f64; N];
    for (x, &y) in xs.iter().zip(ys) {
        for i in 0..N {
            let xi = x[i] / scale[i];
            b[i] += xi * y;
            for j in 0..N {
                a[i][j] += xi * x[j] / scale[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..N {
        let piv = (col..N)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut sol = [0.0f64; N];
    for row in (0..N).rev() {
        let mut acc = b[row];
        for c in row + 1..N {
            acc -= a[row][c] * sol[c];
        }
        sol[row] = acc / a[row][row];
    }
    for j in 0..N {
        sol[j] /= scale[j];
    }
    sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(mut g: impl FnMut(f64) -> f64) -> FrontTrace {
        let mut samples = Vec::new();
        let mut t = 1.0;
        while t <= 3000.0 {
            samples.push(TraceSample {
                t,
                sigma: vec![g(t)],
                flagged: false,
            });
            t *= 1.05;
        }
        FrontTrace {
            thetas: vec![0.5],
            samples,
        }
    }

    #[test]
    fn exact_recovery() {
        let tr = synthetic(|t| 2.0 * t - 0.75 * t.ln() + 3.0);
        let fit = fit_bramson(&tr, 0.5, 2.0, (10.0, 2000.0)).unwrap();
        assert!((fit.slope_hat + 0.75).abs() < 1e-10);
        assert!((fit.intercept_hat - 3.0).abs() < 1e-9);
        assert!(fit.residual_sup < 1e-9);
        assert!((fit.c_hat - 2.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tr = synthetic(|t| 2.0 * t - 0.75 * t.ln() + 3.0 + rng.random_range(-0.01..0.01));
        let fit = fit_bramson(&tr, 0.5, 2.0, (10.0, 2000.0)).unwrap();
        assert!((fit.slope_hat + 0.75).abs() < 0.02);
    }

    #[test]
    fn constant_trace() {
        let tr = synthetic(|_| 3.0);
        let fit = fit_bramson(&tr, 0.5, 0.0, (10.0, 2000.0)).unwrap();
        assert!(fit.slope_hat.abs() < 1e-12);
        assert!((fit.intercept_hat - 3.0).abs() < 1e-12);
    }

    #[test]
    fn bad_windows() {
        let tr = synthetic(|_| 3.0);
        assert_eq!(
            fit_bramson(&tr, 0.5, 0.0, (5.0, 2000.0)),
            Err(FitError::EarlyWindow(5.0))
        );
        assert!(matches!(
            fit_bramson(&tr, 0.5, 0.0, (100.0, 500.0)),
            Err(FitError::NarrowWindow(..))
        ));
        assert!(matches!(
            fit_bramson(&tr, 0.5, 0.0, (1000.0, 10000.0)),
            Err(FitError::TooFewSamples(_))
        ));
        assert!(matches!(
            fit_bramson(&tr, 0.1, 0.0, (10.0, 2000.0)),
            Err(FitError::UnknownTheta(_))
        ));
    }
}
