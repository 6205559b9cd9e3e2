//! Solution snapshots on a uniform grid.

use serde::{Deserialize, Serialize};

use super::EvolveError;

/// `u(t, ·)` on cells `x_i = (origin + i)·dx`, extended by constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub dx: f64,
    /// Grid index of `values[0]`.
    pub origin: i64,
    pub values: Vec<f64>,
    pub t: f64,
    pub left_bc: f64,
    pub right_bc: f64,
}

/// Result of a level-set query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    pub position: f64,
    /// Set when no cell in the window reaches the level.
    pub flagged: bool,
}

impl Field {
    /// `1_{x < 0}` on a window covering `[x_min, x_max]`, with `x = 0` a grid
    /// point.
    pub fn step_initial(dx: f64, x_min: f64, x_max: f64) -> Result<Self, EvolveError> {
        Self::from_fn(dx, x_min, x_max, |x| if x < 0.0 { 1.0 } else { 0.0 })
    }

    /// Samples `g` at grid points covering `[x_min, x_max]`, with bcs 1 and 0.
    pub fn from_fn(
        dx: f64,
        x_min: f64,
        x_max: f64,
        g: impl Fn(f64) -> f64,
    ) -> Result<Self, EvolveError> {
        if !(dx > 0.0 && dx.is_finite() && x_min < x_max) {
            return Err(EvolveError::BadGrid(format!(
                "dx = {dx}, window [{x_min}, {x_max}]"
            )));
        }
        let first = (x_min / dx).floor() as i64;
        let last = (x_max / dx).ceil() as i64;
        let values = (first..=last).map(|i| g(i as f64 * dx)).collect();
        Ok(Field {
            dx,
            origin: first,
            values,
            t: 0.0,
            left_bc: 1.0,
            right_bc: 0.0,
        })
    }

    pub fn constant(dx: f64, x_min: f64, x_max: f64, c: f64) -> Result<Self, EvolveError> {
        let mut f = Self::from_fn(dx, x_min, x_max, |_| c)?;
        f.left_bc = c;
        f.right_bc = c;
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        (self.origin + i as i64) as f64 * self.dx
    }

    pub fn x_left(&self) -> f64 {
        self.x(0)
    }

    pub fn x_right(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    /// Value at grid index `k` (global), using the boundary constants outside.
    pub fn at_index(&self, k: i64) -> f64 {
        let i = k - self.origin;
        if i < 0 {
            self.left_bc
        } else if i >= self.values.len() as i64 {
            self.right_bc
        } else {
            self.values[i as usize]
        }
    }

    /// Value at the grid point nearest to `x`.
    pub fn at(&self, x: f64) -> f64 {
        self.at_index((x / self.dx).round() as i64)
    }

    /// `σ_θ = sup{x : u(x) ≥ θ}`, linearly interpolated between the
    /// rightmost cell at or above `θ` and its neighbour.
    pub fn level_set(&self, theta: f64) -> Result<LevelSet, EvolveError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(EvolveError::BadTheta(theta));
        }
        let Some(i) = self.values.iter().rposition(|&v| v >= theta) else {
            return Ok(LevelSet {
                position: self.x_left(),
                flagged: true,
            });
        };
        let v = self.values[i];
        let next = self.values.get(i + 1).copied().unwrap_or(self.right_bc);
        let frac = if v > next { (v - theta) / (v - next) } else { 0.0 };
        Ok(LevelSet {
            position: self.x(i) + frac.clamp(0.0, 1.0) * self.dx,
            flagged: false,
        })
    }

    /// Largest increase between neighbouring cells, including the bcs.
    pub fn monotonicity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut prev = self.left_bc;
        for &v in self.values.iter().chain(std::iter::once(&self.right_bc)) {
            worst = worst.max(v - prev);
            prev = v;
        }
        worst
    }

    /// Moves the window by `cells` (positive = right), filling with bcs.
    pub fn shift_window(&mut self, cells: i64) {
        let n = self.values.len();
        let s = cells.unsigned_abs() as usize;
        if cells > 0 {
            let s = s.min(n);
            self.values.drain(..s);
            self.values.extend(std::iter::repeat_n(self.right_bc, s));
        } else if cells < 0 {
            let s = s.min(n);
            self.values.truncate(n - s);
            self.values.splice(0..0, std::iter::repeat_n(self.left_bc, s));
        }
        self.origin += cells;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(values: Vec<f64>) -> Field {
        Field {
            dx: 1.0,
            origin: 0,
            values,
            t: 0.0,
            left_bc: 1.0,
            right_bc: 0.0,
        }
    }

    #[test]
    fn level_set_interpolates() {
        let f = field(vec![1.0, 0.75, 0.25, 0.0]);
        let l = f.level_set(0.5).unwrap();
        assert_eq!(l.position, 1.5);
        assert!(!l.flagged);
    }

    #[test]
    fn level_set_exact_hit() {
        let f = field(vec![1.0, 0.5, 0.25, 0.0]);
        assert_eq!(f.level_set(0.5).unwrap().position, 1.0);
    }

    #[test]
    fn level_set_empty_is_flagged() {
        let f = field(vec![0.0; 4]);
        let l = f.level_set(0.5).unwrap();
        assert!(l.flagged);
        assert_eq!(l.position, 0.0);
        assert!(f.level_set(1.0).is_err());
        assert!(f.level_set(0.0).is_err());
    }

    #[test]
    fn step_initial_is_right_continuous() {
        let f = Field::step_initial(0.5, -2.0, 2.0).unwrap();
        assert_eq!(f.origin, -4);
        assert_eq!(f.at(-0.5), 1.0);
        assert_eq!(f.at(0.0), 0.0);
        assert_eq!(f.at(-100.0), 1.0);
        assert_eq!(f.at(100.0), 0.0);
        assert_eq!(f.monotonicity_defect(), 0.0);
    }

    #[test]
    fn window_shift_fills_with_bcs() {
        let mut f = field(vec![1.0, 0.75, 0.25, 0.0]);
        f.shift_window(1);
        assert_eq!(f.values, vec![0.75, 0.25, 0.0, 0.0]);
        assert_eq!(f.origin, 1);
        f.shift_window(-2);
        assert_eq!(f.values, vec![1.0, 1.0, 0.75, 0.25]);
        assert_eq!(f.origin, -1);
        assert_eq!(f.at_index(1), 0.75);
    }
}
