//! Grid discretization of `J∗u`.

use std::collections::BTreeMap;

use crate::kernel::{Atom, KernelError, KernelMeasure};

use super::EvolveError;

/// Atoms must sit this close to a grid point.
pub const ALIGNMENT_TOLERANCE: f64 = 1e-12;

/// `J∗u(x_i) ≈ Σ_k w_k u(x_i − k·dx)`.
///
/// Atoms map to single taps. A density bin spreads over the cells it
/// overlaps, each tap getting the bin mass inside
/// `[(k − ½)dx, (k + ½)dx]`, which is a midpoint rule in the interior.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    dx: f64,
    taps: Vec<(isize, f64)>,
}

impl Stencil {
    pub fn from_kernel(j: &KernelMeasure, dx: f64) -> Result<Self, EvolveError> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(EvolveError::BadGrid(format!("dx = {dx}")));
        }
        let mut taps: BTreeMap<isize, f64> = BTreeMap::new();
        for a in j.atoms() {
            let k = (a.pos / dx).round();
            if (a.pos - k * dx).abs() > ALIGNMENT_TOLERANCE {
                return Err(EvolveError::Misaligned { pos: a.pos, dx });
            }
            *taps.entry(k as isize).or_default() += a.mass;
        }
        for b in j.bins().iter().filter(|b| b.height > 0.0) {
            let first = (b.left / dx + 0.5).floor() as isize;
            let last = (b.right / dx - 0.5).ceil() as isize;
            for k in first..=last {
                let lo = ((k as f64 - 0.5) * dx).max(b.left);
                let hi = ((k as f64 + 0.5) * dx).min(b.right);
                if hi > lo {
                    *taps.entry(k).or_default() += b.height * (hi - lo);
                }
            }
        }
        let taps = taps.into_iter().filter(|&(_, w)| w > 0.0).collect();
        Ok(Stencil { dx, taps })
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn taps(&self) -> &[(isize, f64)] {
        &self.taps
    }

    /// The purely atomic measure the stencil actually convolves with.
    pub fn to_measure(&self) -> Result<KernelMeasure, KernelError> {
        let atoms = self
            .taps
            .iter()
            .map(|&(k, w)| Atom {
                pos: k as f64 * self.dx,
                mass: w,
            })
            .collect();
        KernelMeasure::new_unbounded(atoms, vec![])
    }

    /// Adds `Σ_k w_k (u_{i−k} − u_i)` to `out`, reading `left` for indices
    /// below the window and `right` above it.
    pub fn accumulate(&self, u: &[f64], left: f64, right: f64, out: &mut [f64]) {
        let n = u.len() as isize;
        for &(k, w) in &self.taps {
            let lo = k.clamp(0, n) as usize;
            let hi = (n + k).clamp(0, n) as usize;
            for (o, &ui) in out[..lo].iter_mut().zip(&u[..lo]) {
                *o += w * (left - ui);
            }
            if hi > lo {
                let src = &u[(lo as isize - k) as usize..(hi as isize - k) as usize];
                for ((o, &ui), &s) in out[lo..hi].iter_mut().zip(&u[lo..hi]).zip(src) {
                    *o += w * (s - ui);
                }
            }
            let hi = hi.max(lo);
            for (o, &ui) in out[hi..].iter_mut().zip(&u[hi..]) {
                *o += w * (right - ui);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_map_to_taps() {
        let j = KernelMeasure::dirac(-1.0).unwrap();
        let s = Stencil::from_kernel(&j, 0.05).unwrap();
        assert_eq!(s.taps(), &[(-20, 1.0)]);
    }

    #[test]
    fn misaligned_atom_rejected() {
        let j = KernelMeasure::dirac(-1.0).unwrap();
        assert!(matches!(
            Stencil::from_kernel(&j, 0.3),
            Err(EvolveError::Misaligned { .. })
        ));
    }

    #[test]
    fn uniform_bin_weights() {
        let j = KernelMeasure::uniform(-1.0, 1.0).unwrap();
        let s = Stencil::from_kernel(&j, 0.25).unwrap();
        let taps = s.taps();
        assert_eq!(taps.len(), 9);
        assert_eq!(taps[0], (-4, 0.0625));
        assert_eq!(taps[4], (0, 0.125));
        let total: f64 = taps.iter().map(|t| t.1).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let m = s.to_measure().unwrap();
        assert!(m.mean().abs() < 1e-15);
    }

    #[test]
    fn shift_by_atom_uses_boundary_values() {
        let j = KernelMeasure::dirac(-1.0).unwrap();
        let s = Stencil::from_kernel(&j, 0.5).unwrap();
        let u = [1.0, 0.8, 0.4, 0.0];
        let mut out = [0.0; 4];
        s.accumulate(&u, 1.0, 0.0, &mut out);
        // J∗u(x) = u(x + 1), two cells to the right
        let expected = [0.4 - 1.0, 0.0 - 0.8, 0.0 - 0.4, 0.0];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-15);
        }
        let j = KernelMeasure::dirac(1.0).unwrap();
        let s = Stencil::from_kernel(&j, 0.5).unwrap();
        let mut out = [0.0; 4];
        s.accumulate(&u, 1.0, 0.0, &mut out);
        let expected = [0.0, 1.0 - 0.8, 1.0 - 0.4, 0.8 - 0.0];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-15);
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let j = KernelMeasure::uniform(-0.7, 0.9).unwrap();
        let s = Stencil::from_kernel(&j, 0.1).unwrap();
        let u = vec![1.0; 50];
        let mut out = vec![0.0; 50];
        s.accumulate(&u, 1.0, 1.0, &mut out);
        assert!(out.iter().all(|&o| o == 0.0));
    }
}
