//! Compactly supported jump kernels.
//!
//! A [`KernelMeasure`] is a probability measure on `[-1, 1]` made of point
//! masses and a piecewise-constant density. Exponential moments
//! `∫ x^k e^{λx} J(dx)` are evaluated in closed form, which is what the
//! dispersion relation, the exponential tilt and the moving-frame walk all
//! need.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on the total mass of a kernel.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Target bound on `|centroid - midpoint|` of every refined tilted bin.
const TILT_CENTROID_TOLERANCE: f64 = 1e-10;

/// Deepest bisection level used when refining tilted bins.
const TILT_MAX_DEPTH: u32 = 26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("atom at {pos} has non-positive or non-finite mass {mass}")]
    BadAtomMass { pos: f64, mass: f64 },
    #[error("bin [{left}, {right}] is empty, reversed or has negative height {height}")]
    BadBin { left: f64, right: f64, height: f64 },
    #[error("mass outside [-1, 1]: component at {at}")]
    OutsideSupport { at: f64 },
    #[error("bins [{0}, ..] and [.., {1}] overlap")]
    Overlap(f64, f64),
    #[error("total mass {0} differs from 1 by more than 1e-12")]
    Mass(f64),
    #[error("kernel is concentrated at the origin (zero-atom mass {0})")]
    DegenerateZeroAtom(f64),
    #[error("jump rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("tilt parameter must be positive and finite, got {0}")]
    BadTilt(f64),
    #[error("tilted mean {mean} disagrees with c*/nu = {expected} (|diff| = {diff:e})")]
    InconsistentTilt { mean: f64, expected: f64, diff: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub pos: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub left: f64,
    pub right: f64,
    pub height: f64,
}

impl Bin {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn mass(&self) -> f64 {
        self.height * self.width()
    }
}

/// On-disk form of a kernel, validated into a [`KernelMeasure`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub bins: Vec<Bin>,
}

/// A probability measure made of atoms and a piecewise-constant density.
///
/// Components are kept in canonical order (atoms by position with
/// coincident atoms merged, bins by left edge), so two measures that differ
/// only by the order in which components were listed compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub struct KernelMeasure {
    atoms: Vec<Atom>,
    bins: Vec<Bin>,
}

impl TryFrom<KernelSpec> for KernelMeasure {
    type Error = KernelError;

    fn try_from(spec: KernelSpec) -> Result<Self, Self::Error> {
        KernelMeasure::new(spec.atoms, spec.bins)
    }
}

impl From<KernelMeasure> for KernelSpec {
    fn from(k: KernelMeasure) -> Self {
        KernelSpec {
            atoms: k.atoms,
            bins: k.bins,
        }
    }
}

impl KernelMeasure {
    /// Validates and canonicalizes a measure supported in `[-1, 1]`.
    pub fn new(atoms: Vec<Atom>, bins: Vec<Bin>) -> Result<Self, KernelError> {
        let k = Self::canonical(atoms, bins)?;
        if let Some(at) = k.components_outside(-1.0, 1.0) {
            return Err(KernelError::OutsideSupport { at });
        }
        k.check_mass()?;
        Ok(k)
    }

    /// Same as [`KernelMeasure::new`] without the `[-1, 1]` support check.
    /// Used for grid stencils whose outermost cells may poke past the unit
    /// interval by less than a cell.
    pub(crate) fn new_unbounded(atoms: Vec<Atom>, bins: Vec<Bin>) -> Result<Self, KernelError> {
        let k = Self::canonical(atoms, bins)?;
        k.check_mass()?;
        Ok(k)
    }

    fn canonical(mut atoms: Vec<Atom>, mut bins: Vec<Bin>) -> Result<Self, KernelError> {
        for a in &atoms {
            if !(a.mass > 0.0 && a.mass.is_finite() && a.pos.is_finite()) {
                return Err(KernelError::BadAtomMass {
                    pos: a.pos,
                    mass: a.mass,
                });
            }
        }
        for b in &bins {
            let ok = b.left.is_finite()
                && b.right.is_finite()
                && b.left < b.right
                && b.height >= 0.0
                && b.height.is_finite();
            if !ok {
                return Err(KernelError::BadBin {
                    left: b.left,
                    right: b.right,
                    height: b.height,
                });
            }
        }
        atoms.sort_by(|a, b| a.pos.total_cmp(&b.pos));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.pos == a.pos => last.mass += a.mass,
                _ => merged.push(a),
            }
        }
        bins.sort_by(|a, b| a.left.total_cmp(&b.left));
        for w in bins.windows(2) {
            if w[0].right > w[1].left {
                return Err(KernelError::Overlap(w[0].left, w[1].right));
            }
        }
        Ok(KernelMeasure {
            atoms: merged,
            bins,
        })
    }

    fn components_outside(&self, lo: f64, hi: f64) -> Option<f64> {
        self.atoms
            .iter()
            .map(|a| a.pos)
            .find(|&p| p < lo || p > hi)
            .or_else(|| {
                self.bins
                    .iter()
                    .find(|b| b.height > 0.0 && (b.left < lo || b.right > hi))
                    .map(|b| if b.left < lo { b.left } else { b.right })
            })
    }

    fn check_mass(&self) -> Result<(), KernelError> {
        let mass = self.total_mass();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(KernelError::Mass(mass));
        }
        Ok(())
    }

    /// Unit point mass at `pos`.
    pub fn dirac(pos: f64) -> Result<Self, KernelError> {
        Self::new(vec![Atom { pos, mass: 1.0 }], vec![])
    }

    /// Uniform probability density on `[left, right]`.
    pub fn uniform(left: f64, right: f64) -> Result<Self, KernelError> {
        Self::new(
            vec![],
            vec![Bin {
                left,
                right,
                height: 1.0 / (right - left),
            }],
        )
    }

    /// Equal-weight atoms at the given positions.
    pub fn atoms_uniform(positions: &[f64]) -> Result<Self, KernelError> {
        let w = 1.0 / positions.len() as f64;
        Self::new(
            positions.iter().map(|&pos| Atom { pos, mass: w }).collect(),
            vec![],
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn is_atomic(&self) -> bool {
        self.bins.iter().all(|b| b.height == 0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>()
            + self.bins.iter().map(Bin::mass).sum::<f64>()
    }

    pub fn zero_atom_mass(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.pos == 0.0)
            .map(|a| a.mass)
            .sum()
    }

    /// `J((0, ∞))`, the mass strictly to the right of the origin.
    pub fn positive_mass(&self) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.pos > 0.0)
            .map(|a| a.mass)
            .sum();
        let bins: f64 = self
            .bins
            .iter()
            .filter(|b| b.right > 0.0)
            .map(|b| b.height * (b.right - b.left.max(0.0)))
            .sum();
        atoms + bins
    }

    /// Smallest and largest point of the support.
    pub fn support(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in &self.atoms {
            lo = lo.min(a.pos);
            hi = hi.max(a.pos);
        }
        for b in self.bins.iter().filter(|b| b.height > 0.0) {
            lo = lo.min(b.left);
            hi = hi.max(b.right);
        }
        (lo, hi)
    }

    /// `∫ x^k e^{λx} J(dx)` for `k ∈ {0, 1, 2}`.
    pub fn weighted_exp_moment(&self, k: usize, lambda: f64) -> f64 {
        assert!(k <= 2, "only moments of order 0..=2 are supported");
        let atoms: f64 = self
            .atoms
            .iter()
            .map(|a| a.mass * a.pos.powi(k as i32) * (lambda * a.pos).exp())
            .sum();
        let bins: f64 = self
            .bins
            .iter()
            .map(|b| b.height * bin_moment(b.left, b.right, lambda, k))
            .sum();
        atoms + bins
    }

    /// `∫ e^{λx} J(dx)`.
    pub fn exp_moment(&self, lambda: f64) -> f64 {
        self.weighted_exp_moment(0, lambda)
    }

    pub fn mean(&self) -> f64 {
        self.weighted_exp_moment(1, 0.0)
    }

    pub fn second_moment(&self) -> f64 {
        self.weighted_exp_moment(2, 0.0)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment() - m * m
    }

    /// Spatial reflection `K̄(A) = K(-A)`.
    pub fn reverse(&self) -> KernelMeasure {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                pos: -a.pos,
                mass: a.mass,
            })
            .collect::<Vec<_>>();
        let bins = self
            .bins
            .iter()
            .map(|b| Bin {
                left: -b.right,
                right: -b.left,
                height: b.height,
            })
            .collect::<Vec<_>>();
        Self::canonical(atoms, bins).expect("reflection preserves validity")
    }

    /// Removes an atom at the origin, folding it into the jump rate:
    /// `μ(J∗u − u) = (1 − a)μ(J̃∗u − u)`.
    pub fn normalize(&self, mu: f64) -> Result<(f64, KernelMeasure), KernelError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(KernelError::BadRate(mu));
        }
        let a = self.zero_atom_mass();
        if a == 0.0 {
            return Ok((mu, self.clone()));
        }
        let rest = 1.0 - a;
        if rest <= MASS_TOLERANCE {
            return Err(KernelError::DegenerateZeroAtom(a));
        }
        let atoms = self
            .atoms
            .iter()
            .filter(|x| x.pos != 0.0)
            .map(|x| Atom {
                pos: x.pos,
                mass: x.mass / rest,
            })
            .collect();
        let bins = self
            .bins
            .iter()
            .map(|b| Bin {
                height: b.height / rest,
                ..*b
            })
            .collect();
        Ok((rest * mu, Self::new(atoms, bins)?))
    }

    /// Exponential tilt `K = (μ/ν) e^{λx} J` with `ν = μ ∫ e^{λx} J(dx)`.
    ///
    /// Atoms are reweighted exactly. Each density bin is bisected until the
    /// centroid of every piece sits within 1e-10 of its midpoint; each piece
    /// carries its exact tilted mass as a constant height. When `c_star` is
    /// supplied the tilted mean must match `c*/ν` to 1e-8.
    pub fn tilt(
        &self,
        mu: f64,
        lambda: f64,
        c_star: Option<f64>,
    ) -> Result<TiltedKernel, KernelError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(KernelError::BadRate(mu));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(KernelError::BadTilt(lambda));
        }
        let z0 = self.exp_moment(lambda);
        let nu = mu * z0;
        let m = self.weighted_exp_moment(1, lambda) / z0;
        let variance = self.weighted_exp_moment(2, lambda) / z0 - m * m;
        if let Some(c) = c_star {
            let expected = c / nu;
            let diff = (m - expected).abs();
            if diff >= 1e-8 {
                return Err(KernelError::InconsistentTilt {
                    mean: m,
                    expected,
                    diff,
                });
            }
        }

        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                pos: a.pos,
                mass: a.mass * (lambda * a.pos).exp() / z0,
            })
            .collect::<Vec<_>>();
        let mut bins = Vec::new();
        for b in self.bins.iter().filter(|b| b.height > 0.0) {
            refine_tilted(b.left, b.right, b.height / z0, lambda, 0, &mut bins);
        }
        let mut base = Self::canonical(atoms, bins)?;
        // Rounding in thousands of sub-bin masses can leave a residue of a
        // few ulps; rescale so the stored measure is a probability.
        let total = base.total_mass();
        if total != 1.0 {
            for a in &mut base.atoms {
                a.mass /= total;
            }
            for b in &mut base.bins {
                b.height /= total;
            }
        }
        base.check_mass()?;
        Ok(TiltedKernel {
            base,
            nu,
            m,
            variance,
            lambda,
        })
    }
}

fn refine_tilted(left: f64, right: f64, scale: f64, lambda: f64, depth: u32, out: &mut Vec<Bin>) {
    let w = right - left;
    let mass = scale * bin_moment(left, right, lambda, 0);
    let first = scale * bin_moment(left, right, lambda, 1);
    let centroid = first / mass;
    let offset = (centroid - 0.5 * (left + right)).abs();
    if offset <= TILT_CENTROID_TOLERANCE || depth >= TILT_MAX_DEPTH {
        out.push(Bin {
            left,
            right,
            height: mass / w,
        });
        return;
    }
    let mid = 0.5 * (left + right);
    refine_tilted(left, mid, scale, lambda, depth + 1, out);
    refine_tilted(mid, right, scale, lambda, depth + 1, out);
}

/// A tilted kernel together with the moving-frame constants.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedKernel {
    /// The tilted probability measure `K`.
    pub base: KernelMeasure,
    /// Normalizer `ν = μ ∫ e^{λ*x} J(dx)`, the jump rate of the centered walk.
    pub nu: f64,
    /// Mean of `K`, computed in closed form from `J`.
    pub m: f64,
    /// Variance of `K`, computed in closed form from `J`.
    pub variance: f64,
    pub lambda: f64,
}

impl TiltedKernel {
    pub fn reverse(&self) -> TiltedKernel {
        TiltedKernel {
            base: self.base.reverse(),
            nu: self.nu,
            m: -self.m,
            variance: self.variance,
            lambda: self.lambda,
        }
    }
}

/// `ψ_j(z) = ∫_0^1 s^j e^{zs} ds` for `j ∈ {0, 1, 2}`.
fn psi(j: usize, z: f64) -> f64 {
    if z.abs() < 1.0 {
        // Σ z^n / (n! (n + j + 1))
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 0..40 {
            let add = term / (n + j + 1) as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
            term *= z / (n + 1) as f64;
        }
        return sum;
    }
    let ez = z.exp();
    let mut p = z.exp_m1() / z;
    for i in 1..=j {
        p = (ez - i as f64 * p) / z;
    }
    p
}

/// `∫_l^r x^k e^{λx} dx`, expanded about the endpoint where `e^{λx}` is
/// largest so that nothing overflows for `|λ| ≤ 700`.
pub(crate) fn bin_moment(l: f64, r: f64, lambda: f64, k: usize) -> f64 {
    let w = r - l;
    let (anchor, sign) = if lambda >= 0.0 { (r, -1.0) } else { (l, 1.0) };
    // x = anchor + sign * y, y ∈ [0, w]
    let z = sign * lambda * w;
    let scale = (lambda * anchor).exp();
    let mut total = 0.0;
    let mut wpow = w;
    for j in 0..=k {
        let binom = match (k, j) {
            (2, 1) => 2.0,
            _ => 1.0,
        };
        let coeff = binom * anchor.powi((k - j) as i32) * sign.powi(j as i32);
        total += coeff * wpow * psi(j, z);
        wpow *= w;
    }
    scale * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bernoulli() -> KernelMeasure {
        KernelMeasure::atoms_uniform(&[-1.0, 1.0]).unwrap()
    }

    #[test]
    fn psi_matches_quadrature() {
        for &z in &[-30.0, -2.5, -0.9, -1e-8, 0.0, 0.3, 0.99, 1.0, 4.0, 25.0] {
            for j in 0..=2 {
                let n = 20_000;
                let h = 1.0 / n as f64;
                let mut q = 0.0;
                for i in 0..n {
                    let s = (i as f64 + 0.5) * h;
                    q += s.powi(j as i32) * (z * s).exp() * h;
                }
                assert_relative_eq!(psi(j, z), q, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn normalize_unchanged_without_zero_atom() {
        let j = KernelMeasure::dirac(-1.0).unwrap();
        let (mu, out) = j.normalize(1.0).unwrap();
        assert_eq!(mu, 1.0);
        assert_eq!(out, j);
    }

    #[test]
    fn normalize_removes_half_zero_atom() {
        let raw = KernelMeasure::new(
            vec![Atom { pos: 0.0, mass: 0.5 }, Atom { pos: -1.0, mass: 0.5 }],
            vec![],
        )
        .unwrap();
        let (mu, j) = raw.normalize(2.0).unwrap();
        assert_eq!(mu, 1.0);
        assert_eq!(j, KernelMeasure::dirac(-1.0).unwrap());
    }

    #[test]
    fn normalize_quarter_zero_atom_with_density() {
        let raw = KernelMeasure::new(
            vec![Atom { pos: 0.0, mass: 0.25 }],
            vec![Bin { left: -1.0, right: 0.0, height: 0.75 }],
        )
        .unwrap();
        let (mu, j) = raw.normalize(4.0).unwrap();
        assert_eq!(mu, 3.0);
        assert_eq!(j, KernelMeasure::uniform(-1.0, 0.0).unwrap());
    }

    #[test]
    fn normalize_rejects_pure_zero_atom() {
        let raw = KernelMeasure::dirac(0.0).unwrap();
        assert!(matches!(raw.normalize(1.0), Err(KernelError::DegenerateZeroAtom(_))));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            KernelMeasure::new(vec![Atom { pos: -1.0, mass: 0.999 }], vec![]),
            Err(KernelError::Mass(_))
        ));
        assert!(matches!(
            KernelMeasure::dirac(1.5),
            Err(KernelError::OutsideSupport { .. })
        ));
        let overlap = KernelMeasure::new(
            vec![],
            vec![
                Bin { left: -1.0, right: 0.2, height: 0.5 },
                Bin { left: 0.0, right: 1.0, height: 0.4 },
            ],
        );
        assert!(matches!(overlap, Err(KernelError::Overlap(..))));
    }

    #[test]
    fn exp_moment_examples() {
        let d = KernelMeasure::dirac(-1.0).unwrap();
        for &l in &[0.0, 0.5, 3.0] {
            assert_relative_eq!(d.exp_moment(l), (-l).exp(), max_relative = 1e-15);
        }
        let u = KernelMeasure::uniform(-1.0, 1.0).unwrap();
        assert_relative_eq!(u.exp_moment(1.0), 1f64.sinh(), max_relative = 1e-14);
        assert_relative_eq!(u.exp_moment(1e-9), 1.0, max_relative = 1e-14);
        assert_eq!(u.exp_moment(0.0), 1.0);
        assert_relative_eq!(u.exp_moment(700.0), 700f64.sinh() / 700.0, max_relative = 1e-12);
    }

    #[test]
    fn moments_of_uniform() {
        let u = KernelMeasure::uniform(-1.0, 0.0).unwrap();
        assert_relative_eq!(u.mean(), -0.5, max_relative = 1e-14);
        assert_relative_eq!(u.variance(), 1.0 / 12.0, max_relative = 1e-12);
    }

    #[test]
    fn tilt_bernoulli() {
        let lambda: f64 = 1.199_678_640_257_734;
        let c = lambda.sinh();
        let t = bernoulli().tilt(1.0, lambda, Some(c)).unwrap();
        assert_relative_eq!(t.nu, lambda.cosh(), max_relative = 1e-14);
        assert_relative_eq!(t.m, lambda.tanh(), max_relative = 1e-12);
        assert!((t.base.mean() - t.m).abs() < 1e-10);
        assert!((t.base.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tilt_point_mass_is_fixed() {
        let d = KernelMeasure::dirac(-1.0).unwrap();
        let t = d.tilt(1.0, 1.0, None).unwrap();
        assert_relative_eq!(t.nu, (-1f64).exp(), max_relative = 1e-15);
        assert_eq!(t.base, d);
        assert_eq!(t.m, -1.0);
    }

    #[test]
    fn tilt_rejects_zero_lambda_and_bad_pair() {
        let d = bernoulli();
        assert!(matches!(d.tilt(1.0, 0.0, None), Err(KernelError::BadTilt(_))));
        assert!(matches!(
            d.tilt(1.0, 1.0, Some(5.0)),
            Err(KernelError::InconsistentTilt { .. })
        ));
    }

    #[test]
    fn tilted_density_mean_within_tolerance() {
        let u = KernelMeasure::uniform(-1.0, 1.0).unwrap();
        let t = u.tilt(1.0, 1.9, None).unwrap();
        assert!((t.base.mean() - t.m).abs() < 1e-10);
        assert!((t.base.variance() - t.variance).abs() < 1e-8);
        // closed-form mean of the tilted uniform density
        let l: f64 = 1.9;
        let exact = 1.0 / l.tanh() - 1.0 / l;
        assert_relative_eq!(t.m, exact, max_relative = 1e-12);
    }

    #[test]
    fn reverse_examples() {
        assert_eq!(
            KernelMeasure::dirac(-1.0).unwrap().reverse(),
            KernelMeasure::dirac(1.0).unwrap()
        );
        assert_eq!(
            KernelMeasure::uniform(-1.0, 0.0).unwrap().reverse(),
            KernelMeasure::uniform(0.0, 1.0).unwrap()
        );
        let sym = KernelMeasure::new(
            vec![Atom { pos: 1.0, mass: 0.25 }, Atom { pos: -1.0, mass: 0.25 }],
            vec![Bin { left: -0.5, right: 0.5, height: 0.5 }],
        )
        .unwrap();
        assert_eq!(sym.reverse(), sym);
    }

    #[test]
    fn positive_mass_and_support() {
        let u = KernelMeasure::uniform(-1.0, 1.0).unwrap();
        assert_relative_eq!(u.positive_mass(), 0.5);
        assert_eq!(u.support(), (-1.0, 1.0));
        assert_eq!(KernelMeasure::dirac(-1.0).unwrap().positive_mass(), 0.0);
    }

    #[test]
    fn json_shape() {
        let j: KernelMeasure = serde_json::from_str(
            r#"{"atoms":[{"pos":-1.0,"mass":0.5}], "bins":[{"left":-1.0,"right":0.0,"height":0.5}]}"#,
        )
        .unwrap();
        assert_eq!(j.atoms().len(), 1);
        assert_eq!(j.bins().len(), 1);
        let bad = serde_json::from_str::<KernelMeasure>(r#"{"atoms":[{"pos":-1.0,"mass":0.999}]}"#);
        assert!(bad.is_err());
    }
}
