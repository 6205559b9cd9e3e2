//! Random streams and samplers shared by the Monte Carlo modules.

use rand::Rng;
use rand::SeedableRng;
use rand_distr::Exp1;
use rand_chacha::ChaCha8Rng;

use crate::kernel::KernelMeasure;

/// Independent stream for one trial: the seed picks the key and the trial
/// index the ChaCha stream, so results do not depend on scheduling.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Exponential variate with the given rate.
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    rng.sample::<f64, _>(Exp1) / rate
}

#[derive(Debug, Clone, Copy)]
enum Component {
    Atom(f64),
    Bin(f64, f64),
}

/// Draws from a [`KernelMeasure`]: a component is picked from the
/// cumulative mass table, then a uniform point inside it for bins.
#[derive(Debug, Clone)]
pub struct KernelSampler {
    cumulative: Vec<f64>,
    components: Vec<Component>,
}

impl KernelSampler {
    pub fn new(j: &KernelMeasure) -> Self {
        let mut cumulative = Vec::new();
        let mut components = Vec::new();
        let mut acc = 0.0;
        for a in j.atoms() {
            acc += a.mass;
            cumulative.push(acc);
            components.push(Component::Atom(a.pos));
        }
        for b in j.bins().iter().filter(|b| b.height > 0.0) {
            acc += b.mass();
            cumulative.push(acc);
            components.push(Component::Bin(b.left, b.right));
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        KernelSampler {
            cumulative,
            components,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let i = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.components.len() - 1);
        match self.components[i] {
            Component::Atom(x) => x,
            Component::Bin(l, r) => l + (r - l) * rng.random::<f64>(),
        }
    }
}

/// Draws from a finite distribution on integers.
#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    cumulative: Vec<f64>,
    values: Vec<u32>,
}

impl DiscreteSampler {
    pub fn new(probs: &[(u32, f64)]) -> Self {
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(probs.len());
        for &(_, p) in probs {
            acc += p;
            cumulative.push(acc);
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        DiscreteSampler {
            cumulative,
            values: probs.iter().map(|&(k, _)| k).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.values.len() == 1 {
            return self.values[0];
        }
        let u: f64 = rng.random();
        let i = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.values.len() - 1);
        self.values[i]
    }
}
