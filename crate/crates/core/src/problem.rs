//! The triple `(μ, J, f)` shared by every experiment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{KernelError, KernelMeasure};
use crate::reaction::Reaction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("jump rate mu must be positive and finite, got {0}")]
    BadMu(f64),
    #[error("f'(0) must be positive and finite, got {0}")]
    BadSlope(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub kernel: KernelMeasure,
    pub mu: f64,
    pub reaction: Reaction,
}

impl Problem {
    pub fn new(kernel: KernelMeasure, mu: f64, reaction: Reaction) -> Result<Self, ProblemError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(ProblemError::BadMu(mu));
        }
        let fp0 = reaction.fprime0();
        if !(fp0 > 0.0 && fp0.is_finite()) {
            return Err(ProblemError::BadSlope(fp0));
        }
        Ok(Problem {
            kernel,
            mu,
            reaction,
        })
    }

    pub fn fprime0(&self) -> f64 {
        self.reaction.fprime0()
    }

    /// The same problem with any atom at the origin folded into `μ`.
    pub fn normalized(&self) -> Result<Problem, ProblemError> {
        let (mu, kernel) = self.kernel.normalize(self.mu)?;
        Ok(Problem {
            kernel,
            mu,
            reaction: self.reaction.clone(),
        })
    }
}
