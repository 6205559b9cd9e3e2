//! Numerical laboratory for nonlocal Fisher–KPP fronts
//! `∂ₜu = μ(J∗u − u) + f(u)` with compactly supported kernels.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod kernel;
pub mod reaction;
pub mod dispersion;
pub mod problem;
pub mod evolve;
pub mod analytic;
pub mod sampling;
pub mod brw;
pub mod walks;
pub mod config_io;
pub mod experiments;
