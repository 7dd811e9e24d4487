//! Stationary SKT cross-diffusion competition model on a 1-D interval.
//!
//! Steady states of the full system, the explicit a priori bound built from the
//! zero level set of `F`, the full cross-diffusion limit (`alpha, beta -> inf`,
//! `alpha/beta -> gamma`) and the two limiting systems, bifurcating branches of
//! the incomplete-segregation system, and the multi-lobe sign-changing
//! solutions of the complete-segregation system.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod bifurcation;
#[cfg(feature = "cli")]
pub mod cli;
pub mod config;
pub mod dhmp;
pub mod error;
pub mod grid;
pub mod levelset;
pub mod limit;
pub mod model;
pub mod selftest;
pub mod skt;
pub mod study;

pub use error::{Error, Result};
pub use grid::{Grid, GridFn};
pub use model::{CompetitionRegime, ConstantState, Kinetics, ModelParams};
