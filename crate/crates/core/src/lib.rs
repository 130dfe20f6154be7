//! First-passage-time densities of the diffusion decision model.
//!
//! The density of a response at the lower or upper threshold is an infinite
//! series with a large-time and a small-time form. This crate evaluates both
//! forms under several truncation rules, each with a guaranteed absolute
//! error, and builds fitting and benchmarking tools on top.
//!
//! * [`params`]: parameter types, validation and input preparation.
//! * [`sums`]: the truncated series kernels.
//! * [`truncation`]: term counts and timescale selection.
//! * [`density`]: the thirteen evaluation methods.
//! * [`oracle`]: slow double-double reference values and quadrature.
//! * [`fitting`]: likelihood, multi-start fitting and a simulator.
//! * [`bench`]: timing sweeps over parameter grids.

// `!(x > 0.0)` and friends are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod density;
pub mod error;
pub mod fitting;
pub mod oracle;
pub mod params;
pub mod sums;
pub mod truncation;

pub use density::{
    density, density_batch, log_density, DensityResult, EvalOptions, MethodSpec, Scale, Series,
    Timescale,
};
pub use error::DomainError;
pub use params::{Choice, DdmParams, Observation};
pub use sums::SumStyle;
