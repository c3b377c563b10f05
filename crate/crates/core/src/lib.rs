//! Numerical laboratory for the infinite-color Pólya urn driven by a
//! bounded-increment random walk on Z^d.
//!
//! - [`urn`]: direct urn dynamics, the representation sampler and the exact
//!   law of the selected color `Z_n`.
//! - [`berry_esseen`]: the `ρ`-moments, `Σ_n`, Berry-Esseen bounds and exact
//!   Kolmogorov-type distances.
//! - [`ldp`]: scaled log-MGF, the rate function `I = (e − 1)*`, the
//!   compound-Poisson representation and tail-exponent measurement.

// negated comparisons are used on purpose so that NaN lands on the failure path
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod berry_esseen;
pub mod error;
pub mod format;
pub mod gof;
pub mod increments;
pub mod ldp;
pub mod mc;
pub mod numerics;
pub mod pmf;
pub mod urn;

pub use error::{Error, Result};
pub use increments::{IncrementDistribution, LatticePoint, Preset};
pub use numerics::SquareMatrix;
pub use pmf::LatticePmf;
pub use urn::UrnState;
