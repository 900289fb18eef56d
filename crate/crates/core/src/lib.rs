//! Linearly-coupled fountain codes for linear multiple-access channels.
//!
//! Each of L users spreads its message over LT-coded packets; every timeslot
//! the channel hands back a batch of linear combinations of the packets
//! transmitted in that slot, described by a full-column-rank transfer
//! matrix. This crate implements the per-user encoders, the round-based
//! batched BP decoder driven by local information functions, the asymptotic
//! fixed-point analysis of decoder convergence, and the numerical design of
//! degree distributions, with a Monte Carlo path to cross-validate theory
//! against simulated decoding.
//!
//! The real-valued analysis core is generic over the scalar type through
//! [`real::Real`]; the `*64` aliases below pin the `f64` instantiations the
//! command-line tools use.

pub mod analysis;
pub mod channel;
pub mod curve;
pub mod decoder;
mod error;
pub mod field;
pub mod lif;
pub mod lt;
pub mod matrix;
pub mod optimizer;
pub mod packet;
pub mod real;
pub mod simplex;
pub mod trace;

pub use error::{Error, Result};

/// Default scalar for the analysis and optimization code.
pub type Real64 = f64;

pub type Poly64 = analysis::Poly<f64>;
pub type AnalysisConfig64 = analysis::AnalysisConfig<f64>;
pub type FixedPointTrace64 = analysis::FixedPointTrace<f64>;
pub type FeasibleCurve64 = curve::FeasibleCurve<f64>;
