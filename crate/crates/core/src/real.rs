//! Scalar abstraction for the real-valued analysis and optimization code.
//!
//! Everything downstream of the finite-field layer (degree polynomials,
//! recovery-probability evaluation, fixed-point iteration, feasibility,
//! linear programming) is written against [`Real`] so it runs on `f32` or
//! `f64`. Concrete `f64` aliases live at the crate root; `f64` is what the
//! CLI and the shipped tolerances assume.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by the analysis core.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64` (exact for `f64` itself).
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    /// Lossy conversion to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }

    /// Default convergence tolerance for bisection and fixed-point iteration.
    fn default_tol() -> Self;

    /// Default slack on `>= 0` feasibility comparisons.
    fn feasibility_slack() -> Self;
}

impl Real for f64 {
    fn default_tol() -> Self {
        1e-9
    }
    fn feasibility_slack() -> Self {
        1e-9
    }
}

impl Real for f32 {
    fn default_tol() -> Self {
        1e-5
    }
    fn feasibility_slack() -> Self {
        1e-5
    }
}
