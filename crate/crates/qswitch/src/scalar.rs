//! Scalar abstraction shared by the state-vector kernels and the small dense
//! linear algebra used for tomography.

use num_traits::{Float, FloatConst, FromPrimitive};
use std::fmt::{Debug, Display};

/// Floating point type usable as the amplitude component type.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Norm tolerance after public operations.
    fn norm_tol() -> Self;
    /// Eigenvalues above this floor are clipped to zero rather than rejected.
    fn psd_floor() -> Self;

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal fits the scalar type")
    }
}

impl Real for f64 {
    fn norm_tol() -> Self {
        1e-10
    }
    fn psd_floor() -> Self {
        -1e-9
    }
}

impl Real for f32 {
    fn norm_tol() -> Self {
        1e-5
    }
    fn psd_floor() -> Self {
        -1e-4
    }
}

/// Fidelity threshold used when deciding an output equals its ideal target.
pub const FIDELITY_TOL: f64 = 1e-9;
