//! Scalar abstraction for the numerical core.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the linear algebra and protocol code is generic over.
///
/// The two tolerance constants scale the invariant checks to the precision
/// of the type: `ALGEBRAIC_TOL` for identities on exactly representable
/// inputs, `CHAINED_TOL` for results of several matrix products in a row.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    const ALGEBRAIC_TOL: Self;
    const CHAINED_TOL: Self;
    /// Largest tolerated negative eigenvalue magnitude of a density matrix.
    const PSD_TOL: Self;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }
}

impl Real for f64 {
    const ALGEBRAIC_TOL: Self = 1e-12;
    const CHAINED_TOL: Self = 1e-9;
    const PSD_TOL: Self = 1e-10;
}

impl Real for f32 {
    const ALGEBRAIC_TOL: Self = 1e-5;
    const CHAINED_TOL: Self = 1e-4;
    const PSD_TOL: Self = 1e-5;
}
