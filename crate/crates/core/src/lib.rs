//! Simulation and analysis of a three-party GHZ key-distribution protocol.
//!
//! Alice prepares GHZ triplets, Bob and Charlie each encode one classical bit
//! with a local unitary on their qubit, and Alice decodes both bits from the
//! expectation values of three payoff operators measured in the GHZ basis.
//! An eavesdropper on a return line disturbs those expectation values, which
//! is how she is detected.
//!
//! The linear algebra, protocol operators, channels and decoding logic are
//! generic over the scalar type ([`Real`], implemented for `f32` and `f64`).
//! The interception statistics are generic over any exact or floating field
//! so they can be evaluated with [`Rational`]. The session engine and the CLI
//! run on `f64`.

pub mod channels;
pub mod cli;
pub mod decoding;
pub mod detection_stats;
pub mod error;
pub mod num;
pub mod protocol_ops;
pub mod quantum_core;
pub mod session;

pub use error::{Error, Result};
pub use num::Real;

/// Arbitrary-precision rational used for the exact interception analytics.
pub type Rational = num_rational::BigRational;

pub type Complex64 = num_complex::Complex<f64>;
pub type ComplexMatrix64 = quantum_core::ComplexMatrix<f64>;
pub type StateVector64 = quantum_core::StateVector<f64>;
pub type DensityMatrix64 = quantum_core::DensityMatrix<f64>;
pub type LocalUnitaryParams64 = protocol_ops::LocalUnitaryParams<f64>;
pub type CoefficientTable64 = protocol_ops::CoefficientTable<f64>;
pub type GhzBasis64 = protocol_ops::GhzBasis<f64>;
pub type PayoffTriple64 = protocol_ops::PayoffTriple<f64>;
pub type OperatorAlphabet64 = decoding::OperatorAlphabet<f64>;
pub type DecodingMatrix64 = decoding::DecodingMatrix<f64>;
pub type AttackKind64 = channels::AttackKind<f64>;

pub type ComplexMatrix32 = quantum_core::ComplexMatrix<f32>;
pub type DensityMatrix32 = quantum_core::DensityMatrix<f32>;
pub type CoefficientTable32 = protocol_ops::CoefficientTable<f32>;
