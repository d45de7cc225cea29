//! Simulation of code switching between the Steane code and a [[10,1,2]] code
//! with a transversal T gate, under a trapped-ion style circuit-level noise model.
//!
//! The numeric core is generic over [`Real`] (f32 or f64); the aliases below fix
//! the common f64 instantiation.

pub mod circuit;
pub mod codes;
pub mod engine;
pub mod verifier;
pub mod exec;
pub mod linalg;
pub mod noise;
pub mod pauli;
pub mod program;
pub mod protocols;
pub mod scalar;
pub mod statevec;
pub mod tomography;

pub use scalar::Real;

pub type StateVectorF64 = statevec::StateVector<f64>;
pub type StateVectorF32 = statevec::StateVector<f32>;
pub type CMatrixF64 = linalg::CMatrix<f64>;
pub type CMatrixF32 = linalg::CMatrix<f32>;
