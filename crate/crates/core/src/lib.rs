//! Simulation and analysis of RF-induced Bloch–Siegert shifts on an NV-centre
//! electron/¹⁴N nuclear spin register.
//!
//! Units throughout: MHz, µs, mT, mW, rad. Hamiltonians are stored as `H/2π`.

pub mod analysis;
pub mod dsl;
pub mod dynamics;
pub mod experiments;
pub mod linalg;
pub mod scalar;
pub mod spin;

pub use linalg::CMatrix;
pub use scalar::Real;
pub use spin::NVParams;

/// Double-precision complex matrix used for Hamiltonians, propagators and states.
pub type Operator = CMatrix<f64>;
/// Single-precision variant for the generic algebra.
pub type Operator32 = CMatrix<f32>;
