//! Spin-topological invariants of surfaces and conformal Dirac eigenvalue
//! computations.
//!
//! The crate has an exact combinatorial half ([`z2_forms`]) and a numerical
//! half generic over [`Real`] (`f32` or `f64`). The type aliases at the crate
//! root fix the scalar to `f64`.

#![allow(
    // `!(x > 0)` is meant to reject NaN.
    clippy::neg_cmp_op_on_partial_ord,
    // GF(2) addition is XOR.
    clippy::suspicious_arithmetic_impl,
    clippy::suspicious_op_assign_impl,
    // Stencil loops read clearer with indices.
    clippy::needless_range_loop
)]

pub mod conformal_opt;
pub mod error;
pub mod estimate;
pub mod lattice_spectra;
pub mod revolution_dirac;
pub mod scalar;
pub mod surgery_lab;
pub mod tridiag;
pub mod z2_forms;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Lattice = lattice_spectra::Lattice2<f64>;
pub type Spectrum = lattice_spectra::SpectrumSlice<f64>;
pub type Profile = revolution_dirac::RevolutionProfile<f64>;
pub type Estimate = estimate::LaminEstimate<f64>;
pub type Pencil = tridiag::TridiagonalPencil<f64>;
pub type TorusBase = conformal_opt::FlatTorusBase<f64>;
pub type SurfaceBase = conformal_opt::RevolutionBase<f64>;
