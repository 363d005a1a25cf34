//! Numerical laboratory for the Gross-Pitaevskii description of dilute Bose
//! gases: zero-energy scattering, mean-field ground states and dynamics,
//! exact diagonalization of small second-quantized sectors, and the
//! renormalized excitation operators that tie the three together.
//!
//! The crate is generic over the floating-point scalar through
//! [`scalar::Real`]; the `*64` aliases below fix `f64`, which is what the
//! CLI and the acceptance suite use.

pub mod dense;
pub mod eigen;
pub mod fft;
pub mod field;
pub mod fock;
pub mod gp;
pub mod grid;
pub mod io;
pub mod krylov;
pub mod lanczos;
pub mod linop;
pub mod manybody;
pub mod radial;
pub mod renorm;
pub mod scalar;
pub mod scattering;

pub use scalar::{Real, C};

/// Concrete `f64` aliases for the main domain types.
pub type Grid64 = grid::Grid<f64>;
pub type Field64 = field::Field<f64>;
pub type RadialPotential64 = radial::RadialPotential<f64>;
pub type ScatteringSolution64 = scattering::ScatteringSolution<f64>;
pub type GpParams64 = gp::GpParams<f64>;
pub type SectorBasis64 = fock::SectorBasis;
pub type FockVector64 = fock::FockVector<f64>;
pub type SparseOperator64 = fock::SparseOperator<f64>;

/// `f32` aliases for smoke-testing the generic code path.
pub type Grid32 = grid::Grid<f32>;
pub type Field32 = field::Field<f32>;
