//! Numerical spectral theory for band operators on the integer lattice.
//!
//! The library represents lattice Hamiltonians T = sum_a phi_a(Q) U_a with
//! structured bounded coefficient functions, extracts their limit operators
//! along explicit directions to infinity, computes each limit's spectrum
//! exactly by class (Laurent symbol range, Floquet-Bloch bands, free band
//! plus discrete eigenvalues), and assembles the essential spectrum as the
//! closed union of the limit spectra. Everything is cross-validated against
//! brute-force finite-section eigensolves with boundary-state filtering,
//! and an exact finite model on cyclic groups Z_M provides the averaging /
//! twisted-Fourier / commutation diagnostics.

pub mod band_core;
pub mod cli_runner;
pub mod eig_kernel;
pub mod lattice;
pub mod limit_solvers;
pub mod localization;
pub mod mat;
pub mod models;
pub mod parallel;
pub mod spectral_sets;
pub mod torus_lab;

pub use band_core::{BandOperator, CoefficientFn, TruncationMatrix};
pub use lattice::{BoxRegion, LatticePoint};
pub use spectral_sets::SpectralSet;
