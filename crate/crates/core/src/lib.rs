//! Boundary spectral data of discrete Dirichlet Schrödinger operators on
//! boxes, and recovery of potential differences from that data through
//! complex exponential probes.
//!
//! The pipeline is: [`mesh`] grids, [`schrodinger`] operators, [`spectra`]
//! eigenpairs and boundary traces, [`bvp`] Dirichlet solves at complex
//! energies, [`isozaki`] probe functionals, and [`reconstruct`] Fourier
//! synthesis.

mod container;
pub mod bvp;
pub mod error;
pub mod fit;
pub mod isozaki;
pub mod linalg;
pub mod mesh;
pub mod reconstruct;
pub mod schrodinger;
pub mod spectra;

pub use error::{Error, FormatError, Result};
