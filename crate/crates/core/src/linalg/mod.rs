//! Numerical kernels shared by the operator, spectral and boundary-value code.

pub mod banded;
pub mod eigen;
pub mod sparse;

pub use banded::{BandScalar, BandedLu};
pub use eigen::{dense_symmetric, shift_invert_lowest, KrylovOptions, RawEigen};
pub use sparse::CsrMatrix;
