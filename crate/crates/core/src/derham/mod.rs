//! Periodic B-spline finite element spaces and the matrices of the
//! discrete de Rham complexes in one and two dimensions.

mod complex1d;
mod complex2d;

pub use complex1d::{build_complex_1d, DeRhamComplex1D, SplineSpace1D, DEFAULT_DEGENERACY_EPS};
pub use complex2d::{build_complex_2d, DeRhamComplex2D, Form2, TensorBasis};
