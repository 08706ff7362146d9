//! Structure-preserving particle-in-cell solvers for the reduced relativistic
//! spin Vlasov–Maxwell models in one and two space dimensions.
//!
//! Fields live in periodic B-spline spaces forming a discrete de Rham
//! complex ([`derham`]). Particles ([`particles`]) carry position, momentum,
//! spin and weight. Time stepping ([`solver1d`], [`solver2d`]) splits the
//! Hamiltonian dynamics into subsystems; the implicit ones use discrete
//! gradients so the discrete energy is conserved up to the fixed-point
//! tolerance and the discrete Gauss law is preserved to round-off.

pub mod derham;
pub mod diagnostics;
pub mod discrete_gradient;
pub mod error;
pub mod linalg;
pub mod parallel;
pub mod particles;
pub mod quadrature;
pub mod rotation;
pub mod solver1d;
pub mod solver2d;
pub mod spline;

pub use error::{Error, Result};
