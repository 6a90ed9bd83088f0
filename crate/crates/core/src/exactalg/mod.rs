//! Exact arithmetic: rationals, dual numbers, polynomials and matrices.

mod dual;
mod mat;
mod poly;
mod rat;
mod scalar;

pub use dual::DualNum;
pub use mat::{Mat, Subspace};
pub use poly::{bezout_coprime, crt_idempotents, poly_gcd_bezout, Poly};
pub use rat::Rat;
pub use scalar::Scalar;
