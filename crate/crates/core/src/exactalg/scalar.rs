use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use super::rat::Rat;

/// Commutative coefficient ring used by polynomials and matrices.
///
/// Implemented by [`Rat`] (a field) and [`DualNum`](super::DualNum) (a local ring
/// with residue field `Rat`).
pub trait Scalar:
    Clone
    + PartialEq
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_rat(r: Rat) -> Self;
    /// Reduction to the residue field.
    fn residue(&self) -> Rat;
    /// Inverse if `self` is a unit.
    fn inv(&self) -> Option<Self>;

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }

    fn is_unit(&self) -> bool {
        !self.residue().is_zero()
    }

    fn from_int(n: i64) -> Self {
        Self::from_rat(Rat::int(n))
    }
}

impl Scalar for Rat {
    fn zero() -> Rat {
        Rat::zero()
    }
    fn one() -> Rat {
        Rat::one()
    }
    fn from_rat(r: Rat) -> Rat {
        r
    }
    fn residue(&self) -> Rat {
        self.clone()
    }
    fn inv(&self) -> Option<Rat> {
        self.recip()
    }
    fn is_zero(&self) -> bool {
        Rat::is_zero(self)
    }
}
