use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::rat::Rat;
use super::scalar::Scalar;

/// `re + eps·ε` with `ε² = 0`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct DualNum {
    pub re: Rat,
    pub eps: Rat,
}

impl DualNum {
    pub fn new(re: Rat, eps: Rat) -> DualNum {
        DualNum { re, eps }
    }

    pub fn pure(re: Rat) -> DualNum {
        DualNum { re, eps: Rat::zero() }
    }

    pub fn epsilon() -> DualNum {
        DualNum { re: Rat::zero(), eps: Rat::one() }
    }
}

impl fmt::Display for DualNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.eps.is_zero() {
            write!(f, "{}", self.re)
        } else {
            write!(f, "{}+({})e", self.re, self.eps)
        }
    }
}

impl fmt::Debug for DualNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Add for DualNum {
    type Output = DualNum;
    fn add(self, o: DualNum) -> DualNum {
        DualNum { re: self.re + o.re, eps: self.eps + o.eps }
    }
}

impl Sub for DualNum {
    type Output = DualNum;
    fn sub(self, o: DualNum) -> DualNum {
        DualNum { re: self.re - o.re, eps: self.eps - o.eps }
    }
}

impl Mul for DualNum {
    type Output = DualNum;
    fn mul(self, o: DualNum) -> DualNum {
        let eps = &self.re * &o.eps + &self.eps * &o.re;
        DualNum { re: self.re * o.re, eps }
    }
}

impl Neg for DualNum {
    type Output = DualNum;
    fn neg(self) -> DualNum {
        DualNum { re: -self.re, eps: -self.eps }
    }
}

impl Scalar for DualNum {
    fn zero() -> DualNum {
        DualNum::default()
    }
    fn one() -> DualNum {
        DualNum::pure(Rat::one())
    }
    fn from_rat(r: Rat) -> DualNum {
        DualNum::pure(r)
    }
    fn residue(&self) -> Rat {
        self.re.clone()
    }
    fn inv(&self) -> Option<DualNum> {
        let a = self.re.recip()?;
        let eps = -(&self.eps * &(&a * &a));
        Some(DualNum { re: a, eps })
    }
}

// JSON: either a rational string (pure) or a two-element array [re, eps].
impl Serialize for DualNum {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (&self.re, &self.eps).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DualNum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<DualNum, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Pair(Rat, Rat),
            Single(Rat),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Pair(re, eps) => DualNum { re, eps },
            Repr::Single(re) => DualNum::pure(re),
        })
    }
}
