use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::mat::Mat;
use super::rat::Rat;
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Univariate polynomial with ascending coefficients; no trailing zeros.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de> + Scalar"))]
#[serde(from = "Vec<S>", into = "Vec<S>")]
pub struct Poly<S: Scalar> {
    coeffs: Vec<S>,
}

impl<S: Scalar> From<Vec<S>> for Poly<S> {
    fn from(v: Vec<S>) -> Self {
        Poly::new(v)
    }
}

impl<S: Scalar> From<Poly<S>> for Vec<S> {
    fn from(p: Poly<S>) -> Vec<S> {
        p.coeffs
    }
}

impl<S: Scalar> Poly<S> {
    pub fn new(mut coeffs: Vec<S>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![] }
    }

    pub fn one() -> Self {
        Poly::constant(S::one())
    }

    pub fn constant(c: S) -> Self {
        Poly::new(vec![c])
    }

    /// The indeterminate `T`.
    pub fn t() -> Self {
        Poly::new(vec![S::zero(), S::one()])
    }

    /// `T - r`.
    pub fn linear(r: S) -> Self {
        Poly::new(vec![-r, S::one()])
    }

    /// `∏ (T - r)` over the given roots.
    pub fn from_roots(roots: &[S]) -> Self {
        roots
            .iter()
            .fold(Poly::one(), |acc, r| acc * Poly::linear(r.clone()))
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> S {
        self.coeffs.get(k).cloned().unwrap_or_else(S::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn lead(&self) -> Option<&S> {
        self.coeffs.last()
    }

    pub fn is_monic(&self) -> bool {
        self.lead().is_some_and(|c| *c == S::one())
    }

    pub fn scale(&self, c: &S) -> Self {
        Poly::new(self.coeffs.iter().map(|a| a.clone() * c.clone()).collect())
    }

    pub fn eval(&self, x: &S) -> S {
        self.coeffs
            .iter()
            .rev()
            .fold(S::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    /// `P(M)` by Horner's rule.
    pub fn eval_mat(&self, m: &Mat<S>) -> Mat<S> {
        let n = m.rows();
        let mut acc = Mat::zero(n, n);
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(m).add(&Mat::identity(n).scale(c));
        }
        acc
    }

    /// `P(T + c)`.
    pub fn shift(&self, c: &S) -> Self {
        let tc = Poly::new(vec![c.clone(), S::one()]);
        self.coeffs
            .iter()
            .rev()
            .fold(Poly::zero(), |acc, a| acc * tc.clone() + Poly::constant(a.clone()))
    }

    /// Division with remainder by a polynomial whose leading coefficient is a unit.
    pub fn divrem(&self, d: &Poly<S>) -> Result<(Poly<S>, Poly<S>)> {
        let dl = d.lead().ok_or(Error::DivisionByZero)?;
        let inv = dl.inv().ok_or(Error::DivisionByZero)?;
        let dd = d.coeffs.len() - 1;
        let mut r = self.coeffs.clone();
        if r.len() <= dd {
            return Ok((Poly::zero(), self.clone()));
        }
        let mut q = vec![S::zero(); r.len() - dd];
        for k in (0..q.len()).rev() {
            let c = r[k + dd].clone() * inv.clone();
            if !c.is_zero() {
                for (j, dc) in d.coeffs.iter().enumerate() {
                    r[k + j] = r[k + j].clone() - c.clone() * dc.clone();
                }
            }
            q[k] = c;
        }
        r.truncate(dd);
        Ok((Poly::new(q), Poly::new(r)))
    }

    pub fn rem(&self, d: &Poly<S>) -> Result<Poly<S>> {
        Ok(self.divrem(d)?.1)
    }

    pub fn residue(&self) -> Poly<Rat> {
        Poly::new(self.coeffs.iter().map(|c| c.residue()).collect())
    }

    pub fn lift(p: &Poly<Rat>) -> Self {
        Poly::new(p.coeffs.iter().map(|c| S::from_rat(c.clone())).collect())
    }

    /// Divide by the leading coefficient.
    pub fn monic(&self) -> Result<Poly<S>> {
        let inv = self
            .lead()
            .and_then(|c| c.inv())
            .ok_or(Error::DivisionByZero)?;
        Ok(self.scale(&inv))
    }
}

impl<S: Scalar> Add for Poly<S> {
    type Output = Poly<S>;
    fn add(self, o: Poly<S>) -> Poly<S> {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }
}

impl<S: Scalar> Sub for Poly<S> {
    type Output = Poly<S>;
    fn sub(self, o: Poly<S>) -> Poly<S> {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }
}

impl<S: Scalar> Neg for Poly<S> {
    type Output = Poly<S>;
    fn neg(self) -> Poly<S> {
        Poly::new(self.coeffs.into_iter().map(|c| -c).collect())
    }
}

impl<S: Scalar> Mul for Poly<S> {
    type Output = Poly<S>;
    fn mul(self, o: Poly<S>) -> Poly<S> {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![S::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Poly::new(out)
    }
}

impl<S: Scalar + fmt::Display> fmt::Display for Poly<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "({c})")?,
                1 => write!(f, "({c})T")?,
                _ => write!(f, "({c})T^{k}")?,
            }
        }
        Ok(())
    }
}

impl<S: Scalar> fmt::Debug for Poly<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly{:?}", self.coeffs)
    }
}

/// Extended Euclid over the rationals: returns `(g, a, b)` with `g` monic and
/// `a·p + b·q = g`.
pub fn poly_gcd_bezout(p: &Poly<Rat>, q: &Poly<Rat>) -> Result<(Poly<Rat>, Poly<Rat>, Poly<Rat>)> {
    if p.is_zero() && q.is_zero() {
        return Err(Error::UndefinedGcd);
    }
    // Invariant: r0 = s0·p + t0·q, r1 = s1·p + t1·q.
    let (mut r0, mut r1) = (p.clone(), q.clone());
    let (mut s0, mut s1) = (Poly::one(), Poly::zero());
    let (mut t0, mut t1) = (Poly::zero(), Poly::one());
    while !r1.is_zero() {
        let (quo, rem) = r0.divrem(&r1)?;
        let s2 = s0 - quo.clone() * s1.clone();
        let t2 = t0 - quo * t1.clone();
        r0 = r1;
        r1 = rem;
        s0 = s1;
        s1 = s2;
        t0 = t1;
        t1 = t2;
    }
    let inv = r0.lead().unwrap().recip().unwrap();
    Ok((r0.scale(&inv), s0.scale(&inv), t0.scale(&inv)))
}

/// Bézout pair `(a, b)` with `a·q + b·s = 1` over any scalar ring.
///
/// Coprimality is decided on residues. Over dual numbers the residue solution
/// `a0·q + b0·s = 1 + r` (with `r ≡ 0 mod ε`) is corrected to
/// `a0(1 - r), b0(1 - r)`, exact because `r² = 0`. The output is reduced so
/// that `deg a < deg s` when `s` is monic.
pub fn bezout_coprime<S: Scalar>(q: &Poly<S>, s: &Poly<S>) -> Result<(Poly<S>, Poly<S>)> {
    let (g, a0, b0) = poly_gcd_bezout(&q.residue(), &s.residue())?;
    if g != Poly::one() {
        return Err(Error::NotComaximal(format!(
            "residues share the factor {g}"
        )));
    }
    let (a0, b0) = (Poly::<S>::lift(&a0), Poly::<S>::lift(&b0));
    let r = a0.clone() * q.clone() + b0.clone() * s.clone() - Poly::one();
    let corr = Poly::one() - r;
    let (mut a, mut b) = (a0 * corr.clone(), b0 * corr);
    if s.is_monic() && s.degree().unwrap_or(0) > 0 {
        a = a.rem(s)?;
        let (quo, rem) = (Poly::one() - a.clone() * q.clone()).divrem(s)?;
        if !rem.is_zero() {
            return Err(Error::Internal("Bézout reduction left a remainder".into()));
        }
        b = quo;
    }
    if a.clone() * q.clone() + b.clone() * s.clone() != Poly::one() {
        return Err(Error::Internal("Bézout lift is not exact".into()));
    }
    Ok((a, b))
}

/// CRT idempotents for a comaximal pair.
///
/// Convention: with `a·q + b·s = 1`, `e_q := b·s` and `e_s := a·q`, both reduced
/// mod `q·s`. Then `e_q ≡ 1 mod q`, `e_q ≡ 0 mod s`, so `e_q(Θ)` projects onto
/// `ker q(Θ)` along `ker s(Θ)` whenever `q·s` annihilates `Θ`.
pub fn crt_idempotents<S: Scalar>(q: &Poly<S>, s: &Poly<S>) -> Result<(Poly<S>, Poly<S>)> {
    let (a, b) = bezout_coprime(q, s)?;
    let qs = q.clone() * s.clone();
    let eq = (b * s.clone()).rem(&qs)?;
    let es = (a * q.clone()).rem(&qs)?;
    Ok((eq, es))
}
