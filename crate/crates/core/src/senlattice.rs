//! Finite model of the σ-component Sen module and lattice modification.
//!
//! A lattice `D` is represented by the Sen operator `Θ` on `D/tD`. For a
//! comaximal split `P = Q·S` of its characteristic polynomial, the sub-lattice
//! `D'` with `tD ⊂ D' ⊂ D` and `D/D' ≅ ker Q(Θ)` has Sen operator `Θ` on
//! `ker S(Θ)` and `Θ + 1` on the quotient, so its polynomial is `Q(T-1)·S(T)`.
//! The super-lattice `D ⊂ D'' ⊂ t^{-1}D` with `D''/D ≅ ker Q(Θ)` has `Θ - 1`
//! there instead, giving `Q(T+1)·S(T)`.

use serde::Serialize;

use crate::characters::weight_map;
use crate::error::{Error, Result};
use crate::exactalg::{bezout_coprime, crt_idempotents, poly_gcd_bezout, Mat, Poly, Rat, Scalar, Subspace};
use crate::trianguline::{enumerate_triangulations, pullback_p, wall_member, ClassTag, TriangModule, WallInterval};

/// The Sen operator on `D/tD`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "S: Serialize")]
pub struct SenLattice<S: Scalar> {
    theta: Mat<S>,
}

impl<S: Scalar> SenLattice<S> {
    pub fn new(theta: Mat<S>) -> Result<SenLattice<S>> {
        if !theta.is_square() || theta.rows() == 0 {
            return Err(Error::Parse("Sen operator must be a nonempty square matrix".into()));
        }
        Ok(SenLattice { theta })
    }

    pub fn n(&self) -> usize {
        self.theta.rows()
    }

    pub fn theta(&self) -> &Mat<S> {
        &self.theta
    }

    pub fn charpoly(&self) -> Poly<S> {
        self.theta.charpoly()
    }
}

/// Comaximal monic split `P = Q·S` with a Bézout certificate `a·Q + b·S = 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "S: Serialize")]
pub struct Factorization<S: Scalar> {
    pub q: Poly<S>,
    pub s: Poly<S>,
    pub a: Poly<S>,
    pub b: Poly<S>,
    /// Roots when the split came from known roots.
    pub q_roots: Option<Vec<S>>,
    pub s_roots: Option<Vec<S>>,
}

impl<S: Scalar> Factorization<S> {
    pub fn from_polys(q: Poly<S>, s: Poly<S>) -> Result<Factorization<S>> {
        if !q.is_monic() || !s.is_monic() {
            return Err(Error::Parse("factors must be monic".into()));
        }
        let (a, b) = bezout_coprime(&q, &s)?;
        Ok(Factorization { q, s, a, b, q_roots: None, s_roots: None })
    }

    /// From root lists; a residue collision is reported as the colliding pair.
    pub fn from_roots(q_roots: Vec<S>, s_roots: Vec<S>) -> Result<Factorization<S>> {
        for x in &q_roots {
            for y in &s_roots {
                if x.residue() == y.residue() {
                    return Err(Error::NotComaximal(format!(
                        "Q-root {:?} and S-root {:?} agree at the residue field",
                        x, y
                    )));
                }
            }
        }
        let mut f = Factorization::from_polys(Poly::from_roots(&q_roots), Poly::from_roots(&s_roots))?;
        f.q_roots = Some(q_roots);
        f.s_roots = Some(s_roots);
        Ok(f)
    }

    fn check_for(&self, l: &SenLattice<S>) -> Result<()> {
        if self.q.clone() * self.s.clone() != l.charpoly() {
            return Err(Error::Mismatch("Q·S differs from the characteristic polynomial".into()));
        }
        Ok(())
    }
}

/// `Q_I = ∏_{m∈I} (T - r_m)`, `S_I` the complementary product (`subset` 0-based).
pub fn split_sen_poly<S: Scalar>(l: &SenLattice<S>, roots: &[S], subset: &[usize]) -> Result<Factorization<S>> {
    if roots.len() != l.n() {
        return Err(Error::Ragged("one root per dimension".into()));
    }
    if subset.iter().any(|&m| m >= roots.len()) {
        return Err(Error::IndexOutOfRange { what: "subset", index: subset.iter().max().unwrap() + 1, n: roots.len() });
    }
    if Poly::from_roots(roots) != l.charpoly() {
        return Err(Error::Mismatch("declared roots do not match the characteristic polynomial".into()));
    }
    let q: Vec<S> = subset.iter().map(|&m| roots[m].clone()).collect();
    let s: Vec<S> = (0..roots.len()).filter(|m| !subset.contains(m)).map(|m| roots[m].clone()).collect();
    Factorization::from_roots(q, s)
}

/// Result of a modification: the new lattice in the basis `[kept | shifted]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "S: Serialize")]
pub struct Modification<S: Scalar> {
    /// Basis of `ker S(Θ)`, the part whose Sen operator is unchanged.
    pub kept: Vec<Vec<S>>,
    /// Basis of `ker Q(Θ)`, the part shifted by `±1`.
    pub shifted: Vec<Vec<S>>,
    /// Columns `kept ++ shifted`, in the original coordinates.
    pub basis: Mat<S>,
    pub lattice: SenLattice<S>,
}

impl<S: Scalar> Modification<S> {
    /// For `modify_down` this is `W = ker S(Θ) = D'/tD`.
    pub fn w(&self) -> &[Vec<S>] {
        &self.kept
    }
}

/// Basis of the image of an idempotent matrix.
fn image_basis<S: Scalar>(p: &Mat<S>) -> Vec<Vec<S>> {
    p.residue_pivot_columns().into_iter().map(|c| p.col(c)).collect()
}

fn restrict<S: Scalar>(theta: &Mat<S>, basis: &[Vec<S>]) -> Result<Mat<S>> {
    if basis.is_empty() {
        return Ok(Mat::zero(0, 0));
    }
    let b = Mat::from_cols(theta.rows(), basis);
    b.solve_in_span(&theta.mul(&b))
}

fn modify<S: Scalar>(l: &SenLattice<S>, f: &Factorization<S>, shift: i64) -> Result<Modification<S>> {
    f.check_for(l)?;
    let (eq, es) = crt_idempotents(&f.q, &f.s)?;
    let kept = image_basis(&es.eval_mat(&l.theta));
    let shifted = image_basis(&eq.eval_mat(&l.theta));
    let mut cols = kept.clone();
    cols.extend(shifted.iter().cloned());
    let basis = Mat::from_cols(l.n(), &cols);
    if cols.len() != l.n() || basis.inverse().is_err() {
        return Err(Error::Internal("kernels of Q(Θ) and S(Θ) do not split the space".into()));
    }
    let tk = restrict(&l.theta, &kept)?;
    let ts = restrict(&l.theta, &shifted)?;
    let ts = ts.add(&Mat::identity(ts.rows()).scale(&S::from_int(shift)));
    let theta = Mat::block_diag(&[&tk, &ts]);
    Ok(Modification { kept, shifted, basis, lattice: SenLattice::new(theta)? })
}

/// `tD ⊂ D' ⊂ D` with Sen polynomial `Q(T-1)·S(T)`.
pub fn modify_down<S: Scalar>(l: &SenLattice<S>, f: &Factorization<S>) -> Result<Modification<S>> {
    modify(l, f, 1)
}

/// `D ⊂ D'' ⊂ t^{-1}D` with Sen polynomial `Q(T+1)·S(T)`.
pub fn modify_up<S: Scalar>(l: &SenLattice<S>, f: &Factorization<S>) -> Result<Modification<S>> {
    modify(l, f, -1)
}

/// The factorization of the modified lattice matching `f` after a shift by `shift`.
pub fn shifted_factorization<S: Scalar>(f: &Factorization<S>, shift: i64) -> Result<Factorization<S>> {
    let c = S::from_int(-shift);
    match (&f.q_roots, &f.s_roots) {
        (Some(q), Some(s)) => Factorization::from_roots(
            q.iter().map(|r| r.clone() + S::from_int(shift)).collect(),
            s.clone(),
        ),
        _ => Factorization::from_polys(f.q.shift(&c), f.s.clone()),
    }
}

/// Refuse the round trip when a `Q`-root and an `S`-root differ by `-1`, `0` or `1`.
pub fn check_round_trip_gaps<S: Scalar>(f: &Factorization<S>) -> Result<()> {
    match (&f.q_roots, &f.s_roots) {
        (Some(q), Some(s)) => {
            for x in q {
                for y in s {
                    let d = x.residue() - y.residue();
                    if d.is_integer() && d.abs() <= Rat::one() {
                        return Err(Error::InvertibilityNotGuaranteed {
                            q_root: x.residue().to_string(),
                            s_root: y.residue().to_string(),
                            diff: d.to_string(),
                        });
                    }
                }
            }
            Ok(())
        }
        _ => {
            let (q, s) = (f.q.residue(), f.s.residue());
            for c in [-1, 0, 1] {
                let g = poly_gcd_bezout(&q, &s.shift(&Rat::int(c)))?.0;
                if g != Poly::one() {
                    return Err(Error::InvertibilityNotGuaranteed {
                        q_root: format!("root of {g}"),
                        s_root: format!("root of {g} shifted by {c}"),
                        diff: (-c).to_string(),
                    });
                }
            }
            Ok(())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "S: Serialize")]
pub struct RoundTrip<S: Scalar> {
    pub down: Modification<S>,
    pub up: Modification<S>,
    /// Θ after both steps, written back in the original coordinates.
    pub theta_back: Mat<S>,
    pub identity: bool,
}

/// `modify_up ∘ modify_down`, refused when the gap hypothesis fails.
pub fn round_trip<S: Scalar>(l: &SenLattice<S>, f: &Factorization<S>) -> Result<RoundTrip<S>> {
    check_round_trip_gaps(f)?;
    let down = modify_down(l, f)?;
    let f2 = shifted_factorization(f, 1)?;
    let up = modify_up(&down.lattice, &f2)?;
    let p = down.basis.mul(&up.basis);
    let theta_back = p.mul(&up.lattice.theta).mul(&p.inverse()?);
    // The part shifted back must be the part shifted down.
    let back_shifted = Mat::from_cols(l.n(), &up.shifted);
    let mapped = down.basis.mul(&back_shifted);
    let same = up.shifted.len() == down.shifted.len()
        && (down.shifted.is_empty()
            || Mat::from_cols(l.n(), &down.shifted).solve_in_span(&mapped).is_ok());
    let identity = theta_back == l.theta && same;
    Ok(RoundTrip { down, up, theta_back, identity })
}

/// Rational roots with multiplicities. Coefficients are bounded to keep the
/// divisor search small.
pub fn rational_roots(p: &Poly<Rat>) -> Result<Vec<(Rat, usize)>> {
    use num_bigint::BigInt;
    use num_integer::Integer;
    use num_traits::{Signed, ToPrimitive};

    let mut cur = p.monic()?;
    let mut out = Vec::new();
    let mut zero_mult = 0;
    while cur.degree().unwrap_or(0) > 0 && cur.coeff(0).is_zero() {
        cur = cur.divrem(&Poly::t())?.0;
        zero_mult += 1;
    }
    if zero_mult > 0 {
        out.push((Rat::zero(), zero_mult));
    }
    if cur.degree().unwrap_or(0) == 0 {
        return Ok(out);
    }
    let lcm = cur.coeffs().iter().fold(BigInt::from(1), |acc, c| acc.lcm(c.denom()));
    let ints: Vec<BigInt> = cur.coeffs().iter().map(|c| (c.numer() * &lcm) / c.denom()).collect();
    let bound = |x: &BigInt| -> Result<u64> {
        x.abs().to_u64().filter(|&v| v <= 1_000_000_000_000).ok_or_else(|| {
            Error::TooLarge("coefficients too large for the rational root search".into())
        })
    };
    let divisors = |v: u64| -> Vec<u64> {
        let mut d = Vec::new();
        let mut k = 1;
        while k * k <= v {
            if v % k == 0 {
                d.push(k);
                d.push(v / k);
            }
            k += 1;
        }
        d
    };
    let (a0, an) = (bound(&ints[0])?, bound(ints.last().unwrap())?);
    let mut cands: Vec<Rat> = Vec::new();
    for num in divisors(a0) {
        for den in divisors(an) {
            for sgn in [1i64, -1] {
                cands.push(Rat::new(sgn * num as i64, den as i64));
            }
        }
    }
    cands.sort();
    cands.dedup();
    for r in cands {
        let mut m = 0;
        loop {
            let (q, rem) = cur.divrem(&Poly::linear(r.clone()))?;
            if !rem.is_zero() {
                break;
            }
            cur = q;
            m += 1;
        }
        if m > 0 {
            out.push((r, m));
        }
    }
    out.sort();
    Ok(out)
}

/// Stable subspaces found by the brute-force search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StableSearch {
    /// Every candidate when the family is finite; otherwise witnesses.
    pub candidates: Vec<Subspace>,
    /// Some dimension profile admits infinitely many stable subspaces.
    pub infinite: bool,
}

impl StableSearch {
    pub fn unique(&self) -> Option<&Subspace> {
        if !self.infinite && self.candidates.len() == 1 {
            self.candidates.first()
        } else {
            None
        }
    }
}

/// Θ-stable subspaces of one generalized eigenspace, by dimension: either the
/// unique one, or two distinct witnesses of an infinite family.
enum Choices {
    Unique(Subspace),
    Infinite(Subspace, Subspace),
}

fn eigen_choices(theta: &Mat<Rat>, lambda: &Rat, m: usize) -> Result<Vec<Choices>> {
    let n = theta.rows();
    let nmat = theta.sub(&Mat::identity(n).scale(lambda));
    let pow = |k: usize| (0..k).fold(Mat::identity(n), |acc, _| acc.mul(&nmat));
    let g = nmat_kernel(&pow(m));
    let ker1 = nmat_kernel(&nmat);
    let cyclic = ker1.len() == 1;
    let nilp2 = nmat_kernel(&pow(2)).len() == m;
    let mut out = Vec::new();
    for d in 0..=m {
        if d == 0 {
            out.push(Choices::Unique(Subspace::span(n, &[])));
        } else if d == m {
            out.push(Choices::Unique(Subspace::span(n, &g)));
        } else if cyclic {
            out.push(Choices::Unique(Subspace::span(n, &nmat_kernel(&pow(d)))));
        } else if nilp2 {
            let k = ker1.len();
            if k > d {
                out.push(Choices::Infinite(
                    Subspace::span(n, &ker1[..d]),
                    Subspace::span(n, &ker1[k - d..]),
                ));
            } else {
                // Subspaces containing N(G) are stable because N(G) ⊂ ker N.
                let image: Vec<Vec<Rat>> = g.iter().map(|v| nmat.mul_vec(v)).collect();
                let im = Subspace::span(n, &image);
                let mut comp: Vec<Vec<Rat>> = Vec::new();
                let mut acc = im.clone();
                for v in &g {
                    if !acc.contains(v) {
                        acc = acc.sum(&Subspace::span(n, std::slice::from_ref(v)));
                        comp.push(v.clone());
                    }
                }
                let need = d - im.dim();
                let c = comp.len();
                let with = |vs: &[Vec<Rat>]| im.sum(&Subspace::span(n, vs));
                out.push(Choices::Infinite(with(&comp[..need]), with(&comp[c - need..])));
            }
        } else {
            return Err(Error::Unsupported(format!(
                "eigenvalue {lambda}: Jordan type neither cyclic nor square-zero"
            )));
        }
    }
    Ok(out)
}

fn nmat_kernel(m: &Mat<Rat>) -> Vec<Vec<Rat>> {
    m.kernel_basis()
}

/// All Θ-stable `W` with `charpoly(Θ|_W) · charpoly((Θ+1)|_{V/W}) = target`.
///
/// Uses the primary decomposition: a stable subspace is the sum of its parts
/// in the generalized eigenspaces, and its characteristic polynomial depends
/// only on the dimensions of those parts.
pub fn brute_force_modifications(l: &SenLattice<Rat>, target: &Poly<Rat>) -> Result<StableSearch> {
    let n = l.n();
    let roots = rational_roots(&l.charpoly())?;
    if roots.iter().map(|r| r.1).sum::<usize>() != n {
        return Err(Error::Unsupported("characteristic polynomial does not split over Q".into()));
    }
    let choices: Vec<Vec<Choices>> = roots
        .iter()
        .map(|(lam, m)| eigen_choices(&l.theta, lam, *m))
        .collect::<Result<_>>()?;
    let mut candidates = Vec::new();
    let mut infinite = false;
    let mut profile = vec![0usize; roots.len()];
    loop {
        let poly = roots.iter().zip(&profile).fold(Poly::one(), |acc, ((lam, m), &d)| {
            let kept = Poly::from_roots(&vec![lam.clone(); d]);
            let moved = Poly::from_roots(&vec![lam + &Rat::one(); m - d]);
            acc * kept * moved
        });
        if poly == *target {
            let mut a = Subspace::span(n, &[]);
            let mut b: Option<Subspace> = None;
            for (k, &d) in profile.iter().enumerate() {
                match &choices[k][d] {
                    Choices::Unique(s) => {
                        a = a.sum(s);
                        b = b.map(|x| x.sum(s));
                    }
                    Choices::Infinite(s1, s2) => {
                        infinite = true;
                        if b.is_none() {
                            b = Some(a.sum(s2));
                        } else {
                            b = b.map(|x| x.sum(s1));
                        }
                        a = a.sum(s1);
                    }
                }
            }
            candidates.push(a);
            if let Some(b) = b {
                candidates.push(b);
            }
        }
        // Next dimension profile.
        let mut k = 0;
        while k < profile.len() && profile[k] == roots[k].1 {
            profile[k] = 0;
            k += 1;
        }
        if k == profile.len() {
            break;
        }
        profile[k] += 1;
    }
    Ok(StableSearch { candidates, infinite })
}

/// Factor recovery from `QS = Q'S'` and `Q(T-1)S = Q'(T-1)S'` with `(Q, S) = 1`.
/// Hypothesis failures are errors; the return value is the conclusion.
pub fn recover_factors_check(q: &Poly<Rat>, s: &Poly<Rat>, q2: &Poly<Rat>, s2: &Poly<Rat>) -> Result<bool> {
    let hyp = |m: &str| Err(Error::HypothesisViolation(m.to_string()));
    if ![q, s, q2, s2].iter().all(|p| p.is_monic()) {
        return hyp("all four polynomials must be monic");
    }
    if q.clone() * s.clone() != q2.clone() * s2.clone() {
        return hyp("QS != Q'S'");
    }
    let m1 = Rat::int(-1);
    if q.shift(&m1) * s.clone() != q2.shift(&m1) * s2.clone() {
        return hyp("Q(T-1)S != Q'(T-1)S'");
    }
    if poly_gcd_bezout(q, s)?.0 != Poly::one() {
        return hyp("Q and S are not coprime");
    }
    Ok(q == q2 && s == s2)
}

/// Degree-matched recovery: `QS = Q'S'` with all four cross pairs comaximal.
pub fn recover_factors_comaximal<S: Scalar>(q: &Poly<S>, s: &Poly<S>, q2: &Poly<S>, s2: &Poly<S>) -> Result<bool> {
    let hyp = |m: &str| Err(Error::HypothesisViolation(m.to_string()));
    if ![q, s, q2, s2].iter().all(|p| p.is_monic()) {
        return hyp("all four polynomials must be monic");
    }
    if q.degree() != q2.degree() || s.degree() != s2.degree() {
        return hyp("degrees do not match");
    }
    if q.clone() * s.clone() != q2.clone() * s2.clone() {
        return hyp("QS != Q'S'");
    }
    for (a, b) in [(q, s), (q2, s), (q, s2), (q2, s2)] {
        if !residue_coprime(a, b)? {
            return hyp("a cross pair is not comaximal");
        }
    }
    Ok(q == q2 && s == s2)
}

/// Comaximality over a local ring is coprimality of residues.
pub fn residue_coprime<S: Scalar>(a: &Poly<S>, b: &Poly<S>) -> Result<bool> {
    Ok(poly_gcd_bezout(&a.residue(), &b.residue())?.0 == Poly::one())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub w: Vec<usize>,
    pub weights: Vec<Rat>,
    pub q: Poly<Rat>,
    pub s: Poly<Rat>,
    pub new_charpoly: Poly<Rat>,
    pub pulled_back_weights: Vec<Rat>,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub sigma: String,
    pub i: usize,
    pub rows: Vec<ConsistencyRow>,
    /// `(Q_I, S_I)` agree across triangulations.
    pub consistent: bool,
    /// Every modified polynomial matches the pulled-back weights.
    pub all_match: bool,
    /// The pulled-back module still avoids the `[0, 0]` wall at `i`, so the
    /// step can be repeated.
    pub post_regular: bool,
}

/// Lattice modification along each triangulation versus `p_{i,σ}`.
pub fn pullback_consistency(d: &TriangModule, i: usize, sigma: &str) -> Result<ConsistencyReport> {
    let tris: Vec<(Vec<usize>, Vec<_>)> = if d.class_tag() == ClassTag::Plain {
        vec![((0..d.rank()).collect(), d.params().to_vec())]
    } else {
        enumerate_triangulations(d)?.into_iter().map(|t| (t.w, t.params)).collect()
    };
    let n = d.rank();
    let mut rows = Vec::new();
    for (w, params) in tris {
        let ws = weight_map(&params, sigma)?;
        let wall = wall_member(&ws, i, WallInterval::new(0, 0)?)?;
        if !wall.ok {
            return Err(Error::WallViolation(format!(
                "ordering {:?}: {}",
                w,
                serde_json::to_string(&wall.violations).unwrap_or_default()
            )));
        }
        let mut theta = Mat::diag(&ws);
        for r in 0..n {
            for c in r + 1..n {
                theta.set(r, c, Rat::one());
            }
        }
        let l = SenLattice::new(theta)?;
        let subset: Vec<usize> = (n - i..n).collect();
        let f = split_sen_poly(&l, &ws, &subset)?;
        let m = modify_down(&l, &f)?;
        let new_charpoly = m.lattice.charpoly();
        let pulled = pullback_p(&TriangModule::split(params)?, i, sigma, 1)?.weights(sigma)?;
        let matches = new_charpoly == Poly::from_roots(&pulled);
        rows.push(ConsistencyRow { w, weights: ws, q: f.q, s: f.s, new_charpoly, pulled_back_weights: pulled, matches });
    }
    let consistent = rows.windows(2).all(|p| p[0].q == p[1].q && p[0].s == p[1].s);
    let all_match = rows.iter().all(|r| r.matches);
    let post = pullback_p(d, i, sigma, 1)?.weights(sigma)?;
    let post_regular = wall_member(&post, i, WallInterval::new(0, 0)?)?.ok;
    Ok(ConsistencyReport { sigma: sigma.to_string(), i, rows, consistent, all_match, post_regular })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactalg::DualNum;
    use proptest::prelude::*;

    fn ri(v: &[&[i64]]) -> Mat<Rat> {
        Mat::from_rows(v.iter().map(|r| r.iter().map(|&x| Rat::int(x)).collect()).collect()).unwrap()
    }

    fn ints(v: &[i64]) -> Vec<Rat> {
        v.iter().map(|&x| Rat::int(x)).collect()
    }

    fn roots(v: &[i64]) -> Poly<Rat> {
        Poly::from_roots(&ints(v))
    }

    fn diag(v: &[i64]) -> SenLattice<Rat> {
        SenLattice::new(Mat::diag(&ints(v))).unwrap()
    }

    #[test]
    fn split_examples() {
        let l = diag(&[0, 2]);
        let f = split_sen_poly(&l, &ints(&[0, 2]), &[1]).unwrap();
        assert_eq!((f.q.clone(), f.s.clone()), (roots(&[2]), roots(&[0])));
        let e = split_sen_poly(&l, &ints(&[0, 2]), &[]).unwrap();
        assert_eq!((e.q, e.s), (Poly::one(), roots(&[0, 2])));
        let z = diag(&[0, 0]);
        assert!(matches!(split_sen_poly(&z, &ints(&[0, 0]), &[1]), Err(Error::NotComaximal(_))));
    }

    #[test]
    fn down_examples() {
        let l = diag(&[0, 2]);
        let f = split_sen_poly(&l, &ints(&[0, 2]), &[1]).unwrap();
        let m = modify_down(&l, &f).unwrap();
        assert_eq!(m.lattice.charpoly(), roots(&[3, 0]));
        assert_eq!(Subspace::span(2, m.w()), Subspace::span(2, &[ints(&[1, 0])]));
        let id = modify_down(&l, &split_sen_poly(&l, &ints(&[0, 2]), &[]).unwrap()).unwrap();
        assert_eq!(id.lattice.theta(), l.theta());
        let all = modify_down(&l, &split_sen_poly(&l, &ints(&[0, 2]), &[0, 1]).unwrap()).unwrap();
        assert_eq!(all.lattice.theta(), &l.theta().add(&Mat::identity(2)));
        assert_eq!(all.lattice.charpoly(), l.charpoly().shift(&Rat::int(-1)));
    }

    #[test]
    fn up_examples() {
        let l = diag(&[0, 3]);
        let f = split_sen_poly(&l, &ints(&[0, 3]), &[1]).unwrap();
        let m = modify_up(&l, &f).unwrap();
        assert_eq!(m.lattice.theta(), &Mat::diag(&ints(&[0, 2])));
        let id = modify_up(&l, &split_sen_poly(&l, &ints(&[0, 3]), &[]).unwrap()).unwrap();
        assert_eq!(id.lattice.theta(), l.theta());
    }

    #[test]
    fn gap_one_round_trip_refused() {
        let l = diag(&[0, 1]);
        let f = split_sen_poly(&l, &ints(&[0, 1]), &[1]).unwrap();
        // The single step is legal.
        assert_eq!(modify_down(&l, &f).unwrap().lattice.charpoly(), roots(&[0, 2]));
        match round_trip(&l, &f) {
            Err(Error::InvertibilityNotGuaranteed { q_root, s_root, diff }) => {
                assert_eq!((q_root.as_str(), s_root.as_str(), diff.as_str()), ("1", "0", "1"));
            }
            other => panic!("{other:?}"),
        }
        // Same refusal from polynomials alone.
        let g = Factorization::from_polys(roots(&[1]), roots(&[0])).unwrap();
        assert!(matches!(round_trip(&l, &g), Err(Error::InvertibilityNotGuaranteed { .. })));
    }

    #[test]
    fn round_trip_non_semisimple() {
        let theta = ri(&[&[0, 1, 5], &[0, 0, 2], &[0, 0, 4]]);
        let l = SenLattice::new(theta).unwrap();
        let f = split_sen_poly(&l, &ints(&[0, 0, 4]), &[2]).unwrap();
        let rt = round_trip(&l, &f).unwrap();
        assert!(rt.identity);
        assert_eq!(rt.down.lattice.charpoly(), roots(&[0, 0, 5]));
    }

    #[test]
    fn rational_root_search() {
        let p = roots(&[0, 0, 3]) * Poly::from_roots(&[Rat::new(-1, 2)]);
        assert_eq!(rational_roots(&p).unwrap(), vec![(Rat::new(-1, 2), 1), (Rat::zero(), 2), (Rat::int(3), 1)]);
        let irr = Poly::new(ints(&[-2, 0, 1]));
        assert!(rational_roots(&irr).unwrap().is_empty());
    }

    #[test]
    fn brute_force_examples() {
        let l = diag(&[0, 2]);
        let r = brute_force_modifications(&l, &roots(&[0, 3])).unwrap();
        assert_eq!(r.unique(), Some(&Subspace::span(2, &[ints(&[1, 0])])));
        let full = brute_force_modifications(&l, &l.charpoly()).unwrap();
        assert_eq!(full.unique(), Some(&Subspace::span(2, &[ints(&[1, 0]), ints(&[0, 1])])));
        // Non-coprime split: T(T-1) has infinitely many lines, T·T none.
        let z = diag(&[0, 0]);
        let many = brute_force_modifications(&z, &roots(&[0, 1])).unwrap();
        assert!(many.infinite && many.candidates.len() >= 2);
        assert_ne!(many.candidates[0], many.candidates[1]);
        let none = brute_force_modifications(&z, &roots(&[0, 5])).unwrap();
        assert!(none.candidates.is_empty());
    }

    #[test]
    fn brute_force_jordan_types() {
        // Single Jordan block: the stable line is unique.
        let j = SenLattice::new(ri(&[&[0, 1], &[0, 0]])).unwrap();
        let r = brute_force_modifications(&j, &roots(&[0, 1])).unwrap();
        assert_eq!(r.unique(), Some(&Subspace::span(2, &[ints(&[1, 0])])));
        // Type (2,1): planes and lines both come in families.
        let t = SenLattice::new(ri(&[&[0, 1, 0], &[0, 0, 0], &[0, 0, 0]])).unwrap();
        for target in [roots(&[0, 1, 1]), roots(&[0, 0, 1])] {
            let r = brute_force_modifications(&t, &target).unwrap();
            assert!(r.infinite);
            for c in &r.candidates {
                for v in &c.basis {
                    assert!(c.contains(&t.theta().mul_vec(v)));
                }
            }
        }
        let big = SenLattice::new(ri(&[&[0, 1, 0, 0], &[0, 0, 1, 0], &[0, 0, 0, 0], &[0, 0, 0, 0]])).unwrap();
        assert!(matches!(brute_force_modifications(&big, &roots(&[0, 0, 1, 1])), Err(Error::Unsupported(_))));
    }

    #[test]
    fn recovery_examples() {
        assert!(recover_factors_check(&roots(&[2]), &roots(&[0]), &roots(&[2]), &roots(&[0])).unwrap());
        assert!(matches!(
            recover_factors_check(&roots(&[0]), &roots(&[0]), &roots(&[0]), &roots(&[0])),
            Err(Error::HypothesisViolation(_))
        ));
        assert!(matches!(
            recover_factors_check(&roots(&[2]), &roots(&[0]), &roots(&[0]), &roots(&[2])),
            Err(Error::HypothesisViolation(_))
        ));
        assert!(recover_factors_comaximal(&roots(&[1, 2]), &roots(&[5]), &roots(&[1, 2]), &roots(&[5])).unwrap());
    }

    #[test]
    fn consistency_examples() {
        use crate::characters::{CharGroup, Character, FieldShape, GeneratorDecl};
        use crate::refinements::CrysModule;
        use std::collections::BTreeMap;
        let decls: BTreeMap<String, GeneratorDecl> = (1..=2)
            .map(|i| (format!("phi{i}"), GeneratorDecl { weights: BTreeMap::new(), uval: Rat::int(i), unit: false }))
            .collect();
        let g = CharGroup::with_generators(FieldShape::qp(), decls).unwrap();
        let phis: Vec<_> = ["phi1", "phi2"].iter().map(|l| Character::generator(&g, l).unwrap()).collect();
        let mk = |h: Vec<i64>| {
            let m = CrysModule::new(&g, phis.clone(), vec![h], None).unwrap();
            TriangModule::crystabelline(m, vec![0, 1]).unwrap()
        };
        let r = pullback_consistency(&mk(vec![1, 0]), 1, "s0").unwrap();
        assert!(r.consistent && r.all_match && !r.post_regular);
        assert_eq!((r.rows[0].q.clone(), r.rows[0].s.clone()), (roots(&[0]), roots(&[1])));
        assert_eq!(r.rows[0].pulled_back_weights, ints(&[1, 1]));
        let r = pullback_consistency(&mk(vec![2, 0]), 1, "s0").unwrap();
        assert!(r.consistent && r.all_match && r.post_regular);
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows.iter().all(|x| x.pulled_back_weights == ints(&[2, 1])));
        let r = pullback_consistency(&mk(vec![2, 0]), 2, "s0").unwrap();
        assert!(r.rows.iter().all(|x| x.pulled_back_weights == ints(&[3, 1])));
    }

    fn dual(a: i64, b: i64) -> DualNum {
        DualNum::new(Rat::int(a), Rat::int(b))
    }

    #[test]
    fn dual_modification() {
        let mut theta = Mat::diag(&[dual(0, 1), dual(2, -1), dual(5, 3)]);
        theta.set(0, 1, dual(1, 1));
        theta.set(1, 2, dual(0, 2));
        let l = SenLattice::new(theta).unwrap();
        let rs = vec![dual(0, 1), dual(2, -1), dual(5, 3)];
        let f = split_sen_poly(&l, &rs, &[1, 2]).unwrap();
        let m = modify_down(&l, &f).unwrap();
        let expect = Poly::from_roots(&[dual(0, 1), dual(3, -1), dual(6, 3)]);
        assert_eq!(m.lattice.charpoly(), expect);
        assert!(round_trip(&l, &f).unwrap().identity);
    }

    /// `P·diag(eigs)·P⁻¹` with `P` unipotent upper times unipotent lower.
    fn conjugated(eigs: &[i64], up: &[i64], lo: &[i64]) -> Mat<Rat> {
        let n = eigs.len();
        let mut u = Mat::identity(n);
        let mut l = Mat::identity(n);
        let mut k = 0;
        for r in 0..n {
            for c in r + 1..n {
                u.set(r, c, Rat::int(up[k]));
                l.set(c, r, Rat::int(lo[k]));
                k += 1;
            }
        }
        let p = u.mul(&l);
        p.mul(&Mat::diag(&ints(eigs))).mul(&p.inverse().unwrap())
    }

    fn distinct(n: usize) -> impl Strategy<Value = Vec<i64>> {
        proptest::sample::subsequence((-6i64..=6).collect::<Vec<_>>(), n).prop_shuffle()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn brute_force_agrees_with_modify_down(
            (eigs, up, lo) in (2usize..=4).prop_flat_map(|n| (
                distinct(n),
                proptest::collection::vec(-2i64..=2, n * (n - 1) / 2),
                proptest::collection::vec(-2i64..=2, n * (n - 1) / 2),
            ))
        ) {
            let n = eigs.len();
            let l = SenLattice::new(conjugated(&eigs, &up, &lo)).unwrap();
            for mask in 1..(1u32 << n) - 1 {
                let subset: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
                let f = split_sen_poly(&l, &ints(&eigs), &subset).unwrap();
                let m = modify_down(&l, &f).unwrap();
                let target = f.q.shift(&Rat::int(-1)) * f.s.clone();
                prop_assert_eq!(m.lattice.charpoly(), target.clone());
                let search = brute_force_modifications(&l, &target).unwrap();
                prop_assert_eq!(search.unique(), Some(&Subspace::span(n, m.w())));
            }
        }

        #[test]
        fn round_trip_identity_when_gaps_allow(
            (eigs, up, lo, mask) in (2usize..=4).prop_flat_map(|n| (
                distinct(n),
                proptest::collection::vec(-2i64..=2, n * (n - 1) / 2),
                proptest::collection::vec(-2i64..=2, n * (n - 1) / 2),
                0u32..(1 << n),
            ))
        ) {
            let n = eigs.len();
            let l = SenLattice::new(conjugated(&eigs, &up, &lo)).unwrap();
            let subset: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
            let f = split_sen_poly(&l, &ints(&eigs), &subset).unwrap();
            let gap_ok = subset.iter().all(|&a| (0..n).filter(|b| !subset.contains(b)).all(|b| (eigs[a] - eigs[b]).abs() > 1));
            match round_trip(&l, &f) {
                Ok(rt) => { prop_assert!(gap_ok); prop_assert!(rt.identity); }
                Err(Error::InvertibilityNotGuaranteed { .. }) => prop_assert!(!gap_ok),
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            }
        }

        #[test]
        fn dual_charpoly_law(
            re in distinct(3),
            eps in proptest::collection::vec(-3i64..=3, 3),
            off in proptest::collection::vec((-2i64..=2, -2i64..=2), 3),
            mask in 1u32..7,
        ) {
            let rs: Vec<DualNum> = re.iter().zip(&eps).map(|(&a, &b)| dual(a, b)).collect();
            let mut theta = Mat::diag(&rs);
            theta.set(0, 1, dual(off[0].0, off[0].1));
            theta.set(0, 2, dual(off[1].0, off[1].1));
            theta.set(1, 2, dual(off[2].0, off[2].1));
            let l = SenLattice::new(theta).unwrap();
            let subset: Vec<usize> = (0..3).filter(|b| mask >> b & 1 == 1).collect();
            let f = split_sen_poly(&l, &rs, &subset).unwrap();
            let m = modify_down(&l, &f).unwrap();
            prop_assert_eq!(m.lattice.charpoly(), f.q.shift(&DualNum::from_int(-1)) * f.s.clone());
        }

        #[test]
        fn recovery_over_factor_pairs(q in distinct(3), cut in 0usize..=3) {
            // Every monic factor pair of QS satisfying both product identities is (Q, S).
            let (qr, sr) = q.split_at(cut);
            let (qp, sp) = (roots(qr), roots(sr));
            let all = q.clone();
            for mask in 0u32..8 {
                let a: Vec<i64> = (0..3).filter(|b| mask >> b & 1 == 1).map(|b| all[b]).collect();
                let b: Vec<i64> = (0..3).filter(|b| mask >> b & 1 == 0).map(|b| all[b]).collect();
                match recover_factors_check(&qp, &sp, &roots(&a), &roots(&b)) {
                    Ok(ok) => prop_assert!(ok),
                    Err(Error::HypothesisViolation(_)) => prop_assert!(roots(&a) != qp),
                    Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
                }
            }
        }

        #[test]
        fn block_order_irrelevant(a in -5i64..5, b in -5i64..5, c in -5i64..5) {
            prop_assume!(a != b && b != c && a != c);
            let l = diag(&[a, b, c]);
            let f1 = split_sen_poly(&l, &ints(&[a, b, c]), &[0]).unwrap();
            let f2 = split_sen_poly(&l, &ints(&[c, a, b]), &[1]).unwrap();
            let (m1, m2) = (modify_down(&l, &f1).unwrap(), modify_down(&l, &f2).unwrap());
            prop_assert_eq!(m1.lattice.charpoly(), m2.lattice.charpoly());
            prop_assert_eq!(Subspace::span(3, m1.w()), Subspace::span(3, m2.w()));
        }

        #[test]
        fn residue_coprimality_matches_roots(q in proptest::collection::vec((-3i64..3, -3i64..3), 0..3), s in proptest::collection::vec((-3i64..3, -3i64..3), 0..3)) {
            let qd: Vec<DualNum> = q.iter().map(|&(a, b)| dual(a, b)).collect();
            let sd: Vec<DualNum> = s.iter().map(|&(a, b)| dual(a, b)).collect();
            let disjoint = q.iter().all(|x| s.iter().all(|y| x.0 != y.0));
            prop_assert_eq!(residue_coprime(&Poly::from_roots(&qd), &Poly::from_roots(&sd)).unwrap(), disjoint);
        }
    }
}
