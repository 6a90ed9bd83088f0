//! Degrees, slopes and étaleness of triangulated modules.
//!
//! All sums are of `v_p(δ(π_K))`; slopes divide by `f` and by the rank, which
//! never changes a sign, so the criteria are stated on the sums.

use serde::Serialize;

use crate::characters::Character;
use crate::error::{Error, Result};
use crate::exactalg::Rat;
use crate::refinements::{all_perms, CrysModule};
use crate::trianguline::{apply_program, ClassTag, ProgramMode, Step, TriangModule};

/// Prefix sums with the violated positions (1-based). Position `n` is listed
/// when the total is nonzero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SlopeReport {
    pub partials: Vec<Rat>,
    pub total: Rat,
    pub verdict: bool,
    pub violations: Vec<usize>,
    /// A refinement and prefix length whose submodule has negative slope.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<(Vec<usize>, usize)>,
}

impl SlopeReport {
    /// `Σ_{i≤m} x_i ≥ bound_m` for `m < n` and `Σ x_i = bound_n`.
    fn from_prefix(xs: &[Rat], bounds: &[Rat]) -> SlopeReport {
        let n = xs.len();
        let mut acc = Rat::zero();
        let mut partials = Vec::with_capacity(n);
        let mut violations = Vec::new();
        for (m, x) in xs.iter().enumerate() {
            acc = &acc + x;
            partials.push(acc.clone());
            let ok = if m + 1 < n { acc >= bounds[m] } else { acc == bounds[m] };
            if !ok {
                violations.push(m + 1);
            }
        }
        SlopeReport { total: acc, verdict: violations.is_empty(), partials, violations, witness: None }
    }
}

/// `μ(R(δ)) = v_p(δ(π_K)) / f`.
pub fn slope_rank1(delta: &Character) -> Rat {
    delta.uval() / Rat::int(delta.shape().f as i64)
}

/// `deg(D)`: the sum of rank-one degrees.
pub fn degree(params: &[Character]) -> Rat {
    params.iter().map(slope_rank1).sum()
}

pub fn slope(params: &[Character]) -> Result<Rat> {
    if params.is_empty() {
        return Err(Error::EmptyTuple);
    }
    Ok(degree(params) / Rat::int(params.len() as i64))
}

fn prefix_nonneg(uvals: &[Rat]) -> SlopeReport {
    SlopeReport::from_prefix(uvals, &vec![Rat::zero(); uvals.len()])
}

/// Étaleness of a strongly non-split very generic module: proper prefixes of
/// `v_p(δ_i(π_K))` are `≥ 0` and the total is `0`.
pub fn etale_vgen(d: &TriangModule) -> Result<SlopeReport> {
    if d.class_tag() != ClassTag::VeryGenericStronglyNonSplit {
        return Err(Error::WrongClass("very generic strongly non-split module required".into()));
    }
    Ok(prefix_nonneg(&d.uvals()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PullbackEtale {
    pub feasible: bool,
    /// `v_p(χ(π_K))` of the unramified twist that fixes the total.
    pub chi_uval: Rat,
    /// Violated `m` (1-based, `m < n`).
    pub violations: Vec<usize>,
}

/// Whether `p_{j,σ}(D)` becomes étale after an unramified twist, for étale
/// very generic `D`.
pub fn etale_pullback_vgen(d: &TriangModule, j: usize, sigma: &str) -> Result<PullbackEtale> {
    let base = etale_vgen(d)?;
    let n = d.rank();
    let shape = d.group().shape();
    shape.index_of(sigma)?;
    if j == 0 || j > n {
        return Err(Error::IndexOutOfRange { what: "pullback", index: j, n });
    }
    if !base.verdict {
        return Err(Error::HypothesisViolation("module is not étale".into()));
    }
    let e = Rat::int(shape.e as i64);
    let (jr, nr) = (Rat::int(j as i64), Rat::int(n as i64));
    let mut violations = Vec::new();
    for m in 1..n {
        let mr = Rat::int(m as i64);
        let mut lhs = base.partials[m - 1].clone();
        if m > n - j {
            lhs = lhs + Rat::int((m - (n - j)) as i64) / e.clone();
        }
        if lhs < &mr * &jr / (&nr * &e) {
            violations.push(m);
        }
    }
    Ok(PullbackEtale {
        feasible: violations.is_empty(),
        chi_uval: -(jr / (nr * e)),
        violations,
    })
}

/// `Σ_σ h_{i,σ} / e` per position, for weights stored in descending order.
fn hodge_terms(m: &CrysModule) -> Vec<Rat> {
    let e = Rat::int(m.group().shape().e as i64);
    (0..m.rank())
        .map(|i| Rat::int(m.weights().iter().map(|ws| ws[i]).sum::<i64>()) / e.clone())
        .collect()
}

fn require_nc_regular(m: &CrysModule) -> Result<()> {
    if !m.is_regular() {
        return Err(Error::NonRegular(format!("weights {:?}", m.weights())));
    }
    if !m.is_noncritical()? {
        return Err(Error::HypothesisViolation("module is critical for some refinement".into()));
    }
    Ok(())
}

/// Étaleness of a non-critical crystabelline module, with an extra unramified
/// twist of valuation `chi_uval` on every `φ_i`.
pub fn etale_crys_twisted(m: &CrysModule, chi_uval: &Rat) -> Result<SlopeReport> {
    require_nc_regular(m)?;
    let mut alphas: Vec<Rat> = m.phis().iter().map(|p| p.uval() + chi_uval.clone()).collect();
    alphas.sort();
    let xs: Vec<Rat> = alphas.iter().zip(hodge_terms(m)).map(|(a, h)| a + &h).collect();
    Ok(prefix_nonneg(&xs))
}

/// Sort `v_p(α_i)` ascending and check the prefix inequalities against the
/// Hodge weights.
pub fn etale_crys(m: &CrysModule) -> Result<SlopeReport> {
    etale_crys_twisted(m, &Rat::zero())
}

/// Every `Fil_w^i` for every refinement `w`, with slopes read from the
/// triangulation parameters themselves. Partials are the prefix minima.
pub fn brute_force_etale(m: &CrysModule) -> Result<SlopeReport> {
    require_nc_regular(m)?;
    let n = m.rank();
    if n > 6 {
        return Err(Error::TooLarge(format!("rank {n} exceeds the exhaustive limit 6")));
    }
    let mut minima: Vec<Option<Rat>> = vec![None; n];
    let mut witness = None;
    let mut total = Rat::zero();
    for w in all_perms(n) {
        let params = m.triangulation_params(&w)?;
        let mut acc = Rat::zero();
        for (i, d) in params.iter().enumerate() {
            acc = acc + d.uval();
            if minima[i].as_ref().map_or(true, |x| acc < *x) {
                minima[i] = Some(acc.clone());
            }
            if i + 1 < n && acc.is_negative() && witness.is_none() {
                witness = Some((w.clone(), i + 1));
            }
        }
        total = acc;
    }
    let partials: Vec<Rat> = minima.into_iter().map(|x| x.unwrap_or_else(Rat::zero)).collect();
    let mut violations: Vec<usize> = (0..n.saturating_sub(1)).filter(|&i| partials[i].is_negative()).map(|i| i + 1).collect();
    if !total.is_zero() {
        violations.push(n);
    }
    Ok(SlopeReport { partials, total, verdict: violations.is_empty(), violations, witness })
}

/// Total degree (times `f`) added by a program: each step adds `i·k/e`.
pub fn program_degree(program: &[Step], e: u32) -> Rat {
    program.iter().map(|s| Rat::new(s.i as i64 * s.k, e as i64)).sum()
}

/// Étaleness verdict for the classes with a criterion, after an unramified
/// twist of valuation `chi_uval`.
pub fn etale_after_twist(d: &TriangModule, chi_uval: &Rat) -> Result<SlopeReport> {
    match d.class_tag() {
        ClassTag::VeryGenericStronglyNonSplit => {
            let u: Vec<Rat> = d.uvals().into_iter().map(|x| x + chi_uval.clone()).collect();
            Ok(prefix_nonneg(&u))
        }
        ClassTag::CrystabellineNonCritical => {
            let c = d.crys().ok_or(Error::PlainTag)?;
            etale_crys_twisted(&c.module, chi_uval)
        }
        t => Err(Error::Unsupported(format!("no étaleness criterion for class {t:?}"))),
    }
}

/// `v_p(χ(π_K))` of the unramified twist making the program's output étale,
/// or `None` when the twisted prefix inequalities fail.
pub fn twist_to_etale(d: &TriangModule, program: &[Step]) -> Result<Option<Rat>> {
    if !etale_after_twist(d, &Rat::zero())?.verdict {
        return Err(Error::HypothesisViolation("module is not étale before the program".into()));
    }
    let e = d.group().shape().e;
    let chi = -(program_degree(program, e) / Rat::int(d.rank() as i64));
    if program.is_empty() {
        return Ok(Some(chi));
    }
    let out = apply_program(d, program, ProgramMode::Unchecked)?;
    let r = etale_after_twist(&out, &chi)?;
    Ok(r.verdict.then_some(chi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::{CharGroup, FieldShape, GeneratorDecl};
    use proptest::prelude::*;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn r(a: i64) -> Rat {
        Rat::int(a)
    }

    /// Very generic module with σ-weights `1/(i+2)`, whose differences are
    /// never integers, and the given valuations.
    fn vgen(uvals: &[Rat]) -> TriangModule {
        let decls: BTreeMap<String, GeneratorDecl> = uvals
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let w = Rat::new(1, i as i64 + 2);
                (format!("u{}", i + 1), GeneratorDecl { weights: [("s0".into(), w)].into(), uval: u.clone(), unit: false })
            })
            .collect();
        let g = CharGroup::with_generators(FieldShape::qp(), decls).unwrap();
        let cs = (1..=uvals.len()).map(|i| Character::generator(&g, &format!("u{i}")).unwrap()).collect();
        TriangModule::very_generic(cs).unwrap()
    }

    fn crys(alphas: &[Rat], h: Vec<i64>) -> CrysModule {
        let decls: BTreeMap<String, GeneratorDecl> = alphas
            .iter()
            .enumerate()
            .map(|(i, a)| {
                (format!("phi{}", i + 1), GeneratorDecl { weights: BTreeMap::new(), uval: a.clone(), unit: false })
            })
            .collect();
        let g: Arc<CharGroup> = CharGroup::with_generators(FieldShape::qp(), decls).unwrap();
        let phis = (1..=alphas.len()).map(|i| Character::generator(&g, &format!("phi{i}")).unwrap()).collect();
        CrysModule::new(&g, phis, vec![h], None).unwrap()
    }

    #[test]
    fn rank_one_slopes() {
        let g = CharGroup::new(FieldShape::qp());
        assert_eq!(slope_rank1(&Character::abs(&g)), r(-1));
        assert_eq!(slope_rank1(&Character::eps(&g)), r(0));
        let u = vgen(&[r(1)]);
        assert_eq!(slope_rank1(&u.params()[0]), r(1));
        let g2 = CharGroup::new(FieldShape::standard(2, 3));
        assert_eq!(slope_rank1(&Character::abs(&g2)), r(-1));
        assert_eq!(slope_rank1(&Character::eps(&g2)), r(0));
    }

    #[test]
    fn vgen_examples() {
        assert!(etale_vgen(&vgen(&[r(0), r(0)])).unwrap().verdict);
        let bad = etale_vgen(&vgen(&[r(-1), r(1)])).unwrap();
        assert!(!bad.verdict);
        assert_eq!(bad.violations, vec![1]);
        assert!(etale_vgen(&vgen(&[r(1), r(-1)])).unwrap().verdict);
        let g = CharGroup::new(FieldShape::qp());
        let split = TriangModule::split(vec![Character::trivial(&g)]).unwrap();
        assert!(matches!(etale_vgen(&split), Err(Error::WrongClass(_))));
    }

    #[test]
    fn pullback_examples() {
        let ok = etale_pullback_vgen(&vgen(&[r(1), r(-1)]), 1, "s0").unwrap();
        assert!(ok.feasible);
        assert_eq!(ok.chi_uval, Rat::new(-1, 2));
        let no = etale_pullback_vgen(&vgen(&[r(0), r(0)]), 1, "s0").unwrap();
        assert!(!no.feasible);
        assert_eq!(no.violations, vec![1]);
    }

    #[test]
    fn crys_examples() {
        let m = crys(&[r(-1), r(0)], vec![1, 0]);
        let rep = etale_crys(&m).unwrap();
        assert!(rep.verdict);
        assert_eq!(rep.partials, vec![r(0), r(0)]);
        assert!(brute_force_etale(&m).unwrap().verdict);
        let z = crys(&[r(0), r(0)], vec![1, 0]);
        let rep = etale_crys(&z).unwrap();
        assert!(!rep.verdict && rep.violations == vec![2]);
        assert_eq!(brute_force_etale(&z).unwrap().verdict, rep.verdict);
        let one = crys(&[r(0)], vec![0]);
        assert!(etale_crys(&one).unwrap().verdict);
        let neg = crys(&[r(-2), r(1)], vec![1, 0]);
        assert_eq!(etale_crys(&neg).unwrap().violations, vec![1]);
        let b = brute_force_etale(&neg).unwrap();
        assert!(!b.verdict);
        assert_eq!(b.witness, Some((vec![0, 1], 1)));
    }

    #[test]
    fn twist_examples() {
        let d = vgen(&[r(1), r(-1)]);
        assert_eq!(twist_to_etale(&d, &[Step::new(1, "s0", 1)]).unwrap(), Some(Rat::new(-1, 2)));
        assert_eq!(twist_to_etale(&d, &[]).unwrap(), Some(r(0)));
        let two = [Step::new(1, "s0", 1), Step::new(2, "s0", 1)];
        assert_eq!(program_degree(&two, 1), r(3));
        assert_eq!(twist_to_etale(&d, &two).unwrap(), Some(Rat::new(-3, 2)));
        let flat = vgen(&[r(0), r(0)]);
        assert_eq!(twist_to_etale(&flat, &[Step::new(1, "s0", 1)]).unwrap(), None);
    }

    #[test]
    fn twist_crys() {
        let m = crys(&[r(-2), r(0)], vec![2, 0]);
        let d = TriangModule::crystabelline(m, vec![0, 1]).unwrap();
        assert!(etale_after_twist(&d, &r(0)).unwrap().verdict);
        // Weights become (2, 1); the twisted first prefix is -1/2.
        assert_eq!(twist_to_etale(&d, &[Step::new(1, "s0", 1)]).unwrap(), None);
        let m = crys(&[r(-1), r(-1)], vec![2, 0]);
        let d = TriangModule::crystabelline(m, vec![1, 0]).unwrap();
        let chi = twist_to_etale(&d, &[Step::new(1, "s0", 1)]).unwrap();
        assert_eq!(chi, Some(Rat::new(-1, 2)));
    }

    fn small_rat() -> impl Strategy<Value = Rat> {
        (-5i64..=5).prop_map(Rat::int)
    }

    fn regular_weights(n: usize) -> impl Strategy<Value = Vec<i64>> {
        proptest::sample::subsequence((-4i64..=4).collect::<Vec<_>>(), n).prop_map(|mut v| {
            v.sort_by(|a, b| b.cmp(a));
            v
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]

        #[test]
        fn crys_matches_oracle(
            (alphas, h) in (1usize..=5).prop_flat_map(|n| (proptest::collection::vec(small_rat(), n), regular_weights(n)))
        ) {
            let m = crys(&alphas, h);
            let a = etale_crys(&m).unwrap();
            let b = brute_force_etale(&m).unwrap();
            prop_assert_eq!(a.verdict, b.verdict);
            prop_assert_eq!(&a.partials[..a.partials.len() - 1], &b.partials[..b.partials.len() - 1]);
            prop_assert_eq!(a.total, b.total);
        }

        #[test]
        fn degree_additive_and_order_free(uvals in proptest::collection::vec(small_rat(), 1..6), seed in any::<u64>()) {
            let d = vgen(&uvals);
            let total: Rat = d.params().iter().map(slope_rank1).sum();
            prop_assert_eq!(degree(d.params()), total.clone());
            let mut ps = d.params().to_vec();
            let k = ps.len();
            ps.rotate_left((seed as usize) % k);
            prop_assert_eq!(degree(&ps), total.clone());
            prop_assert_eq!(etale_vgen(&d).unwrap().total, total);
        }

        #[test]
        fn pullback_criterion_matches_twisted_prefix(uvals in proptest::collection::vec(small_rat(), 2..6), j in 1usize..6) {
            let n = uvals.len();
            prop_assume!(j <= n);
            // Make the module étale by moving the total into the last position.
            let mut u = uvals.clone();
            let s: Rat = u[..n - 1].iter().cloned().sum();
            u[n - 1] = -s;
            let d = vgen(&u);
            prop_assume!(etale_vgen(&d).unwrap().verdict);
            let p = etale_pullback_vgen(&d, j, "s0").unwrap();
            let pulled = crate::trianguline::pullback_p(&d, j, "s0", 1).unwrap();
            let shifted: Vec<Rat> = pulled.uvals().into_iter().map(|x| x + p.chi_uval.clone()).collect();
            let rep = prefix_nonneg(&shifted);
            prop_assert!(rep.total.is_zero());
            prop_assert_eq!(p.feasible, rep.verdict);
            prop_assert_eq!(twist_to_etale(&d, &[Step::new(j, "s0", 1)]).unwrap().is_some(), p.feasible);
        }
    }
}
