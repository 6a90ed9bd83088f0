//! Crystabelline modules: genericity, refinements, Hodge flags and criticality.
//!
//! Conventions. Hodge–Tate weights are stored descending per embedding,
//! `h_1 ≥ … ≥ h_n`. The Hodge filtration has ascending jumps `c_k = -h_k`, and a
//! flag matrix `F` (columns `f_1..f_n`, coordinates in the eigenbasis `e_1..e_n`
//! of the Frobenius) encodes it by `Fil^{c_k} = span(f_k, …, f_n)`. A refinement
//! `w` is a permutation stored 0-based; `V_i^w = span(e_{w(1)}, …, e_{w(i)})`.

use std::collections::BTreeSet;
use std::sync::Arc;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::characters::{CharGroup, Character};
use crate::error::{Error, Result};
use crate::exactalg::{Mat, Rat, Subspace};

/// All permutations of `0..n` in lexicographic order.
pub fn all_perms(n: usize) -> Vec<Vec<usize>> {
    (0..n).permutations(n).collect()
}

pub fn is_perm(w: &[usize]) -> bool {
    let mut s = w.to_vec();
    s.sort_unstable();
    s.iter().enumerate().all(|(i, &x)| i == x)
}

/// `w ∘ (i, i+1)`: swaps the entries at positions `i` and `i + 1`.
pub fn compose_adjacent(w: &[usize], i: usize) -> Vec<usize> {
    let mut v = w.to_vec();
    v.swap(i, i + 1);
    v
}

/// Jumps of the filtration induced on each graded line `V_i^w / V_{i-1}^w`.
///
/// `jumps` must be strictly increasing. Entry `i` of the result is the largest
/// `c_k` with `dim(Fil^{c_k} ∩ V_i^w) - dim(Fil^{c_k} ∩ V_{i-1}^w) = 1`.
pub fn flag_jumps(w: &[usize], flag: &Mat<Rat>, jumps: &[i64]) -> Result<Vec<i64>> {
    let n = flag.rows();
    if !flag.is_square() || jumps.len() != n || w.len() != n || !is_perm(w) {
        return Err(Error::Ragged("refinement, flag and jumps must have equal size".into()));
    }
    if jumps.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::NonRegular("jumps must be strictly increasing".into()));
    }
    if flag.det().is_zero() {
        return Err(Error::DegenerateFlag("flag matrix is singular".into()));
    }
    let cols = flag.columns();
    let fil: Vec<Subspace> = (0..=n).map(|k| Subspace::span(n, &cols[k..])).collect();
    let unit = |i: usize| -> Vec<Rat> {
        (0..n).map(|r| if r == i { Rat::one() } else { Rat::zero() }).collect()
    };
    let v: Vec<Subspace> = (0..=n)
        .map(|i| Subspace::span(n, &w[..i].iter().map(|&a| unit(a)).collect::<Vec<_>>()))
        .collect();
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let k = (0..n)
            .rev()
            .find(|&k| fil[k].intersection_dim(&v[i]) - fil[k].intersection_dim(&v[i - 1]) == 1)
            .ok_or_else(|| Error::Internal("no jump found on a graded line".into()))?;
        out.push(jumps[k]);
    }
    Ok(out)
}

/// `Vandermonde(1..n)`: every minor is positive, so the flag is in general
/// position with respect to every coordinate flag.
pub fn general_position_flag(n: usize) -> Mat<Rat> {
    let rows = (0..n)
        .map(|r| (0..n).map(|c| Rat::int(((r + 1) as i64).pow(c as u32))).collect())
        .collect();
    Mat::from_rows(rows).unwrap()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericReport {
    pub generic: bool,
    /// 1-based pair `(i, j)` with `φ_i/φ_j ∈ {1, abs, abs^-1}`.
    pub pair: Option<(usize, usize)>,
}

/// Formal test `φ_i/φ_j ∉ {1, abs, abs^{-1}}` for all `i ≠ j`.
pub fn generic_check(phis: &[Character]) -> Result<GenericReport> {
    for i in 0..phis.len() {
        for j in 0..phis.len() {
            if i == j {
                continue;
            }
            let r = phis[i].div(&phis[j])?;
            let abs = Character::abs(r.group());
            if r.is_trivial() || r == abs || r == abs.inv() {
                return Ok(GenericReport { generic: false, pair: Some((i + 1, j + 1)) });
            }
        }
    }
    Ok(GenericReport { generic: true, pair: None })
}

/// A generic crystabelline module with explicit Hodge flags.
#[derive(Clone, Debug, PartialEq)]
pub struct CrysModule {
    group: Arc<CharGroup>,
    phis: Vec<Character>,
    weights: Vec<Vec<i64>>,
    flags: Vec<Mat<Rat>>,
}

impl CrysModule {
    /// `weights[σ]` and `flags[σ]` are indexed by embedding; `flags = None`
    /// uses a general-position flag at every embedding.
    pub fn new(
        group: &Arc<CharGroup>,
        phis: Vec<Character>,
        weights: Vec<Vec<i64>>,
        flags: Option<Vec<Mat<Rat>>>,
    ) -> Result<CrysModule> {
        let n = phis.len();
        let d = group.shape().degree();
        if n == 0 {
            return Err(Error::EmptyTuple);
        }
        if weights.len() != d || weights.iter().any(|w| w.len() != n) {
            return Err(Error::Ragged("one weight list of length n per embedding".into()));
        }
        if weights.iter().any(|w| w.windows(2).any(|p| p[0] < p[1])) {
            return Err(Error::InvalidModule("weights must be listed in decreasing order".into()));
        }
        let flags = flags.unwrap_or_else(|| vec![general_position_flag(n); d]);
        if flags.len() != d || flags.iter().any(|f| f.rows() != n || f.cols() != n) {
            return Err(Error::Ragged("one n×n flag per embedding".into()));
        }
        if flags.iter().any(|f| f.det().is_zero()) {
            return Err(Error::DegenerateFlag("flag matrix is singular".into()));
        }
        let g = generic_check(&phis)?;
        if let Some((i, j)) = g.pair {
            return Err(Error::InvalidModule(format!("not generic: φ_{i}/φ_{j} ∈ {{1, abs, abs^-1}}")));
        }
        Ok(CrysModule { group: group.clone(), phis, weights, flags })
    }

    pub fn group(&self) -> &Arc<CharGroup> {
        &self.group
    }

    pub fn rank(&self) -> usize {
        self.phis.len()
    }

    pub fn phis(&self) -> &[Character] {
        &self.phis
    }

    pub fn weights(&self) -> &[Vec<i64>] {
        &self.weights
    }

    pub fn flags(&self) -> &[Mat<Rat>] {
        &self.flags
    }

    pub fn is_regular(&self) -> bool {
        self.weights.iter().all(|w| w.windows(2).all(|p| p[0] > p[1]))
    }

    fn require_regular(&self) -> Result<()> {
        if self.is_regular() {
            Ok(())
        } else {
            Err(Error::NonRegular(format!("weights {:?}", self.weights)))
        }
    }

    fn ascending_jumps(&self, s: usize) -> Vec<i64> {
        self.weights[s].iter().map(|h| -h).collect()
    }

    /// `k^w_{i,σ} = -j_i(w)` per embedding: the Hodge weight carried by the
    /// `i`-th graded piece of the triangulation attached to `w`.
    pub fn induced_weights(&self, w: &[usize]) -> Result<Vec<Vec<i64>>> {
        self.require_regular()?;
        (0..self.weights.len())
            .map(|s| {
                let j = flag_jumps(w, &self.flags[s], &self.ascending_jumps(s))?;
                Ok(j.iter().map(|x| -x).collect())
            })
            .collect()
    }

    /// `δ_{w,i} = x^{k^w_i} φ_{w(i)}`.
    pub fn triangulation_params(&self, w: &[usize]) -> Result<Vec<Character>> {
        let k = self.induced_weights(w)?;
        (0..self.rank())
            .map(|i| {
                let ki: Vec<i64> = k.iter().map(|ks| ks[i]).collect();
                Character::x_pow(&self.group, &ki)?.mul(&self.phis[w[i]])
            })
            .collect()
    }

    /// True iff every refinement is non-critical.
    pub fn is_noncritical(&self) -> Result<bool> {
        for w in all_perms(self.rank()) {
            if !noncritical_check(self, &w)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Replace the weights, keeping `φ` and flags (used by weight shifts).
    pub fn with_weights(&self, weights: Vec<Vec<i64>>) -> Result<CrysModule> {
        CrysModule::new(&self.group, self.phis.clone(), weights, Some(self.flags.clone()))
    }
}

/// Non-critical iff the induced weights are `(h_1, …, h_n)` at every embedding,
/// i.e. each `Fil_w^i` carries the top `i` weights.
pub fn noncritical_check(m: &CrysModule, w: &[usize]) -> Result<bool> {
    if w.len() != m.rank() || !is_perm(w) {
        return Err(Error::Ragged("refinement must be a permutation of 1..n".into()));
    }
    Ok(m.induced_weights(w)? == m.weights)
}

/// Position `i` (0-based) such that `j(w ∘ (i, i+1))` is `j(w)` with entries
/// `i`, `i+1` swapped; `None` when `j(w)` is already sorted.
pub fn adjacent_swap(w: &[usize], flag: &Mat<Rat>, jumps: &[i64]) -> Result<Option<usize>> {
    let j = flag_jumps(w, flag, jumps)?;
    if j.windows(2).all(|p| p[0] < p[1]) {
        return Ok(None);
    }
    for i in 0..j.len() - 1 {
        let mut expect = j.clone();
        expect.swap(i, i + 1);
        if flag_jumps(&compose_adjacent(w, i), flag, jumps)? == expect {
            return Ok(Some(i));
        }
    }
    Err(Error::Internal(format!("no adjacent swap for unsorted jumps {j:?}")))
}

/// For a refinement that is critical at `sigma`, the position `i` (0-based)
/// and the neighbour `w ∘ (i, i+1)` whose rank-2 subquotient carries both
/// orderings. One embedding at a time.
pub fn critical_split_witness(
    m: &CrysModule,
    w: &[usize],
    sigma: &str,
) -> Result<Option<(usize, Vec<usize>)>> {
    m.require_regular()?;
    let s = m.group.shape().index_of(sigma)?;
    let i = adjacent_swap(w, &m.flags[s], &m.ascending_jumps(s))?;
    Ok(i.map(|i| (i, compose_adjacent(w, i))))
}

/// Indecomposability shadow: for every nonempty proper `A ⊂ {1..n}` there are
/// non-critical refinements placing `{φ_a : a ∈ A}` at different position sets.
/// Returns the first subset that stays put, if any (1-based).
pub fn stable_partition(m: &CrysModule) -> Result<Option<Vec<usize>>> {
    let n = m.rank();
    let nc: Vec<Vec<usize>> = all_perms(n)
        .into_iter()
        .filter_map(|w| match noncritical_check(m, &w) {
            Ok(true) => Some(Ok(w)),
            Ok(false) => None,
            Err(e) => Some(Err(e)),
        })
        .collect::<Result<_>>()?;
    for mask in 1..(1u32 << n) - 1 {
        let a: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let positions = |w: &Vec<usize>| -> BTreeSet<usize> {
            (0..n).filter(|&i| a.contains(&w[i])).collect()
        };
        let first = positions(&nc[0]);
        if nc.iter().all(|w| positions(w) == first) {
            return Ok(Some(a.iter().map(|i| i + 1).collect()));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::{FieldShape, GeneratorDecl};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn group(n: usize) -> Arc<CharGroup> {
        let decls: BTreeMap<String, GeneratorDecl> = (1..=n)
            .map(|i| {
                (format!("phi{i}"), GeneratorDecl { weights: BTreeMap::new(), uval: Rat::int(i as i64), unit: false })
            })
            .collect();
        CharGroup::with_generators(FieldShape::qp(), decls).unwrap()
    }

    fn phis(g: &Arc<CharGroup>, n: usize) -> Vec<Character> {
        (1..=n).map(|i| Character::generator(g, &format!("phi{i}")).unwrap()).collect()
    }

    fn ri(v: &[&[i64]]) -> Mat<Rat> {
        Mat::from_rows(v.iter().map(|r| r.iter().map(|&x| Rat::int(x)).collect()).collect()).unwrap()
    }

    /// Oracle: dimension counts with explicitly built intersections, written
    /// independently of `Subspace::intersection_dim` via kernel computation.
    fn jumps_oracle(w: &[usize], f: &Mat<Rat>, jumps: &[i64]) -> Vec<i64> {
        let n = f.rows();
        let inter_dim = |k: usize, i: usize| -> usize {
            // Both spanning sets are independent, so the kernel of the joined
            // matrix has the dimension of the intersection.
            let mut cols: Vec<Vec<Rat>> = f.columns()[k..].to_vec();
            for &a in &w[..i] {
                cols.push((0..n).map(|r| if r == a { Rat::one() } else { Rat::zero() }).collect());
            }
            if cols.is_empty() {
                return 0;
            }
            let m = Mat::from_cols(n, &cols);
            m.kernel_basis().len()
        };
        (1..=n)
            .map(|i| {
                let mut best = None;
                for k in 0..n {
                    if inter_dim(k, i) == inter_dim(k, i - 1) + 1 {
                        best = Some(jumps[k]);
                    }
                }
                best.unwrap()
            })
            .collect()
    }

    #[test]
    fn coordinate_flag_permutes_jumps() {
        let id = Mat::<Rat>::identity(3);
        let jumps = [-5, 0, 2];
        for w in all_perms(3) {
            let j = flag_jumps(&w, &id, &jumps).unwrap();
            assert_eq!(j, w.iter().map(|&a| jumps[a]).collect::<Vec<_>>());
        }
    }

    #[test]
    fn rank_two_general_position() {
        // f_2 = (1,1) is neither eigenline: the deeper step meets V_1 trivially.
        let f = ri(&[&[1, 1], &[0, 1]]);
        assert_eq!(flag_jumps(&[0, 1], &f, &[0, 1]).unwrap(), vec![0, 1]);
        assert_eq!(flag_jumps(&[1, 0], &f, &[0, 1]).unwrap(), vec![0, 1]);
        // f_2 = e_2: the line e_2 lies in the deeper step.
        let g = ri(&[&[1, 0], &[0, 1]]);
        assert_eq!(flag_jumps(&[1, 0], &g, &[0, 1]).unwrap(), vec![1, 0]);
        assert!(flag_jumps(&[0, 1], &ri(&[&[1, 1], &[1, 1]]), &[0, 1]).is_err());
    }

    #[test]
    fn generic_examples() {
        let g = group(2);
        let p = phis(&g, 2);
        let abs = Character::abs(&g);
        assert_eq!(generic_check(&[p[0].clone(), p[0].mul(&abs).unwrap()]).unwrap().pair, Some((1, 2)));
        assert!(generic_check(&p).unwrap().generic);
        assert!(!generic_check(&[p[0].clone(), p[0].clone()]).unwrap().generic);
    }

    #[test]
    fn noncritical_examples() {
        let g = group(3);
        let m = CrysModule::new(&g, phis(&g, 3), vec![vec![2, 1, 0]], None).unwrap();
        assert!(m.is_noncritical().unwrap());
        let c = CrysModule::new(&g, phis(&g, 3), vec![vec![2, 1, 0]], Some(vec![Mat::identity(3)])).unwrap();
        let nc: Vec<_> = all_perms(3).into_iter().filter(|w| noncritical_check(&c, w).unwrap()).collect();
        assert_eq!(nc, vec![vec![0, 1, 2]]);
        let one = CrysModule::new(&group(1), phis(&group(1), 1), vec![vec![4]], None).unwrap();
        assert!(noncritical_check(&one, &[0]).unwrap());
        let flat = CrysModule::new(&g, phis(&g, 3), vec![vec![1, 1, 0]], None).unwrap();
        assert!(matches!(noncritical_check(&flat, &[0, 1, 2]), Err(Error::NonRegular(_))));
    }

    #[test]
    fn swap_examples() {
        let id = Mat::<Rat>::identity(2);
        assert_eq!(adjacent_swap(&[1, 0], &id, &[0, 1]).unwrap(), Some(0));
        assert_eq!(adjacent_swap(&[0, 1], &id, &[0, 1]).unwrap(), None);
    }

    #[test]
    fn witness_examples() {
        let g = group(3);
        let c = CrysModule::new(&g, phis(&g, 3), vec![vec![2, 1, 0]], Some(vec![Mat::identity(3)])).unwrap();
        // w = (2,1,3) 1-based: descent at the first position.
        assert_eq!(critical_split_witness(&c, &[1, 0, 2], "s0").unwrap(), Some((0, vec![0, 1, 2])));
        assert_eq!(critical_split_witness(&c, &[0, 1, 2], "s0").unwrap(), None);
        for w in all_perms(3) {
            let wit = critical_split_witness(&c, &w, "s0").unwrap();
            let sw = adjacent_swap(&w, &Mat::identity(3), &[-2, -1, 0]).unwrap();
            assert_eq!(wit.as_ref().map(|x| x.0), sw);
            assert_eq!(wit.is_none(), noncritical_check(&c, &w).unwrap());
        }
    }

    #[test]
    fn indecomposable_shadow() {
        for n in 1..=5 {
            let g = group(n);
            let ws = vec![(0..n as i64).rev().collect()];
            let m = CrysModule::new(&g, phis(&g, n), ws, None).unwrap();
            assert_eq!(stable_partition(&m).unwrap(), None);
        }
        // Coordinate flag: only w = id is non-critical, so every subset is stable.
        let g = group(2);
        let c = CrysModule::new(&g, phis(&g, 2), vec![vec![1, 0]], Some(vec![Mat::identity(2)])).unwrap();
        assert_eq!(stable_partition(&c).unwrap(), Some(vec![1]));
    }

    #[test]
    fn parameters_of_noncritical_refinements() {
        let g = group(3);
        let m = CrysModule::new(&g, phis(&g, 3), vec![vec![5, 2, -1]], None).unwrap();
        for w in all_perms(3) {
            let p = m.triangulation_params(&w).unwrap();
            let ws: Vec<Rat> = p.iter().map(|d| d.weight("s0").unwrap()).collect();
            assert_eq!(ws, vec![Rat::int(5), Rat::int(2), Rat::int(-1)]);
            for i in 0..3 {
                assert_eq!(p[i].div(&phis(&g, 3)[w[i]]).unwrap(), Character::x_pow(&g, &[[5, 2, -1][i]]).unwrap());
            }
        }
    }

    fn arb_flag(n: usize) -> impl Strategy<Value = Mat<Rat>> {
        proptest::collection::vec(-3i64..4, n * n)
            .prop_map(move |v| Mat::from_rows(v.chunks(n).map(|r| r.iter().map(|&x| Rat::int(x)).collect()).collect()).unwrap())
            .prop_filter("invertible", |m| !m.det().is_zero())
    }

    proptest! {
        #[test]
        fn jumps_agree_with_oracle(f in arb_flag(3)) {
            let jumps = [-2, 0, 3];
            for w in all_perms(3) {
                let j = flag_jumps(&w, &f, &jumps).unwrap();
                prop_assert_eq!(&j, &jumps_oracle(&w, &f, &jumps));
                let mut s = j.clone();
                s.sort();
                prop_assert_eq!(s, jumps.to_vec());
            }
        }
    }
}
