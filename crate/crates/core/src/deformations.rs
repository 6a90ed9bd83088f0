//! First-order deformations of crystabelline modules over `Q_p` through their
//! κ-coordinates, and the weight bookkeeping of translation.
//!
//! A class is recorded by one direction `ψ_i ∈ Hom(Q_p^×, E) ≅ E²` per
//! parameter, stored as `(ψ_i(p), weight part)`. Permutations are 0-based and
//! act on the left: `(wλ)_i = λ_{w⁻¹(i)}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactalg::{DualNum, Mat, Poly, Rat, Scalar, Subspace};
use crate::refinements::{all_perms, is_perm};
use crate::senlattice::{modify_down, modify_up, split_sen_poly, SenLattice};
use crate::trianguline::{apply_program, program_shift, ClassTag, ProgramMode, Step, TriangModule};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeformDirection {
    pub at_p: Rat,
    pub wtd: Rat,
}

impl DeformDirection {
    pub fn new(at_p: Rat, wtd: Rat) -> DeformDirection {
        DeformDirection { at_p, wtd }
    }

    pub fn zero() -> DeformDirection {
        DeformDirection::new(Rat::zero(), Rat::zero())
    }

    fn add(&self, o: &DeformDirection) -> DeformDirection {
        DeformDirection::new(&self.at_p + &o.at_p, &self.wtd + &o.wtd)
    }

    fn scale(&self, c: &Rat) -> DeformDirection {
        DeformDirection::new(&self.at_p * c, &self.wtd * c)
    }
}

/// An extension class of `D` by itself modulo the classes with trivial
/// κ-image, for the refinement `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtClassModel {
    base: TriangModule,
    w: Vec<usize>,
    psis: Vec<DeformDirection>,
}

fn require_qp(d: &TriangModule) -> Result<()> {
    let s = d.group().shape();
    if s.degree() != 1 || s.e != 1 || s.f != 1 {
        return Err(Error::ShapeMismatch("deformations are defined over Q_p only".into()));
    }
    Ok(())
}

fn require_nc(d: &TriangModule) -> Result<()> {
    if d.class_tag() != ClassTag::CrystabellineNonCritical {
        return Err(Error::WrongClass("non-critical crystabelline module required".into()));
    }
    Ok(())
}

impl ExtClassModel {
    pub fn new(base: TriangModule, w: Vec<usize>, psis: Vec<DeformDirection>) -> Result<ExtClassModel> {
        require_qp(&base)?;
        require_nc(&base)?;
        let n = base.rank();
        if w.len() != n || !is_perm(&w) {
            return Err(Error::Ragged("refinement must be a permutation of the rank".into()));
        }
        if psis.len() != n {
            return Err(Error::Ragged(format!("{} directions for rank {n}", psis.len())));
        }
        Ok(ExtClassModel { base, w, psis })
    }

    pub fn zero(base: TriangModule, w: Vec<usize>) -> Result<ExtClassModel> {
        let n = base.rank();
        ExtClassModel::new(base, w, vec![DeformDirection::zero(); n])
    }

    pub fn base(&self) -> &TriangModule {
        &self.base
    }

    pub fn w(&self) -> &[usize] {
        &self.w
    }

    pub fn psis(&self) -> &[DeformDirection] {
        &self.psis
    }

    /// `κ_w` as a vector `(ψ_1(p), wt ψ_1, …, ψ_n(p), wt ψ_n)`.
    pub fn kappa(&self) -> Vec<Rat> {
        self.psis.iter().flat_map(|d| [d.at_p.clone(), d.wtd.clone()]).collect()
    }

    pub fn neg(&self) -> ExtClassModel {
        self.scale(&Rat::int(-1))
    }

    pub fn scale(&self, c: &Rat) -> ExtClassModel {
        ExtClassModel { psis: self.psis.iter().map(|d| d.scale(c)).collect(), ..self.clone() }
    }

    /// σ-weights of the triangulation attached to `w`.
    pub fn hodge(&self) -> Result<Vec<Rat>> {
        let c = self.base.crys().ok_or(Error::PlainTag)?;
        Ok(c.module.induced_weights(&self.w)?[0].iter().map(|&h| Rat::int(h)).collect())
    }
}

/// Baer sum: directions add.
pub fn baer_sum(c1: &ExtClassModel, c2: &ExtClassModel) -> Result<ExtClassModel> {
    if c1.base != c2.base || c1.w != c2.w {
        return Err(Error::Mismatch("Baer sum needs the same base and refinement".into()));
    }
    let psis = c1.psis.iter().zip(&c2.psis).map(|(a, b)| a.add(b)).collect();
    Ok(ExtClassModel { psis, ..c1.clone() })
}

/// `∏ (T - (h_i + wt(ψ_i) ε))`.
pub fn sen_poly_deform(c: &ExtClassModel) -> Result<Poly<DualNum>> {
    let roots = deformed_roots(c)?;
    Ok(Poly::from_roots(&roots))
}

fn deformed_roots(c: &ExtClassModel) -> Result<Vec<DualNum>> {
    let h = c.hodge()?;
    if !h.windows(2).all(|p| p[0] > p[1]) {
        return Err(Error::NonRegular(format!("weights {h:?}")));
    }
    Ok(h.into_iter().zip(&c.psis).map(|(h, d)| DualNum::new(h, d.wtd.clone())).collect())
}

/// First `m` (1-based) with `h_m ≤ h_{m+1}`.
pub fn first_gap_violation(h: &[Rat]) -> Option<usize> {
    h.windows(2).position(|p| p[0] <= p[1]).map(|m| m + 1)
}

fn regularity_lost(h: &[Rat]) -> Result<()> {
    match first_gap_violation(h) {
        Some(m) => Err(Error::RegularityLost {
            position: m,
            next: m + 1,
            left: h[m - 1].to_string(),
            right: h[m].to_string(),
        }),
        None => Ok(()),
    }
}

/// Pull the class back along a program: the base moves, κ stays.
pub fn pullback_ext(c: &ExtClassModel, program: &[Step]) -> Result<ExtClassModel> {
    let n = c.base.rank();
    let h = c.hodge()?;
    let shift = program_shift(n, program, &c.base.group().shape().embeddings[0]);
    let h2: Vec<Rat> = h.iter().zip(&shift).map(|(a, &k)| a + &Rat::int(k)).collect();
    regularity_lost(&h2)?;
    let base = apply_program(&c.base, program, ProgramMode::Substack)?;
    if base.class_tag() != ClassTag::CrystabellineNonCritical {
        return Err(Error::WrongClass("pulled-back module is no longer non-critical".into()));
    }
    ExtClassModel::new(base, c.w.clone(), c.psis.clone())
}

/// Universal extension over the span of independent classes.
#[derive(Clone, Debug, PartialEq)]
pub struct UniversalExt {
    classes: Vec<ExtClassModel>,
}

impl UniversalExt {
    pub fn dim(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[ExtClassModel] {
        &self.classes
    }

    /// κ-coordinates of the blocks, one row per basis class.
    pub fn blocks(&self) -> Vec<Vec<Rat>> {
        self.classes.iter().map(|c| c.kappa()).collect()
    }

    /// Pullback along `α_e` for `e = Σ e_i c_i`.
    pub fn pullback_along(&self, e: &[Rat]) -> Result<ExtClassModel> {
        if e.len() != self.dim() {
            return Err(Error::Ragged(format!("{} coordinates for dimension {}", e.len(), self.dim())));
        }
        let mut acc = ExtClassModel::zero(self.classes[0].base.clone(), self.classes[0].w.clone())?;
        for (c, x) in self.classes.iter().zip(e) {
            acc = baer_sum(&acc, &c.scale(x))?;
        }
        Ok(acc)
    }

    /// Coordinates of a class in the span.
    pub fn coordinates_of(&self, c: &ExtClassModel) -> Result<Vec<Rat>> {
        let b = Mat::from_cols(2 * c.base.rank(), &self.blocks());
        let t = Mat::from_cols(b.rows(), &[c.kappa()]);
        Ok(b.solve_in_span(&t)?.col(0))
    }
}

pub fn universal_extension(classes: &[ExtClassModel]) -> Result<UniversalExt> {
    let Some(first) = classes.first() else {
        return Err(Error::EmptyTuple);
    };
    if classes.iter().any(|c| c.base != first.base || c.w != first.w) {
        return Err(Error::Mismatch("classes must share base and refinement".into()));
    }
    let kappas: Vec<Vec<Rat>> = classes.iter().map(|c| c.kappa()).collect();
    if Subspace::span(kappas[0].len(), &kappas).dim() != classes.len() {
        return Err(Error::DependentBasis);
    }
    Ok(UniversalExt { classes: classes.to_vec() })
}

/// `θ = (0, -1, …, 1-n)` and `ρ = ((n-1)/2, …, (1-n)/2)`.
pub fn theta_rho(n: usize) -> (Vec<Rat>, Vec<Rat>) {
    let n = n as i64;
    let theta = (0..n).map(|i| Rat::int(-i)).collect();
    let rho = (0..n).map(|i| Rat::new(n - 1 - 2 * i, 2)).collect();
    (theta, rho)
}

/// Left action `(wλ)_i = λ_{w⁻¹(i)}`.
pub fn act(w: &[usize], v: &[Rat]) -> Result<Vec<Rat>> {
    if w.len() != v.len() || !is_perm(w) {
        return Err(Error::Ragged("permutation and weight must have the same length".into()));
    }
    let mut out = vec![Rat::zero(); v.len()];
    for (i, &wi) in w.iter().enumerate() {
        out[wi] = v[i].clone();
    }
    Ok(out)
}

fn add(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `(w·λ, w‾·λ) = (w(λ+ρ)-ρ, w(λ-ρ)+ρ)`.
pub fn dot_actions(w: &[usize], lambda: &[Rat]) -> Result<(Vec<Rat>, Vec<Rat>)> {
    let (_, rho) = theta_rho(lambda.len());
    let dot = sub(&act(w, &add(lambda, &rho))?, &rho);
    let bar = add(&act(w, &sub(lambda, &rho))?, &rho);
    Ok((dot, bar))
}

pub fn longest(n: usize) -> Vec<usize> {
    (0..n).rev().collect()
}

/// `λ = h - θ`.
pub fn lambda_of(h: &[Rat]) -> Vec<Rat> {
    sub(h, &theta_rho(h.len()).0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibilityFailure {
    LengthMismatch,
    /// `-λ` has a nontrivial stabilizer for `w‾·`, i.e. `λ+ρ` repeats an entry.
    SingularSource,
    SingularTarget,
    NonIntegralDifference,
    DifferentChamber,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub reasons: Vec<AdmissibilityFailure>,
}

/// Strict order pattern of `v`, or `None` on a repeated entry.
fn chamber(v: &[Rat]) -> Option<Vec<usize>> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].cmp(&v[a]));
    if idx.windows(2).any(|p| v[p[0]] == v[p[1]]) {
        return None;
    }
    Some(idx)
}

/// Conditions for the translation from `λ` to `λ'` to be an equivalence.
pub fn translation_admissible(lambda: &[Rat], lambda2: &[Rat]) -> Admissibility {
    use AdmissibilityFailure::*;
    if lambda.len() != lambda2.len() {
        return Admissibility { admissible: false, reasons: vec![LengthMismatch] };
    }
    let (_, rho) = theta_rho(lambda.len());
    let (c1, c2) = (chamber(&add(lambda, &rho)), chamber(&add(lambda2, &rho)));
    let mut reasons = Vec::new();
    if c1.is_none() {
        reasons.push(SingularSource);
    }
    if c2.is_none() {
        reasons.push(SingularTarget);
    }
    if !sub(lambda2, lambda).iter().all(|x| x.is_integer()) {
        reasons.push(NonIntegralDifference);
    }
    if c1.is_some() && c2.is_some() && c1 != c2 {
        reasons.push(DifferentChamber);
    }
    Admissibility { admissible: reasons.is_empty(), reasons }
}

/// `(Σ_{i≥1} k_i, Σ_{i≥2} k_i, …, k_n)`.
pub fn translation_diff(k: &[i64]) -> Vec<i64> {
    let mut out = vec![0; k.len()];
    let mut acc = 0;
    for i in (0..k.len()).rev() {
        acc += k[i];
        out[i] = acc;
    }
    out
}

/// `k_i`: total multiplicity of `p_i` in a single-embedding program.
pub fn program_multiplicities(n: usize, program: &[Step]) -> Result<Vec<i64>> {
    let mut k = vec![0; n];
    for s in program {
        if s.i == 0 || s.i > n {
            return Err(Error::IndexOutOfRange { what: "step", index: s.i, n });
        }
        k[s.i - 1] += s.k;
    }
    Ok(k)
}

/// Run the lattice modification of each step on the deformed Sen operator.
fn modified_sen_poly(roots: &[DualNum], program: &[Step]) -> Result<Poly<DualNum>> {
    let n = roots.len();
    let mut theta = Mat::diag(roots);
    for r in 0..n {
        for c in r + 1..n {
            theta.set(r, c, DualNum::one());
        }
    }
    let mut lat = SenLattice::new(theta)?;
    let mut cur = roots.to_vec();
    for s in program {
        for _ in 0..s.k.unsigned_abs() {
            let subset: Vec<usize> = (n - s.i..n).collect();
            // Eigenvalues of the new block-diagonal operator, in block order.
            let f = split_sen_poly(&lat, &cur, &subset)?;
            let m = if s.k > 0 { modify_down(&lat, &f)? } else { modify_up(&lat, &f)? };
            let step = DualNum::from_int(s.k.signum());
            let mut next: Vec<DualNum> = cur[..n - s.i].to_vec();
            next.extend(cur[n - s.i..].iter().map(|r| r.clone() + step.clone()));
            lat = m.lattice;
            cur = next;
        }
    }
    Ok(lat.charpoly())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntertwineReport {
    pub h: Vec<Rat>,
    pub h_prime: Vec<Rat>,
    pub lambda: Vec<Rat>,
    pub lambda_prime: Vec<Rat>,
    pub k: Vec<i64>,
    pub diff: Vec<i64>,
    pub refinements: usize,
    pub samples: usize,
    /// `κ` after pullback equals `κ` before, for every refinement and sample.
    pub kappa_preserved: bool,
    /// `λ' = λ + reversal(diff)`.
    pub weights_consistent: bool,
    pub admissibility: Admissibility,
    /// Lattice modification of the deformed Sen operator matches the
    /// deformed Sen polynomial of the pulled-back class.
    pub sen_poly_consistent: bool,
    /// The span of sample κ-vectors is carried to itself.
    pub kernel_correspondence: bool,
    pub passed: bool,
}

/// κ-level commuting square between pullback along a program and translation.
pub fn intertwine_check(d: &TriangModule, program: &[Step], samples: &[Vec<DeformDirection>]) -> Result<IntertwineReport> {
    require_qp(d)?;
    require_nc(d)?;
    let n = d.rank();
    let sigma = d.group().shape().embeddings[0].clone();
    let c = d.crys().ok_or(Error::PlainTag)?;
    let h: Vec<Rat> = c.module.weights()[0].iter().map(|&x| Rat::int(x)).collect();
    let shift = program_shift(n, program, &sigma);
    let h_prime: Vec<Rat> = h.iter().zip(&shift).map(|(a, &k)| a + &Rat::int(k)).collect();
    regularity_lost(&h_prime)?;
    let pulled = apply_program(d, program, ProgramMode::Substack)?;
    require_nc(&pulled)?;

    let k = program_multiplicities(n, program)?;
    let diff = translation_diff(&k);
    let (lambda, lambda_prime) = (lambda_of(&h), lambda_of(&h_prime));
    let rev: Vec<Rat> = diff.iter().rev().map(|&x| Rat::int(x)).collect();
    let weights_consistent = add(&lambda, &rev) == lambda_prime;
    let admissibility = translation_admissible(&lambda, &lambda_prime);

    let mut kappa_preserved = true;
    let mut sen_poly_consistent = true;
    let mut kernel_correspondence = true;
    let perms = all_perms(n);
    for w in &perms {
        let mut before = Vec::new();
        let mut after = Vec::new();
        for psis in samples {
            let cls = ExtClassModel::new(d.clone(), w.clone(), psis.clone())?;
            let pc = ExtClassModel::new(pulled.clone(), w.clone(), psis.clone())?;
            kappa_preserved &= pullback_ext(&cls, program)? == pc && pc.kappa() == cls.kappa();
            let modified = modified_sen_poly(&deformed_roots(&cls)?, program)?;
            sen_poly_consistent &= modified == sen_poly_deform(&pc)?;
            before.push(cls.kappa());
            after.push(pc.kappa());
        }
        if !samples.is_empty() {
            kernel_correspondence &= Subspace::span(2 * n, &before) == Subspace::span(2 * n, &after);
        }
    }
    let passed = kappa_preserved && weights_consistent && admissibility.admissible && sen_poly_consistent && kernel_correspondence;
    Ok(IntertwineReport {
        h,
        h_prime,
        lambda,
        lambda_prime,
        k,
        diff,
        refinements: perms.len(),
        samples: samples.len(),
        kappa_preserved,
        weights_consistent,
        admissibility,
        sen_poly_consistent,
        kernel_correspondence,
        passed,
    })
}
