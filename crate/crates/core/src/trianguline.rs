//! Triangulated modules, the pullback/pushout weight operators, invertibility
//! gates, wall predicates and triangulation enumeration.
//!
//! `i` in `p_{i,σ}` counts parameters from the end: `p_{i,σ}^k` twists the last
//! `i` parameters by `x_σ^k`. Positions in reports are 1-based.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::characters::{tuple_regularity, weight_map, CharGroup, Character};
use crate::error::{Error, Result};
use crate::exactalg::Rat;
use crate::refinements::{all_perms, CrysModule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassTag {
    VeryGenericStronglyNonSplit,
    CrystabellineGeneric,
    CrystabellineNonCritical,
    /// Very generic head of length `m`, crystabelline non-critical tail.
    Mixed(usize),
    Plain,
}

/// Crystabelline data behind a tagged module: the parameters are those of
/// refinement `w` of `module`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrysData {
    pub module: CrysModule,
    pub w: Vec<usize>,
}

/// A parameter sequence `δ_1, …, δ_n` (sub to quotient) with extension flags.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangModule {
    params: Vec<Character>,
    step_nonsplit: Vec<bool>,
    graded_nonsplit: Vec<bool>,
    class_tag: ClassTag,
    crys: Option<CrysData>,
}

impl TriangModule {
    /// `step_nonsplit[k]` and `graded_nonsplit[k]` describe step `i = k + 2`.
    pub fn new(
        params: Vec<Character>,
        step_nonsplit: Vec<bool>,
        graded_nonsplit: Vec<bool>,
        class_tag: ClassTag,
        crys: Option<CrysData>,
    ) -> Result<TriangModule> {
        let n = params.len();
        if n == 0 {
            return Err(Error::EmptyTuple);
        }
        if step_nonsplit.len() != n - 1 || graded_nonsplit.len() != n - 1 {
            return Err(Error::Ragged("one extension flag per step i = 2..n".into()));
        }
        for p in &params[1..] {
            Character::combine(&params[0], p, 1)?;
        }
        if let Some(k) = graded_nonsplit.iter().zip(&step_nonsplit).position(|(g, s)| *g && !*s) {
            return Err(Error::InvalidModule(format!(
                "step {} is strongly non-split but split",
                k + 2
            )));
        }
        let m = TriangModule { params, step_nonsplit, graded_nonsplit, class_tag, crys };
        m.validate_tag()?;
        Ok(m)
    }

    /// Untagged module with the given flags.
    pub fn plain(params: Vec<Character>, step_nonsplit: Vec<bool>, graded_nonsplit: Vec<bool>) -> Result<TriangModule> {
        TriangModule::new(params, step_nonsplit, graded_nonsplit, ClassTag::Plain, None)
    }

    /// Split module `⊕ R(δ_i)`.
    pub fn split(params: Vec<Character>) -> Result<TriangModule> {
        let k = params.len().saturating_sub(1);
        TriangModule::plain(params, vec![false; k], vec![false; k])
    }

    /// Strongly non-split very generic module.
    pub fn very_generic(params: Vec<Character>) -> Result<TriangModule> {
        let k = params.len().saturating_sub(1);
        TriangModule::new(params, vec![true; k], vec![true; k], ClassTag::VeryGenericStronglyNonSplit, None)
    }

    /// The triangulation of `module` attached to refinement `w`.
    pub fn crystabelline(module: CrysModule, w: Vec<usize>) -> Result<TriangModule> {
        let params = module.triangulation_params(&w)?;
        let k = params.len() - 1;
        let tag = if module.is_noncritical()? {
            ClassTag::CrystabellineNonCritical
        } else {
            ClassTag::CrystabellineGeneric
        };
        TriangModule::new(params, vec![true; k], vec![true; k], tag, Some(CrysData { module, w }))
    }

    /// Very generic head followed by the triangulation `w` of a non-critical tail.
    pub fn mixed(head: Vec<Character>, tail: CrysModule, w: Vec<usize>) -> Result<TriangModule> {
        let m = head.len();
        let mut params = head;
        params.extend(tail.triangulation_params(&w)?);
        let k = params.len() - 1;
        TriangModule::new(params, vec![true; k], vec![true; k], ClassTag::Mixed(m), Some(CrysData { module: tail, w }))
    }

    fn validate_tag(&self) -> Result<()> {
        let n = self.rank();
        let bad = |s: String| Err(Error::InvalidModule(s));
        match self.class_tag {
            ClassTag::Plain => Ok(()),
            ClassTag::VeryGenericStronglyNonSplit => {
                if !self.graded_nonsplit.iter().all(|&g| g) {
                    return bad("very generic tag requires every step strongly non-split".into());
                }
                if !tuple_regularity(&self.params)?.in_tcirc {
                    return bad("very generic tag requires weight differences outside Z_{>=1}".into());
                }
                Ok(())
            }
            ClassTag::CrystabellineGeneric | ClassTag::CrystabellineNonCritical => {
                let Some(c) = &self.crys else {
                    return bad("crystabelline tag requires crystabelline data".into());
                };
                if c.module.rank() != n {
                    return bad("crystabelline data has the wrong rank".into());
                }
                if c.module.triangulation_params(&c.w)? != self.params {
                    return bad("parameters differ from the refinement's parameters".into());
                }
                if self.class_tag == ClassTag::CrystabellineNonCritical && !c.module.is_noncritical()? {
                    return bad("non-critical tag on a critical module".into());
                }
                Ok(())
            }
            ClassTag::Mixed(m) => {
                if m == 0 || m >= n {
                    return bad(format!("mixed head length {m} must lie in 1..{n}"));
                }
                let Some(c) = &self.crys else {
                    return bad("mixed tag requires crystabelline tail data".into());
                };
                if c.module.rank() != n - m || !c.module.is_noncritical()? {
                    return bad("mixed tail must be non-critical of rank n - m".into());
                }
                if c.module.triangulation_params(&c.w)? != self.params[m..] {
                    return bad("tail parameters differ from the refinement's parameters".into());
                }
                if !self.graded_nonsplit.iter().all(|&g| g) {
                    return bad("mixed tag requires every step strongly non-split".into());
                }
                let head = &self.params[..m];
                if head.iter().any(|d| d.weights().iter().any(|w| w.is_integer())) {
                    return bad("mixed head must have non-integer weights".into());
                }
                if !tuple_regularity(head)?.in_tcirc {
                    return bad("mixed head must have weight differences outside Z_{>=1}".into());
                }
                Ok(())
            }
        }
    }

    pub fn rank(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[Character] {
        &self.params
    }

    pub fn step_nonsplit(&self) -> &[bool] {
        &self.step_nonsplit
    }

    pub fn graded_nonsplit(&self) -> &[bool] {
        &self.graded_nonsplit
    }

    pub fn class_tag(&self) -> ClassTag {
        self.class_tag
    }

    pub fn crys(&self) -> Option<&CrysData> {
        self.crys.as_ref()
    }

    pub fn group(&self) -> &Arc<CharGroup> {
        self.params[0].group()
    }

    pub fn strongly_nonsplit(&self) -> bool {
        self.graded_nonsplit.iter().all(|&g| g)
    }

    /// σ-weights in parameter order.
    pub fn weights(&self, sigma: &str) -> Result<Vec<Rat>> {
        weight_map(&self.params, sigma)
    }

    pub fn uvals(&self) -> Vec<Rat> {
        self.params.iter().map(|d| d.uval()).collect()
    }

    fn check_i(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.rank() {
            return Err(Error::IndexOutOfRange { what: "pullback", index: i, n: self.rank() });
        }
        Ok(())
    }

    /// Twist positions `range` at embedding `s` by `x^k`, keeping flags and
    /// re-deriving the tag; a tag whose hypotheses fail becomes `Plain`.
    fn twisted(&self, range: std::ops::Range<usize>, s: usize, k: i64) -> TriangModule {
        if k == 0 || range.is_empty() {
            return self.clone();
        }
        let mut params = self.params.clone();
        for p in &mut params[range.clone()] {
            *p = p.twist_x(s, k);
        }
        let crys = self.crys.as_ref().and_then(|c| {
            let off = match self.class_tag {
                ClassTag::Mixed(m) => m,
                _ => 0,
            };
            let mut ws = c.module.weights().to_vec();
            for pos in range.clone() {
                if pos >= off {
                    ws[s][pos - off] += k;
                }
            }
            c.module.with_weights(ws).ok().map(|module| CrysData { module, w: c.w.clone() })
        });
        let tag = match self.class_tag {
            ClassTag::CrystabellineGeneric => ClassTag::Plain,
            t => t,
        };
        let candidate = TriangModule {
            params: params.clone(),
            step_nonsplit: self.step_nonsplit.clone(),
            graded_nonsplit: self.graded_nonsplit.clone(),
            class_tag: tag,
            crys,
        };
        if candidate.validate_tag().is_ok() {
            candidate
        } else {
            TriangModule { class_tag: ClassTag::Plain, crys: None, ..candidate }
        }
    }
}

/// `p_{i,σ}^k`: twist the last `i` parameters by `x_σ^k`. Negative `k` gives
/// the inverse operator `q_{i,σ}^{|k|}`.
pub fn pullback_p(d: &TriangModule, i: usize, sigma: &str, k: i64) -> Result<TriangModule> {
    d.check_i(i)?;
    let s = d.group().shape().index_of(sigma)?;
    let n = d.rank();
    Ok(d.twisted(n - i..n, s, k))
}

/// `ι_{i,σ}^k`: twist the first `n - i` parameters by `x_σ^{-k}`.
pub fn pushout_iota(d: &TriangModule, i: usize, sigma: &str, k: i64) -> Result<TriangModule> {
    d.check_i(i)?;
    let s = d.group().shape().index_of(sigma)?;
    let n = d.rank();
    Ok(d.twisted(0..n - i, s, -k))
}

/// Twist every parameter by one character.
pub fn global_twist(d: &TriangModule, chi: &Character) -> Result<Vec<Character>> {
    d.params.iter().map(|p| p.mul(chi)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateViolation {
    pub j: usize,
    pub l: usize,
    pub sigma: String,
    pub difference: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateReport {
    pub ok: bool,
    pub violations: Vec<GateViolation>,
}

/// True iff `wt_σ(δ_j/δ_l) ∉ {1, …, k_σ}` for all `j ≤ n-i < l` and all σ.
/// `k` is indexed by embedding.
pub fn invertibility_gate(d: &TriangModule, i: usize, k: &[i64]) -> Result<GateReport> {
    d.check_i(i)?;
    let sh = d.group().shape();
    if k.len() != sh.degree() {
        return Err(Error::Ragged("one multiplicity per embedding".into()));
    }
    let n = d.rank();
    let mut violations = Vec::new();
    for j in 0..n - i {
        for l in n - i..n {
            let r = d.params[j].div(&d.params[l])?;
            for (s, w) in r.weights().into_iter().enumerate() {
                if let Some(v) = w.to_i64() {
                    if 1 <= v && v <= k[s] {
                        violations.push(GateViolation {
                            j: j + 1,
                            l: l + 1,
                            sigma: sh.embeddings[s].clone(),
                            difference: w.clone(),
                        });
                    }
                }
            }
        }
    }
    Ok(GateReport { ok: violations.is_empty(), violations })
}

/// Integer interval `[a, b]` with `a ≤ 0 ≤ b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallInterval {
    pub a: i64,
    pub b: i64,
}

impl WallInterval {
    pub fn new(a: i64, b: i64) -> Result<WallInterval> {
        if a > 0 || b < 0 {
            return Err(Error::Parse(format!("wall interval [{a}, {b}] must contain 0")));
        }
        Ok(WallInterval { a, b })
    }

    /// `[0, k]` for `k ≥ 0`, `[k, 0]` for `k < 0`.
    pub fn for_shift(k: i64) -> WallInterval {
        if k >= 0 {
            WallInterval { a: 0, b: k }
        } else {
            WallInterval { a: k, b: 0 }
        }
    }
}

/// A collision `wt(δ_j) = wt(δ_l) + h`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallHit {
    pub j: usize,
    pub l: usize,
    pub h: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallReport {
    pub ok: bool,
    pub violations: Vec<WallHit>,
}

impl WallReport {
    fn from(violations: Vec<WallHit>) -> WallReport {
        WallReport { ok: violations.is_empty(), violations }
    }
}

/// `{wt(δ_j) : j ≤ n-i} ∩ {wt(δ_l) + h : l > n-i, h ∈ [a, b]} = ∅`, reporting
/// every colliding triple.
pub fn wall_member(weights: &[Rat], i: usize, iv: WallInterval) -> Result<WallReport> {
    let n = weights.len();
    if i == 0 || i > n {
        return Err(Error::IndexOutOfRange { what: "wall", index: i, n });
    }
    let mut hits = Vec::new();
    for j in 0..n - i {
        for l in n - i..n {
            if let Some(h) = (&weights[j] - &weights[l]).to_i64() {
                if iv.a <= h && h <= iv.b {
                    hits.push(WallHit { j: j + 1, l: l + 1, h, sigma: None });
                }
            }
        }
    }
    Ok(WallReport::from(hits))
}

/// The index set `I_σ` and multiplicities `k_{σ,i}` of a program at one embedding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramShape {
    pub sigma: String,
    /// Sorted, 1-based, within `1..=n`.
    pub indices: Vec<usize>,
    /// `mult[r]` is the multiplicity attached to `indices[r]`.
    pub mult: Vec<i64>,
}

/// Nested-quantifier membership condition for a program.
///
/// With `I_σ = {i_1 < … < i_d}`, `i_0 = 0`, `i_{d+1} = n`: for `0 ≤ m' < m ≤ d`,
/// positions `j ∈ [n+1-i_{m+1}, n+1-i_m)` and `l ∈ [n+1-i_{m'+1}, n+1-i_{m'})`
/// must satisfy `h_j ∉ {h_l ± a : 0 ≤ a ≤ Σ_{r=m'+1}^{m} k_{i_r}}` (sign `+`
/// for the program, `-` for its inverse).
pub fn wall_member_program(
    weights: &[(String, Vec<Rat>)],
    shapes: &[ProgramShape],
    negative: bool,
) -> Result<WallReport> {
    let mut hits = Vec::new();
    for sh in shapes {
        let h = &weights
            .iter()
            .find(|(s, _)| *s == sh.sigma)
            .ok_or_else(|| Error::UnknownEmbedding(sh.sigma.clone()))?
            .1;
        let n = h.len();
        if sh.indices.len() != sh.mult.len() {
            return Err(Error::Ragged("one multiplicity per index".into()));
        }
        if sh.indices.iter().any(|&i| i == 0 || i > n) || sh.indices.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Parse(format!("I_{} must be a sorted subset of 1..={n}", sh.sigma)));
        }
        if sh.mult.iter().any(|&k| k < 0) {
            return Err(Error::Parse("multiplicities must be nonnegative".into()));
        }
        let d = sh.indices.len();
        let idx = |m: usize| -> usize {
            if m == 0 {
                0
            } else if m == d + 1 {
                n
            } else {
                sh.indices[m - 1]
            }
        };
        for m in 0..=d {
            for j in (n + 1 - idx(m + 1))..(n + 1 - idx(m)) {
                for mp in 0..m {
                    let total: i64 = (mp + 1..=m).map(|r| sh.mult[r - 1]).sum();
                    for l in (n + 1 - idx(mp + 1))..(n + 1 - idx(mp)) {
                        let diff = &h[j - 1] - &h[l - 1];
                        if let Some(v) = diff.to_i64() {
                            let a = if negative { -v } else { v };
                            if 0 <= a && a <= total {
                                hits.push(WallHit { j, l, h: v, sigma: Some(sh.sigma.clone()) });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(WallReport::from(hits))
}

/// One step `p_{i,σ}^k` (`k < 0` means `q_{i,σ}^{|k|}`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub i: usize,
    pub sigma: String,
    pub k: i64,
}

impl Step {
    pub fn new(i: usize, sigma: &str, k: i64) -> Step {
        Step { i, sigma: sigma.to_string(), k }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProgramMode {
    #[default]
    Unchecked,
    /// Each step must pass the invertibility gate.
    Strict,
    /// Each step must keep the module off the walls for its shift range.
    Substack,
}

/// Compose the steps of a program.
pub fn apply_program(d: &TriangModule, program: &[Step], mode: ProgramMode) -> Result<TriangModule> {
    let mut cur = d.clone();
    let deg = d.group().shape().degree();
    for (idx, st) in program.iter().enumerate() {
        cur.check_i(st.i)?;
        let s = cur.group().shape().index_of(&st.sigma)?;
        let next = pullback_p(&cur, st.i, &st.sigma, st.k)?;
        match mode {
            ProgramMode::Unchecked => {}
            ProgramMode::Strict => {
                let mut k = vec![0; deg];
                k[s] = st.k.abs();
                let src = if st.k >= 0 { &cur } else { &next };
                let g = invertibility_gate(src, st.i, &k)?;
                if !g.ok {
                    return Err(Error::GateViolation {
                        step: idx + 1,
                        detail: serde_json::to_string(&g.violations).unwrap_or_default(),
                    });
                }
            }
            ProgramMode::Substack => {
                let w = wall_member(&cur.weights(&st.sigma)?, st.i, WallInterval::for_shift(st.k))?;
                if !w.ok {
                    return Err(Error::WallViolation(format!(
                        "step {}: {}",
                        idx + 1,
                        serde_json::to_string(&w.violations).unwrap_or_default()
                    )));
                }
            }
        }
        cur = next;
    }
    Ok(cur)
}

/// Per-position shift of σ-weights produced by a program: position `m`
/// (1-based) moves by the sum of `k` over steps with `m > n - i`.
pub fn program_shift(n: usize, program: &[Step], sigma: &str) -> Vec<i64> {
    (1..=n)
        .map(|m| program.iter().filter(|s| s.sigma == sigma && m + s.i > n).map(|s| s.k).sum())
        .collect()
}

/// The inverse program: reversed order, negated multiplicities.
pub fn inverse_program(program: &[Step]) -> Vec<Step> {
    program.iter().rev().map(|s| Step { k: -s.k, ..s.clone() }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Triangulation {
    /// 0-based permutation.
    pub w: Vec<usize>,
    pub params: Vec<Character>,
}

/// All triangulations predicted by the classification attached to the tag.
pub fn enumerate_triangulations(d: &TriangModule) -> Result<Vec<Triangulation>> {
    let n = d.rank();
    match d.class_tag {
        ClassTag::Plain => Err(Error::PlainTag),
        ClassTag::VeryGenericStronglyNonSplit => {
            Ok(vec![Triangulation { w: (0..n).collect(), params: d.params.clone() }])
        }
        ClassTag::CrystabellineGeneric | ClassTag::CrystabellineNonCritical => {
            let c = d.crys.as_ref().ok_or(Error::PlainTag)?;
            all_perms(n)
                .into_iter()
                .map(|w| Ok(Triangulation { params: c.module.triangulation_params(&w)?, w }))
                .collect()
        }
        ClassTag::Mixed(m) => {
            let c = d.crys.as_ref().ok_or(Error::PlainTag)?;
            all_perms(n - m)
                .into_iter()
                .map(|u| {
                    let mut params = d.params[..m].to_vec();
                    params.extend(c.module.triangulation_params(&u)?);
                    let w = (0..m).chain(u.iter().map(|x| x + m)).collect();
                    Ok(Triangulation { w, params })
                })
                .collect()
        }
    }
}

/// True iff every triangulation induces the same σ-weight sequence for each
/// listed σ.
pub fn weight_uniform_check(triangulations: &[Vec<Character>], sigmas: &[String]) -> Result<bool> {
    let Some(first) = triangulations.first() else {
        return Err(Error::EmptyTuple);
    };
    if triangulations.iter().any(|t| t.len() != first.len()) {
        return Err(Error::Ragged("triangulations of different lengths".into()));
    }
    for s in sigmas {
        let w0 = weight_map(first, s)?;
        for t in &triangulations[1..] {
            if weight_map(t, s)? != w0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
