//! Continuous characters `K^× → E^×` as formal group elements.
//!
//! A character is an integer combination of generators. Built-in generators are
//! `x.<σ>` (the embedding σ, weight 1 at σ, valuation `1/e` at the uniformizer)
//! and `abs` (the norm `|·|_K`, weight 0, valuation `-f`). The label `eps` is an
//! alias for the cyclotomic character `abs · ∏_σ x.σ`. Further generators are
//! declared with their weights and valuation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactalg::Rat;

/// `K` through its ramification index, inertia degree and embeddings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldShape {
    pub e: u32,
    pub f: u32,
    pub embeddings: Vec<String>,
}

impl FieldShape {
    pub fn new(e: u32, f: u32, embeddings: Vec<String>) -> Result<FieldShape> {
        if e == 0 || f == 0 {
            return Err(Error::InvalidModule("e and f must be positive".into()));
        }
        if embeddings.len() != (e * f) as usize {
            return Err(Error::InvalidModule(format!(
                "{} embeddings listed but [K:Q_p] = {}",
                embeddings.len(),
                e * f
            )));
        }
        let mut seen = embeddings.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != embeddings.len() || embeddings.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidModule("embedding labels must be distinct and nonempty".into()));
        }
        Ok(FieldShape { e, f, embeddings })
    }

    /// `Q_p` with its single embedding `s0`.
    pub fn qp() -> FieldShape {
        FieldShape { e: 1, f: 1, embeddings: vec!["s0".into()] }
    }

    /// Labels `s0, s1, …` for a field with the given `e`, `f`.
    pub fn standard(e: u32, f: u32) -> FieldShape {
        FieldShape { e, f, embeddings: (0..e * f).map(|i| format!("s{i}")).collect() }
    }

    pub fn degree(&self) -> usize {
        (self.e * self.f) as usize
    }

    pub fn index_of(&self, sigma: &str) -> Result<usize> {
        self.embeddings
            .iter()
            .position(|s| s == sigma)
            .ok_or_else(|| Error::UnknownEmbedding(sigma.to_string()))
    }
}

/// Invariants of a declared generator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorDecl {
    #[serde(default)]
    pub weights: BTreeMap<String, Rat>,
    pub uval: Rat,
    /// Declared to take unit values at the uniformizer.
    #[serde(default)]
    pub unit: bool,
}

/// The character group of a fixed field: its shape plus declared generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharGroup {
    shape: FieldShape,
    decls: BTreeMap<String, GeneratorDecl>,
}

impl CharGroup {
    pub fn new(shape: FieldShape) -> Arc<CharGroup> {
        Arc::new(CharGroup { shape, decls: BTreeMap::new() })
    }

    pub fn with_generators(
        shape: FieldShape,
        decls: BTreeMap<String, GeneratorDecl>,
    ) -> Result<Arc<CharGroup>> {
        for (label, d) in &decls {
            if label.is_empty() || label.starts_with("x.") || label == "abs" || label == "eps" {
                return Err(Error::Parse(format!("reserved generator label {label:?}")));
            }
            for s in d.weights.keys() {
                shape.index_of(s)?;
            }
            if d.unit && !d.uval.is_zero() {
                return Err(Error::InvalidModule(format!(
                    "generator {label:?} is declared a unit but has valuation {}",
                    d.uval
                )));
            }
        }
        Ok(Arc::new(CharGroup { shape, decls }))
    }

    pub fn shape(&self) -> &FieldShape {
        &self.shape
    }

    pub fn decls(&self) -> &BTreeMap<String, GeneratorDecl> {
        &self.decls
    }

    fn parse_label(&self, label: &str) -> Result<Gen> {
        if let Some(s) = label.strip_prefix("x.") {
            return Ok(Gen::X(self.shape.index_of(s)?));
        }
        if label == "abs" {
            return Ok(Gen::Abs);
        }
        if self.decls.contains_key(label) {
            return Ok(Gen::User(label.to_string()));
        }
        Err(Error::UnknownGenerator(label.to_string()))
    }

    fn label(&self, g: &Gen) -> String {
        match g {
            Gen::X(i) => format!("x.{}", self.shape.embeddings[*i]),
            Gen::Abs => "abs".into(),
            Gen::User(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Gen {
    X(usize),
    Abs,
    User(String),
}

/// A character as a formal product of generators.
///
/// Equality compares exponent vectors, never invariants: two smooth
/// characters with equal weights and valuation are still distinct.
#[derive(Clone)]
pub struct Character {
    group: Arc<CharGroup>,
    exps: BTreeMap<Gen, i64>,
}

impl PartialEq for Character {
    fn eq(&self, o: &Character) -> bool {
        self.exps == o.exps && (Arc::ptr_eq(&self.group, &o.group) || self.group == o.group)
    }
}

impl Eq for Character {}

impl Character {
    pub fn trivial(group: &Arc<CharGroup>) -> Character {
        Character { group: group.clone(), exps: BTreeMap::new() }
    }

    fn single(group: &Arc<CharGroup>, g: Gen, k: i64) -> Character {
        Character::trivial(group).with(g, k)
    }

    fn with(mut self, g: Gen, k: i64) -> Character {
        let e = self.exps.entry(g.clone()).or_insert(0);
        *e += k;
        if *e == 0 {
            self.exps.remove(&g);
        }
        self
    }

    /// `x_σ`.
    pub fn x(group: &Arc<CharGroup>, sigma: &str) -> Result<Character> {
        Ok(Character::single(group, Gen::X(group.shape.index_of(sigma)?), 1))
    }

    /// `x^k = ∏_σ x_σ^{k_σ}` for `k` given in embedding order.
    pub fn x_pow(group: &Arc<CharGroup>, k: &[i64]) -> Result<Character> {
        if k.len() != group.shape.degree() {
            return Err(Error::Ragged("x^k needs one exponent per embedding".into()));
        }
        Ok(k.iter()
            .enumerate()
            .fold(Character::trivial(group), |c, (i, &ki)| c.with(Gen::X(i), ki)))
    }

    pub fn abs(group: &Arc<CharGroup>) -> Character {
        Character::single(group, Gen::Abs, 1)
    }

    /// The cyclotomic character `N|N|_p = abs · ∏_σ x_σ`.
    pub fn eps(group: &Arc<CharGroup>) -> Character {
        (0..group.shape.degree()).fold(Character::abs(group), |c, i| c.with(Gen::X(i), 1))
    }

    /// A declared generator, or a built-in one by label.
    pub fn generator(group: &Arc<CharGroup>, label: &str) -> Result<Character> {
        if label == "eps" {
            return Ok(Character::eps(group));
        }
        Ok(Character::single(group, group.parse_label(label)?, 1))
    }

    /// Build from a label → exponent map (`eps` expands to its definition).
    pub fn from_exponents(group: &Arc<CharGroup>, gens: &BTreeMap<String, i64>) -> Result<Character> {
        let mut c = Character::trivial(group);
        for (label, &k) in gens {
            c = c.mul(&Character::generator(group, label)?.pow(k))?;
        }
        Ok(c)
    }

    pub fn group(&self) -> &Arc<CharGroup> {
        &self.group
    }

    pub fn shape(&self) -> &FieldShape {
        &self.group.shape
    }

    /// Exponents keyed by generator label.
    pub fn exponents(&self) -> BTreeMap<String, i64> {
        self.exps.iter().map(|(g, k)| (self.group.label(g), *k)).collect()
    }

    pub fn is_trivial(&self) -> bool {
        self.exps.is_empty()
    }

    /// `a · b^sign`.
    pub fn combine(a: &Character, b: &Character, sign: i64) -> Result<Character> {
        if !(Arc::ptr_eq(&a.group, &b.group) || a.group == b.group) {
            return Err(Error::ShapeMismatch("characters over different fields".into()));
        }
        Ok(b.exps.iter().fold(a.clone(), |c, (g, k)| c.with(g.clone(), sign * k)))
    }

    pub fn mul(&self, o: &Character) -> Result<Character> {
        Character::combine(self, o, 1)
    }

    pub fn div(&self, o: &Character) -> Result<Character> {
        Character::combine(self, o, -1)
    }

    pub fn pow(&self, k: i64) -> Character {
        let exps = if k == 0 {
            BTreeMap::new()
        } else {
            self.exps.iter().map(|(g, e)| (g.clone(), e * k)).collect()
        };
        Character { group: self.group.clone(), exps }
    }

    pub fn inv(&self) -> Character {
        self.pow(-1)
    }

    /// Twist by `x_σ^k` given the embedding index.
    pub fn twist_x(&self, sigma_idx: usize, k: i64) -> Character {
        self.clone().with(Gen::X(sigma_idx), k)
    }

    /// `wt_σ` by embedding index.
    pub fn weight_at(&self, idx: usize) -> Rat {
        let sigma = &self.group.shape.embeddings[idx];
        self.exps
            .iter()
            .map(|(g, k)| match g {
                Gen::X(i) if *i == idx => Rat::int(*k),
                Gen::X(_) | Gen::Abs => Rat::zero(),
                Gen::User(l) => {
                    let w = self.group.decls[l].weights.get(sigma).cloned().unwrap_or_default();
                    w * Rat::int(*k)
                }
            })
            .sum()
    }

    pub fn weight(&self, sigma: &str) -> Result<Rat> {
        Ok(self.weight_at(self.group.shape.index_of(sigma)?))
    }

    /// Weights in embedding order.
    pub fn weights(&self) -> Vec<Rat> {
        (0..self.group.shape.degree()).map(|i| self.weight_at(i)).collect()
    }

    /// `v_p(δ(π_K))`.
    pub fn uval(&self) -> Rat {
        let sh = &self.group.shape;
        self.exps
            .iter()
            .map(|(g, k)| {
                let v = match g {
                    Gen::X(_) => Rat::new(1, sh.e as i64),
                    Gen::Abs => Rat::int(-(sh.f as i64)),
                    Gen::User(l) => self.group.decls[l].uval.clone(),
                };
                v * Rat::int(*k)
            })
            .sum()
    }

    fn x_exponents(&self) -> Vec<i64> {
        (0..self.group.shape.degree())
            .map(|i| self.exps.get(&Gen::X(i)).copied().unwrap_or(0))
            .collect()
    }

    fn only_x_and_abs(&self) -> bool {
        self.exps.keys().all(|g| !matches!(g, Gen::User(_)))
    }

    fn abs_exponent(&self) -> i64 {
        self.exps.get(&Gen::Abs).copied().unwrap_or(0)
    }

    pub fn to_literal(&self) -> CharLiteral {
        let sh = &self.group.shape;
        CharLiteral {
            gens: self.exponents(),
            weights: Some(
                sh.embeddings.iter().cloned().zip(self.weights()).collect(),
            ),
            uval: Some(self.uval()),
        }
    }
}

impl fmt::Display for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exps.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .exps
            .iter()
            .map(|(g, k)| {
                let l = self.group.label(g);
                if *k == 1 {
                    l
                } else {
                    format!("{l}^{k}")
                }
            })
            .collect();
        write!(f, "{}", parts.join("·"))
    }
}

impl fmt::Debug for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Character {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_literal().serialize(s)
    }
}

/// JSON form of a character. `weights` and `uval` are optional on input and,
/// when present, must match the values implied by `gens`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharLiteral {
    pub gens: BTreeMap<String, i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<String, Rat>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uval: Option<Rat>,
}

impl CharLiteral {
    pub fn resolve(&self, group: &Arc<CharGroup>) -> Result<Character> {
        let c = Character::from_exponents(group, &self.gens)?;
        if let Some(ws) = &self.weights {
            for (s, w) in ws {
                let actual = c.weight(s)?;
                if actual != *w {
                    return Err(Error::Parse(format!(
                        "character {c}: declared weight {w} at {s} but generators give {actual}"
                    )));
                }
            }
        }
        if let Some(u) = &self.uval {
            if c.uval() != *u {
                return Err(Error::Parse(format!(
                    "character {c}: declared uval {u} but generators give {}",
                    c.uval()
                )));
            }
        }
        Ok(c)
    }
}

/// Dimensions of `H^0, H^1, H^2` of a rank-one module.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohProfile {
    pub h0: u32,
    pub h1: u32,
    pub h2: u32,
    /// The exponent vector `k` (per embedding) in `x^{-k}` or `eps·x^k`.
    pub witness: Option<BTreeMap<String, i64>>,
}

/// Rank-one cohomology: `H^0 ≠ 0` exactly for `x^{-k}`, `H^2 ≠ 0` exactly for
/// `eps·x^k` (`k ∈ N^Σ`), and `h1 = [K:Q_p] + [h0 + h2 > 0]`.
pub fn classify_rank1(delta: &Character) -> CohProfile {
    let sh = delta.shape();
    let xs = delta.x_exponents();
    let pure = delta.only_x_and_abs();
    let abs = delta.abs_exponent();
    let labelled = |k: Vec<i64>| -> BTreeMap<String, i64> {
        sh.embeddings.iter().cloned().zip(k).collect()
    };
    let (mut h0, mut h2, mut witness) = (0, 0, None);
    if pure && abs == 0 && xs.iter().all(|&k| k <= 0) {
        h0 = 1;
        witness = Some(labelled(xs.iter().map(|k| -k).collect()));
    } else if pure && abs == 1 && xs.iter().all(|&k| k >= 1) {
        h2 = 1;
        witness = Some(labelled(xs.iter().map(|k| k - 1).collect()));
    }
    let h1 = sh.degree() as u32 + u32::from(h0 + h2 > 0);
    CohProfile { h0, h1, h2, witness }
}

/// Which regularity condition a ratio fails.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegCondition {
    /// `H^0(δ_i/δ_j) ≠ 0`: excluded from the regular locus.
    RegH0,
    /// `H^2(δ_i/δ_j) ≠ 0`: excluded from both regular loci.
    RegH2,
    /// `wt_σ(δ_i/δ_j) ∈ Z_{≥1}` with `i < j`.
    Circ,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegViolation {
    /// 1-based positions of the ratio `δ_i/δ_j`.
    pub i: usize,
    pub j: usize,
    pub condition: RegCondition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    pub ratio: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub in_treg: bool,
    pub in_twreg: bool,
    pub in_tcirc: bool,
    pub violations: Vec<RegViolation>,
}

pub fn tuple_regularity(deltas: &[Character]) -> Result<RegularityReport> {
    if deltas.is_empty() {
        return Err(Error::EmptyTuple);
    }
    let sh = deltas[0].shape().clone();
    let mut v = Vec::new();
    for (i, a) in deltas.iter().enumerate() {
        for (j, b) in deltas.iter().enumerate() {
            if i == j {
                continue;
            }
            let r = a.div(b)?;
            let p = classify_rank1(&r);
            let mut push = |condition, sigma| {
                v.push(RegViolation { i: i + 1, j: j + 1, condition, sigma, ratio: r.to_string() })
            };
            if p.h0 > 0 {
                push(RegCondition::RegH0, None);
            }
            if p.h2 > 0 {
                push(RegCondition::RegH2, None);
            }
            if i < j {
                for (s, w) in sh.embeddings.iter().zip(r.weights()) {
                    if w.is_integer() && w.is_positive() {
                        push(RegCondition::Circ, Some(s.clone()));
                    }
                }
            }
        }
    }
    let has = |c: RegCondition| v.iter().any(|x| x.condition == c);
    Ok(RegularityReport {
        in_treg: !has(RegCondition::RegH0) && !has(RegCondition::RegH2),
        in_twreg: !has(RegCondition::RegH2),
        in_tcirc: !has(RegCondition::Circ),
        violations: v,
    })
}

/// `(wt_σ(δ_1), …, wt_σ(δ_n))`.
pub fn weight_map(deltas: &[Character], sigma: &str) -> Result<Vec<Rat>> {
    deltas.iter().map(|d| d.weight(sigma)).collect()
}
