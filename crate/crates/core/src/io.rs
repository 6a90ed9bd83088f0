//! JSON input specs for the command-line front end and their builders.
//!
//! Rationals are strings `"p/q"` (plain integers are accepted). Refinements
//! and subsets in JSON are 1-based; library calls are 0-based.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::characters::{CharGroup, CharLiteral, Character, FieldShape, GeneratorDecl};
use crate::deformations::DeformDirection;
use crate::error::{Error, Result};
use crate::exactalg::{Mat, Rat};
use crate::refinements::{is_perm, CrysModule};
use crate::trianguline::{ProgramMode, Step, TriangModule};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default = "one")]
    pub e: u32,
    #[serde(default = "one")]
    pub f: u32,
    #[serde(default)]
    pub embeddings: Option<Vec<String>>,
    #[serde(default)]
    pub generators: BTreeMap<String, GeneratorDecl>,
}

fn one() -> u32 {
    1
}

/// `Q_p`.
impl Default for FieldSpec {
    fn default() -> FieldSpec {
        FieldSpec { e: 1, f: 1, embeddings: None, generators: BTreeMap::new() }
    }
}

impl FieldSpec {
    pub fn shape(&self) -> Result<FieldShape> {
        match &self.embeddings {
            Some(e) => FieldShape::new(self.e, self.f, e.clone()),
            None => {
                if self.e == 0 || self.f == 0 {
                    return Err(Error::InvalidModule("e and f must be positive".into()));
                }
                Ok(FieldShape::standard(self.e, self.f))
            }
        }
    }

    pub fn group(&self) -> Result<Arc<CharGroup>> {
        self.group_with(BTreeMap::new())
    }

    fn group_with(&self, extra: BTreeMap<String, GeneratorDecl>) -> Result<Arc<CharGroup>> {
        let mut decls = self.generators.clone();
        for (k, v) in extra {
            if decls.insert(k.clone(), v).is_some() {
                return Err(Error::InvalidModule(format!("generator {k:?} declared twice")));
            }
        }
        CharGroup::with_generators(self.shape()?, decls)
    }
}

/// `{"label": "phi1", "vp": "-1"}`: a Frobenius eigen-character with the given
/// valuation at the uniformizer.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    pub label: String,
    pub vp: Rat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrysSpec {
    pub phis: Vec<PhiSpec>,
    /// Descending weights per embedding.
    pub weights: BTreeMap<String, Vec<i64>>,
    #[serde(default)]
    pub flag: Option<BTreeMap<String, Mat<Rat>>>,
}

impl CrysSpec {
    fn decls(&self) -> BTreeMap<String, GeneratorDecl> {
        self.phis
            .iter()
            .map(|p| (p.label.clone(), GeneratorDecl { weights: BTreeMap::new(), uval: p.vp.clone(), unit: false }))
            .collect()
    }

    pub fn build(&self, field: &FieldSpec) -> Result<CrysModule> {
        let g = field.group_with(self.decls())?;
        self.build_in(&g)
    }

    fn build_in(&self, g: &Arc<CharGroup>) -> Result<CrysModule> {
        let shape = g.shape();
        let phis = self.phis.iter().map(|p| Character::generator(g, &p.label)).collect::<Result<Vec<_>>>()?;
        let mut weights = Vec::new();
        for s in &shape.embeddings {
            weights.push(self.weights.get(s).cloned().ok_or_else(|| Error::UnknownEmbedding(s.clone()))?);
        }
        if let Some(extra) = self.weights.keys().find(|k| !shape.embeddings.contains(k)) {
            return Err(Error::UnknownEmbedding(extra.clone()));
        }
        let flags = match &self.flag {
            None => None,
            Some(f) => Some(
                shape
                    .embeddings
                    .iter()
                    .map(|s| f.get(s).cloned().ok_or_else(|| Error::UnknownEmbedding(s.clone())))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        CrysModule::new(g, phis, weights, flags)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSpec {
    Split,
    Plain,
    VeryGeneric,
    Crystabelline,
    Mixed,
}

/// A triangulated module.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleSpec {
    #[serde(default)]
    pub field: FieldSpec,
    pub class: ClassSpec,
    /// Parameters for `split`, `plain` and `very_generic`; the head for `mixed`.
    #[serde(default)]
    pub params: Vec<CharLiteral>,
    #[serde(default)]
    pub step_nonsplit: Option<Vec<bool>>,
    #[serde(default)]
    pub graded_nonsplit: Option<Vec<bool>>,
    /// Crystabelline data (the tail for `mixed`).
    #[serde(default)]
    pub crys: Option<CrysSpec>,
    /// 1-based refinement of the crystabelline part; identity by default.
    #[serde(default)]
    pub w: Option<Vec<usize>>,
}

/// 1-based permutation to 0-based.
pub fn perm_from_json(w: &[usize]) -> Result<Vec<usize>> {
    if w.iter().any(|&x| x == 0) {
        return Err(Error::Parse("refinements are 1-based".into()));
    }
    let v: Vec<usize> = w.iter().map(|x| x - 1).collect();
    if !is_perm(&v) {
        return Err(Error::Parse(format!("{w:?} is not a permutation")));
    }
    Ok(v)
}

pub fn perm_to_json(w: &[usize]) -> Vec<usize> {
    w.iter().map(|x| x + 1).collect()
}

impl ModuleSpec {
    pub fn group(&self) -> Result<Arc<CharGroup>> {
        let extra = self.crys.as_ref().map(|c| c.decls()).unwrap_or_default();
        self.field.group_with(extra)
    }

    pub fn crys_module(&self) -> Result<CrysModule> {
        let c = self.crys.as_ref().ok_or_else(|| Error::Parse("missing \"crys\"".into()))?;
        c.build_in(&self.group()?)
    }

    pub fn build(&self) -> Result<TriangModule> {
        let g = self.group()?;
        let params = || -> Result<Vec<Character>> {
            if self.params.is_empty() {
                return Err(Error::EmptyTuple);
            }
            self.params.iter().map(|p| p.resolve(&g)).collect()
        };
        let refinement = |n: usize| -> Result<Vec<usize>> {
            match &self.w {
                Some(w) if w.len() == n => perm_from_json(w),
                Some(w) => Err(Error::Ragged(format!("refinement of length {} for rank {n}", w.len()))),
                None => Ok((0..n).collect()),
            }
        };
        match self.class {
            ClassSpec::Split => TriangModule::split(params()?),
            ClassSpec::Plain => {
                let p = params()?;
                let k = p.len() - 1;
                let step = self.step_nonsplit.clone().unwrap_or(vec![false; k]);
                let graded = self.graded_nonsplit.clone().unwrap_or(step.clone());
                TriangModule::plain(p, step, graded)
            }
            ClassSpec::VeryGeneric => TriangModule::very_generic(params()?),
            ClassSpec::Crystabelline => {
                let m = self.crys_module()?;
                let w = refinement(m.rank())?;
                TriangModule::crystabelline(m, w)
            }
            ClassSpec::Mixed => {
                let m = self.crys_module()?;
                let w = refinement(m.rank())?;
                TriangModule::mixed(params()?, m, w)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyInput {
    #[serde(default)]
    pub field: FieldSpec,
    pub characters: Vec<CharLiteral>,
    /// Also report tuple regularity of the list.
    #[serde(default)]
    pub regularity: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PullbackInput {
    pub module: ModuleSpec,
    pub program: Vec<Step>,
    #[serde(default)]
    pub mode: ProgramMode,
    /// Apply the program to every triangulation (every ordering for split modules).
    #[serde(default)]
    pub all_triangulations: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallsInput {
    /// Weights per embedding, or taken from `module`.
    #[serde(default)]
    pub weights: Option<BTreeMap<String, Vec<Rat>>>,
    #[serde(default)]
    pub module: Option<ModuleSpec>,
    /// Single check: `(i, σ, [a, b])`.
    #[serde(default)]
    pub i: Option<usize>,
    #[serde(default)]
    pub sigma: Option<String>,
    #[serde(default)]
    pub interval: Option<(i64, i64)>,
    /// Program form: one shape per embedding.
    #[serde(default)]
    pub shapes: Option<Vec<crate::trianguline::ProgramShape>>,
    #[serde(default)]
    pub negative: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PullbackQuery {
    pub j: usize,
    pub sigma: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaleInput {
    pub module: ModuleSpec,
    #[serde(default)]
    pub pullback: Option<PullbackQuery>,
    #[serde(default)]
    pub program: Option<Vec<Step>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ring {
    #[default]
    Rat,
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Down,
    Up,
    RoundTrip,
}

/// Entries are parsed according to `ring`, so they stay JSON values here.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeInput {
    #[serde(default)]
    pub n: Option<usize>,
    pub theta: Vec<Vec<serde_json::Value>>,
    #[serde(default)]
    pub ring: Ring,
    /// Eigenvalues of Θ with multiplicity.
    pub roots: Vec<serde_json::Value>,
    /// 1-based positions of the roots forming `Q`.
    pub subset: Vec<usize>,
    #[serde(default)]
    pub direction: Direction,
    /// Run the exhaustive stable-subspace search (rational Θ only).
    #[serde(default)]
    pub brute_force: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementsInput {
    #[serde(default)]
    pub field: FieldSpec,
    pub phis: Vec<PhiSpec>,
    pub weights: BTreeMap<String, Vec<i64>>,
    #[serde(default)]
    pub flag: Option<BTreeMap<String, Mat<Rat>>>,
}

impl RefinementsInput {
    pub fn crys(&self) -> CrysSpec {
        CrysSpec { phis: self.phis.clone(), weights: self.weights.clone(), flag: self.flag.clone() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformSpec {
    /// 1-based refinement.
    pub w: Vec<usize>,
    pub psis: Vec<DeformDirection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformInput {
    pub module: ModuleSpec,
    pub classes: Vec<DeformSpec>,
    #[serde(default)]
    pub program: Option<Vec<Step>>,
    /// Evaluate the universal extension over the classes at these coordinates.
    #[serde(default)]
    pub universal: Option<Vec<Rat>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslateInput {
    /// Descending weights; optional when `module` is given.
    #[serde(default)]
    pub h: Option<Vec<Rat>>,
    #[serde(default)]
    pub h_prime: Option<Vec<Rat>>,
    #[serde(default)]
    pub program: Option<Vec<Step>>,
    /// Run the κ-level intertwining check on this module.
    #[serde(default)]
    pub module: Option<ModuleSpec>,
    /// Number of random deformation classes for the intertwining check.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    3
}

pub fn parse<T: for<'de> Deserialize<'de>>(v: &serde_json::Value) -> Result<T> {
    T::deserialize(v).map_err(|e| Error::Parse(e.to_string()))
}
