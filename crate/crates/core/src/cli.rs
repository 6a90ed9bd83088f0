//! Command dispatch, report envelope and the randomized verification suites.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::characters::{classify_rank1, tuple_regularity, CharGroup, Character, FieldShape, GeneratorDecl};
use crate::deformations::{
    act, baer_sum, dot_actions, intertwine_check, lambda_of, longest, program_multiplicities, pullback_ext,
    sen_poly_deform, theta_rho, translation_admissible, translation_diff, universal_extension, DeformDirection,
    ExtClassModel,
};
use crate::error::{Error, Result};
use crate::exactalg::{DualNum, Mat, Poly, Rat, Scalar, Subspace};
use crate::io::{
    parse, perm_from_json, perm_to_json, ClassSpec, ClassifyInput, DeformInput, Direction, EtaleInput, LatticeInput,
    PullbackInput, RefinementsInput, Ring, TranslateInput, WallsInput,
};
use crate::refinements::{
    adjacent_swap, all_perms, compose_adjacent, critical_split_witness, flag_jumps, noncritical_check,
    stable_partition, CrysModule,
};
use crate::senlattice::{
    brute_force_modifications, modify_down, modify_up, round_trip, split_sen_poly, Factorization, Modification,
    SenLattice,
};
use crate::slopes::{brute_force_etale, etale_crys, etale_pullback_vgen, etale_vgen, twist_to_etale};
use crate::trianguline::{
    apply_program, enumerate_triangulations, program_shift, wall_member, wall_member_program, ClassTag, ProgramMode,
    Step, TriangModule, WallInterval,
};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Classify,
    Pullback,
    Walls,
    Etale,
    ModifyLattice,
    Refinements,
    Deform,
    Translate,
    Verify,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Classify,
        Command::Pullback,
        Command::Walls,
        Command::Etale,
        Command::ModifyLattice,
        Command::Refinements,
        Command::Deform,
        Command::Translate,
        Command::Verify,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Pullback => "pullback",
            Command::Walls => "walls",
            Command::Etale => "etale",
            Command::ModifyLattice => "modify-lattice",
            Command::Refinements => "refinements",
            Command::Deform => "deform",
            Command::Translate => "translate",
            Command::Verify => "verify",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Command> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown command {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorInfo {
    pub code: String,
    pub message: String,
    pub datum: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub status: &'static str,
    pub command: &'static str,
    pub result: Value,
    pub provenance: Vec<String>,
    pub error: Option<ErrorInfo>,
}

impl Report {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// 0 ok, 1 internal, 2 input/schema, 3 gate or hypothesis, 4 suite failure.
    pub fn exit_code(&self) -> i32 {
        match &self.error {
            None => 0,
            Some(e) if e.code == "suite_failure" => 4,
            Some(e) if e.code == "internal" => 1,
            Some(e) if INPUT_CODES.contains(&e.code.as_str()) => 2,
            Some(_) => 3,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.command, self.status);
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error[{}]: {}", e.code, e.message);
            if !e.datum.is_null() {
                let _ = writeln!(s, "  datum: {}", e.datum);
            }
        }
        if let Value::Object(m) = &self.result {
            for (k, v) in m {
                let _ = writeln!(s, "{k}: {v}");
            }
        }
        for p in &self.provenance {
            let _ = writeln!(s, "uses: {p}");
        }
        s
    }
}

const INPUT_CODES: [&str; 9] = [
    "parse",
    "shape_mismatch",
    "unknown_embedding",
    "unknown_generator",
    "index_out_of_range",
    "empty_tuple",
    "ragged",
    "invalid_module",
    "too_large",
];

/// Structured payload of an error, for machine consumers.
pub fn error_datum(e: &Error) -> Value {
    match e {
        Error::IndexOutOfRange { what, index, n } => json!({"what": what, "index": index, "n": n}),
        Error::GateViolation { step, detail } => {
            json!({"step": step, "violations": serde_json::from_str::<Value>(detail).unwrap_or(Value::String(detail.clone()))})
        }
        Error::RegularityLost { position, next, left, right } => {
            json!({"position": position, "next": next, "left": left, "right": right})
        }
        Error::InvertibilityNotGuaranteed { q_root, s_root, diff } => {
            json!({"q_root": q_root, "s_root": s_root, "diff": diff})
        }
        Error::UnknownEmbedding(s) | Error::UnknownGenerator(s) => json!({"label": s}),
        _ => Value::Null,
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("library values serialize")
}

type Outcome = Result<(Value, Vec<String>)>;

fn prov(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Run one command on a JSON payload. Deterministic for a fixed seed.
pub fn run(command: Command, payload: &Value, seed: u64) -> Report {
    run_with(command, payload, seed, &modify_down)
}

/// As [`run`], with the lattice modification used by the uniqueness suite
/// replaced (fault injection in tests).
pub fn run_with(command: Command, payload: &Value, seed: u64, md: &ModifyDown) -> Report {
    let out = match command {
        Command::Classify => classify(payload),
        Command::Pullback => pullback(payload),
        Command::Walls => walls(payload),
        Command::Etale => etale(payload),
        Command::ModifyLattice => modify_lattice(payload),
        Command::Refinements => refinements(payload),
        Command::Deform => deform(payload),
        Command::Translate => translate(payload, seed),
        Command::Verify => return verify(payload, seed, md),
    };
    match out {
        Ok((result, provenance)) => Report {
            schema_version: SCHEMA_VERSION,
            status: "ok",
            command: command.as_str(),
            result,
            provenance,
            error: None,
        },
        Err(e) => Report {
            schema_version: SCHEMA_VERSION,
            status: "error",
            command: command.as_str(),
            result: Value::Null,
            provenance: vec![],
            error: Some(ErrorInfo { code: e.code().to_string(), message: e.to_string(), datum: error_datum(&e) }),
        },
    }
}

fn classify(payload: &Value) -> Outcome {
    let inp: ClassifyInput = parse(payload)?;
    let g = inp.field.group()?;
    let chars = inp.characters.iter().map(|c| c.resolve(&g)).collect::<Result<Vec<_>>>()?;
    let profiles: Vec<Value> = chars
        .iter()
        .map(|c| {
            let mut v = to_value(&classify_rank1(c));
            v["character"] = to_value(&c.to_literal());
            v
        })
        .collect();
    let mut result = json!({ "profiles": profiles });
    let mut p = prov(&["rank-one cohomology dimensions"]);
    if inp.regularity {
        result["regularity"] = to_value(&tuple_regularity(&chars)?);
        p.push("regular and weakly regular parameter conditions".into());
    }
    Ok((result, p))
}

/// Every triangulation of `d` as its own module, with 0-based refinements.
fn triangulated_variants(d: &TriangModule, split: bool) -> Result<Vec<(Vec<usize>, TriangModule)>> {
    let n = d.rank();
    if split {
        return all_perms(n)
            .into_iter()
            .map(|w| {
                let params = w.iter().map(|&i| d.params()[i].clone()).collect();
                Ok((w, TriangModule::split(params)?))
            })
            .collect();
    }
    match d.class_tag() {
        ClassTag::Plain => Err(Error::PlainTag),
        ClassTag::VeryGenericStronglyNonSplit => Ok(vec![((0..n).collect(), d.clone())]),
        ClassTag::CrystabellineGeneric | ClassTag::CrystabellineNonCritical => {
            let c = d.crys().ok_or(Error::PlainTag)?;
            enumerate_triangulations(d)?
                .into_iter()
                .map(|t| Ok((t.w.clone(), TriangModule::crystabelline(c.module.clone(), t.w)?)))
                .collect()
        }
        ClassTag::Mixed(m) => {
            let c = d.crys().ok_or(Error::PlainTag)?;
            enumerate_triangulations(d)?
                .into_iter()
                .map(|t| {
                    let u: Vec<usize> = t.w[m..].iter().map(|x| x - m).collect();
                    Ok((t.w, TriangModule::mixed(d.params()[..m].to_vec(), c.module.clone(), u)?))
                })
                .collect()
        }
    }
}

fn weights_by_sigma(d: &TriangModule) -> Result<BTreeMap<String, Vec<Rat>>> {
    d.group().shape().embeddings.iter().map(|s| Ok((s.clone(), d.weights(s)?))).collect()
}

fn module_summary(d: &TriangModule) -> Result<Value> {
    Ok(json!({
        "class": d.class_tag(),
        "params": d.params().iter().map(|c| to_value(&c.to_literal())).collect::<Vec<_>>(),
        "weights": weights_by_sigma(d)?,
        "uvals": d.uvals(),
    }))
}

fn pullback(payload: &Value) -> Outcome {
    let inp: PullbackInput = parse(payload)?;
    let d = inp.module.build()?;
    let variants = if inp.all_triangulations {
        triangulated_variants(&d, inp.module.class == ClassSpec::Split)?
    } else {
        vec![((0..d.rank()).collect(), d.clone())]
    };
    let mut reports = Vec::new();
    for (w, m) in variants {
        let out = apply_program(&m, &inp.program, inp.mode)?;
        reports.push(json!({
            "w": perm_to_json(&w),
            "before": module_summary(&m)?,
            "after": module_summary(&out)?,
        }));
    }
    let mut p = prov(&["pullback weight-shift rule", "operators p_i commute"]);
    match inp.mode {
        ProgramMode::Strict => p.push("invertibility gate for p_k".into()),
        ProgramMode::Substack => p.push("weight-uniform wall condition".into()),
        ProgramMode::Unchecked => {}
    }
    if inp.all_triangulations {
        p.push("triangulation classification by class tag".into());
    }
    Ok((json!({ "reports": reports }), p))
}

fn walls(payload: &Value) -> Outcome {
    let inp: WallsInput = parse(payload)?;
    let module = inp.module.as_ref().map(|m| m.build()).transpose()?;
    let weights_for = |s: &str| -> Result<Vec<Rat>> {
        if let Some(w) = &inp.weights {
            return w.get(s).cloned().ok_or_else(|| Error::UnknownEmbedding(s.to_string()));
        }
        match &module {
            Some(d) => d.weights(s),
            None => Err(Error::Parse("either \"weights\" or \"module\" is required".into())),
        }
    };
    if let Some(shapes) = &inp.shapes {
        let ws = shapes.iter().map(|sh| Ok((sh.sigma.clone(), weights_for(&sh.sigma)?))).collect::<Result<Vec<_>>>()?;
        let r = wall_member_program(&ws, shapes, inp.negative)?;
        return Ok((to_value(&r), prov(&["weight-uniform wall condition for programs"])));
    }
    let i = inp.i.ok_or_else(|| Error::Parse("\"i\" is required without \"shapes\"".into()))?;
    let sigma = inp.sigma.clone().unwrap_or_else(|| "s0".into());
    let (a, b) = inp.interval.unwrap_or((0, 0));
    let r = wall_member(&weights_for(&sigma)?, i, WallInterval::new(a, b)?)?;
    Ok((to_value(&r), prov(&["weight-uniform wall condition"])))
}

fn etale(payload: &Value) -> Outcome {
    let inp: EtaleInput = parse(payload)?;
    let d = inp.module.build()?;
    let mut result = json!({});
    let mut p = Vec::new();
    match d.class_tag() {
        ClassTag::VeryGenericStronglyNonSplit => {
            result["report"] = to_value(&etale_vgen(&d)?);
            p.push("étaleness of very generic modules by prefix valuations".to_string());
            if let Some(q) = &inp.pullback {
                result["pullback"] = to_value(&etale_pullback_vgen(&d, q.j, &q.sigma)?);
                p.push("étaleness up to twist after p_j".into());
            }
        }
        ClassTag::CrystabellineNonCritical => {
            let m = &d.crys().ok_or(Error::PlainTag)?.module;
            let r = etale_crys(m)?;
            result["report"] = to_value(&r);
            p.push("étaleness of non-critical crystabelline modules".into());
            if m.rank() <= 6 {
                let b = brute_force_etale(m)?;
                result["oracle_agrees"] = json!(b.verdict == r.verdict);
                result["oracle"] = to_value(&b);
                p.push("slope of every refinement filtration".into());
            }
        }
        t => return Err(Error::WrongClass(format!("no étaleness criterion for class {t:?}"))),
    }
    if let Some(prog) = &inp.program {
        result["chi_uval"] = to_value(&twist_to_etale(&d, prog)?);
        p.push("étale after an unramified twist".into());
    }
    Ok((result, p))
}

fn parse_entries<S: DeserializeOwned>(v: &[Value]) -> Result<Vec<S>> {
    v.iter().map(|x| S::deserialize(x).map_err(|e| Error::Parse(e.to_string()))).collect()
}

fn lattice_generic<S: Scalar + Serialize + DeserializeOwned>(inp: &LatticeInput) -> Result<(Value, SenLattice<S>, Modification<S>)> {
    let rows = inp.theta.iter().map(|r| parse_entries::<S>(r)).collect::<Result<Vec<_>>>()?;
    if let Some(n) = inp.n {
        if n != rows.len() {
            return Err(Error::Ragged(format!("n = {n} but theta has {} rows", rows.len())));
        }
    }
    let theta = Mat::from_rows(rows)?;
    let l = SenLattice::new(theta)?;
    let roots = parse_entries::<S>(&inp.roots)?;
    let subset = inp
        .subset
        .iter()
        .map(|&i| if i == 0 { Err(Error::Parse("subset is 1-based".into())) } else { Ok(i - 1) })
        .collect::<Result<Vec<_>>>()?;
    let f = split_sen_poly(&l, &roots, &subset)?;
    let mut result = json!({
        "charpoly": to_value(&l.charpoly()),
        "q": to_value(&f.q),
        "s": to_value(&f.s),
    });
    let m = match inp.direction {
        Direction::Down => modify_down(&l, &f)?,
        Direction::Up => modify_up(&l, &f)?,
        Direction::RoundTrip => {
            let rt = round_trip(&l, &f)?;
            result["round_trip_identity"] = json!(rt.identity);
            result["theta_back"] = to_value(&rt.theta_back);
            rt.down
        }
    };
    let shift = if inp.direction == Direction::Up { 1 } else { -1 };
    result["expected_charpoly"] = to_value(&(f.q.shift(&S::from_int(shift)) * f.s.clone()));
    result["kept"] = to_value(&m.kept);
    result["shifted"] = to_value(&m.shifted);
    result["theta"] = to_value(m.lattice.theta());
    result["new_charpoly"] = to_value(&m.lattice.charpoly());
    Ok((result, l, m))
}

fn modify_lattice(payload: &Value) -> Outcome {
    let inp: LatticeInput = parse(payload)?;
    let mut p = prov(&["Sen-lattice modification along a comaximal split", "CRT idempotents for coprime factors"]);
    if inp.direction == Direction::RoundTrip {
        p.push("round trip requires root gaps outside {-1, 0, 1}".into());
    }
    let result = match inp.ring {
        Ring::Rat => {
            let (mut result, l, m) = lattice_generic::<Rat>(&inp)?;
            if inp.brute_force {
                let target = m.lattice.charpoly();
                let search = brute_force_modifications(&l, &target)?;
                result["brute_force"] = json!({
                    "candidates": to_value(&search.candidates),
                    "infinite": search.infinite,
                    "unique_matches": search.unique() == Some(&Subspace::span(l.n(), &m.kept)),
                });
                p.push("exhaustive stable-subspace search".into());
            }
            result
        }
        Ring::Dual => {
            if inp.brute_force {
                return Err(Error::Unsupported("exhaustive search needs a rational Θ".into()));
            }
            lattice_generic::<DualNum>(&inp)?.0
        }
    };
    Ok((result, p))
}

fn refinements(payload: &Value) -> Outcome {
    let inp: RefinementsInput = parse(payload)?;
    let m = inp.crys().build(&inp.field)?;
    let sigmas = m.group().shape().embeddings.clone();
    let mut rows = Vec::new();
    for w in all_perms(m.rank()) {
        let induced = m.induced_weights(&w)?;
        let nc = noncritical_check(&m, &w)?;
        let mut swaps = BTreeMap::new();
        for (s, sigma) in sigmas.iter().enumerate() {
            if induced[s] != m.weights()[s] {
                if let Some((i, v)) = critical_split_witness(&m, &w, sigma)? {
                    swaps.insert(sigma.clone(), json!({"i": i + 1, "neighbour": perm_to_json(&v)}));
                }
            }
        }
        let weights: BTreeMap<&String, &Vec<i64>> = sigmas.iter().zip(&induced).collect();
        rows.push(json!({"w": perm_to_json(&w), "weights": weights, "noncritical": nc, "swaps": swaps}));
    }
    let result = json!({
        "rank": m.rank(),
        "regular": m.is_regular(),
        "noncritical": m.is_noncritical()?,
        "refinements": rows,
        "stable_partition": stable_partition(&m)?,
    });
    Ok((result, prov(&["refinements of a generic crystabelline module", "non-criticality by flag position", "hyperplane rearrangement"])))
}

fn deform(payload: &Value) -> Outcome {
    let inp: DeformInput = parse(payload)?;
    let d = inp.module.build()?;
    let classes = inp
        .classes
        .iter()
        .map(|c| ExtClassModel::new(d.clone(), perm_from_json(&c.w)?, c.psis.clone()))
        .collect::<Result<Vec<_>>>()?;
    let first = classes.first().ok_or(Error::EmptyTuple)?;
    let summary = |c: &ExtClassModel| -> Result<Value> {
        Ok(json!({"w": perm_to_json(c.w()), "kappa": c.kappa(), "sen_poly": to_value(&sen_poly_deform(c)?)}))
    };
    let mut sum = ExtClassModel::zero(d.clone(), first.w().to_vec())?;
    for c in &classes {
        sum = baer_sum(&sum, c)?;
    }
    let mut result = json!({
        "classes": classes.iter().map(summary).collect::<Result<Vec<_>>>()?,
        "baer_sum": summary(&sum)?,
    });
    let mut p = prov(&["κ-coordinates of extension classes", "Baer sum of extensions", "deformed Sen polynomial"]);
    if let Some(prog) = &inp.program {
        let pulled = classes.iter().map(|c| pullback_ext(c, prog)).collect::<Result<Vec<_>>>()?;
        result["pullback"] = json!(pulled
            .iter()
            .map(|c| Ok(json!({"kappa": c.kappa(), "hodge": c.hodge()?})))
            .collect::<Result<Vec<_>>>()?);
        p.push("pullback of extensions is a homomorphism preserving κ".into());
    }
    if let Some(coords) = &inp.universal {
        let u = universal_extension(&classes)?;
        let e = u.pullback_along(coords)?;
        result["universal"] = json!({"dim": u.dim(), "kappa": e.kappa(), "coordinates": u.coordinates_of(&e)?});
        p.push("universal extension over a span of classes".into());
    }
    Ok((result, p))
}

fn random_directions(rng: &mut ChaCha8Rng, n: usize) -> Vec<DeformDirection> {
    (0..n)
        .map(|_| DeformDirection::new(Rat::int(rng.gen_range(-5..=5)), Rat::int(rng.gen_range(-5..=5))))
        .collect()
}

fn translate(payload: &Value, seed: u64) -> Outcome {
    let inp: TranslateInput = parse(payload)?;
    let mut p = prov(&["translation admissibility: regular, integral, same chamber", "θ and ρ"]);
    if let Some(ms) = &inp.module {
        let d = ms.build()?;
        let prog = inp.program.clone().unwrap_or_default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<_> = (0..inp.samples).map(|_| random_directions(&mut rng, d.rank())).collect();
        let r = intertwine_check(&d, &prog, &samples)?;
        p.push("κ-level intertwining square for translation".into());
        return Ok((to_value(&r), p));
    }
    let h = inp.h.clone().ok_or_else(|| Error::Parse("\"h\" or \"module\" is required".into()))?;
    let n = h.len();
    let mut result = json!({});
    let h_prime = match (&inp.h_prime, &inp.program) {
        (Some(hp), _) => hp.clone(),
        (None, Some(prog)) => {
            if prog.iter().any(|s| s.sigma != prog[0].sigma) {
                return Err(Error::ShapeMismatch("translation uses a single embedding".into()));
            }
            let sigma = prog.first().map(|s| s.sigma.clone()).unwrap_or_else(|| "s0".into());
            let k = program_multiplicities(n, prog)?;
            let diff = translation_diff(&k);
            result["k"] = json!(k);
            result["diff"] = json!(diff);
            p.push("translation weight difference from multiplicities".into());
            h.iter().zip(program_shift(n, prog, &sigma)).map(|(a, s)| a + &Rat::int(s)).collect()
        }
        (None, None) => return Err(Error::Parse("\"h_prime\" or \"program\" is required".into())),
    };
    if h_prime.len() != n {
        return Err(Error::Ragged("h and h_prime differ in length".into()));
    }
    let (theta, rho) = theta_rho(n);
    let (lambda, lambda_prime) = (lambda_of(&h), lambda_of(&h_prime));
    result["theta"] = to_value(&theta);
    result["rho"] = to_value(&rho);
    result["h_prime"] = to_value(&h_prime);
    result["lambda"] = to_value(&lambda);
    result["lambda_prime"] = to_value(&lambda_prime);
    result["admissibility"] = to_value(&translation_admissible(&lambda, &lambda_prime));
    Ok((result, p))
}

/// Lattice modification used by the uniqueness suite.
pub type ModifyDown = dyn Fn(&SenLattice<Rat>, &Factorization<Rat>) -> Result<Modification<Rat>>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub passed: bool,
    /// The first failing case.
    pub counterexample: Option<Value>,
}

struct Tally {
    name: &'static str,
    cases: usize,
    failures: usize,
    counterexample: Option<Value>,
}

impl Tally {
    fn new(name: &'static str) -> Tally {
        Tally { name, cases: 0, failures: 0, counterexample: None }
    }

    fn record(&mut self, ok: bool, case: impl FnOnce() -> Value) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.counterexample.is_none() {
                self.counterexample = Some(case());
            }
        }
    }

    fn error(&mut self, e: Error, case: impl FnOnce() -> Value) {
        self.record(false, || json!({"case": case(), "error": e.to_string()}));
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            passed: self.failures == 0 && self.cases > 0,
            counterexample: self.counterexample,
        }
    }
}

pub const SUITES: [&str; 6] = [
    "lattice_uniqueness",
    "etale_oracle",
    "commutation",
    "rearrangement",
    "kappa_homomorphism",
    "dot_actions",
];

fn distinct_ints(rng: &mut ChaCha8Rng, n: usize, lo: i64, hi: i64) -> Vec<i64> {
    let mut pool: Vec<i64> = (lo..=hi).collect();
    pool.shuffle(rng);
    pool.truncate(n);
    pool
}

fn unipotent_conjugate(rng: &mut ChaCha8Rng, eigs: &[i64]) -> Mat<Rat> {
    let n = eigs.len();
    let mut u = Mat::identity(n);
    let mut l = Mat::identity(n);
    for r in 0..n {
        for c in r + 1..n {
            u.set(r, c, Rat::int(rng.gen_range(-2..=2)));
            l.set(c, r, Rat::int(rng.gen_range(-2..=2)));
        }
    }
    let p = u.mul(&l);
    let d = Mat::diag(&eigs.iter().map(|&x| Rat::int(x)).collect::<Vec<_>>());
    p.mul(&d).mul(&p.inverse().expect("unipotent product is invertible"))
}

fn suite_lattice(rng: &mut ChaCha8Rng, md: &ModifyDown) -> SuiteResult {
    let mut t = Tally::new("lattice_uniqueness");
    for _ in 0..40 {
        let n = rng.gen_range(2..=4);
        let eigs = distinct_ints(rng, n, -6, 6);
        let theta = unipotent_conjugate(rng, &eigs);
        let mask = rng.gen_range(1..(1u32 << n) - 1);
        let subset: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
        let case = || json!({"theta": to_value(&theta), "roots": eigs, "subset": perm_to_json(&subset)});
        let roots: Vec<Rat> = eigs.iter().map(|&x| Rat::int(x)).collect();
        let run = || -> Result<bool> {
            let l = SenLattice::new(theta.clone())?;
            let f = split_sen_poly(&l, &roots, &subset)?;
            let m = md(&l, &f)?;
            let target = f.q.shift(&Rat::int(-1)) * f.s.clone();
            if m.lattice.charpoly() != target {
                return Ok(false);
            }
            let search = brute_force_modifications(&l, &target)?;
            if search.unique() != Some(&Subspace::span(n, &m.kept)) {
                return Ok(false);
            }
            let gap_ok = subset.iter().all(|&a| (0..n).filter(|b| !subset.contains(b)).all(|b| (eigs[a] - eigs[b]).abs() > 1));
            Ok(match round_trip(&l, &f) {
                Ok(rt) => gap_ok && rt.identity,
                Err(Error::InvertibilityNotGuaranteed { .. }) => !gap_ok,
                Err(e) => return Err(e),
            })
        };
        match run() {
            Ok(ok) => t.record(ok, case),
            Err(e) => t.error(e, case),
        }
    }
    t.finish()
}

fn crys_module(rng: &mut ChaCha8Rng, n: usize) -> Result<CrysModule> {
    let decls: BTreeMap<String, GeneratorDecl> = (1..=n)
        .map(|i| {
            let uval = Rat::int(rng.gen_range(-5..=5));
            (format!("phi{i}"), GeneratorDecl { weights: BTreeMap::new(), uval, unit: false })
        })
        .collect();
    let g = CharGroup::with_generators(FieldShape::qp(), decls)?;
    let phis = (1..=n).map(|i| Character::generator(&g, &format!("phi{i}"))).collect::<Result<Vec<_>>>()?;
    let mut h = distinct_ints(rng, n, -4, 4);
    h.sort_by(|a, b| b.cmp(a));
    CrysModule::new(&g, phis, vec![h], None)
}

fn suite_etale(rng: &mut ChaCha8Rng) -> SuiteResult {
    let mut t = Tally::new("etale_oracle");
    for _ in 0..60 {
        let n = rng.gen_range(1..=4);
        let m = match crys_module(rng, n) {
            Ok(m) => m,
            Err(e) => {
                t.error(e, || json!({"n": n}));
                continue;
            }
        };
        let case = || json!({"uvals": m.phis().iter().map(|p| p.uval()).collect::<Vec<_>>(), "weights": m.weights()});
        match (etale_crys(&m), brute_force_etale(&m)) {
            (Ok(a), Ok(b)) => t.record(a.verdict == b.verdict && a.total == b.total, case),
            (Err(e), _) | (_, Err(e)) => t.error(e, case),
        }
    }
    t.finish()
}

fn random_program(rng: &mut ChaCha8Rng, n: usize, sigmas: &[String], len: usize, kmax: i64) -> Vec<Step> {
    (0..len)
        .map(|_| {
            let sigma = sigmas.choose(rng).expect("nonempty").clone();
            Step::new(rng.gen_range(1..=n), &sigma, rng.gen_range(-kmax..=kmax))
        })
        .collect()
}

fn suite_commutation(rng: &mut ChaCha8Rng) -> SuiteResult {
    let mut t = Tally::new("commutation");
    let g = CharGroup::new(FieldShape::standard(1, 2));
    let sigmas = g.shape().embeddings.clone();
    for _ in 0..60 {
        let n = rng.gen_range(2..=4);
        let params: Vec<Character> = (0..n)
            .map(|_| Character::x_pow(&g, &[rng.gen_range(-3..=3), rng.gen_range(-3..=3)]))
            .collect::<Result<_>>()
            .expect("two embeddings");
        let len = rng.gen_range(1..=4);
        let prog = random_program(rng, n, &sigmas, len, 2);
        let mut shuffled = prog.clone();
        shuffled.shuffle(rng);
        let case = || json!({"program": to_value(&prog), "shuffled": to_value(&shuffled)});
        let run = || -> Result<bool> {
            let d = TriangModule::split(params.clone())?;
            let a = apply_program(&d, &prog, ProgramMode::Unchecked)?;
            let b = apply_program(&d, &shuffled, ProgramMode::Unchecked)?;
            Ok(a.params() == b.params())
        };
        match run() {
            Ok(ok) => t.record(ok, case),
            Err(e) => t.error(e, case),
        }
    }
    t.finish()
}

fn random_flag(rng: &mut ChaCha8Rng, n: usize) -> Mat<Rat> {
    loop {
        let rows = (0..n).map(|_| (0..n).map(|_| Rat::new(rng.gen_range(-3..=3), rng.gen_range(1..=2))).collect()).collect();
        let m = Mat::from_rows(rows).expect("square");
        if !m.det().is_zero() {
            return m;
        }
    }
}

fn suite_rearrangement(rng: &mut ChaCha8Rng) -> SuiteResult {
    let mut t = Tally::new("rearrangement");
    for _ in 0..6 {
        let n = rng.gen_range(2..=4);
        let flag = random_flag(rng, n);
        let mut jumps = distinct_ints(rng, n, -5, 5);
        jumps.sort();
        for w in all_perms(n) {
            let case = || json!({"w": perm_to_json(&w), "flag": to_value(&flag), "jumps": jumps});
            let run = || -> Result<bool> {
                let j = flag_jumps(&w, &flag, &jumps)?;
                let sorted = j.windows(2).all(|p| p[0] < p[1]);
                Ok(match adjacent_swap(&w, &flag, &jumps)? {
                    None => sorted,
                    Some(i) => {
                        let mut expect = j.clone();
                        expect.swap(i, i + 1);
                        !sorted && flag_jumps(&compose_adjacent(&w, i), &flag, &jumps)? == expect
                    }
                })
            };
            match run() {
                Ok(ok) => t.record(ok, case),
                Err(e) => t.error(e, case),
            }
        }
    }
    t.finish()
}

fn suite_kappa(rng: &mut ChaCha8Rng) -> SuiteResult {
    let mut t = Tally::new("kappa_homomorphism");
    for _ in 0..40 {
        let n = rng.gen_range(2..=3);
        let case = || json!({"n": n});
        let run = |rng: &mut ChaCha8Rng| -> Result<bool> {
            let decls: BTreeMap<String, GeneratorDecl> = (1..=n)
                .map(|i| (format!("phi{i}"), GeneratorDecl { weights: BTreeMap::new(), uval: Rat::int(i as i64), unit: false }))
                .collect();
            let g = CharGroup::with_generators(FieldShape::qp(), decls)?;
            let phis = (1..=n).map(|i| Character::generator(&g, &format!("phi{i}"))).collect::<Result<Vec<_>>>()?;
            // Gaps of at least 2 keep every single step wall-safe.
            let mut h = vec![0i64; n];
            for i in (0..n - 1).rev() {
                h[i] = h[i + 1] + rng.gen_range(2..=4);
            }
            let d = TriangModule::crystabelline(CrysModule::new(&g, phis, vec![h], None)?, (0..n).collect())?;
            let mut w: Vec<usize> = (0..n).collect();
            w.shuffle(rng);
            let a = ExtClassModel::new(d.clone(), w.clone(), random_directions(rng, n))?;
            let b = ExtClassModel::new(d, w, random_directions(rng, n))?;
            let s = baer_sum(&a, &b)?;
            let ks: Vec<Rat> = a.kappa().iter().zip(b.kappa()).map(|(x, y)| x + &y).collect();
            let prog = [Step::new(rng.gen_range(1..=n), "s0", 1)];
            let ps = pullback_ext(&s, &prog)?;
            let hom = ps == baer_sum(&pullback_ext(&a, &prog)?, &pullback_ext(&b, &prog)?)?;
            let eps = |p: Poly<DualNum>| p.coeffs().iter().map(|c| c.eps.clone()).collect::<Vec<_>>();
            let (ea, eb, es) = (eps(sen_poly_deform(&a)?), eps(sen_poly_deform(&b)?), eps(sen_poly_deform(&s)?));
            let law = es == ea.iter().zip(&eb).map(|(x, y)| x + y).collect::<Vec<_>>();
            Ok(s.kappa() == ks && hom && ps.kappa() == s.kappa() && law)
        };
        match run(rng) {
            Ok(ok) => t.record(ok, case),
            Err(e) => t.error(e, case),
        }
    }
    t.finish()
}

fn suite_dot(rng: &mut ChaCha8Rng) -> SuiteResult {
    let mut t = Tally::new("dot_actions");
    for _ in 0..100 {
        let n = rng.gen_range(1..=5);
        let xi: Vec<Rat> = (0..n).map(|_| Rat::new(rng.gen_range(-9..=9), rng.gen_range(1..=4))).collect();
        let mut v: Vec<usize> = (0..n).collect();
        let mut w = v.clone();
        v.shuffle(rng);
        w.shuffle(rng);
        let case = || json!({"xi": to_value(&xi), "v": v, "w": w});
        let run = || -> Result<bool> {
            let w0 = longest(n);
            let (_, rho) = theta_rho(n);
            let twisted = dot_actions(&w0, &act(&w0, &xi)?)?.0;
            let expect: Vec<Rat> = xi.iter().zip(&rho).map(|(x, r)| x - &(r + r)).collect();
            let vw: Vec<usize> = w.iter().map(|&x| v[x]).collect();
            let lhs = dot_actions(&vw, &xi)?.0;
            let rhs = dot_actions(&v, &dot_actions(&w, &xi)?.0)?.0;
            Ok(twisted == expect && lhs == rhs)
        };
        match run() {
            Ok(ok) => t.record(ok, case),
            Err(e) => t.error(e, case),
        }
    }
    t.finish()
}

/// Run the named suites (all when empty), each from its own seeded stream.
pub fn verify_suites(seed: u64, names: &[&str], md: &ModifyDown) -> Result<Vec<SuiteResult>> {
    let chosen: Vec<&str> = if names.is_empty() { SUITES.to_vec() } else { names.to_vec() };
    let mut out = Vec::new();
    for name in chosen {
        let idx = SUITES.iter().position(|s| *s == name).ok_or_else(|| Error::Parse(format!("unknown suite {name:?}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((idx as u64 + 1) << 32));
        out.push(match name {
            "lattice_uniqueness" => suite_lattice(&mut rng, md),
            "etale_oracle" => suite_etale(&mut rng),
            "commutation" => suite_commutation(&mut rng),
            "rearrangement" => suite_rearrangement(&mut rng),
            "kappa_homomorphism" => suite_kappa(&mut rng),
            _ => suite_dot(&mut rng),
        });
    }
    Ok(out)
}

fn verify(payload: &Value, seed: u64, md: &ModifyDown) -> Report {
    let suite = payload.get("suite").and_then(|v| v.as_str()).unwrap_or("all").to_string();
    let names: Vec<&str> = if suite == "all" { vec![] } else { vec![suite.as_str()] };
    let base = Report {
        schema_version: SCHEMA_VERSION,
        status: "ok",
        command: Command::Verify.as_str(),
        result: Value::Null,
        provenance: vec![],
        error: None,
    };
    let results = match verify_suites(seed, &names, md) {
        Ok(r) => r,
        Err(e) => {
            return Report {
                status: "error",
                error: Some(ErrorInfo { code: e.code().to_string(), message: e.to_string(), datum: Value::Null }),
                ..base
            }
        }
    };
    let failed: Vec<&SuiteResult> = results.iter().filter(|r| !r.passed).collect();
    let result = json!({
        "seed": seed,
        "suites": to_value(&results),
        "passed": results.iter().filter(|r| r.passed).count(),
        "total": results.len(),
    });
    let provenance = prov(&["brute-force oracles for every checked identity"]);
    if failed.is_empty() {
        Report { result, provenance, ..base }
    } else {
        let names: Vec<&str> = failed.iter().map(|r| r.name).collect();
        Report {
            status: "error",
            error: Some(ErrorInfo {
                code: "suite_failure".into(),
                message: format!("failing suites: {}", names.join(", ")),
                datum: to_value(&failed),
            }),
            result,
            provenance,
            ..base
        }
    }
}
