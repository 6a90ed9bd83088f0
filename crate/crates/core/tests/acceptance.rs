//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach stdout.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weightshift::characters::{classify_rank1, CharGroup, Character, FieldShape, GeneratorDecl};
use weightshift::deformations::{
    act, baer_sum, dot_actions, first_gap_violation, intertwine_check, longest, pullback_ext, sen_poly_deform,
    theta_rho, translation_diff, DeformDirection, ExtClassModel,
};
use weightshift::exactalg::{DualNum, Mat, Poly, Rat, Subspace};
use weightshift::refinements::{adjacent_swap, all_perms, compose_adjacent, flag_jumps, CrysModule};
use weightshift::senlattice::{
    brute_force_modifications, modify_down, recover_factors_check, recover_factors_comaximal, residue_coprime,
    round_trip, split_sen_poly, SenLattice,
};
use weightshift::slopes::{brute_force_etale, etale_crys, etale_pullback_vgen, etale_vgen, twist_to_etale};
use weightshift::trianguline::{apply_program, enumerate_triangulations, ProgramMode, Step, TriangModule};
use weightshift::Error;

type Outcome = Result<String, String>;

fn r(a: i64) -> Rat {
    Rat::int(a)
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: Error) -> String {
    format!("unexpected error: {e}")
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// `Q_p` with generators `phi1..phin` of the given valuations and no weight.
fn phi_group(uvals: &[Rat]) -> Arc<CharGroup> {
    let decls: BTreeMap<String, GeneratorDecl> = uvals
        .iter()
        .enumerate()
        .map(|(i, u)| (format!("phi{}", i + 1), GeneratorDecl { weights: BTreeMap::new(), uval: u.clone(), unit: false }))
        .collect();
    CharGroup::with_generators(FieldShape::qp(), decls).unwrap()
}

fn phis(g: &Arc<CharGroup>, n: usize) -> Vec<Character> {
    (1..=n).map(|i| Character::generator(g, &format!("phi{i}")).unwrap()).collect()
}

fn crys(uvals: &[Rat], h: Vec<i64>) -> CrysModule {
    let g = phi_group(uvals);
    CrysModule::new(&g, phis(&g, uvals.len()), vec![h], None).unwrap()
}

fn descending(rng: &mut ChaCha8Rng, n: usize, lo: i64, hi: i64) -> Vec<i64> {
    let mut pool: Vec<i64> = (lo..=hi).collect();
    pool.shuffle(rng);
    pool.truncate(n);
    pool.sort_by(|a, b| b.cmp(a));
    pool
}

/// `h0`, `h2` by direct search over the two exceptional families, `h1` from
/// the Euler characteristic over `Q_p`.
fn coh_oracle(d: &Character) -> (u32, u32, u32) {
    let g = d.group();
    let h0 = (0..=30).any(|k| *d == Character::x_pow(g, &[-k]).unwrap()) as u32;
    let h2 = (0..=30).any(|k| *d == Character::eps(g).mul(&Character::x_pow(g, &[k]).unwrap()).unwrap()) as u32;
    (h0, 1 + h0 + h2, h2)
}

fn c1_cohomology() -> Outcome {
    let mut decls = BTreeMap::new();
    let mut wts = BTreeMap::new();
    wts.insert("s0".to_string(), Rat::new(1, 3));
    decls.insert("g".to_string(), GeneratorDecl { weights: wts, uval: Rat::new(1, 2), unit: false });
    let g = CharGroup::with_generators(FieldShape::qp(), decls).unwrap();
    let x = |k: i64| Character::x_pow(&g, &[k]).unwrap();
    let abs = Character::abs(&g);
    let eps = Character::eps(&g);
    let gen = Character::generator(&g, "g").unwrap();
    let mut grid = Vec::new();
    for k in 0..10 {
        grid.push((x(-k), (1, 2, 0)));
        grid.push((eps.mul(&x(k)).unwrap(), (0, 2, 1)));
        grid.push((x(k + 1), (0, 1, 0)));
        grid.push((abs.mul(&x(-k)).unwrap(), (0, 1, 0)));
        grid.push((gen.mul(&x(k - 5)).unwrap(), (0, 1, 0)));
    }
    for (d, expect) in &grid {
        let p = classify_rank1(d);
        let got = (p.h0, p.h1, p.h2);
        check(got == *expect && got == coh_oracle(d), || format!("{d:?}: got {got:?}, expected {expect:?}"))?;
    }
    // The non-split counterexample: δ1 = x, δ2 = |x|x, δ3 = 1.
    let (d1, d2, d3) = (x(1), abs.mul(&x(1)).unwrap(), Character::trivial(&g));
    let h = |c: &Character| classify_rank1(c);
    let (a, b) = (h(&d1.div(&d3).unwrap()), h(&d1.div(&d2).unwrap()));
    let h0_12 = h(&d1.div(&d2).unwrap()).h0;
    check(h0_12 == 0 && a.h2 == 0, || "long exact sequence does not reduce to a short one".into())?;
    let middle = a.h1 + b.h1;
    let dims = (a.h1, middle, b.h1);
    check(dims == (1, 2, 1), || format!("sequence dimensions {dims:?}"))?;
    Ok(format!("{} characters, sequence dims {:?}", grid.len(), dims))
}

fn c2_intro() -> Outcome {
    let g = CharGroup::new(FieldShape::qp());
    let x = |k: i64| Character::x_pow(&g, &[k]).unwrap();
    for k in 1..=5 {
        for (params, expect) in [(vec![x(1), x(2)], [1, k + 2]), (vec![x(2), x(1)], [2, k + 1])] {
            let d = TriangModule::split(params).map_err(err)?;
            let out = apply_program(&d, &[Step::new(1, "s0", k)], ProgramMode::Unchecked).map_err(err)?;
            let got = out.weights("s0").map_err(err)?;
            check(got == vec![r(expect[0]), r(expect[1])], || format!("k = {k}: {got:?} vs {expect:?}"))?;
            check(out.params()[1] == x(expect[1]), || format!("k = {k}: second parameter is not x^{}", expect[1]))?;
        }
    }
    Ok("k = 1..5, both triangulations".into())
}

fn c3_counts() -> Outcome {
    let mut summary = Vec::new();
    for n in 1..=5 {
        let uvals: Vec<Rat> = (0..n).map(|i| r(3 * i as i64)).collect();
        let m = crys(&uvals, (0..n as i64).rev().map(|i| 2 * i).collect());
        let d = TriangModule::crystabelline(m.clone(), (0..n).collect()).map_err(err)?;
        let ts = enumerate_triangulations(&d).map_err(err)?;
        let distinct: BTreeSet<Vec<usize>> = ts.iter().map(|t| t.w.clone()).collect();
        check(ts.len() == factorial(n) && distinct.len() == ts.len(), || format!("crystabelline n = {n}: {}", ts.len()))?;

        let mut decls = BTreeMap::new();
        for i in 0..n {
            let mut w = BTreeMap::new();
            w.insert("s0".to_string(), Rat::new(1, i as i64 + 2));
            decls.insert(format!("v{i}"), GeneratorDecl { weights: w, uval: r(0), unit: false });
        }
        let g = CharGroup::with_generators(FieldShape::qp(), decls).unwrap();
        let params: Vec<Character> = (0..n).map(|i| Character::generator(&g, &format!("v{i}")).unwrap()).collect();
        let v = TriangModule::very_generic(params.clone()).map_err(err)?;
        let vt = enumerate_triangulations(&v).map_err(err)?;
        check(vt.len() == 1, || format!("very generic n = {n}: {}", vt.len()))?;

        for mh in 1..n {
            let tail = n - mh;
            let tu: Vec<Rat> = (0..tail).map(|i| r(5 * i as i64)).collect();
            let tm = crys(&tu, (0..tail as i64).rev().collect());
            // Head and tail must share a group, so rebuild the tail over the head's group.
            let mut decls = g.decls().clone();
            decls.extend(tm.group().decls().clone());
            let gg = CharGroup::with_generators(FieldShape::qp(), decls).unwrap();
            let tail_mod = CrysModule::new(&gg, phis(&gg, tail), vec![tm.weights()[0].clone()], None).unwrap();
            let head: Vec<Character> = (0..mh).map(|i| Character::generator(&gg, &format!("v{i}")).unwrap()).collect();
            let mx = TriangModule::mixed(head, tail_mod, (0..tail).collect()).map_err(err)?;
            let mt = enumerate_triangulations(&mx).map_err(err)?;
            check(mt.len() == factorial(tail), || format!("mixed n = {n}, m = {mh}: {}", mt.len()))?;
        }
        summary.push(format!("n={n}:{}", ts.len()));
    }
    Ok(summary.join(" "))
}

fn random_theta(rng: &mut ChaCha8Rng, eigs: &[Rat]) -> Mat<Rat> {
    let n = eigs.len();
    let mut u = Mat::identity(n);
    let mut l = Mat::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            u.set(i, j, r(rng.gen_range(-2..=2)));
            l.set(j, i, r(rng.gen_range(-2..=2)));
        }
    }
    let p = u.mul(&l);
    p.mul(&Mat::diag(eigs)).mul(&p.inverse().unwrap())
}

fn c4_wu() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut round_trips, mut refusals) = (0, 0);
    for case in 0..200 {
        let n = rng.gen_range(1..=4);
        let mut pool: Vec<Rat> = (-8..=8).map(|a| Rat::new(a, if rng.gen_bool(0.2) { 2 } else { 1 })).collect();
        pool.sort();
        pool.dedup();
        pool.shuffle(&mut rng);
        let eigs: Vec<Rat> = pool[..n].to_vec();
        let theta = random_theta(&mut rng, &eigs);
        let mask = rng.gen_range(0..1u32 << n);
        let subset: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
        let l = SenLattice::new(theta.clone()).map_err(err)?;
        let f = split_sen_poly(&l, &eigs, &subset).map_err(err)?;
        let m = modify_down(&l, &f).map_err(err)?;
        // Q(T-1)S(T) from the shifted roots.
        let shifted: Vec<Rat> = (0..n).map(|i| if subset.contains(&i) { &eigs[i] + &r(1) } else { eigs[i].clone() }).collect();
        let target = Poly::from_roots(&shifted);
        check(m.lattice.charpoly() == target, || format!("case {case}: charpoly {} vs {}", m.lattice.charpoly(), target))?;
        let search = brute_force_modifications(&l, &target).map_err(err)?;
        check(search.unique() == Some(&Subspace::span(n, &m.kept)), || {
            format!("case {case}: {} candidates, infinite = {}", search.candidates.len(), search.infinite)
        })?;
        let gaps_ok = subset.iter().all(|&a| {
            (0..n).filter(|b| !subset.contains(b)).all(|b| {
                let d = &eigs[a] - &eigs[b];
                d != r(-1) && d != r(0) && d != r(1)
            })
        });
        match round_trip(&l, &f) {
            Ok(rt) => {
                check(gaps_ok && rt.identity && rt.theta_back == theta, || format!("case {case}: round trip"))?;
                round_trips += 1;
            }
            Err(Error::InvertibilityNotGuaranteed { .. }) => {
                check(!gaps_ok, || format!("case {case}: refused although gaps are fine"))?;
                refusals += 1;
            }
            Err(e) => return Err(err(e)),
        }
    }
    // A gap of exactly 1 is refused.
    let l = SenLattice::new(Mat::diag(&[r(0), r(1)])).map_err(err)?;
    let f = split_sen_poly(&l, &[r(0), r(1)], &[1]).map_err(err)?;
    check(matches!(round_trip(&l, &f), Err(Error::InvertibilityNotGuaranteed { .. })), || "gap-1 case accepted".into())?;
    let secs = start.elapsed().as_secs_f64();
    check(secs < 10.0, || format!("took {secs:.1}s"))?;
    Ok(format!("200 Θ, {round_trips} round trips, {refusals} refusals, {secs:.2}s"))
}

/// Every way to split the root multiset into factors of the given degrees.
fn splits<T: Clone>(roots: &[T], q_deg: usize) -> Vec<(Vec<T>, Vec<T>)> {
    let n = roots.len();
    (0..1u32 << n)
        .filter(|m| m.count_ones() as usize == q_deg)
        .map(|m| {
            let (a, b): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| m >> i & 1 == 1);
            (a.iter().map(|&i| roots[i].clone()).collect(), b.iter().map(|&i| roots[i].clone()).collect())
        })
        .collect()
}

fn c5_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut shift_cases, mut dual_cases) = (0, 0);
    for case in 0..500 {
        let deg = rng.gen_range(1..=3);
        let qd = rng.gen_range(0..=deg);
        let roots: Vec<i64> = (0..deg).map(|_| rng.gen_range(-3..=3)).collect();
        let (qr, sr) = roots.split_at(qd);
        let qs: Vec<Rat> = qr.iter().map(|&a| r(a)).collect();
        let ss: Vec<Rat> = sr.iter().map(|&a| r(a)).collect();
        let (q, s) = (Poly::from_roots(&qs), Poly::from_roots(&ss));
        let coprime = qr.iter().all(|a| !sr.contains(a));
        // Over a field with the shift identity.
        if coprime {
            shift_cases += 1;
            let all: Vec<Rat> = qs.iter().chain(&ss).cloned().collect();
            for k in 0..=deg {
                for (a, b) in splits(&all, k) {
                    let (q2, s2) = (Poly::from_roots(&a), Poly::from_roots(&b));
                    let m1 = r(-1);
                    let hyp = q.shift(&m1) * s.clone() == q2.shift(&m1) * s2.clone();
                    match recover_factors_check(&q, &s, &q2, &s2) {
                        Ok(eq) => check(hyp && eq, || format!("case {case}: recovery failed for {a:?} | {b:?}"))?,
                        Err(Error::HypothesisViolation(_)) => check(!hyp, || format!("case {case}: hypotheses hold"))?,
                        Err(e) => return Err(err(e)),
                    }
                }
            }
        } else {
            let e = recover_factors_check(&q, &s, &q, &s);
            check(matches!(e, Err(Error::HypothesisViolation(_))), || format!("case {case}: non-coprime accepted"))?;
        }
        // Over the dual numbers with comaximal cross pairs.
        dual_cases += 1;
        let lift = |v: &[i64]| -> Vec<DualNum> {
            v.iter().map(|&a| DualNum::new(r(a), Rat::new(a * 7 % 5, 3))).collect()
        };
        let (qd_roots, sd_roots) = (lift(qr), lift(sr));
        let (qq, sd) = (Poly::from_roots(&qd_roots), Poly::from_roots(&sd_roots));
        let res_q: BTreeSet<i64> = qr.iter().copied().collect();
        let res_s: BTreeSet<i64> = sr.iter().copied().collect();
        let disjoint = res_q.is_disjoint(&res_s);
        let rc = residue_coprime(&qq, &sd).map_err(err)?;
        check(rc == disjoint, || format!("case {case}: residue test {rc} vs disjoint {disjoint}"))?;
        let all: Vec<DualNum> = qd_roots.iter().chain(&sd_roots).cloned().collect();
        let mut accepted = 0;
        for (a, b) in splits(&all, qd) {
            let (q2, s2) = (Poly::from_roots(&a), Poly::from_roots(&b));
            match recover_factors_comaximal(&qq, &sd, &q2, &s2) {
                Ok(eq) => {
                    check(eq, || format!("case {case}: comaximal recovery failed"))?;
                    accepted += 1;
                }
                Err(Error::HypothesisViolation(_)) => {}
                Err(e) => return Err(err(e)),
            }
        }
        check(!disjoint || accepted >= 1, || format!("case {case}: original factorization rejected"))?;
    }
    Ok(format!("500 instances ({shift_cases} field, {dual_cases} dual)"))
}

fn c6_commutation() -> Outcome {
    let g = CharGroup::new(FieldShape::standard(1, 2));
    let sigmas = ["s0", "s1"];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut programs = 0;
    for n in 1..=4 {
        let params: Vec<Character> =
            (0..n).map(|i| Character::x_pow(&g, &[i as i64, 2 - i as i64]).unwrap()).collect();
        let d = TriangModule::split(params.clone()).map_err(err)?;
        let slots = 2 * n;
        for code in 0..3usize.pow(slots as u32) {
            let mut prog = Vec::new();
            let mut c = code;
            for slot in 0..slots {
                let k = (c % 3) as i64;
                c /= 3;
                for _ in 0..k {
                    prog.push(Step::new(slot / 2 + 1, sigmas[slot % 2], 1));
                }
            }
            let a = apply_program(&d, &prog, ProgramMode::Unchecked).map_err(err)?;
            let rev: Vec<Step> = prog.iter().rev().cloned().collect();
            let mut shuf = prog.clone();
            shuf.shuffle(&mut rng);
            let b = apply_program(&d, &rev, ProgramMode::Unchecked).map_err(err)?;
            let s = apply_program(&d, &shuf, ProgramMode::Unchecked).map_err(err)?;
            // Oracle: position p gains x_σ^{k} from every step with p ≥ n - i.
            let expect: Vec<Character> = (0..n)
                .map(|p| {
                    let e: Vec<i64> = (0..2)
                        .map(|si| prog.iter().filter(|st| st.sigma == sigmas[si] && p >= n - st.i).map(|st| st.k).sum())
                        .collect();
                    params[p].mul(&Character::x_pow(&g, &e).unwrap()).unwrap()
                })
                .collect();
            check(a.params() == b.params() && a.params() == s.params() && a.params() == &expect[..], || {
                format!("n = {n}, program {prog:?}")
            })?;
            programs += 1;
        }
    }
    Ok(format!("{programs} programs"))
}

fn c7_etale() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut etale_count = 0;
    for case in 0..500 {
        let n = rng.gen_range(1..=5);
        let h = descending(&mut rng, n, -4, 4);
        let mut uvals: Vec<Rat> = (0..n).map(|_| Rat::new(rng.gen_range(-6..=6), rng.gen_range(1..=2))).collect();
        if case % 2 == 0 {
            // Total degree zero, so only the prefix inequalities decide.
            let rest: Rat = uvals[1..].iter().cloned().sum::<Rat>() + r(h.iter().sum());
            uvals[0] = -rest;
        }
        let m = crys(&uvals, h);
        let a = etale_crys(&m).map_err(err)?;
        let b = brute_force_etale(&m).map_err(err)?;
        check(a.verdict == b.verdict && a.total == b.total, || format!("case {case}: {} vs {}", a.verdict, b.verdict))?;
        etale_count += a.verdict as usize;
    }
    // Twist solver on single steps for étale very generic modules.
    let mut solved = 0;
    let mut tried = 0;
    while tried < 200 {
        let n = rng.gen_range(2..=4);
        let mut u: Vec<i64> = (0..n - 1).map(|_| rng.gen_range(-2..=3)).collect();
        u.push(-u.iter().sum::<i64>());
        let mut decls = BTreeMap::new();
        for (i, &v) in u.iter().enumerate() {
            let mut w = BTreeMap::new();
            w.insert("s0".to_string(), Rat::new(1, i as i64 + 2));
            decls.insert(format!("v{i}"), GeneratorDecl { weights: w, uval: r(v), unit: false });
        }
        let g = CharGroup::with_generators(FieldShape::qp(), decls).unwrap();
        let params: Vec<Character> = (0..n).map(|i| Character::generator(&g, &format!("v{i}")).unwrap()).collect();
        let d = TriangModule::very_generic(params).map_err(err)?;
        if !etale_vgen(&d).map_err(err)?.verdict {
            continue;
        }
        tried += 1;
        let j = rng.gen_range(1..=n);
        let expect = Rat::new(-(j as i64), n as i64);
        let pv = etale_pullback_vgen(&d, j, "s0").map_err(err)?;
        check(pv.chi_uval == expect, || format!("pullback twist {} vs {}", pv.chi_uval, expect))?;
        let t = twist_to_etale(&d, &[Step::new(j, "s0", 1)]).map_err(err)?;
        check(t == pv.feasible.then(|| expect.clone()), || format!("u = {u:?}, j = {j}: solver {t:?}, criterion {}", pv.feasible))?;
        solved += t.is_some() as usize;
    }
    Ok(format!("500 instances ({etale_count} étale); 200 twists, {solved} feasible at -j/n, {} infeasible, all match the criterion", 200 - solved))
}

/// Jumps on the graded lines by the dimension formula
/// `dim(F ∩ V) = dim F + dim V - rank(F + V)`.
fn jumps_oracle(w: &[usize], flag: &Mat<Rat>, jumps: &[i64]) -> Vec<i64> {
    let n = w.len();
    let cols = flag.columns();
    let dim_cap = |k: usize, i: usize| -> usize {
        let mut vecs: Vec<Vec<Rat>> = cols[k..].to_vec();
        for &a in &w[..i] {
            vecs.push((0..n).map(|r| if r == a { Rat::one() } else { Rat::zero() }).collect());
        }
        let rank = if vecs.is_empty() { 0 } else { Mat::from_cols(n, &vecs).rank() };
        (n - k) + i - rank
    };
    (1..=n)
        .map(|i| {
            let k = (0..n).rev().find(|&k| dim_cap(k, i) > dim_cap(k, i - 1)).expect("some jump");
            jumps[k]
        })
        .collect()
}

fn c8_rearrangement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut swaps = 0;
    for n in 1..=5 {
        for _ in 0..4 {
            let flag = loop {
                let rows = (0..n)
                    .map(|_| (0..n).map(|_| Rat::new(rng.gen_range(-4..=4), rng.gen_range(1..=3))).collect())
                    .collect();
                let m = Mat::from_rows(rows).unwrap();
                if !m.det().is_zero() {
                    break m;
                }
            };
            let jumps: Vec<i64> = {
                let mut v = descending(&mut rng, n, -6, 6);
                v.reverse();
                v
            };
            for w in all_perms(n) {
                let j = flag_jumps(&w, &flag, &jumps).map_err(err)?;
                check(j == jumps_oracle(&w, &flag, &jumps), || format!("jumps of {w:?} disagree with the oracle"))?;
                let sorted = j.windows(2).all(|p| p[0] < p[1]);
                match adjacent_swap(&w, &flag, &jumps).map_err(err)? {
                    None => check(sorted, || format!("{w:?}: no swap for unsorted {j:?}"))?,
                    Some(i) => {
                        let mut expect = j.clone();
                        expect.swap(i, i + 1);
                        let got = jumps_oracle(&compose_adjacent(&w, i), &flag, &jumps);
                        check(!sorted && got == expect, || format!("{w:?}: swap at {i} gives {got:?}"))?;
                        swaps += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{swaps} swaps verified"))
}

fn dirs(rng: &mut ChaCha8Rng, n: usize) -> Vec<DeformDirection> {
    (0..n)
        .map(|_| DeformDirection::new(Rat::new(rng.gen_range(-9..=9), rng.gen_range(1..=3)), r(rng.gen_range(-9..=9))))
        .collect()
}

fn nc_base(rng: &mut ChaCha8Rng, n: usize, min_gap: i64) -> TriangModule {
    let uvals: Vec<Rat> = (0..n).map(|i| r(2 * i as i64 + 1)).collect();
    let mut h = vec![0i64; n];
    for i in (0..n.saturating_sub(1)).rev() {
        h[i] = h[i + 1] + rng.gen_range(min_gap..=min_gap + 2);
    }
    TriangModule::crystabelline(crys(&uvals, h), (0..n).collect()).unwrap()
}

fn c9_deformations() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..500 {
        let n = rng.gen_range(1..=4);
        let d = nc_base(&mut rng, n, 3);
        let mut w: Vec<usize> = (0..n).collect();
        w.shuffle(&mut rng);
        let a = ExtClassModel::new(d.clone(), w.clone(), dirs(&mut rng, n)).map_err(err)?;
        let b = ExtClassModel::new(d.clone(), w.clone(), dirs(&mut rng, n)).map_err(err)?;
        let s = baer_sum(&a, &b).map_err(err)?;
        let kap: Vec<Rat> = a.kappa().iter().zip(b.kappa()).map(|(x, y)| x + &y).collect();
        check(s.kappa() == kap, || format!("case {case}: κ is not additive"))?;
        let prog = [Step::new(rng.gen_range(1..=n), "s0", 1)];
        let ps = pullback_ext(&s, &prog).map_err(err)?;
        let sp = baer_sum(&pullback_ext(&a, &prog).map_err(err)?, &pullback_ext(&b, &prog).map_err(err)?).map_err(err)?;
        check(ps == sp && ps.kappa() == s.kappa(), || format!("case {case}: pullback is not a homomorphism"))?;
        // Oracle: ∏ (T - (h_i + (a_i + b_i) ε)) with h the induced weights of w.
        let h = a.hodge().map_err(err)?;
        let roots: Vec<DualNum> = (0..n)
            .map(|i| DualNum::new(h[i].clone(), &a.psis()[i].wtd + &b.psis()[i].wtd))
            .collect();
        check(sen_poly_deform(&s).map_err(err)? == Poly::from_roots(&roots), || format!("case {case}: Sen law"))?;
    }
    for n in 1..=5 {
        let w0 = longest(n);
        let (_, rho) = theta_rho(n);
        for _ in 0..100 {
            let xi: Vec<Rat> = (0..n).map(|_| Rat::new(rng.gen_range(-20..=20), rng.gen_range(1..=5))).collect();
            let (dot, _) = dot_actions(&w0, &act(&w0, &xi).map_err(err)?).map_err(err)?;
            let expect: Vec<Rat> = xi.iter().zip(&rho).map(|(x, p)| x - &(p + p)).collect();
            check(dot == expect, || format!("twist identity fails at {xi:?}"))?;
        }
    }
    let mut programs = 0;
    for n in 1..=5 {
        let g = CharGroup::new(FieldShape::qp());
        let base: Vec<i64> = (0..n as i64).map(|i| 10 - 3 * i).collect();
        let d = TriangModule::split(base.iter().map(|&a| Character::x_pow(&g, &[a]).unwrap()).collect()).map_err(err)?;
        for code in 0..4usize.pow(n as u32) {
            let k: Vec<i64> = (0..n).map(|i| (code / 4usize.pow(i as u32) % 4) as i64).collect();
            let prog: Vec<Step> = (0..n).filter(|&i| k[i] != 0).map(|i| Step::new(i + 1, "s0", k[i])).collect();
            let out = apply_program(&d, &prog, ProgramMode::Unchecked).map_err(err)?;
            let delta: Vec<Rat> = out.weights("s0").map_err(err)?.iter().zip(&base).map(|(a, &b)| a - &r(b)).collect();
            let diff: Vec<Rat> = translation_diff(&k).iter().rev().map(|&x| r(x)).collect();
            check(delta == diff, || format!("k = {k:?}: {delta:?} vs {diff:?}"))?;
            programs += 1;
        }
    }
    Ok(format!("500 classes, 500 ξ, {programs} programs"))
}

fn c10_intertwining() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..100 {
        let n = rng.gen_range(1..=4);
        let d = nc_base(&mut rng, n, 4);
        let len = rng.gen_range(0..=2);
        let prog: Vec<Step> = (0..len).map(|_| Step::new(rng.gen_range(1..=n), "s0", rng.gen_range(1..=1))).collect();
        let samples: Vec<Vec<DeformDirection>> = (0..2).map(|_| dirs(&mut rng, n)).collect();
        let rep = intertwine_check(&d, &prog, &samples).map_err(err)?;
        check(rep.passed, || format!("case {case}: {rep:?}"))?;
    }
    // Programs that close a gap are rejected at the first bad position.
    let mut rejected = 0;
    for case in 0..100 {
        let n = rng.gen_range(2..=4);
        let d = nc_base(&mut rng, n, 1);
        let i = rng.gen_range(1..n);
        let c = d.crys().unwrap();
        let h: Vec<Rat> = c.module.weights()[0].iter().map(|&x| r(x)).collect();
        let gap = (&h[n - i - 1] - &h[n - i]).to_i64().unwrap();
        let prog = vec![Step::new(i, "s0", gap)];
        let h2: Vec<Rat> = (0..n).map(|p| if p >= n - i { &h[p] + &r(gap) } else { h[p].clone() }).collect();
        let expect = (0..n - 1).find(|&p| h2[p] <= h2[p + 1]).map(|p| p + 1);
        check(expect.is_some() && first_gap_violation(&h2) == expect, || format!("case {case}: oracle disagrees"))?;
        match intertwine_check(&d, &prog, &[dirs(&mut rng, n)]) {
            Err(Error::RegularityLost { position, next, .. }) => {
                check(Some(position) == expect && next == position + 1, || format!("case {case}: gap {position}"))?;
                rejected += 1;
            }
            other => return Err(format!("case {case}: expected rejection, got {other:?}")),
        }
    }
    Ok(format!("100 bases pass, {rejected} regularity-breaking programs rejected"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 rank-one cohomology table", c1_cohomology),
        ("2 split pullback example", c2_intro),
        ("3 triangulation counts", c3_counts),
        ("4 lattice modification", c4_wu),
        ("5 coprime factor recovery", c5_recovery),
        ("6 program commutation", c6_commutation),
        ("7 étaleness equivalence", c7_etale),
        ("8 rearrangement", c8_rearrangement),
        ("9 deformation algebra", c9_deformations),
        ("10 intertwining", c10_intertwining),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS criterion {name}: {msg} [{secs:.2}s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg} [{secs:.2}s]");
            }
        }
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
