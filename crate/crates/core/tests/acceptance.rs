//! Acceptance run: one line per criterion with its measured time against a
//! pinned limit. Exits nonzero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use meettree::amalgam::{amalgamate, identity};
use meettree::dommonoid::{class_of_tuple, AnyElement, ConeMultiset, Count, Mode, MonoidElement};
use meettree::expansion::formula::random_formula;
use meettree::expansion::{
    cone_quotient, decorate_random, eval_formula, generic_point_types, parse_formula, validate_expansion,
    ExpansionViolation, Formula, Position, RelSym, Signature, Structure, TameContext,
};
use meettree::io::{structure_from_json, structure_to_json, to_dot};
use meettree::qftype::{meet_witness, qf_type_of, wb_check, EnumOptions, QfError, QfType};
use meettree::symtype::{
    classify_point, relate, symbolic_catalog, Graft, Kind, Relation, Side, SymbolicType1,
};
use meettree::tree::{random_meet_closed, random_tree_with, MeetTree, NodeId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(id: u32, name: &str, limit: Duration, f: fn() -> Outcome) -> bool {
    let t0 = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let el = t0.elapsed();
    let (ok, detail) = match res {
        Ok(d) if el <= limit => (true, d),
        Ok(d) => (false, format!("{d}; over the time limit")),
        Err(e) => (false, e),
    };
    println!(
        "[{}] {id:>2} {name}: {detail} ({:.2}s / limit {}s)",
        if ok { "PASS" } else { "FAIL" },
        el.as_secs_f64(),
        limit.as_secs()
    );
    ok
}

fn main() -> ExitCode {
    let all: [(u32, &str, u64, fn() -> Outcome); 10] = [
        (1, "meet agrees with the ancestor oracle", 10, meet_oracle),
        (2, "closure bound", 5, closure_bound),
        (3, "witness postconditions", 30, witness_checks),
        (4, "weak binarity, exhaustive", 300, weak_binarity),
        (5, "cone-expansion validity", 30, expansion_validity),
        (6, "tameness", 120, tameness),
        (7, "trichotomy", 1, trichotomy),
        (8, "monoid laws and order", 10, monoid_laws),
        (9, "decomposition homomorphism", 60, homomorphism),
        (10, "serialization round trips", 10, serialization),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, secs, f) in all {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        if !run(id, name, Duration::from_secs(secs), f) {
            failed += 1;
        }
    }
    println!("acceptance: {failed} failing");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn meet_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pairs = 0u64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=200);
        let t = random_tree_with(n, &mut rng);
        let anc = ancestor_table(&t);
        for a in 0..n {
            for b in 0..n {
                let want = naive_meet(&t, &anc, a, b);
                ensure(t.meet_idx(a, b) == want, || {
                    format!("meet({}, {}) differs from {}", t.name(a), t.name(b), t.name(want))
                })?;
            }
        }
        pairs += (n * n) as u64;
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let by_name = t.meet(t.name(a), t.name(b)).map_err(|e| e.to_string())?;
        ensure(by_name == t.name(naive_meet(&t, &anc, a, b)), || "named meet differs".into())?;
    }
    Ok(format!("1000 trees, {pairs} pairs exact"))
}

fn closure_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=80);
        let t = random_tree_with(n, &mut rng);
        let k = rng.gen_range(1..=8.min(n));
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let a: BTreeSet<usize> = all.into_iter().take(k).collect();
        let cl = t.meet_closure_idx(&a);
        ensure(cl == naive_closure(&t, &ancestor_table(&t), &a), || "closure differs from the fixpoint".into())?;
        ensure(cl.len() <= 2 * k, || format!("|cl(A)| = {} > 2·{k}", cl.len()))?;
        worst = worst.max(cl.len() as f64 / k as f64);
    }
    Ok(format!("1000 instances, max |cl(A)|/|A| = {worst:.2}"))
}

fn witness_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut accepted, mut rejected) = (0, 0);
    while accepted < 500 {
        let n = rng.gen_range(2..=30);
        let t = random_tree_with(n, &mut rng);
        let k = rng.gen_range(1..=n.min(6));
        let m = random_meet_closed(&t, k, rng.gen_bool(0.5), &mut rng);
        let b: Vec<usize> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(0..n)).collect();
        match meet_witness(&t, &m, &b) {
            Err(QfError::CutUncovered { .. }) => rejected += 1,
            Err(e) => return Err(e.to_string()),
            Ok(w) => {
                witness_postconditions(&t, &m, &b, &w)?;
                accepted += 1;
            }
        }
    }
    Ok(format!("500 accepted instances verified, {rejected} rejected as uncovered"))
}

#[derive(Default)]
struct WbTally {
    checked: usize,
    uncovered: usize,
}

fn wb_one(s: &Structure, m: &BTreeSet<usize>, b0: &[usize], b1: &[usize], tally: &mut WbTally) -> Result<(), String> {
    match wb_check(s, m, b0, b1, Some(EnumOptions::default())) {
        Err(QfError::CutUncovered { .. }) => {
            tally.uncovered += 1;
            Ok(())
        }
        Err(e) => Err(format!("{e} on {}", structure_to_json(s))),
        Ok(rep) => {
            let n = rep.completions.as_ref().map_or(0, Vec::len);
            ensure(rep.agree(), || {
                format!(
                    "disagreement ({n} completions) for {:?} | {:?} on {}",
                    b0.iter().map(|&i| s.tree.name(i)).collect::<Vec<_>>(),
                    b1.iter().map(|&i| s.tree.name(i)).collect::<Vec<_>>(),
                    structure_to_json(s)
                )
            })?;
            tally.checked += 1;
            Ok(())
        }
    }
}

fn weak_binarity() -> Outcome {
    let is_base = |t: &MeetTree, x: usize| t.name(x).starts_with('m');
    let (mut pure, mut dtr) = (WbTally::default(), WbTally::default());
    let (mut extensions, mut raw) = (0, 0);
    let mut seen = BTreeSet::new();
    for base in all_trees(4) {
        for n in all_extensions(&base, 3) {
            extensions += 1;
            let m: BTreeSet<usize> = (0..n.len()).filter(|&x| is_base(&n, x)).collect();
            let news: Vec<usize> = (0..n.len()).filter(|x| !m.contains(x)).collect();
            let sp = splits(&news);
            let s = Structure::pure(n.clone());
            for (b0, b1) in &sp {
                wb_one(&s, &m, b0, b1, &mut pure)?;
            }
            // every decoration of the open-cone pairs, checked once per
            // isomorphism class of the closure of M ∪ b0 ∪ b1
            let cps = cone_pairs(&n);
            for mask in 0..1u32 << cps.len() {
                let chosen: Vec<_> = (0..cps.len()).filter(|j| mask >> j & 1 == 1).map(|j| cps[j]).collect();
                let s = decorate(&n, &chosen);
                for (b0, b1) in &sp {
                    raw += 1;
                    let mut keep = m.clone();
                    keep.extend(b0.iter().chain(b1).copied());
                    let (r, old) = s.restrict(&n.meet_closure_idx(&keep)).map_err(|e| e.to_string())?;
                    let label = |x: usize| {
                        let o = old[x];
                        if let Some(i) = b0.iter().position(|&y| y == o) {
                            Some(format!("0.{i}"))
                        } else if let Some(i) = b1.iter().position(|&y| y == o) {
                            Some(format!("1.{i}"))
                        } else {
                            is_base(&n, o).then(|| n.name(o).to_string())
                        }
                    };
                    if !seen.insert(decorated_code(&r, &label)) {
                        continue;
                    }
                    let pos = |v: &[usize]| -> Vec<usize> {
                        v.iter().map(|y| old.iter().position(|o| o == y).unwrap()).collect()
                    };
                    let rm: BTreeSet<usize> = (0..r.tree.len()).filter(|&x| is_base(&n, old[x])).collect();
                    wb_one(&r, &rm, &pos(b0), &pos(b1), &mut dtr)?;
                }
            }
        }
    }
    Ok(format!(
        "{extensions} extensions; pure: {} splits agree, {} uncovered; DTR: {} of {} decorated splits unique up to isomorphism, {} agree, {} uncovered",
        pure.checked,
        pure.uncovered,
        seen.len(),
        raw,
        dtr.checked,
        dtr.uncovered
    ))
}

fn expansion_validity() -> Outcome {
    let sig = Signature::new(vec![RelSym::symmetric("R"), RelSym::directed("S")]).map_err(|e| e.to_string())?;
    let mut mutations = 0;
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=25);
        let t = random_tree_with(n, &mut rng);
        let density = rng.gen_range(0.0..=1.0);
        let (s, _) = decorate_random(&t, &sig, density, seed).map_err(|e| e.to_string())?;
        validate_expansion(&s).map_err(|e| format!("seed {seed}: {e}"))?;
        for (_, cx, cy) in cone_pairs(&t) {
            let (xs, ys) = (t.subtree(cx), t.subtree(cy));
            if xs.len() * ys.len() < 2 {
                continue;
            }
            let x = *xs.choose(&mut rng).unwrap();
            let y = *ys.choose(&mut rng).unwrap();
            for rel in ["R", "S"] {
                let mut bad = s.clone();
                let pairs: &[(usize, usize)] = if rel == "R" { &[(x, y), (y, x)] } else { &[(x, y)] };
                for &(a, b) in pairs {
                    if s.holds(rel, a, b) {
                        bad.remove_raw_fact(rel, a, b);
                    } else {
                        bad.add_raw_fact(rel, a, b).map_err(|e| e.to_string())?;
                    }
                }
                ensure(
                    matches!(validate_expansion(&bad), Err(ExpansionViolation::ConeInvariance { .. })),
                    || format!("seed {seed}: flipping {rel}({}, {}) was accepted", t.name(x), t.name(y)),
                )?;
                mutations += 1;
            }
        }
    }
    Ok(format!("1000 seeds valid, {mutations} single-pair mutations rejected"))
}

/// Goodness of every solution outside `d`, read directly off the definition:
/// existing nodes above it and generic new points above or in a new cone
/// above each of them.
fn literal_tame(s: &Structure, f: &Formula, d: &[NodeId], cache: &mut BTreeMap<(usize, bool), Vec<QfType>>) -> Result<(), String> {
    let t = &s.tree;
    let d = t.indices(d).map_err(|e| e.to_string())?;
    let ev = |st: &Structure, x: usize| eval_formula(st, f, x).map_err(|e| e.to_string());
    for a in 0..t.len() {
        if !ev(s, a)? || d.iter().any(|&x| t.leq(a, x)) {
            continue;
        }
        for b in t.subtree(a) {
            ensure(ev(s, b)?, || format!("`{f}`: {} fails above solution {}", t.name(b), t.name(a)))?;
            for cone in [false, true] {
                let types = match cache.get(&(b, cone)) {
                    Some(v) => v,
                    None => {
                        let pos = if cone {
                            Position::NewConeAbove(t.name(b).into())
                        } else {
                            Position::Above(t.name(b).into())
                        };
                        let v = generic_point_types(s, &pos).map_err(|e| e.to_string())?;
                        cache.entry((b, cone)).or_insert(v)
                    }
                };
                for q in types {
                    let r = q.to_structure().map_err(|e| e.to_string())?;
                    ensure(ev(&r.structure, r.var_nodes[0])?, || {
                        format!("`{f}`: a generic point above {} fails", t.name(b))
                    })?;
                }
            }
        }
    }
    Ok(())
}

fn tameness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rels = vec!["R".to_string()];
    let (mut formulas, mut pairs, mut literal) = (0, 0, 0);
    let mut sizes = BTreeMap::new();
    for round in 0..40u64 {
        let n = rng.gen_range(2..=20);
        let t = random_tree_with(n, &mut rng);
        let (s, _) = decorate_random(&t, &Signature::dtr(), rng.gen_range(0.2..0.8), round).map_err(|e| e.to_string())?;
        let ctx = TameContext::new(&s).map_err(|e| e.to_string())?;
        let mut cache = BTreeMap::new();
        let mut found: Vec<(Formula, Vec<NodeId>)> = Vec::new();
        for i in 0..5 {
            let k = rng.gen_range(1..=4.min(n));
            let mut names = t.names().to_vec();
            names.shuffle(&mut rng);
            names.truncate(k);
            let f = random_formula(&mut rng, &names, &rels, 3);
            let (rep, inside) = ctx.search(&f).map_err(|e| e.to_string())?;
            ensure(rep.ok() && inside, || format!("`{f}` has no witness in its parameter closure"))?;
            ensure(ctx.check(&f, &rep.witness).map_err(|e| e.to_string())?.ok(), || {
                format!("`{f}`: the found witness does not check")
            })?;
            if i == 0 {
                literal_tame(&s, &f, &rep.witness, &mut cache)?;
                literal += 1;
            }
            *sizes.entry(rep.witness.len()).or_insert(0) += 1;
            found.push((f, rep.witness));
            formulas += 1;
        }
        for i in 0..found.len() {
            let (f, df) = &found[i];
            let (g, dg) = &found[(i + 1) % found.len()];
            let mut d = df.clone();
            d.extend(dg.iter().cloned());
            for h in [Formula::and(f.clone(), g.clone()), Formula::or(f.clone(), g.clone())] {
                ensure(ctx.check(&h, &d).map_err(|e| e.to_string())?.ok(), || {
                    format!("`{h}` is not tamed by the union of witnesses")
                })?;
            }
            pairs += 1;
        }
    }
    let fig = structure_from_json(include_str!("fixtures/fig1_r.json")).map_err(|e| e.to_string())?;
    let meet_fixture = {
        let t = MeetTree::from_edges(&[("r", None), ("g", Some("r")), ("c0", Some("g")), ("c1", Some("g")), ("u", Some("r"))])
            .map_err(|e| e.to_string())?;
        let mut s = Structure::new(t, Signature::dtr());
        s.add_fact_named("R", "c0", "c1").map_err(|e| e.to_string())?;
        s
    };
    let fixtures: [(&Structure, &str, &[&str]); 3] = [
        (&fig, "R(x, c)", &[]),
        (&fig, "!R(x, c)", &["c"]),
        (&meet_fixture, "R(x ^ c0, x ^ c1)", &["c0", "c1"]),
    ];
    for (s, src, d) in fixtures {
        let f = parse_formula(src).map_err(|e| e.to_string())?;
        let d: Vec<NodeId> = d.iter().map(|x| x.to_string()).collect();
        let ctx = TameContext::new(s).map_err(|e| e.to_string())?;
        ensure(ctx.check(&f, &d).map_err(|e| e.to_string())?.ok(), || format!("fixture `{src}` fails"))?;
        literal_tame(s, &f, &d, &mut BTreeMap::new())?;
    }
    let neg = parse_formula("!R(x, c)").map_err(|e| e.to_string())?;
    ensure(!TameContext::new(&fig).map_err(|e| e.to_string())?.check(&neg, &[]).map_err(|e| e.to_string())?.ok(), || {
        "`!R(x, c)` passes without a witness".into()
    })?;
    Ok(format!(
        "{formulas} formulas tamed inside the parameter closure (witness sizes {sizes:?}), {pairs} ∧/∨ pairs, 3 fixtures, {literal} literal re-checks"
    ))
}

fn trichotomy() -> Outcome {
    let cat = symbolic_catalog();
    let realised = |p: &SymbolicType1| p.kind() == Kind::Realised;
    let mut counts = BTreeMap::new();
    for p in &cat {
        for q in &cat {
            let r = relate(p, q);
            ensure(r == relate(q, p), || format!("relate is not symmetric on {} / {}", p.to_json(), q.to_json()))?;
            ensure((r == Relation::RealisedAbsorbed) == (realised(p) || realised(q)), || {
                format!("wrong absorption verdict on {} / {}", p.to_json(), q.to_json())
            })?;
            *counts.entry(format!("{r:?}")).or_insert(0) += 1;
        }
    }
    let live: Vec<&SymbolicType1> = cat.iter().filter(|p| !realised(p)).collect();
    let eq = |p: &SymbolicType1, q: &SymbolicType1| relate(p, q) == Relation::DomEquivalent;
    for p in &live {
        ensure(eq(p, p), || format!("{} is not equivalent to itself", p.to_json()))?;
        for q in &live {
            if !eq(p, q) {
                continue;
            }
            for r in &live {
                ensure(!eq(q, r) || eq(p, r), || "domination-equivalence is not transitive".into())?;
            }
        }
    }
    for p in &live {
        for q in &live {
            if p.cut() != q.cut() {
                ensure(relate(p, q) == Relation::Orthogonal, || "distinct cuts are not orthogonal".into())?;
            }
            let same_cone = p.cut() == q.cut() && p.cone() == q.cone();
            let forced = match (p.kind(), q.kind()) {
                (Kind::IIIa, Kind::Ia) if p.cut() == q.cut() => Some(Relation::DomEquivalent),
                (Kind::IIIb, Kind::Ib) if same_cone => Some(Relation::DomEquivalent),
                (Kind::Ib | Kind::IIIb, Kind::II) if p.cut() == q.cut() => Some(Relation::Orthogonal),
                (Kind::Ib | Kind::IIIb, Kind::Ib | Kind::IIIb) if p.cut() == q.cut() && p.cone() != q.cone() => {
                    Some(Relation::Orthogonal)
                }
                _ => None,
            };
            if let Some(want) = forced {
                ensure(relate(p, q) == want, || format!("{} / {} should be {want:?}", p.to_json(), q.to_json()))?;
            }
        }
    }
    Ok(format!("{} catalog types, {} pairs: {counts:?}", cat.len(), cat.len() * cat.len()))
}

fn graft_pool() -> Vec<Graft> {
    let mut out = Vec::new();
    for cut in ["C1", "C2", "C3"] {
        for side in [Side::Upper, Side::Lower] {
            out.push(Graft {
                cut: cut.into(),
                cone: None,
                side,
            });
        }
        for cone in ["k0", "k1"] {
            out.push(Graft {
                cut: cut.into(),
                cone: Some(cone.into()),
                side: Side::Lower,
            });
        }
    }
    out
}

fn random_count<R: Rng>(rng: &mut R, pool: &[Graft]) -> MonoidElement<Count> {
    let grafts: Vec<Graft> = (0..rng.gen_range(0..4)).map(|_| pool.choose(rng).unwrap().clone()).collect();
    let sprouts: Vec<(NodeId, Count)> = (0..rng.gen_range(0..3))
        .map(|_| (format!("g{}", rng.gen_range(0..4)), Count(rng.gen_range(0..4))))
        .collect();
    MonoidElement::new(grafts, sprouts)
}

fn random_multiset<R: Rng>(rng: &mut R, pool: &[Graft]) -> MonoidElement<ConeMultiset> {
    let grafts: Vec<Graft> = (0..rng.gen_range(0..3)).map(|_| pool.choose(rng).unwrap().clone()).collect();
    let profiles = ["{}", "{R(x,a)}", "{R(x,b)}"];
    let sprouts: Vec<(NodeId, ConeMultiset)> = (0..rng.gen_range(0..3))
        .map(|_| {
            let v = ConeMultiset::from_counts(
                (0..rng.gen_range(0..3)).map(|_| (profiles.choose(rng).unwrap().to_string(), rng.gen_range(1..3))),
            );
            (format!("g{}", rng.gen_range(0..3)), v)
        })
        .collect();
    MonoidElement::new(grafts, sprouts)
}

fn laws<S>(xs: &[MonoidElement<S>]) -> Result<usize, String>
where
    S: meettree::dommonoid::SproutMonoid + std::fmt::Debug + PartialEq + Clone,
{
    let e = MonoidElement::<S>::empty();
    let mut absorbed = 0;
    for w in xs.windows(3) {
        let (x, y, z) = (&w[0], &w[1], &w[2]);
        ensure(x.mul(y).mul(z) == x.mul(&y.mul(z)), || format!("associativity fails at {x}, {y}, {z}"))?;
        ensure(x.mul(y) == y.mul(x), || format!("commutativity fails at {x}, {y}"))?;
        ensure(x.mul(&e) == *x && e.mul(x) == *x, || format!("identity fails at {x}"))?;
        ensure(x.leq(x) && x.leq(&x.mul(y)), || format!("{x} is not below {x} · {y}"))?;
        ensure(!(x.leq(y) && y.leq(z)) || x.leq(z), || "order is not transitive".into())?;
        ensure(!(x.leq(y) && y.leq(x)) || x == y, || "order is not antisymmetric".into())?;
        for g in x.grafts() {
            let one = MonoidElement::<S>::graft(g.clone());
            ensure(one.mul(&one) == one, || format!("graft {g} is not idempotent"))?;
        }
        ensure(x.mul(x).grafts() == x.grafts(), || "grafts of x · x differ from those of x".into())?;
        if x.wort(y) {
            let xy = x.mul(y);
            let disjoint = xy.grafts().len() == x.grafts().len() + y.grafts().len()
                && xy.sprouts().len() == x.sprouts().len() + y.sprouts().len();
            ensure(disjoint && xy.leq(&xy) && x.leq(&xy) && y.leq(&xy), || format!("{x} ⊥ {y} is not a disjoint union"))?;
            ensure(!xy.leq(x) || y.is_empty(), || format!("{x} absorbs the nonempty {y}"))?;
            absorbed += 1;
        }
    }
    Ok(absorbed)
}

fn monoid_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pool = graft_pool();
    let counts: Vec<_> = (0..10_000).map(|_| random_count(&mut rng, &pool)).collect();
    let sets: Vec<_> = (0..10_000).map(|_| random_multiset(&mut rng, &pool)).collect();
    let a = laws(&counts)?;
    let b = laws(&sets)?;
    for g in ["g0", "g1"] {
        for n in 1..=5u64 {
            for m in 1..n {
                let (sn, sm) = (MonoidElement::sprout(g, Count(n)), MonoidElement::sprout(g, Count(m)));
                ensure(!sn.leq(&sm) && sm.leq(&sn), || format!("s[{g}]^{n} vs s[{g}]^{m}"))?;
                let one = || ConeMultiset::single("{}");
                let pow = |k: u64| (1..k).fold(MonoidElement::sprout(g, one()), |acc, _| acc.mul(&MonoidElement::sprout(g, one())));
                ensure(!pow(n).leq(&pow(m)) && pow(m).leq(&pow(n)), || format!("cone sprouts s[{g}]^{n} vs ^{m}"))?;
            }
        }
        let s = MonoidElement::sprout(g, Count(1));
        ensure(!s.wort(&s), || "a sprout is orthogonal to itself".into())?;
    }
    Ok(format!("20000 elements in two sprout monoids, {} orthogonal pairs absorbed correctly", a + b))
}

/// Profiles of the least new points in new cones above each apex, rebuilt
/// from the cone quotients.
fn profiles_from_quotient(s: &Structure, m: &BTreeSet<usize>, b: &[usize]) -> Result<BTreeMap<NodeId, ConeMultiset>, String> {
    let t = &s.tree;
    let anc = ancestor_table(t);
    let mut all = m.clone();
    all.extend(b.iter().copied());
    let new: BTreeSet<usize> = naive_closure(t, &anc, &all).difference(m).copied().collect();
    let depth = |x: usize| anc[x].iter().filter(|&&v| v).count();
    let child_towards = |g: usize, x: usize| {
        let mut u = x;
        while t.parent(u) != Some(g) {
            u = t.parent(u).unwrap();
        }
        u
    };
    let mut out: BTreeMap<NodeId, BTreeMap<String, u64>> = BTreeMap::new();
    for &e in &new {
        let Some(g) = m.iter().copied().filter(|&x| anc[e][x]).max_by_key(|&x| depth(x)) else {
            continue;
        };
        if m.iter().any(|&x| naive_meet(t, &anc, x, e) != g && anc[naive_meet(t, &anc, x, e)][g])
            || new.iter().any(|&f| f != e && anc[e][f] && anc[f][g] && f != g)
        {
            continue;
        }
        let q = cone_quotient(s, t.name(g)).map_err(|e| e.to_string())?;
        let ce = t.name(child_towards(g, e)).to_string();
        let mut least: BTreeMap<usize, usize> = BTreeMap::new();
        for &x in m.iter().filter(|&&x| x != g && anc[x][g]) {
            let c = child_towards(g, x);
            let cur = least.entry(c).or_insert(x);
            if depth(x) < depth(*cur) {
                *cur = x;
            }
        }
        let mut atoms: Vec<String> = least
            .iter()
            .filter(|(c, _)| q.edges["R"].contains(&(ce.clone(), t.name(**c).to_string())))
            .map(|(_, k)| format!("R(x,{})", t.name(*k)))
            .collect();
        atoms.sort();
        *out.entry(t.name(g).to_string())
            .or_default()
            .entry(format!("{{{}}}", atoms.join(",")))
            .or_insert(0) += 1;
    }
    Ok(out.into_iter().map(|(g, c)| (g, ConeMultiset::from_counts(c))).collect())
}

fn homomorphism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sprouting = 0;
    for seed in 0..300u64 {
        let base = random_tree_with(rng.gen_range(1..=6), &mut rng);
        let tb = random_extension(&base, rng.gen_range(1..=3), "p", true, &mut rng);
        let tc = random_extension(&base, rng.gen_range(1..=3), "q", true, &mut rng);
        let id = identity(&base);
        let d = amalgamate(&base, &tb, &tc, &id, &id).map_err(|e| e.to_string())?;
        let t = &d.tree;
        let pick = |names: Vec<&str>, rng: &mut ChaCha8Rng| -> Vec<usize> {
            let mut v: Vec<usize> = names.into_iter().map(|n| t.idx(n).unwrap()).collect();
            v.shuffle(rng);
            v.truncate(rng.gen_range(1..=v.len()));
            v
        };
        let b0 = pick(tb.names().iter().filter(|n| n.starts_with('p')).map(|n| d.from_b[n].as_str()).collect(), &mut rng);
        let b1 = pick(tc.names().iter().filter(|n| n.starts_with('q')).map(|n| d.from_c[n].as_str()).collect(), &mut rng);
        let m = t.indices(base.names()).map_err(|e| e.to_string())?;
        let b: Vec<usize> = b0.iter().chain(&b1).copied().collect();
        let pure = Structure::pure(t.clone());
        let (dec, _) = decorate_random(t, &Signature::dtr(), 0.5, seed).map_err(|e| e.to_string())?;
        for (s, mode) in [(&pure, Mode::Pure), (&dec, Mode::Expansion)] {
            let class = |v: &[usize]| class_of_tuple(s, &m, v, mode).map_err(|e| e.to_string());
            let whole = class(&b)?;
            let prod = class(&b0)?.mul(&class(&b1)?).map_err(|e| e.to_string())?;
            ensure(whole == prod, || {
                format!("seed {seed}: class {} but product {}", whole.render(), prod.render())
            })?;
            if let AnyElement::Expansion(x) = &whole {
                let want = profiles_from_quotient(s, &m, &b)?;
                ensure(*x.sprouts() == want, || format!("seed {seed}: sprout profiles {} differ from the quotients", x.render()))?;
                sprouting += usize::from(!want.is_empty());
            }
        }
    }
    Ok(format!("300 amalgamated pairs in both modes, {sprouting} with sprouts checked against cone quotients"))
}

fn serialization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut artifacts = 0;
    for seed in 0..250u64 {
        let n = rng.gen_range(1..=15);
        let t = random_tree_with(n, &mut rng);
        let m = random_meet_closed(&t, rng.gen_range(1..=n.min(4)), true, &mut rng);
        let (s, _) = decorate_random(&t.with_base_idx(m.clone()).map_err(|e| e.to_string())?, &Signature::dtr(), 0.5, seed)
            .map_err(|e| e.to_string())?;
        let j = structure_to_json(&s);
        let back = structure_from_json(&j).map_err(|e| e.to_string())?;
        ensure(back == s && structure_to_json(&back) == j, || format!("structure round trip changed {j}"))?;

        let b: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..n)).collect();
        let q = qf_type_of(&s, &m, &b).map_err(|e| e.to_string())?;
        let qj = q.to_json().map_err(|e| e.to_string())?;
        let qb = QfType::from_json(&qj).map_err(|e| e.to_string())?;
        ensure(qb == q && qb.to_json().map_err(|e| e.to_string())? == qj, || format!("type round trip changed {qj}"))?;

        let p = classify_point(&s.tree, &m, b[0]).map_err(|e| e.to_string())?;
        let pj = p.to_json();
        let pb = SymbolicType1::from_json(&pj).map_err(|e| e.to_string())?;
        ensure(pb == p && pb.to_json() == pj, || format!("symbolic type round trip changed {pj}"))?;

        let u = class_of_tuple(&s, &m, &b, if seed % 2 == 0 { Mode::Pure } else { Mode::Expansion })
            .map_err(|e| e.to_string())?;
        let uj = u.to_json();
        let ub = AnyElement::from_json(&uj).map_err(|e| e.to_string())?;
        // without sprouts the two modes share one encoding
        let same = ub == u || u.render() == ub.render() && !uj.contains("\"sprouts\":{\"");
        ensure(same && ub.to_json() == uj, || format!("monoid round trip changed {uj}"))?;

        let dot = to_dot(&s.tree);
        let g = dot::parse(&dot).map_err(|e| format!("{e} in {dot}"))?;
        let edges: BTreeSet<(String, String)> = g.edges.iter().cloned().collect();
        let want: BTreeSet<(String, String)> = (0..n)
            .filter_map(|i| s.tree.parent(i).map(|p| (s.tree.name(i).to_string(), s.tree.name(p).to_string())))
            .collect();
        let triangles: BTreeSet<String> = g
            .nodes
            .iter()
            .filter(|(_, a)| a.iter().any(|(k, v)| k == "shape" && v == "triangle"))
            .map(|(id, _)| id.clone())
            .collect();
        ensure(
            g.directed && g.nodes.len() == n && edges == want && triangles == s.tree.base_names().into_iter().collect(),
            || format!("DOT output does not describe the tree: {dot}"),
        )?;
        artifacts += 5;
    }
    Ok(format!("{artifacts} artifacts round-trip byte for byte, 250 DOT graphs parse"))
}
