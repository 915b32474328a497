//! One seeded case per call. Each check returns `Err` with a description
//! of the counterexample, so the property suites and the acceptance
//! runner can share them.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use relens::backend::{naive_dml, sql_dml, Interpreter, TableStore};
use relens::delta::{
    ddifference, djoin, dmerge, dproject, drename, drevise, dselect, oracle_delta, oracle_delta2,
    oracle_query_delta, query_deval, DeltaEnv,
};
use relens::fdeps::{FunDep, FunDepSet};
use relens::lenses::{
    lens_delta_get, lens_delta_put, lens_delta_put_in, lens_delta_put_reference, lens_get,
    lens_put_drop_bohannon, lens_put_naive, RelationType, Tree,
};
use relens::{DeltaRelation, Predicate, QueryExpr, Relation};

use super::*;

pub type Check = fn(u64) -> Result<(), String>;

/// Largest table used by the lens checks.
pub const MAX_ROWS: usize = 40;

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn same<T: PartialEq + std::fmt::Debug>(got: T, want: T, ctx: &dyn std::fmt::Display) -> Result<(), String> {
    ensure(got == want, || format!("{ctx}\n  got  {got:?}\n  want {want:?}"))
}

fn ok<T>(r: relens::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn view_deltas(case: &Case, v2: &Tree<Relation>) -> Tree<DeltaRelation> {
    v2.zip_with(&case.view(), DeltaRelation::diff).unwrap()
}

// Lens laws

pub fn get_put(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let case = random_pipeline(&mut r, 3, MAX_ROWS);
    let v = ok(lens_get(&case.lens, &case.source))?;
    same(ok(lens_put_naive(&case.lens, &case.source, &v))?, case.source.clone(), &case.lens)
}

pub fn put_get(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let case = random_pipeline(&mut r, 3, MAX_ROWS);
    let v2 = random_view_updates(&mut r, &case);
    let s2 = ok(lens_put_naive(&case.lens, &case.source, &v2))?;
    ok(case.lens.source().conforms(&s2))?;
    same(ok(lens_get(&case.lens, &s2))?, v2, &case.lens)
}

/// `put(s, get(s) ⊕ Δv) = s ⊕ δput(s, Δv)`, and the source delta maps
/// back to the view delta.
pub fn delta_put_get(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let case = random_pipeline(&mut r, 3, MAX_ROWS);
    let v2 = random_view_updates(&mut r, &case);
    let dv = view_deltas(&case, &v2);
    let ds = ok(lens_delta_put_in(&case.lens, &case.source, &dv))?;
    let s2 = ok(lens_put_naive(&case.lens, &case.source, &v2))?;
    let applied = ok(case.source.zip_with(&ds, |m, d| d.apply_to(m)))?;
    same(&applied, &s2, &case.lens)?;
    same(ok(lens_delta_get(&case.lens, &case.source, &ds, false))?, dv, &case.lens)
}

/// The optimised `δput` of one primitive against `put(s, get(s) ⊕ Δv) ⊖ s`.
pub fn optimised_primitive(which: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let case = random_primitive(&mut r, which, MAX_ROWS);
    let v2 = random_view_updates(&mut r, &case);
    let dv = view_deltas(&case, &v2);
    let got = ok(lens_delta_put_in(&case.lens, &case.source, &dv))?;
    let s2 = ok(lens_put_naive(&case.lens, &case.source, &v2))?;
    let want = s2.zip_with(&case.source, DeltaRelation::diff).unwrap();
    same(&got, &want, &case.lens)?;
    same(got, ok(lens_delta_put_reference(&case.lens, &case.source, &dv))?, &case.lens)
}

pub fn drop_equivalence(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let case = random_primitive(&mut r, 1, MAX_ROWS);
    let v2 = random_view_updates(&mut r, &case);
    same(
        ok(lens_put_drop_bohannon(&case.lens, &case.source, &v2))?,
        ok(lens_put_naive(&case.lens, &case.source, &v2))?,
        &case.lens,
    )
}

/// No fetch made by `δput` scans a base table with `TRUE`.
pub fn fetches_restricted(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let case = random_pipeline(&mut r, 3, MAX_ROWS);
    let v2 = random_view_updates(&mut r, &case);
    let dv = view_deltas(&case, &v2);
    let mut store = TableStore::new();
    let tables = case.lens.source().zip_with(&case.source, |t, m| Ok((t.clone(), m.clone()))).unwrap();
    for (t, rel) in tables.leaves() {
        ok(store.insert_table(&t.name, t.ty.clone(), rel.clone()))?;
    }
    ok(lens_delta_put(&case.lens, &store, &dv))?;
    for rec in store.fetch_log() {
        for (table, p, _) in &rec.scans {
            ensure(*p != Predicate::True, || {
                format!("{}: full scan of {table} for {}", case.lens, rec.predicate)
            })?;
        }
    }
    Ok(())
}

// Delta operators

fn ab() -> Vec<String> {
    names(&["A", "B"])
}

fn subset(rng: &mut Rand, attrs: &[String]) -> Vec<String> {
    let mut v: Vec<String> = attrs.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
    if v.is_empty() {
        v.push(attrs.choose(rng).unwrap().clone());
    }
    v
}

fn pair(rng: &mut Rand, attrs: &[String]) -> (Relation, DeltaRelation) {
    let m = random_rel(rng, attrs, 10);
    let dm = random_delta(rng, &m, 5);
    (m, dm)
}

pub fn dselect_oracle(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (m, dm) = pair(&mut r, &ab());
    let p = random_pred(&mut r, &ab());
    same(ok(dselect(&p, &m, &dm))?, ok(oracle_delta(|x| x.select(&p), &m, &dm))?, &p)
}

pub fn dproject_oracle(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let abc = names(&["A", "B", "C"]);
    let (m, dm) = pair(&mut r, &abc);
    let keep = subset(&mut r, &abc);
    let got = ok(dproject(&m, &dm, &keep))?;
    ensure(got.is_minimal_for(&m.project(&keep).unwrap()), || "not minimal".into())?;
    same(got, ok(oracle_delta(|x| x.project(&keep), &m, &dm))?, &keep.join(","))
}

pub fn djoin_oracle(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (m, dm) = pair(&mut r, &ab());
    let (n, dn) = pair(&mut r, &names(&["B", "C"]));
    same(
        ok(djoin(&m, &dm, &n, &dn))?,
        ok(oracle_delta2(|x, y| Ok(x.join(y)), &m, &dm, &n, &dn))?,
        &"join",
    )
}

pub fn drename_oracle(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (m, dm) = pair(&mut r, &ab());
    same(
        ok(drename(&m, &dm, "A", "Z"))?,
        ok(oracle_delta(|x| x.rename("A", "Z"), &m, &dm))?,
        &"rename",
    )
}

/// `N` is a selection of `M` updated along with it, so containment holds.
pub fn ddifference_oracle(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (m, dm) = pair(&mut r, &ab());
    let p = random_pred(&mut r, &ab());
    let n = m.select(&p).unwrap();
    let dn = ok(dselect(&p, &m, &dm))?;
    same(
        ok(ddifference(&m, &dm, &n, &dn))?,
        ok(oracle_delta2(|x, y| x.difference(y), &m, &dm, &n, &dn))?,
        &p,
    )
}

pub fn drevise_oracle(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let fd = FunDep::new(["A"], ["B"]);
    let fds = FunDepSet::new([fd.clone()]).unwrap();
    let m = repair(&random_rel(&mut r, &ab(), 8), &fds);
    let n = repair(&random_rel(&mut r, &ab(), 8), &fds);
    // inserted rows agree with M on A -> B
    let dm = random_delta(&mut r, &m, 5);
    let plus: Vec<_> = repair(dm.plus(), &fds)
        .rows()
        .filter(|x| !m.contains_row(x) && m.rows().all(|y| y[0] != x[0] || y[1] == x[1]))
        .cloned()
        .collect();
    let plus = Relation::from_tuples(&ab(), plus).unwrap();
    let dm = DeltaRelation::new(plus, dm.minus().clone()).unwrap();
    same(
        ok(drevise(&m, &dm, &fd, &n))?,
        ok(oracle_delta(|x| fds.revise(x, &n), &m, &dm))?,
        &fd,
    )
}

/// `N ⊆ M`, so `merge(M, F, N) = M`; both affected modes are checked.
pub fn dmerge_oracle(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let fds = FunDepSet::parse("A -> B").unwrap();
    let abc = names(&["A", "B", "C"]);
    let m = repair(&random_rel(&mut r, &abc, 8), &fds);
    let n = m.select(&random_pred(&mut r, &abc)).unwrap();
    let dn = random_delta(&mut r, &n, 4);
    let n2 = repair(&dn.apply_to(&n).unwrap(), &fds);
    let dn = DeltaRelation::diff(&n2, &n).unwrap();
    let want = DeltaRelation::diff(&ok(fds.merge(&m, &n2))?, &m).unwrap();
    same(ok(dmerge(&m, &fds, &n, &dn, false))?, want.clone(), &"merge")?;
    same(ok(dmerge(&m, &fds, &n, &dn, true))?, want, &"merge (affected)")
}

/// A random query over `R(A,B)`, `S(B,C)` and `T(C,D)`, with its domain.
pub fn random_query(rng: &mut Rand, depth: usize, fresh: &mut usize) -> (QueryExpr, Vec<String>) {
    if depth == 0 {
        let (v, d) = *[("R", ["A", "B"]), ("S", ["B", "C"]), ("T", ["C", "D"])]
            .choose(rng)
            .unwrap();
        return (QueryExpr::var(v), names(&d));
    }
    let (a, da) = random_query(rng, depth - 1, fresh);
    match rng.gen_range(0..8) {
        0 => {
            let p = random_pred(rng, &da);
            (a.select(p), da)
        }
        1 => {
            let keep = subset(rng, &da);
            (a.project(&keep), keep)
        }
        2 => {
            let (b, db) = random_query(rng, depth - 1, fresh);
            let mut d = da.clone();
            d.extend(db.into_iter().filter(|x| !da.contains(x)));
            (a.join(b), d)
        }
        3 => {
            *fresh += 1;
            let from = da.choose(rng).unwrap().clone();
            let to = format!("X{fresh}");
            let d = da.iter().map(|x| if *x == from { to.clone() } else { x.clone() }).collect();
            (a.rename(from, to), d)
        }
        4 => {
            let p = random_pred(rng, &da);
            let q = random_pred(rng, &da);
            (a.clone().select(p).union(a.select(q)), da)
        }
        5 => {
            // the subtrahend is contained in the minuend
            let p = random_pred(rng, &da);
            (a.clone().difference(a.select(p)), da)
        }
        6 => {
            // no containment: the delta falls back to recomputation
            let p = random_pred(rng, &da);
            let q = random_pred(rng, &da);
            (a.clone().select(p).difference(a.select(q)), da)
        }
        _ => {
            *fresh += 1;
            let x = format!("x{fresh}");
            let p = random_pred(rng, &da);
            let body = QueryExpr::var(&x).join(QueryExpr::var(&x).select(p));
            (QueryExpr::let_in(x, a, body), da)
        }
    }
}

pub fn query_deval_oracle(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let depth = r.gen_range(1..=3);
    let (q, _) = random_query(&mut r, depth, &mut 0);
    let mut env: DeltaEnv = HashMap::new();
    for (v, d) in [("R", ["A", "B"]), ("S", ["B", "C"]), ("T", ["C", "D"])] {
        let m = random_rel(&mut r, &names(&d), 8);
        let dm = random_delta(&mut r, &m, 4);
        env.insert(v.to_string(), (m, dm));
    }
    let (_, got) = ok(query_deval(&q, &env, false))?;
    same(got, ok(oracle_query_delta(&q, &env))?, &format!("{q:?}"))
}

pub const DELTA_CHECKS: [(&str, Check); 8] = [
    ("dselect", dselect_oracle),
    ("dproject", dproject_oracle),
    ("djoin", djoin_oracle),
    ("drename", drename_oracle),
    ("ddifference", ddifference_oracle),
    ("drevise", drevise_oracle),
    ("dmerge", dmerge_oracle),
    ("query_deval", query_deval_oracle),
];

// SQL

pub fn keyed_type() -> RelationType {
    RelationType::ints(&["K", "A", "B"])
        .with_fds(FunDepSet::parse("K -> A B").unwrap())
        .and_then(|t| t.with_keys(&["K"]))
        .unwrap()
}

pub fn interpreter(ty: &RelationType, rel: &Relation) -> Interpreter {
    let mut store = TableStore::new();
    store.insert_table("t", ty.clone(), rel.clone()).unwrap();
    Interpreter::from_store(&store).unwrap()
}

/// Running the DML for a minimal delta through the interpreter gives
/// `M ⊕ Δ`; so does the whole-table rewrite.
pub fn sql_fidelity(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let ty = keyed_type();
    let rows = r.gen_range(0..=MAX_ROWS);
    let old = repair(&random_rel(&mut r, &ty.attrs(), rows), ty.fds());
    let new = repair(&random_rel(&mut r, &ty.attrs(), rows), ty.fds());
    let d = DeltaRelation::diff(&new, &old).unwrap();
    let mut db = interpreter(&ty, &old);
    ok(db.run(&ok(sql_dml("t", &ty, &d))?))?;
    same(ok(db.table("t"))?, ok(d.apply_to(&old))?, &"delta DML")?;
    let mut db = interpreter(&ty, &old);
    ok(db.run(&ok(naive_dml("t", &ty, &new))?))?;
    same(ok(db.table("t"))?, new, &"naive DML")
}
