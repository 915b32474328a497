//! Seeded generators shared by the integration tests: small integer
//! relations, minimal deltas, typed tables and random lens pipelines.
#![allow(dead_code)]

pub mod checks;

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relens::fdeps::{FunDep, FunDepSet};
use relens::lenses::{lens_build, lens_get, LensExpr, RelationType, Schema, Tree, TypedLens};
use relens::{CmpOp, DeltaRelation, Predicate, Relation, Value};

pub type Rand = ChaCha8Rng;

/// Values are drawn from `0..VALUES`.
pub const VALUES: i64 = 4;

const POOL: [&str; 14] = [
    "A", "B", "C", "D", "E", "G", "H", "I", "J", "K", "L", "M", "N", "O",
];

pub fn rng(seed: u64) -> Rand {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn names(attrs: &[&str]) -> Vec<String> {
    attrs.iter().map(|a| a.to_string()).collect()
}

pub fn rel(attrs: &[&str], rows: &[&[i64]]) -> Relation {
    Relation::from_tuples(attrs, rows.iter().map(|r| r.iter().map(|&v| Value::Int(v)))).unwrap()
}

pub fn random_row(rng: &mut Rand, width: usize) -> Vec<Value> {
    (0..width).map(|_| Value::Int(rng.gen_range(0..VALUES))).collect()
}

pub fn random_rel(rng: &mut Rand, attrs: &[String], max_rows: usize) -> Relation {
    let n = rng.gen_range(0..=max_rows);
    let rows: Vec<Vec<Value>> = (0..n).map(|_| random_row(rng, attrs.len())).collect();
    Relation::from_tuples(attrs, rows).unwrap()
}

/// A delta minimal for `m`: deletes some rows of `m` and inserts rows
/// not in `m`.
pub fn random_delta(rng: &mut Rand, m: &Relation, max_ins: usize) -> DeltaRelation {
    let p = rng.gen_range(0.0..0.6);
    let minus: Vec<Vec<Value>> = m.rows().filter(|_| rng.gen_bool(p)).cloned().collect();
    let n = rng.gen_range(0..=max_ins);
    let plus: Vec<Vec<Value>> = (0..n)
        .map(|_| random_row(rng, m.domain().len()))
        .filter(|r| !m.contains_row(r))
        .collect();
    DeltaRelation::new(
        Relation::from_tuples(m.domain(), plus).unwrap(),
        Relation::from_tuples(m.domain(), minus).unwrap(),
    )
    .unwrap()
}

/// Forces `rel` to satisfy tree-form `fds`: for every dependency, in
/// revision order, rows take the right-hand values of the first row with
/// the same left-hand values.
pub fn repair(rel: &Relation, fds: &FunDepSet) -> Relation {
    let mut rows: Vec<Vec<Value>> = rel.rows().cloned().collect();
    for fd in fds.deps() {
        let pos = |a: &String| rel.position(a).unwrap();
        let xs: Vec<usize> = fd.lhs.iter().map(pos).collect();
        let ys: Vec<usize> = fd.rhs.iter().map(pos).collect();
        let mut first: HashMap<Vec<Value>, Vec<Value>> = HashMap::new();
        for r in rows.iter_mut() {
            let key: Vec<Value> = xs.iter().map(|&i| r[i].clone()).collect();
            let val = first
                .entry(key)
                .or_insert_with(|| ys.iter().map(|&i| r[i].clone()).collect());
            for (&i, v) in ys.iter().zip(val.iter()) {
                r[i] = v.clone();
            }
        }
    }
    Relation::from_tuples(rel.domain(), rows).unwrap()
}

/// The largest part of `rel` conforming to `ty`, after repair.
pub fn conform(rel: &Relation, ty: &RelationType) -> Relation {
    let r = repair(rel, ty.fds());
    let r = r.select(&ty.pred().normalize().unwrap()).unwrap();
    ty.conforms(&r).unwrap();
    r
}

pub fn random_op(rng: &mut Rand) -> CmpOp {
    *[CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge]
        .choose(rng)
        .unwrap()
}

fn atom(rng: &mut Rand, attrs: &[String]) -> Predicate {
    let a = attrs.choose(rng).unwrap().clone();
    match rng.gen_range(0..10) {
        0 if attrs.len() > 1 => {
            let b = attrs.iter().filter(|b| **b != a).collect::<Vec<_>>();
            Predicate::eq_attr(a, (*b.choose(rng).unwrap()).clone())
        }
        1 | 2 => {
            let vals: BTreeSet<i64> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..VALUES)).collect();
            Predicate::tuple_in(Relation::ints(&a, vals))
        }
        3 | 4 => Predicate::eq(a, rng.gen_range(0..VALUES)),
        _ => Predicate::cmp(a, random_op(rng), rng.gen_range(0..VALUES)),
    }
}

/// A random predicate over `attrs`, with at most a few connectives.
pub fn random_pred(rng: &mut Rand, attrs: &[String]) -> Predicate {
    if attrs.is_empty() {
        return Predicate::True;
    }
    let p = atom(rng, attrs);
    match rng.gen_range(0..6) {
        0 => Predicate::and(p, atom(rng, attrs)),
        1 => Predicate::or(p, atom(rng, attrs)),
        2 => Predicate::not(p),
        _ => p,
    }
}

/// Hands out attribute and table names not used before.
pub struct Names {
    used: BTreeSet<String>,
    tables: usize,
}

impl Names {
    pub fn new() -> Names {
        Names {
            used: BTreeSet::new(),
            tables: 0,
        }
    }

    pub fn attr(&mut self) -> Option<String> {
        let a = POOL.iter().find(|a| !self.used.contains(**a))?.to_string();
        self.used.insert(a.clone());
        Some(a)
    }

    pub fn attrs(&mut self, n: usize) -> Option<Vec<String>> {
        (0..n).map(|_| self.attr()).collect()
    }

    pub fn table(&mut self) -> String {
        self.tables += 1;
        format!("t{}", self.tables)
    }
}

/// A tree-form dependency set over `attrs` of one of a few shapes.
pub fn random_fds(rng: &mut Rand, attrs: &[String]) -> FunDepSet {
    let mut a = attrs.to_vec();
    a.shuffle(rng);
    let deps = match (a.len(), rng.gen_range(0..5)) {
        (_, 0) | (0..=1, _) => vec![],
        (2, _) => vec![FunDep::new([&a[0]], [&a[1]])],
        (_, 1) => vec![FunDep::new([&a[0]], [&a[1]])],
        (_, 2) => vec![FunDep::new([&a[0]], [&a[1]]), FunDep::new([&a[1]], [&a[2]])],
        (_, 3) => vec![FunDep::new([&a[0]], [&a[1]]), FunDep::new([&a[0]], [&a[2]])],
        _ => vec![FunDep::new([&a[0]], [&a[1], &a[2]])],
    };
    FunDepSet::new(deps).unwrap()
}

/// A base table type: integer columns, tree-form dependencies and a row
/// predicate over columns that no dependency determines.
pub fn random_table_type(rng: &mut Rand, attrs: &[String]) -> RelationType {
    let fds = random_fds(rng, attrs);
    let outputs = fds.outputs();
    let free: Vec<String> = attrs.iter().filter(|a| !outputs.contains(*a)).cloned().collect();
    let pred = if rng.gen_bool(0.3) {
        random_pred(rng, &free)
    } else {
        Predicate::True
    };
    RelationType::ints(attrs)
        .with_fds(fds)
        .and_then(|t| t.with_pred(pred))
        .unwrap()
}

/// A table whose rows conform to `ty`.
pub fn random_instance(rng: &mut Rand, ty: &RelationType, max_rows: usize) -> Relation {
    conform(&random_rel(rng, &ty.attrs(), max_rows), ty)
}

/// A random typed lens with its source instance.
pub struct Case {
    pub expr: LensExpr,
    pub lens: TypedLens,
    pub source: Tree<Relation>,
}

impl Case {
    pub fn view(&self) -> Tree<Relation> {
        lens_get(&self.lens, &self.source).unwrap()
    }
}

/// Base building block: a fresh table of 2 to 4 columns.
fn base(rng: &mut Rand, names: &mut Names) -> Option<(LensExpr, Schema)> {
    let width = rng.gen_range(2..=4);
    let attrs = names.attrs(width)?;
    let ty = random_table_type(rng, &attrs);
    let name = names.table();
    Some((LensExpr::base(&name), Schema::table(name, ty)))
}

fn view_type(expr: &LensExpr, schema: &Schema) -> Option<RelationType> {
    lens_build(expr, schema).ok()?.view_type().cloned()
}

/// Extends a single-view lens by one primitive. `None` when the attempt
/// does not type check.
fn extend(
    rng: &mut Rand,
    names: &mut Names,
    expr: LensExpr,
    schema: Schema,
    which: usize,
) -> Option<(LensExpr, Schema)> {
    let ty = view_type(&expr, &schema)?;
    let attrs = ty.attrs();
    let out = match which {
        0 => (expr.select(random_pred(rng, &attrs)), schema),
        1 => {
            // drop an attribute that is a leaf of the dependency forest
            let fds = ty.fds();
            let lefts = fds.left();
            let cands: Vec<&FunDep> = fds
                .deps()
                .iter()
                .filter(|fd| fd.rhs.len() == 1 && !lefts.contains(fd.rhs.iter().next().unwrap()))
                .collect();
            let fd = (*cands.choose(rng)?).clone();
            let attr = fd.rhs.iter().next().unwrap().clone();
            let det = fd.lhs_vec();
            // the default has to satisfy the predicate on `attr`
            let mut defaults: Vec<i64> = (0..VALUES).collect();
            defaults.shuffle(rng);
            let default = defaults
                .into_iter()
                .find(|&v| lens_build(&expr.clone().drop(&attr, &det, v), &schema).is_ok())?;
            (expr.drop(&attr, &det, default), schema)
        }
        2 => {
            let from = attrs.choose(rng)?.clone();
            let to = names.attr()?;
            (expr.rename(&from, &to), schema)
        }
        _ => {
            // join with a fresh table keyed by shared columns
            if attrs.len() >= 5 {
                return None;
            }
            let k = rng.gen_range(1..=2.min(attrs.len()));
            let shared: Vec<String> = attrs.choose_multiple(rng, k).cloned().collect();
            let extra = names.attrs(rng.gen_range(1..=(5 - attrs.len()).min(2)))?;
            let mut cols = shared.clone();
            cols.extend(extra.iter().cloned());
            let fds = FunDepSet::new([FunDep::new(shared.iter(), extra.iter())]).ok()?;
            let pred = if rng.gen_bool(0.3) {
                random_pred(rng, &shared)
            } else {
                Predicate::True
            };
            let rty = RelationType::ints(&cols).with_fds(fds).ok()?.with_pred(pred).ok()?;
            let name = names.table();
            let mut right = LensExpr::base(&name);
            if rng.gen_bool(0.3) {
                right = right.select(random_pred(rng, &cols));
            }
            (expr.join(right), Tree::pair(schema, Schema::table(name, rty)))
        }
    };
    lens_build(&out.0, &out.1).ok()?;
    Some(out)
}

/// A random pipeline of at most `depth` primitives over fresh tables,
/// possibly wrapped in a tensor or a symmetry.
pub fn random_pipeline(rng: &mut Rand, depth: usize, max_rows: usize) -> Case {
    loop {
        let mut names = Names::new();
        let Some((mut expr, mut schema)) = base(rng, &mut names) else {
            continue;
        };
        let steps = rng.gen_range(0..=depth);
        for _ in 0..steps {
            let which = rng.gen_range(0..4);
            if let Some((e, s)) = extend(rng, &mut names, expr.clone(), schema.clone(), which) {
                expr = e;
                schema = s;
            }
        }
        if rng.gen_bool(0.15) {
            if let Some((e2, s2)) = base(rng, &mut names) {
                let e = expr.clone().tensor(e2);
                let s = Tree::pair(schema.clone(), s2);
                let e = if rng.gen_bool(0.5) { e.then(LensExpr::Sym) } else { e };
                if lens_build(&e, &s).is_ok() {
                    expr = e;
                    schema = s;
                }
            }
        }
        let Ok(lens) = lens_build(&expr, &schema) else {
            continue;
        };
        let source = schema.map(|t| random_instance(rng, &t.ty, max_rows));
        return Case { expr, lens, source };
    }
}

/// A one-step lens of the given primitive over base tables.
pub fn random_primitive(rng: &mut Rand, which: usize, max_rows: usize) -> Case {
    loop {
        let mut names = Names::new();
        let Some((expr, schema)) = base(rng, &mut names) else {
            continue;
        };
        let Some((expr, schema)) = extend(rng, &mut names, expr, schema, which) else {
            continue;
        };
        let lens = lens_build(&expr, &schema).unwrap();
        let source = schema.map(|t| random_instance(rng, &t.ty, max_rows));
        return Case { expr, lens, source };
    }
}

/// An updated view conforming to the view type: some rows deleted, some
/// edited, some inserted, then repaired.
pub fn random_view_update(rng: &mut Rand, ty: &RelationType, v: &Relation) -> Relation {
    let attrs = v.domain().to_vec();
    let mut rows: Vec<Vec<Value>> = Vec::new();
    let (p_del, p_edit) = (rng.gen_range(0.0..0.4), rng.gen_range(0.0..0.4));
    for r in v.rows() {
        if rng.gen_bool(p_del) {
            continue;
        }
        let mut r = r.clone();
        if rng.gen_bool(p_edit) {
            let i = rng.gen_range(0..r.len());
            r[i] = Value::Int(rng.gen_range(0..VALUES));
        }
        rows.push(r);
    }
    for _ in 0..rng.gen_range(0..=4) {
        rows.push(random_row(rng, attrs.len()));
    }
    conform(&Relation::from_tuples(&attrs, rows).unwrap(), ty)
}

/// Updated views for every leaf of the lens's view.
pub fn random_view_updates(rng: &mut Rand, case: &Case) -> Tree<Relation> {
    let v = case.view();
    let pairs = case.lens.view().zip_with(&v, |t, r| Ok((t.ty.clone(), r.clone()))).unwrap();
    pairs.map(|(ty, r)| random_view_update(rng, ty, r))
}
