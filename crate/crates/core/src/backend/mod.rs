//! Storage for source tables and the SQL layer.
//!
//! Lenses never read whole tables on the incremental path. They ask a
//! [`Fetch`] implementation for `σ_P(q)` where `q` is a query over the source
//! tables, and the implementation pushes `P` down to the base tables.

mod csv;
mod interp;
mod sql;
mod store;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::relalg::{Env, Predicate, QueryExpr, Relation};

pub use self::csv::{
    load_csv, load_delta_csv, read_csv, read_delta_csv, save_csv, save_delta_csv, write_csv,
    write_delta_csv,
};
pub use interp::Interpreter;
pub use sql::{naive_dml, sql_dml, sql_where, SqlStatement};
pub use store::{FetchRecord, TableStore};

/// Answers selection requests over queries on the source tables.
pub trait Fetch {
    /// `σ_pred(query)`.
    fn fetch(&self, query: &QueryExpr, pred: &Predicate) -> Result<Relation>;
}

/// A plain environment answers fetches by evaluation with pushdown.
impl Fetch for Env {
    fn fetch(&self, query: &QueryExpr, pred: &Predicate) -> Result<Relation> {
        let mut scan = |t: &str, p: &Predicate| match self.get(t) {
            Some(r) => r.select(p),
            None => Err(Error::UnboundVariable(t.to_string())),
        };
        let domains = |t: &str| self.get(t).map(|r| r.domain().to_vec());
        pushdown(query, pred, &domains, &mut scan, &mut Vec::new())
    }
}

type Scope = Vec<(String, Relation)>;

/// Evaluates `σ_pred(q)`, calling `scan` only with predicates already
/// pushed to the base tables.
///
/// Across a join, the side with a restriction is read first and the other
/// side is then restricted to the join keys found. A disjunction that
/// restricts neither side is split, and each disjunct is fetched on its own.
pub(crate) fn pushdown(
    q: &QueryExpr,
    pred: &Predicate,
    domains: &dyn Fn(&str) -> Option<Vec<String>>,
    scan: &mut dyn FnMut(&str, &Predicate) -> Result<Relation>,
    scope: &mut Scope,
) -> Result<Relation> {
    let pred = pred.simplify();
    if pred.is_falsity() {
        return Ok(Relation::empty(domain_of(q, domains, scope)?));
    }
    match q {
        QueryExpr::Const(r) => r.select(&pred),
        QueryExpr::Var(v) => match scope.iter().rev().find(|(n, _)| n == v) {
            Some((_, r)) => r.select(&pred),
            None => scan(v, &pred),
        },
        QueryExpr::Select(p, inner) => {
            pushdown(inner, &Predicate::and(p.clone(), pred), domains, scan, scope)
        }
        QueryExpr::Project(inner, attrs) => {
            pushdown(inner, &pred, domains, scan, scope)?.project(attrs)
        }
        QueryExpr::Rename(inner, from, to) => {
            let back = pred.normalize()?.rename_attr(to, from)?;
            pushdown(inner, &back, domains, scan, scope)?.rename(from, to)
        }
        QueryExpr::Union(a, b) => {
            let a = pushdown(a, &pred, domains, scan, scope)?;
            a.union(&pushdown(b, &pred, domains, scan, scope)?)
        }
        QueryExpr::Difference(a, b) => {
            let a = pushdown(a, &pred, domains, scan, scope)?;
            a.difference(&pushdown(b, &pred, domains, scan, scope)?)
        }
        QueryExpr::Join(a, b) => {
            let da = domain_of(a, domains, scope)?;
            let db = domain_of(b, domains, scope)?;
            let pred = pred.normalize()?;
            let pa = implied(&pred, &da)?.simplify();
            let pb = implied(&pred, &db)?.simplify();
            if pa == Predicate::True && pb == Predicate::True {
                let parts = disjuncts(&pred);
                if parts.len() > 1 {
                    let mut out = pushdown(q, parts[0], domains, scan, scope)?;
                    for p in &parts[1..] {
                        out = out.union(&pushdown(q, p, domains, scan, scope)?)?;
                    }
                    return Ok(out);
                }
            }
            let shared: Vec<&String> = da.iter().filter(|x| db.contains(x)).collect();
            let (ra, rb) = if pb != Predicate::True && pa == Predicate::True {
                let rb = pushdown(b, &pb, domains, scan, scope)?;
                let keys = Predicate::tuple_in(rb.project(&shared)?);
                let ra = pushdown(a, &Predicate::and(pa, keys), domains, scan, scope)?;
                (ra, rb)
            } else {
                let ra = pushdown(a, &pa, domains, scan, scope)?;
                let keys = Predicate::tuple_in(ra.project(&shared)?);
                let rb = pushdown(b, &Predicate::and(pb, keys), domains, scan, scope)?;
                (ra, rb)
            };
            ra.join(&rb).select(&pred)
        }
        QueryExpr::Let(name, bound, body) => {
            let r = pushdown(bound, &Predicate::True, domains, scan, scope)?;
            scope.push((name.clone(), r));
            let out = pushdown(body, &pred, domains, scan, scope);
            scope.pop();
            out
        }
    }
}

fn domain_of(
    q: &QueryExpr,
    domains: &dyn Fn(&str) -> Option<Vec<String>>,
    scope: &Scope,
) -> Result<Vec<String>> {
    q.domain(&|v: &str| {
        scope
            .iter()
            .rev()
            .find(|(n, _)| n == v)
            .map(|(_, r)| r.domain().to_vec())
            .or_else(|| domains(v))
    })
}

/// A weakening of `p` that mentions only attributes of `side`.
fn disjuncts(p: &Predicate) -> Vec<&Predicate> {
    match p {
        Predicate::Or(a, b) => {
            let mut v = disjuncts(a);
            v.extend(disjuncts(b));
            v
        }
        p => vec![p],
    }
}

fn implied(p: &Predicate, side: &[String]) -> Result<Predicate> {
    let attrs = p.attributes();
    if attrs.iter().all(|a| side.contains(a)) {
        return Ok(p.clone());
    }
    Ok(match p {
        Predicate::And(x, y) => Predicate::and(implied(x, side)?, implied(y, side)?),
        Predicate::Or(x, y) => {
            let (x, y) = (implied(x, side)?, implied(y, side)?);
            if x == Predicate::True || y == Predicate::True {
                Predicate::True
            } else {
                Predicate::or(x, y)
            }
        }
        Predicate::TupleIn(rel) => {
            let keep: BTreeSet<&String> = rel.domain().iter().filter(|a| side.contains(a)).collect();
            if keep.is_empty() {
                Predicate::True
            } else {
                let keep: Vec<&String> = keep.into_iter().collect();
                Predicate::tuple_in(rel.project(&keep)?)
            }
        }
        _ => Predicate::True,
    })
}
