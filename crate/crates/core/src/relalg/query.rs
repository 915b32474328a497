use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::relalg::{Predicate, Relation};

/// Relational expressions with let-bindings.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum QueryExpr {
    Const(Relation),
    Var(String),
    Select(Predicate, Box<QueryExpr>),
    Project(Box<QueryExpr>, Vec<String>),
    Join(Box<QueryExpr>, Box<QueryExpr>),
    Rename(Box<QueryExpr>, String, String),
    Union(Box<QueryExpr>, Box<QueryExpr>),
    Difference(Box<QueryExpr>, Box<QueryExpr>),
    Let(String, Box<QueryExpr>, Box<QueryExpr>),
}

pub type Env = HashMap<String, Relation>;

impl QueryExpr {
    pub fn var(name: impl Into<String>) -> QueryExpr {
        QueryExpr::Var(name.into())
    }

    pub fn select(self, pred: Predicate) -> QueryExpr {
        QueryExpr::Select(pred, Box::new(self))
    }

    pub fn project<S: AsRef<str>>(self, attrs: &[S]) -> QueryExpr {
        QueryExpr::Project(
            Box::new(self),
            attrs.iter().map(|a| a.as_ref().to_string()).collect(),
        )
    }

    pub fn join(self, other: QueryExpr) -> QueryExpr {
        QueryExpr::Join(Box::new(self), Box::new(other))
    }

    pub fn rename(self, from: impl Into<String>, to: impl Into<String>) -> QueryExpr {
        QueryExpr::Rename(Box::new(self), from.into(), to.into())
    }

    pub fn union(self, other: QueryExpr) -> QueryExpr {
        QueryExpr::Union(Box::new(self), Box::new(other))
    }

    pub fn difference(self, other: QueryExpr) -> QueryExpr {
        QueryExpr::Difference(Box::new(self), Box::new(other))
    }

    pub fn let_in(name: impl Into<String>, bound: QueryExpr, body: QueryExpr) -> QueryExpr {
        QueryExpr::Let(name.into(), Box::new(bound), Box::new(body))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            QueryExpr::Const(_) => {}
            QueryExpr::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            QueryExpr::Select(_, q) | QueryExpr::Project(q, _) | QueryExpr::Rename(q, _, _) => {
                q.collect_free(bound, out)
            }
            QueryExpr::Join(a, b) | QueryExpr::Union(a, b) | QueryExpr::Difference(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            QueryExpr::Let(name, q, body) => {
                q.collect_free(bound, out);
                bound.push(name.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// Output domain given the domains of the free variables.
    pub fn domain(&self, vars: &dyn Fn(&str) -> Option<Vec<String>>) -> Result<Vec<String>> {
        self.domain_in(vars, &mut Vec::new())
    }

    fn domain_in(
        &self,
        vars: &dyn Fn(&str) -> Option<Vec<String>>,
        scope: &mut Vec<(String, Vec<String>)>,
    ) -> Result<Vec<String>> {
        Ok(match self {
            QueryExpr::Const(r) => r.domain().to_vec(),
            QueryExpr::Var(v) => match scope.iter().rev().find(|(n, _)| n == v) {
                Some((_, d)) => d.clone(),
                None => vars(v).ok_or_else(|| Error::UnboundVariable(v.clone()))?,
            },
            QueryExpr::Select(_, q) | QueryExpr::Union(q, _) | QueryExpr::Difference(q, _) => {
                q.domain_in(vars, scope)?
            }
            QueryExpr::Project(_, attrs) => {
                let mut d = attrs.clone();
                d.sort();
                d
            }
            QueryExpr::Join(a, b) => {
                let mut d: BTreeSet<String> = a.domain_in(vars, scope)?.into_iter().collect();
                d.extend(b.domain_in(vars, scope)?);
                d.into_iter().collect()
            }
            QueryExpr::Rename(q, from, to) => {
                let mut d: Vec<String> = q
                    .domain_in(vars, scope)?
                    .into_iter()
                    .map(|a| if &a == from { to.clone() } else { a })
                    .collect();
                d.sort();
                d
            }
            QueryExpr::Let(name, q, body) => {
                let d = q.domain_in(vars, scope)?;
                scope.push((name.clone(), d));
                let r = body.domain_in(vars, scope);
                scope.pop();
                r?
            }
        })
    }
}

/// Evaluates a query against an environment of named relations.
pub fn query_eval(q: &QueryExpr, env: &Env) -> Result<Relation> {
    eval_scoped(q, env, &mut Vec::new())
}

fn eval_scoped(q: &QueryExpr, env: &Env, scope: &mut Vec<(String, Relation)>) -> Result<Relation> {
    match q {
        QueryExpr::Const(r) => Ok(r.clone()),
        QueryExpr::Var(v) => match scope.iter().rev().find(|(n, _)| n == v) {
            Some((_, r)) => Ok(r.clone()),
            None => env
                .get(v)
                .cloned()
                .ok_or_else(|| Error::UnboundVariable(v.clone())),
        },
        QueryExpr::Select(p, q) => eval_scoped(q, env, scope)?.select(p),
        QueryExpr::Project(q, attrs) => eval_scoped(q, env, scope)?.project(attrs),
        QueryExpr::Join(a, b) => {
            let a = eval_scoped(a, env, scope)?;
            Ok(a.join(&eval_scoped(b, env, scope)?))
        }
        QueryExpr::Rename(q, from, to) => eval_scoped(q, env, scope)?.rename(from, to),
        QueryExpr::Union(a, b) => {
            let a = eval_scoped(a, env, scope)?;
            a.union(&eval_scoped(b, env, scope)?)
        }
        QueryExpr::Difference(a, b) => {
            let a = eval_scoped(a, env, scope)?;
            a.difference(&eval_scoped(b, env, scope)?)
        }
        QueryExpr::Let(name, bound, body) => {
            let r = eval_scoped(bound, env, scope)?;
            scope.push((name.clone(), r));
            let out = eval_scoped(body, env, scope);
            scope.pop();
            out
        }
    }
}

impl fmt::Display for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryExpr::Const(r) => write!(f, "{r}"),
            QueryExpr::Var(v) => write!(f, "{v}"),
            QueryExpr::Select(p, q) => write!(f, "select[{p}]({q})"),
            QueryExpr::Project(q, attrs) => write!(f, "project[{}]({q})", attrs.join(", ")),
            QueryExpr::Join(a, b) => write!(f, "({a} join {b})"),
            QueryExpr::Rename(q, a, b) => write!(f, "rename[{a}/{b}]({q})"),
            QueryExpr::Union(a, b) => write!(f, "({a} union {b})"),
            QueryExpr::Difference(a, b) => write!(f, "({a} minus {b})"),
            QueryExpr::Let(n, q, body) => write!(f, "let {n} = {q} in {body}"),
        }
    }
}

impl fmt::Debug for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
