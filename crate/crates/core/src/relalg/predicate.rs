use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::relalg::{Record, Relation, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Ne,
}

impl CmpOp {
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
            CmpOp::Ne => ord != Ordering::Equal,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Ne => "<>",
        }
    }
}

/// Row predicates.
///
/// `TupleIn(M)` holds on a record `m` when `m` restricted to the domain of
/// `M` is a row of `M`; the attribute list is the relation's domain.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    True,
    Not(Box<Predicate>),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    AttrEqConst(String, Value),
    AttrEqAttr(String, String),
    AttrCmp(String, CmpOp, Value),
    TupleIn(Arc<Relation>),
    /// `inner` is phrased over the attribute `from`; the predicate applies
    /// to records where that attribute is called `to`.
    Renamed {
        from: String,
        to: String,
        inner: Box<Predicate>,
    },
    /// Conjunction of predicates over the two sides of a join.
    JoinPred(Box<Predicate>, Box<Predicate>),
    /// Existential projection of a predicate onto the given attributes.
    /// Never evaluated directly.
    ProjPred(Box<Predicate>, Vec<String>),
}

impl Predicate {
    pub fn falsity() -> Predicate {
        Predicate::Not(Box::new(Predicate::True))
    }

    pub fn is_falsity(&self) -> bool {
        matches!(self, Predicate::Not(p) if **p == Predicate::True)
    }

    pub fn eq(attr: impl Into<String>, value: impl Into<Value>) -> Predicate {
        Predicate::AttrEqConst(attr.into(), value.into())
    }

    pub fn eq_attr(a: impl Into<String>, b: impl Into<String>) -> Predicate {
        Predicate::AttrEqAttr(a.into(), b.into())
    }

    pub fn cmp(attr: impl Into<String>, op: CmpOp, value: impl Into<Value>) -> Predicate {
        Predicate::AttrCmp(attr.into(), op, value.into())
    }

    pub fn tuple_in(rel: Relation) -> Predicate {
        Predicate::TupleIn(Arc::new(rel))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(p: Predicate) -> Predicate {
        Predicate::Not(Box::new(p))
    }

    /// Conjunction, absorbing `True`.
    pub fn and(p: Predicate, q: Predicate) -> Predicate {
        match (p, q) {
            (Predicate::True, q) => q,
            (p, Predicate::True) => p,
            (p, q) => Predicate::And(Box::new(p), Box::new(q)),
        }
    }

    /// Disjunction, absorbing the false predicate.
    pub fn or(p: Predicate, q: Predicate) -> Predicate {
        if p.is_falsity() {
            return q;
        }
        if q.is_falsity() {
            return p;
        }
        Predicate::Or(Box::new(p), Box::new(q))
    }

    pub fn all(preds: impl IntoIterator<Item = Predicate>) -> Predicate {
        preds.into_iter().fold(Predicate::True, Predicate::and)
    }

    pub fn any(preds: impl IntoIterator<Item = Predicate>) -> Predicate {
        preds.into_iter().fold(Predicate::falsity(), Predicate::or)
    }

    pub fn renamed(from: impl Into<String>, to: impl Into<String>, inner: Predicate) -> Predicate {
        Predicate::Renamed {
            from: from.into(),
            to: to.into(),
            inner: Box::new(inner),
        }
    }

    pub fn join_pred(p: Predicate, q: Predicate) -> Predicate {
        Predicate::JoinPred(Box::new(p), Box::new(q))
    }

    /// Top-level conjuncts, looking through `And` and `JoinPred`.
    pub fn conjuncts(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        fn go<'a>(p: &'a Predicate, out: &mut Vec<&'a Predicate>) {
            match p {
                Predicate::And(a, b) | Predicate::JoinPred(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Predicate::True => {}
                other => out.push(other),
            }
        }
        go(self, &mut out);
        out
    }

    /// Attributes mentioned, with renames pushed through.
    pub fn attributes(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_attributes(&mut out);
        out
    }

    fn collect_attributes(&self, out: &mut BTreeSet<String>) {
        match self {
            Predicate::True => {}
            Predicate::Not(p) => p.collect_attributes(out),
            Predicate::And(p, q) | Predicate::Or(p, q) | Predicate::JoinPred(p, q) => {
                p.collect_attributes(out);
                q.collect_attributes(out);
            }
            Predicate::AttrEqConst(a, _) | Predicate::AttrCmp(a, _, _) => {
                out.insert(a.clone());
            }
            Predicate::AttrEqAttr(a, b) => {
                out.insert(a.clone());
                out.insert(b.clone());
            }
            Predicate::TupleIn(rel) => out.extend(rel.domain().iter().cloned()),
            Predicate::Renamed { from, to, inner } => {
                for a in inner.attributes() {
                    out.insert(if &a == from { to.clone() } else { a });
                }
            }
            Predicate::ProjPred(p, attrs) => {
                for a in p.attributes() {
                    if attrs.contains(&a) {
                        out.insert(a);
                    }
                }
            }
        }
    }

    /// Syntactic check that none of `attrs` occurs in the predicate.
    pub fn ignores<S: AsRef<str>>(&self, attrs: &[S]) -> bool {
        let mentioned = self.attributes();
        attrs.iter().all(|a| !mentioned.contains(a.as_ref()))
    }

    /// Substitutes attribute `from` by `to` everywhere.
    pub fn rename_attr(&self, from: &str, to: &str) -> Result<Predicate> {
        let sub = |a: &String| if a == from { to.to_string() } else { a.clone() };
        Ok(match self {
            Predicate::True => Predicate::True,
            Predicate::Not(p) => Predicate::not(p.rename_attr(from, to)?),
            Predicate::And(p, q) => Predicate::And(
                Box::new(p.rename_attr(from, to)?),
                Box::new(q.rename_attr(from, to)?),
            ),
            Predicate::Or(p, q) => Predicate::Or(
                Box::new(p.rename_attr(from, to)?),
                Box::new(q.rename_attr(from, to)?),
            ),
            Predicate::JoinPred(p, q) => Predicate::JoinPred(
                Box::new(p.rename_attr(from, to)?),
                Box::new(q.rename_attr(from, to)?),
            ),
            Predicate::AttrEqConst(a, v) => Predicate::AttrEqConst(sub(a), v.clone()),
            Predicate::AttrCmp(a, op, v) => Predicate::AttrCmp(sub(a), *op, v.clone()),
            Predicate::AttrEqAttr(a, b) => Predicate::AttrEqAttr(sub(a), sub(b)),
            Predicate::TupleIn(rel) if rel.has_attr(from) => {
                Predicate::tuple_in(rel.rename(from, to)?)
            }
            Predicate::TupleIn(rel) => Predicate::TupleIn(rel.clone()),
            Predicate::Renamed { .. } => self.normalize()?.rename_attr(from, to)?,
            Predicate::ProjPred(p, attrs) => Predicate::ProjPred(
                Box::new(p.rename_attr(from, to)?),
                attrs.iter().map(sub).collect(),
            ),
        })
    }

    /// Eliminates `Renamed` and `JoinPred` by substitution, leaving a
    /// predicate over plain attribute names.
    pub fn normalize(&self) -> Result<Predicate> {
        Ok(match self {
            Predicate::Renamed { from, to, inner } => inner.normalize()?.rename_attr(from, to)?,
            Predicate::JoinPred(p, q) | Predicate::And(p, q) => {
                Predicate::and(p.normalize()?, q.normalize()?)
            }
            Predicate::Or(p, q) => Predicate::Or(Box::new(p.normalize()?), Box::new(q.normalize()?)),
            Predicate::Not(p) => Predicate::not(p.normalize()?),
            Predicate::ProjPred(p, attrs) => {
                Predicate::ProjPred(Box::new(p.normalize()?), attrs.clone())
            }
            other => other.clone(),
        })
    }

    /// Folds constant subterms: membership in an empty relation is false and
    /// membership over the empty attribute list is true.
    pub fn simplify(&self) -> Predicate {
        match self {
            Predicate::TupleIn(rel) if rel.is_empty() => Predicate::falsity(),
            Predicate::TupleIn(rel) if rel.domain().is_empty() => Predicate::True,
            Predicate::And(p, q) | Predicate::JoinPred(p, q) => {
                let (p, q) = (p.simplify(), q.simplify());
                if p.is_falsity() || q.is_falsity() {
                    Predicate::falsity()
                } else {
                    Predicate::and(p, q)
                }
            }
            Predicate::Or(p, q) => {
                let (p, q) = (p.simplify(), q.simplify());
                if p == Predicate::True || q == Predicate::True {
                    Predicate::True
                } else {
                    Predicate::or(p, q)
                }
            }
            Predicate::Not(p) => match p.simplify() {
                Predicate::Not(inner) if *inner == Predicate::True => Predicate::True,
                p => Predicate::not(p),
            },
            other => other.clone(),
        }
    }

    /// Binds attribute names to positions of `domain`.
    pub fn compile(&self, domain: &[String]) -> Result<Compiled> {
        let env: BTreeMap<String, usize> = domain
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        self.bind(&env)
    }

    fn bind(&self, env: &BTreeMap<String, usize>) -> Result<Compiled> {
        let pos = |a: &str| {
            env.get(a)
                .copied()
                .ok_or_else(|| Error::MissingAttribute(a.to_string()))
        };
        Ok(match self {
            Predicate::True => Compiled::Const(true),
            Predicate::Not(p) => match p.bind(env)? {
                Compiled::Const(b) => Compiled::Const(!b),
                c => Compiled::Not(Box::new(c)),
            },
            Predicate::And(p, q) | Predicate::JoinPred(p, q) => {
                Compiled::And(Box::new(p.bind(env)?), Box::new(q.bind(env)?))
            }
            Predicate::Or(p, q) => Compiled::Or(Box::new(p.bind(env)?), Box::new(q.bind(env)?)),
            Predicate::AttrEqConst(a, v) => Compiled::EqConst(pos(a)?, v.clone()),
            Predicate::AttrEqAttr(a, b) => Compiled::EqAttr(pos(a)?, pos(b)?),
            Predicate::AttrCmp(a, op, v) => Compiled::Cmp(pos(a)?, *op, v.clone()),
            Predicate::TupleIn(rel) => {
                let cols = rel
                    .domain()
                    .iter()
                    .map(|a| pos(a))
                    .collect::<Result<Vec<_>>>()?;
                Compiled::In(cols, rel.clone())
            }
            Predicate::Renamed { from, to, inner } => {
                let mut env = env.clone();
                let p = env
                    .remove(to)
                    .ok_or_else(|| Error::MissingAttribute(to.clone()))?;
                env.insert(from.clone(), p);
                inner.bind(&env)?
            }
            Predicate::ProjPred(..) => return Err(Error::Unevaluable(self.to_string())),
        })
    }

    /// Truth value on a record.
    pub fn eval(&self, m: &Record) -> Result<bool> {
        let domain: Vec<String> = m.domain().map(String::from).collect();
        let row: Vec<Value> = m.iter().map(|(_, v)| v.clone()).collect();
        self.compile(&domain)?.eval(&row)
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::And(..) | Predicate::Or(..) | Predicate::JoinPred(..) => {
                write!(f, "({self})")
            }
            _ => write!(f, "{self}"),
        }
    }
}

fn fmt_tuple(f: &mut fmt::Formatter<'_>, row: &[Value]) -> fmt::Result {
    if row.len() == 1 {
        return write!(f, "{}", row[0].to_sql());
    }
    write!(f, "(")?;
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{}", v.to_sql())?;
    }
    write!(f, ")")
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::True => write!(f, "true"),
            p if p.is_falsity() => write!(f, "false"),
            Predicate::Not(p) => {
                write!(f, "not ")?;
                match **p {
                    Predicate::AttrEqConst(..)
                    | Predicate::AttrCmp(..)
                    | Predicate::AttrEqAttr(..)
                    | Predicate::TupleIn(..) => write!(f, "({p})"),
                    _ => p.fmt_child(f),
                }
            }
            Predicate::And(p, q) => {
                p.fmt_child(f)?;
                write!(f, " and ")?;
                q.fmt_child(f)
            }
            Predicate::Or(p, q) => {
                p.fmt_child(f)?;
                write!(f, " or ")?;
                q.fmt_child(f)
            }
            Predicate::JoinPred(p, q) => {
                p.fmt_child(f)?;
                write!(f, " join ")?;
                q.fmt_child(f)
            }
            Predicate::AttrEqConst(a, v) => write!(f, "{a} = {}", v.to_sql()),
            Predicate::AttrEqAttr(a, b) => write!(f, "{a} = {b}"),
            Predicate::AttrCmp(a, op, v) => write!(f, "{a} {} {}", op.symbol(), v.to_sql()),
            Predicate::TupleIn(rel) => {
                let d = rel.domain();
                if d.len() == 1 {
                    write!(f, "{} in (", d[0])?;
                } else {
                    write!(f, "({}) in (", d.join(", "))?;
                }
                for (i, r) in rel.rows().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    fmt_tuple(f, r)?;
                }
                write!(f, ")")
            }
            Predicate::Renamed { from, to, inner } => {
                write!(f, "rename {from} to {to} in ")?;
                inner.fmt_child(f)
            }
            Predicate::ProjPred(p, attrs) => {
                write!(f, "project [{}] ", attrs.join(", "))?;
                p.fmt_child(f)
            }
        }
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A predicate bound to column positions of a particular domain.
#[derive(Clone, Debug)]
pub enum Compiled {
    Const(bool),
    Not(Box<Compiled>),
    And(Box<Compiled>, Box<Compiled>),
    Or(Box<Compiled>, Box<Compiled>),
    EqConst(usize, Value),
    EqAttr(usize, usize),
    Cmp(usize, CmpOp, Value),
    In(Vec<usize>, Arc<Relation>),
}

impl Compiled {
    pub fn eval(&self, row: &[Value]) -> Result<bool> {
        Ok(match self {
            Compiled::Const(b) => *b,
            Compiled::Not(p) => !p.eval(row)?,
            Compiled::And(p, q) => p.eval(row)? && q.eval(row)?,
            Compiled::Or(p, q) => p.eval(row)? || q.eval(row)?,
            Compiled::EqConst(i, v) => row[*i].compare(v)? == Ordering::Equal,
            Compiled::EqAttr(i, j) => row[*i].compare(&row[*j])? == Ordering::Equal,
            Compiled::Cmp(i, op, v) => op.holds(row[*i].compare(v)?),
            Compiled::In(cols, rel) => {
                let key: Vec<Value> = cols.iter().map(|&i| row[i].clone()).collect();
                rel.contains_row(&key)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pairs: &[(&str, i64)]) -> Record {
        pairs.iter().map(|&(a, v)| (a, Value::Int(v))).collect()
    }

    #[test]
    fn constant_equality() {
        assert!(Predicate::eq("A", 3).eval(&rec(&[("A", 3)])).unwrap());
        assert!(!Predicate::eq("A", 3).eval(&rec(&[("A", 4)])).unwrap());
    }

    #[test]
    fn tuple_membership_uses_projection() {
        let p = Predicate::tuple_in(Relation::ints("A", [1, 2]));
        assert!(p.eval(&rec(&[("A", 2), ("B", 9)])).unwrap());
        assert!(!p.eval(&rec(&[("A", 3), ("B", 9)])).unwrap());
    }

    #[test]
    fn quantity_filter() {
        let p = Predicate::and(Predicate::cmp("quantity", CmpOp::Gt, 2), Predicate::True);
        let m = Record::new().with("quantity", 1).with("album", "Galore");
        assert!(!p.eval(&m).unwrap());
    }

    #[test]
    fn errors() {
        let m = rec(&[("A", 1)]);
        assert!(matches!(
            Predicate::eq("B", 1).eval(&m),
            Err(Error::MissingAttribute(_))
        ));
        assert!(matches!(
            Predicate::eq("A", "x").eval(&m),
            Err(Error::TypeMismatch { .. })
        ));
        let proj = Predicate::ProjPred(Box::new(Predicate::True), vec!["A".into()]);
        assert!(matches!(proj.eval(&m), Err(Error::Unevaluable(_))));
    }

    #[test]
    fn ignores_is_an_occurrence_check() {
        assert!(Predicate::eq("A", 1).ignores(&["B"]));
        assert!(!Predicate::eq("A", 1).ignores(&["A"]));
        let p = Predicate::or(Predicate::eq("A", 1), Predicate::eq("B", 2));
        assert!(!p.ignores(&["B"]));
    }

    #[test]
    fn renamed_predicate_reads_the_new_name() {
        let p = Predicate::renamed("A", "B", Predicate::eq("A", 1));
        assert!(p.eval(&rec(&[("B", 1)])).unwrap());
        assert!(p.attributes().contains("B"));
        assert!(!p.attributes().contains("A"));
        assert_eq!(p.normalize().unwrap(), Predicate::eq("B", 1));
    }

    #[test]
    fn join_predicate_is_a_conjunction() {
        let p = Predicate::join_pred(Predicate::eq("A", 1), Predicate::eq("C", 2));
        assert!(p.eval(&rec(&[("A", 1), ("B", 0), ("C", 2)])).unwrap());
        assert!(!p.eval(&rec(&[("A", 1), ("B", 0), ("C", 3)])).unwrap());
    }

    #[test]
    fn smart_constructors_absorb_units() {
        assert_eq!(Predicate::and(Predicate::True, Predicate::eq("A", 1)), Predicate::eq("A", 1));
        assert_eq!(Predicate::any([]), Predicate::falsity());
        assert_eq!(
            Predicate::or(Predicate::falsity(), Predicate::eq("A", 1)),
            Predicate::eq("A", 1)
        );
    }

    #[test]
    fn display() {
        let p = Predicate::or(
            Predicate::tuple_in(Relation::ints("A", [1, 2])),
            Predicate::not(Predicate::cmp("B", CmpOp::Le, 3)),
        );
        assert_eq!(p.to_string(), "A in (1, 2) or not (B <= 3)");
    }
}
