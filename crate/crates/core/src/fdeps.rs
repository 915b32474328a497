//! Functional dependencies in tree form, relational revision and merge.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::relalg::{positions, Predicate, Record, Relation, Row, Value};

pub type AttrSet = BTreeSet<String>;

/// `X -> Y`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunDep {
    pub lhs: AttrSet,
    pub rhs: AttrSet,
}

impl FunDep {
    pub fn new<L, R, S1, S2>(lhs: L, rhs: R) -> FunDep
    where
        L: IntoIterator<Item = S1>,
        R: IntoIterator<Item = S2>,
        S1: Into<String>,
        S2: Into<String>,
    {
        FunDep {
            lhs: lhs.into_iter().map(Into::into).collect(),
            rhs: rhs.into_iter().map(Into::into).collect(),
        }
    }

    pub fn lhs_vec(&self) -> Vec<String> {
        self.lhs.iter().cloned().collect()
    }

    pub fn rhs_vec(&self) -> Vec<String> {
        self.rhs.iter().cloned().collect()
    }

    /// Checks `M ⊨ X -> Y`, reporting two disagreeing rows on failure.
    pub fn check(&self, rel: &Relation) -> Result<()> {
        let xs = positions(rel.domain(), &self.lhs_vec())?;
        let ys = positions(rel.domain(), &self.rhs_vec())?;
        let mut seen: HashMap<Vec<&Value>, &Row> = HashMap::with_capacity(rel.len());
        for r in rel.rows() {
            let key: Vec<&Value> = xs.iter().map(|&i| &r[i]).collect();
            match seen.get(&key) {
                Some(prev) if ys.iter().any(|&i| prev[i] != r[i]) => {
                    return Err(Error::FdViolation {
                        fd: self.to_string(),
                        witness: format!("{} and {}", rel.to_record(prev), rel.to_record(r)),
                    });
                }
                Some(_) => {}
                None => {
                    seen.insert(key, r);
                }
            }
        }
        Ok(())
    }

    /// X-values to Y-values of `n`, failing if `n ⊭ X -> Y`.
    fn index(&self, n: &Relation) -> Result<HashMap<Vec<Value>, Vec<Value>>> {
        let xs = positions(n.domain(), &self.lhs_vec())?;
        let ys = positions(n.domain(), &self.rhs_vec())?;
        let mut map: HashMap<Vec<Value>, Vec<Value>> = HashMap::with_capacity(n.len());
        for r in n.rows() {
            let key: Vec<Value> = xs.iter().map(|&i| r[i].clone()).collect();
            let val: Vec<Value> = ys.iter().map(|&i| r[i].clone()).collect();
            if let Some(prev) = map.get(&key) {
                if *prev != val {
                    return Err(Error::FdViolation {
                        fd: self.to_string(),
                        witness: format!("X={key:?} maps to both {prev:?} and {val:?}"),
                    });
                }
            } else {
                map.insert(key, val);
            }
        }
        Ok(map)
    }
}

impl fmt::Display for FunDep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs_vec().join(" "), self.rhs_vec().join(" "))
    }
}

impl fmt::Debug for FunDep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// The attribute families derived from a dependency set.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct FdParts {
    pub left: AttrSet,
    pub right: AttrSet,
    pub outputs: AttrSet,
    pub roots: BTreeSet<AttrSet>,
}

/// A set of functional dependencies validated to be in tree form.
///
/// Dependencies are stored in revision order: each dependency's left-hand
/// side is a root once its predecessors have been removed. Ties between
/// simultaneous roots are broken by the sorted attribute names of the
/// left-hand side.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct FunDepSet {
    deps: Vec<FunDep>,
}

impl FunDepSet {
    pub fn empty() -> FunDepSet {
        FunDepSet::default()
    }

    /// Validates tree form and fixes the revision order.
    pub fn new(deps: impl IntoIterator<Item = FunDep>) -> Result<FunDepSet> {
        let deps: BTreeSet<FunDep> = deps.into_iter().collect();
        for d in &deps {
            if d.lhs.is_empty() || d.rhs.is_empty() {
                return Err(Error::NotTreeForm(format!("{d} has an empty side")));
            }
            if let Some(a) = d.lhs.intersection(&d.rhs).next() {
                return Err(Error::NotTreeForm(format!("{d} mentions `{a}` on both sides")));
            }
        }

        let mut nodes: BTreeSet<&AttrSet> = BTreeSet::new();
        for d in &deps {
            nodes.insert(&d.lhs);
            nodes.insert(&d.rhs);
        }
        let nodes: Vec<&AttrSet> = nodes.into_iter().collect();
        for (i, a) in nodes.iter().enumerate() {
            for b in &nodes[i + 1..] {
                if let Some(x) = a.intersection(b).next() {
                    return Err(Error::NotTreeForm(format!(
                        "nodes {{{}}} and {{{}}} overlap on `{x}`",
                        join(a),
                        join(b)
                    )));
                }
            }
        }

        let mut parents: HashMap<&AttrSet, &AttrSet> = HashMap::new();
        for d in &deps {
            if let Some(p) = parents.insert(&d.rhs, &d.lhs) {
                return Err(Error::NotTreeForm(format!(
                    "node {{{}}} is determined by both {{{}}} and {{{}}}",
                    join(&d.rhs),
                    join(p),
                    join(&d.lhs)
                )));
            }
        }

        let mut remaining: Vec<FunDep> = deps.into_iter().collect();
        let mut ordered = Vec::with_capacity(remaining.len());
        while !remaining.is_empty() {
            let right: AttrSet = remaining.iter().flat_map(|d| d.rhs.iter().cloned()).collect();
            // `remaining` stays sorted, so the first root is the canonical one.
            let Some(i) = remaining.iter().position(|d| d.lhs.is_disjoint(&right)) else {
                return Err(Error::NotTreeForm(format!(
                    "cycle among {}",
                    remaining.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
                )));
            };
            ordered.push(remaining.remove(i));
        }
        Ok(FunDepSet { deps: ordered })
    }

    /// Parses `A -> B C; B -> D`. Blank input is the empty set.
    pub fn parse(text: &str) -> Result<FunDepSet> {
        let mut deps = Vec::new();
        let mut offset = 0;
        for part in text.split(';') {
            let col = offset + 1;
            offset += part.len() + 1;
            if part.trim().is_empty() {
                continue;
            }
            let Some((l, r)) = part.split_once("->") else {
                return Err(Error::parse(1, col, format!("expected `->` in `{}`", part.trim())));
            };
            let names = |s: &str| -> Result<Vec<String>> {
                let v: Vec<String> = s
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .map(String::from)
                    .collect();
                if v.is_empty() {
                    return Err(Error::parse(1, col, format!("empty side in `{}`", part.trim())));
                }
                if let Some(bad) = v.iter().find(|t| !is_ident(t)) {
                    return Err(Error::parse(1, col, format!("bad attribute name `{bad}`")));
                }
                Ok(v)
            };
            deps.push(FunDep::new(names(l)?, names(r)?));
        }
        FunDepSet::new(deps)
    }

    pub fn deps(&self) -> &[FunDep] {
        &self.deps
    }

    pub fn is_empty(&self) -> bool {
        self.deps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.deps.len()
    }

    pub fn left(&self) -> AttrSet {
        self.deps.iter().flat_map(|d| d.lhs.iter().cloned()).collect()
    }

    pub fn right(&self) -> AttrSet {
        self.deps.iter().flat_map(|d| d.rhs.iter().cloned()).collect()
    }

    /// Attributes constrained by other attributes. For tree form this is
    /// exactly `right(F)`.
    pub fn outputs(&self) -> AttrSet {
        self.right()
    }

    pub fn roots(&self) -> BTreeSet<AttrSet> {
        let right = self.right();
        self.deps
            .iter()
            .filter(|d| d.lhs.is_disjoint(&right))
            .map(|d| d.lhs.clone())
            .collect()
    }

    pub fn parts(&self) -> FdParts {
        FdParts {
            left: self.left(),
            right: self.right(),
            outputs: self.outputs(),
            roots: self.roots(),
        }
    }

    pub fn attributes(&self) -> AttrSet {
        let mut a = self.left();
        a.extend(self.right());
        a
    }

    /// Checks every dependency, projecting when the relation has extra
    /// attributes.
    pub fn check(&self, rel: &Relation) -> Result<()> {
        self.deps.iter().try_for_each(|d| d.check(rel))
    }

    pub fn satisfied_by(&self, rel: &Relation) -> bool {
        self.check(rel).is_ok()
    }

    /// Attribute closure of `attrs` under the dependencies.
    pub fn closure<S: AsRef<str>>(&self, attrs: &[S]) -> AttrSet {
        let mut out: AttrSet = attrs.iter().map(|a| a.as_ref().to_string()).collect();
        loop {
            let before = out.len();
            for d in &self.deps {
                if d.lhs.is_subset(&out) {
                    out.extend(d.rhs.iter().cloned());
                }
            }
            if out.len() == before {
                return out;
            }
        }
    }

    pub fn record_revise(&self, m: &Record, n: &Relation) -> Result<Record> {
        let mut m = m.clone();
        for d in &self.deps {
            let index = d.index(n)?;
            let key: Vec<Value> = d
                .lhs
                .iter()
                .map(|a| m.require(a).cloned())
                .collect::<Result<_>>()?;
            if let Some(ys) = index.get(&key) {
                for (a, v) in d.rhs.iter().zip(ys) {
                    m.set(a.clone(), v.clone());
                }
            }
        }
        Ok(m)
    }

    /// Relational revision of `m` against `n`. Both must share a domain.
    pub fn revise(&self, m: &Relation, n: &Relation) -> Result<Relation> {
        if !m.same_domain(n) {
            return Err(Error::domain_mismatch(m.domain(), n.domain()));
        }
        if self.deps.is_empty() || m.is_empty() || n.is_empty() {
            self.check(n)?;
            return Ok(m.clone());
        }
        let mut rows: Vec<Row> = m.rows().cloned().collect();
        for d in &self.deps {
            let index = d.index(n)?;
            let xs = positions(m.domain(), &d.lhs_vec())?;
            let ys = positions(m.domain(), &d.rhs_vec())?;
            for r in &mut rows {
                let key: Vec<Value> = xs.iter().map(|&i| r[i].clone()).collect();
                if let Some(vals) = index.get(&key) {
                    for (&i, v) in ys.iter().zip(vals) {
                        r[i] = v.clone();
                    }
                }
            }
        }
        Ok(Relation::from_parts(m.shared_domain(), rows.into_iter().collect()))
    }

    /// `revise(M, F, N) ∪ N`.
    pub fn merge(&self, m: &Relation, n: &Relation) -> Result<Relation> {
        self.revise(m, n)?.union(n)
    }

    /// A predicate selecting a superset of the rows of any `M` that a merge
    /// with `n` can change.
    pub fn affected(&self, n: &Relation) -> Result<Predicate> {
        if n.is_empty() {
            return Ok(Predicate::falsity());
        }
        let lhss: BTreeSet<&AttrSet> = self.deps.iter().map(|d| &d.lhs).collect();
        let mut parts = Vec::with_capacity(lhss.len());
        for x in lhss {
            let x: Vec<&String> = x.iter().collect();
            parts.push(Predicate::tuple_in(n.project(&x)?));
        }
        Ok(Predicate::any(parts))
    }

    pub fn rename(&self, from: &str, to: &str) -> Result<FunDepSet> {
        let sub = |s: &AttrSet| -> AttrSet {
            s.iter()
                .map(|a| if a == from { to.to_string() } else { a.clone() })
                .collect()
        };
        FunDepSet::new(self.deps.iter().map(|d| FunDep {
            lhs: sub(&d.lhs),
            rhs: sub(&d.rhs),
        }))
    }

    pub fn union(&self, other: &FunDepSet) -> Result<FunDepSet> {
        FunDepSet::new(self.deps.iter().chain(&other.deps).cloned())
    }

    /// Splits `F` as `F' ⊎ {X -> attr}` where `X -> attr` is obtained by
    /// taking `attr` out of the unique dependency whose right side holds it.
    pub fn split_off(&self, attr: &str) -> Option<(FunDepSet, FunDep)> {
        let i = self.deps.iter().position(|d| d.rhs.contains(attr))?;
        let d = &self.deps[i];
        let taken = FunDep::new(d.lhs.iter().cloned(), [attr]);
        let mut rest: Vec<FunDep> = self.deps.clone();
        if d.rhs.len() == 1 {
            rest.remove(i);
        } else {
            rest[i].rhs.remove(attr);
        }
        let rest = FunDepSet::new(rest).ok()?;
        Some((rest, taken))
    }

    pub fn restrict_to<S: AsRef<str>>(&self, attrs: &[S]) -> bool {
        let u: AttrSet = attrs.iter().map(|a| a.as_ref().to_string()).collect();
        self.attributes().is_subset(&u)
    }
}

fn join(s: &AttrSet) -> String {
    s.iter().cloned().collect::<Vec<_>>().join(" ")
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_alphabetic() || c == '_')
        && cs.all(|c| c.is_alphanumeric() || c == '_')
}

impl fmt::Display for FunDepSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.deps.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

impl fmt::Debug for FunDepSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(names: &[&str]) -> AttrSet {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn ab(rows: &[(i64, i64)]) -> Relation {
        Relation::from_tuples(&["A", "B"], rows.iter().map(|&(a, b)| [a.into(), b.into()])).unwrap()
    }

    #[test]
    fn tree_form_accepts_split_dependencies() {
        let f = FunDepSet::parse("A -> B; A -> C; B -> D").unwrap();
        assert_eq!(f.len(), 3);
        assert!(FunDepSet::parse("").unwrap().is_empty());
    }

    #[test]
    fn tree_form_rejects_overlap_and_cycles() {
        let err = FunDepSet::parse("A -> B C; B -> D").unwrap_err();
        assert!(matches!(err, Error::NotTreeForm(w) if w.contains("`B`")));
        assert!(FunDepSet::parse("A -> B; B -> A").is_err());
        assert!(FunDepSet::parse("A -> B; C -> B").is_err());
        assert!(FunDepSet::parse("A -> A").is_err());
        assert!(matches!(FunDepSet::parse("A B"), Err(Error::Parse { .. })));
    }

    #[test]
    fn parts_follow_definitions() {
        let f = FunDepSet::parse("A -> B; B -> D").unwrap();
        let p = f.parts();
        assert_eq!(p.roots, [set(&["A"])].into());
        assert_eq!(p.left, set(&["A", "B"]));
        assert_eq!(p.right, set(&["B", "D"]));
        assert_eq!(p.outputs, set(&["B", "D"]));
        assert_eq!(FunDepSet::empty().parts(), FdParts::default());
        let g = FunDepSet::parse("A -> B; C -> D").unwrap();
        assert_eq!(g.roots(), [set(&["A"]), set(&["C"])].into());
    }

    #[test]
    fn revision_order_is_topological() {
        let f = FunDepSet::parse("B -> D; A -> B").unwrap();
        assert_eq!(f.to_string(), "A -> B; B -> D");
    }

    #[test]
    fn satisfaction() {
        let f = FunDepSet::parse("A -> B").unwrap();
        assert!(!f.satisfied_by(&ab(&[(1, 2), (1, 3)])));
        assert!(f.satisfied_by(&ab(&[])));
        assert!(f.satisfied_by(&ab(&[(1, 2), (2, 2)])));
    }

    #[test]
    fn revision_example() {
        let f = FunDepSet::parse("A -> B").unwrap();
        let n = ab(&[(1, 42)]);
        let m1 = Record::new().with("A", 1).with("B", 2);
        let m2 = Record::new().with("A", 2).with("B", 3);
        assert_eq!(f.record_revise(&m1, &n).unwrap(), Record::new().with("A", 1).with("B", 42));
        assert_eq!(f.record_revise(&m2, &n).unwrap(), m2);
        let m = ab(&[(1, 2), (2, 3)]);
        assert_eq!(f.revise(&m, &n).unwrap(), ab(&[(1, 42), (2, 3)]));
        assert_eq!(f.merge(&m, &n).unwrap(), ab(&[(1, 42), (2, 3)]));
        assert_eq!(f.revise(&ab(&[]), &n).unwrap(), ab(&[]));
        assert_eq!(f.revise(&m, &ab(&[])).unwrap(), m);
        assert_eq!(f.merge(&ab(&[]), &n).unwrap(), n);
        assert_eq!(FunDepSet::empty().record_revise(&m1, &n).unwrap(), m1);
    }

    #[test]
    fn revision_requires_consistent_source() {
        let f = FunDepSet::parse("A -> B").unwrap();
        let err = f.revise(&ab(&[(1, 1)]), &ab(&[(1, 2), (1, 3)])).unwrap_err();
        assert!(matches!(err, Error::FdViolation { .. }));
    }

    #[test]
    fn affected_predicates() {
        let f = FunDepSet::parse("A -> B").unwrap();
        assert_eq!(
            f.affected(&ab(&[(1, 7), (2, 8)])).unwrap(),
            Predicate::tuple_in(Relation::ints("A", [1, 2]))
        );
        assert_eq!(FunDepSet::empty().affected(&ab(&[(1, 1)])).unwrap(), Predicate::falsity());
        let g = FunDepSet::parse("A -> B; B -> D").unwrap();
        let n = Relation::from_tuples(&["A", "B", "D"], [[1, 5, 0].map(Value::Int)]).unwrap();
        assert_eq!(
            g.affected(&n).unwrap(),
            Predicate::or(
                Predicate::tuple_in(Relation::ints("A", [1])),
                Predicate::tuple_in(Relation::ints("B", [5]))
            )
        );
    }

    #[test]
    fn split_off_for_drop() {
        let f = FunDepSet::parse("track -> date rating").unwrap();
        let (rest, taken) = f.split_off("date").unwrap();
        assert_eq!(rest.to_string(), "track -> rating");
        assert_eq!(taken.to_string(), "track -> date");
        assert!(f.split_off("track").is_none());
    }

    #[test]
    fn closure_follows_chains() {
        let f = FunDepSet::parse("A -> B; B -> D").unwrap();
        assert_eq!(f.closure(&["A"]), set(&["A", "B", "D"]));
        assert_eq!(f.closure(&["D"]), set(&["D"]));
    }

    // Revision with an explicit dependency order, any order that respects
    // the root condition.
    fn revise_in_order(m: &Record, order: &[FunDep], n: &Relation) -> Record {
        let mut m = m.clone();
        for d in order {
            let key: Vec<Value> = d.lhs.iter().map(|a| m.get(a).unwrap().clone()).collect();
            if let Some(ys) = d.index(n).unwrap().get(&key) {
                for (a, v) in d.rhs.iter().zip(ys) {
                    m.set(a.clone(), v.clone());
                }
            }
        }
        m
    }

    fn valid_orders(rest: Vec<FunDep>) -> Vec<Vec<FunDep>> {
        if rest.is_empty() {
            return vec![vec![]];
        }
        let right: AttrSet = rest.iter().flat_map(|d| d.rhs.iter().cloned()).collect();
        let mut out = Vec::new();
        for (i, d) in rest.iter().enumerate() {
            if d.lhs.is_disjoint(&right) {
                let mut r = rest.clone();
                r.remove(i);
                for mut tail in valid_orders(r) {
                    tail.insert(0, d.clone());
                    out.push(tail);
                }
            }
        }
        out
    }

    const ATTRS: [&str; 5] = ["A", "B", "C", "D", "E"];

    fn arb_forest() -> impl Strategy<Value = FunDepSet> {
        // Each attribute after the first optionally points to an earlier parent.
        proptest::collection::vec(proptest::option::of(0usize..4), 4).prop_map(|parents| {
            let deps = parents.iter().enumerate().filter_map(|(i, p)| {
                p.map(|p| FunDep::new([ATTRS[p % (i + 1)]], [ATTRS[i + 1]]))
            });
            FunDepSet::new(deps).unwrap()
        })
    }

    fn arb_rel(max: usize) -> impl Strategy<Value = Relation> {
        proptest::collection::vec(proptest::collection::vec(0i64..3, 5), 0..max).prop_map(|rows| {
            Relation::from_tuples(&ATTRS, rows.into_iter().map(|r| r.into_iter().map(Value::Int)))
                .unwrap()
        })
    }

    fn consistent(f: &FunDepSet, rel: Relation) -> Relation {
        // Keep the largest prefix satisfying F.
        let mut out = Relation::empty(ATTRS);
        for r in rel.rows() {
            let mut next = out.clone();
            next.insert_row(r.clone());
            if f.satisfied_by(&next) {
                out = next;
            }
        }
        out
    }

    proptest! {
        #[test]
        fn revision_is_order_independent(f in arb_forest(), m in arb_rel(6), n in arb_rel(8)) {
            let n = consistent(&f, n);
            let orders = valid_orders(f.deps().to_vec());
            for rec in m.records() {
                let expect = f.record_revise(&rec, &n).unwrap();
                for o in &orders {
                    prop_assert_eq!(&revise_in_order(&rec, o, &n), &expect);
                }
                let outs: Vec<String> = f.outputs().into_iter().collect();
                prop_assert_eq!(rec.antirestrict(&outs), expect.antirestrict(&outs));
            }
        }

        #[test]
        fn merge_contains_n_and_preserves_dependencies(
            f in arb_forest(), m in arb_rel(8), n in arb_rel(8)
        ) {
            let m = consistent(&f, m);
            let n = consistent(&f, n);
            let merged = f.merge(&m, &n).unwrap();
            prop_assert!(n.is_subset(&merged).unwrap());
            prop_assert!(f.satisfied_by(&merged));
        }
    }
}
