use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::fdeps::FunDepSet;
use crate::relalg::{Kind, Predicate, Relation};

/// A binary tensor tree. Schemas, database instances and deltas over a
/// schema all share this shape.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Tree<T> {
    Leaf(T),
    Pair(Box<Tree<T>>, Box<Tree<T>>),
}

impl<T> Tree<T> {
    pub fn pair(a: Tree<T>, b: Tree<T>) -> Tree<T> {
        Tree::Pair(Box::new(a), Box::new(b))
    }

    pub fn as_leaf(&self) -> Option<&T> {
        match self {
            Tree::Leaf(t) => Some(t),
            Tree::Pair(..) => None,
        }
    }

    pub fn into_leaf(self) -> Option<T> {
        match self {
            Tree::Leaf(t) => Some(t),
            Tree::Pair(..) => None,
        }
    }

    pub fn as_pair(&self) -> Option<(&Tree<T>, &Tree<T>)> {
        match self {
            Tree::Pair(a, b) => Some((a, b)),
            Tree::Leaf(_) => None,
        }
    }

    pub fn into_pair(self) -> Option<(Tree<T>, Tree<T>)> {
        match self {
            Tree::Pair(a, b) => Some((*a, *b)),
            Tree::Leaf(_) => None,
        }
    }

    /// Leaves from left to right.
    pub fn leaves(&self) -> Vec<&T> {
        let mut out = Vec::new();
        fn go<'a, T>(t: &'a Tree<T>, out: &mut Vec<&'a T>) {
            match t {
                Tree::Leaf(x) => out.push(x),
                Tree::Pair(a, b) => {
                    go(a, out);
                    go(b, out);
                }
            }
        }
        go(self, &mut out);
        out
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Tree<U> {
        fn go<T, U>(t: &Tree<T>, f: &mut dyn FnMut(&T) -> U) -> Tree<U> {
            match t {
                Tree::Leaf(x) => Tree::Leaf(f(x)),
                Tree::Pair(a, b) => Tree::pair(go(a, f), go(b, f)),
            }
        }
        go(self, &mut f)
    }

    pub fn try_map<U>(&self, mut f: impl FnMut(&T) -> Result<U>) -> Result<Tree<U>> {
        fn go<T, U>(t: &Tree<T>, f: &mut dyn FnMut(&T) -> Result<U>) -> Result<Tree<U>> {
            Ok(match t {
                Tree::Leaf(x) => Tree::Leaf(f(x)?),
                Tree::Pair(a, b) => Tree::pair(go(a, f)?, go(b, f)?),
            })
        }
        go(self, &mut f)
    }

    /// Pairs up the leaves of two trees of the same shape.
    pub fn zip_with<U, V>(
        &self,
        other: &Tree<U>,
        mut f: impl FnMut(&T, &U) -> Result<V>,
    ) -> Result<Tree<V>> {
        fn go<T, U, V>(
            a: &Tree<T>,
            b: &Tree<U>,
            f: &mut dyn FnMut(&T, &U) -> Result<V>,
        ) -> Result<Tree<V>> {
            match (a, b) {
                (Tree::Leaf(x), Tree::Leaf(y)) => Ok(Tree::Leaf(f(x, y)?)),
                (Tree::Pair(a1, a2), Tree::Pair(b1, b2)) => {
                    Ok(Tree::pair(go(a1, b1, f)?, go(a2, b2, f)?))
                }
                _ => Err(Error::schema("shape", "value does not match the schema shape")),
            }
        }
        go(self, other, &mut f)
    }
}

impl<T: fmt::Debug> fmt::Debug for Tree<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Leaf(x) => x.fmt(f),
            Tree::Pair(a, b) => write!(f, "({a:?} ⊗ {b:?})"),
        }
    }
}

/// A relation type `(U, P, F)` together with column kinds, the declared
/// column order and the table keys used for SQL.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RelationType {
    columns: Vec<(String, Kind)>,
    pred: Predicate,
    fds: FunDepSet,
    keys: Vec<String>,
}

impl RelationType {
    pub fn new(
        columns: Vec<(String, Kind)>,
        pred: Predicate,
        fds: FunDepSet,
        keys: Vec<String>,
    ) -> Result<RelationType> {
        let mut seen = BTreeSet::new();
        for (c, _) in &columns {
            if c.is_empty() || !seen.insert(c.as_str()) {
                return Err(Error::type_error("table", format!("duplicate or empty column `{c}`")));
            }
        }
        let missing = |a: &String| !seen.contains(a.as_str());
        if let Some(a) = pred.attributes().iter().find(|a| missing(a)) {
            return Err(Error::type_error("table", format!("predicate mentions unknown `{a}`")));
        }
        if let Some(a) = fds.attributes().iter().find(|a| missing(a)) {
            return Err(Error::type_error("table", format!("dependency mentions unknown `{a}`")));
        }
        if let Some(a) = keys.iter().find(|a| missing(a)) {
            return Err(Error::type_error("table", format!("key mentions unknown `{a}`")));
        }
        Ok(RelationType {
            columns,
            pred,
            fds,
            keys,
        })
    }

    /// Integer columns, no predicate, no dependencies.
    pub fn ints<S: AsRef<str>>(attrs: &[S]) -> RelationType {
        RelationType {
            columns: attrs.iter().map(|a| (a.as_ref().to_string(), Kind::Int)).collect(),
            pred: Predicate::True,
            fds: FunDepSet::empty(),
            keys: Vec::new(),
        }
    }

    pub fn with_pred(mut self, pred: Predicate) -> Result<RelationType> {
        self.pred = pred;
        RelationType::new(self.columns, self.pred, self.fds, self.keys)
    }

    pub fn with_fds(mut self, fds: FunDepSet) -> Result<RelationType> {
        self.fds = fds;
        RelationType::new(self.columns, self.pred, self.fds, self.keys)
    }

    pub fn with_keys<S: AsRef<str>>(mut self, keys: &[S]) -> Result<RelationType> {
        self.keys = keys.iter().map(|k| k.as_ref().to_string()).collect();
        RelationType::new(self.columns, self.pred, self.fds, self.keys)
    }

    /// Columns in declared order.
    pub fn columns(&self) -> &[(String, Kind)] {
        &self.columns
    }

    /// The attribute set, sorted.
    pub fn attrs(&self) -> Vec<String> {
        let mut a: Vec<String> = self.columns.iter().map(|(c, _)| c.clone()).collect();
        a.sort();
        a
    }

    pub fn has_attr(&self, attr: &str) -> bool {
        self.columns.iter().any(|(c, _)| c == attr)
    }

    pub fn kind_of(&self, attr: &str) -> Option<Kind> {
        self.columns.iter().find(|(c, _)| c == attr).map(|(_, k)| *k)
    }

    pub fn pred(&self) -> &Predicate {
        &self.pred
    }

    pub fn fds(&self) -> &FunDepSet {
        &self.fds
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    /// Declared keys, or every column when none are declared.
    pub fn effective_keys(&self) -> Vec<String> {
        if self.keys.is_empty() {
            self.columns.iter().map(|(c, _)| c.clone()).collect()
        } else {
            self.keys.clone()
        }
    }

    pub fn empty_relation(&self) -> Relation {
        Relation::empty(self.attrs())
    }

    /// Checks domain, column kinds and the row predicate, but not the
    /// dependencies.
    pub fn check_rows(&self, rel: &Relation) -> Result<()> {
        if rel.domain() != self.attrs().as_slice() {
            return Err(Error::schema(
                "domain",
                format!("expected {:?}, found {:?}", self.attrs(), rel.domain()),
            ));
        }
        let kinds: Vec<Kind> = rel
            .domain()
            .iter()
            .map(|a| self.kind_of(a).expect("same domain"))
            .collect();
        for row in rel.rows() {
            if let Some((i, v)) = row.iter().enumerate().find(|(i, v)| v.kind() != kinds[*i]) {
                return Err(Error::schema(
                    "kind",
                    format!("{} = {v} should be {}", rel.domain()[i], kinds[i]),
                ));
            }
        }
        if self.pred != Predicate::True {
            let compiled = self.pred.normalize()?.compile(rel.domain())?;
            for row in rel.rows() {
                if !compiled.eval(row)? {
                    return Err(Error::schema(
                        "predicate",
                        format!("row {} fails {}", rel.to_record(row), self.pred),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Full conformance, dependencies included.
    pub fn conforms(&self, rel: &Relation) -> Result<()> {
        self.check_rows(rel)?;
        self.fds.check(rel).map_err(|e| Error::schema("fd", e.to_string()))
    }
}

impl fmt::Debug for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols: Vec<String> = self.columns.iter().map(|(c, k)| format!("{c}:{k}")).collect();
        write!(f, "({}; {}; {:?})", cols.join(", "), self.pred, self.fds)
    }
}

/// A named relation type, the leaf of a schema.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Table {
    pub name: String,
    pub ty: RelationType,
}

impl Table {
    pub fn new(name: impl Into<String>, ty: RelationType) -> Table {
        Table {
            name: name.into(),
            ty,
        }
    }
}

/// A tensor product of named relation types.
pub type Schema = Tree<Table>;

impl Schema {
    pub fn table(name: impl Into<String>, ty: RelationType) -> Schema {
        Tree::Leaf(Table::new(name, ty))
    }

    /// Checks every relation of `db` against its type.
    pub fn conforms(&self, db: &Tree<Relation>) -> Result<()> {
        self.zip_with(db, |t, r| {
            t.ty.conforms(r).map_err(|e| match e {
                Error::SchemaViolation { constraint, detail } => Error::SchemaViolation {
                    constraint,
                    detail: format!("{}: {detail}", t.name),
                },
                e => e,
            })
        })
        .map(drop)
    }

    pub fn empty_instance(&self) -> Tree<Relation> {
        self.map(|t| t.ty.empty_relation())
    }
}
