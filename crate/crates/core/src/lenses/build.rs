use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::fdeps::{is_ident, FunDep};
use crate::lenses::types::{RelationType, Schema, Table, Tree};
use crate::relalg::{Kind, Predicate, Record, Value};

/// How a join lens translates a view deletion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JoinVariant {
    DeleteLeft,
    DeleteRight,
    DeleteBoth,
}

/// Untyped lens syntax.
///
/// The primitives take the lens producing their source as an argument, so
/// `Select { inner, .. }` stands for `inner ; select`.
#[derive(Clone, Debug, PartialEq)]
pub enum LensExpr {
    Base(String),
    Select {
        pred: Predicate,
        inner: Box<LensExpr>,
    },
    Drop {
        attr: String,
        det: Vec<String>,
        default: Value,
        inner: Box<LensExpr>,
    },
    Join {
        variant: JoinVariant,
        left: Box<LensExpr>,
        right: Box<LensExpr>,
    },
    Rename {
        from: String,
        to: String,
        inner: Box<LensExpr>,
    },
    Id,
    Compose(Box<LensExpr>, Box<LensExpr>),
    Sym,
    Assoc,
    Tensor(Box<LensExpr>, Box<LensExpr>),
}

impl LensExpr {
    pub fn base(table: impl Into<String>) -> LensExpr {
        LensExpr::Base(table.into())
    }

    pub fn select(self, pred: Predicate) -> LensExpr {
        LensExpr::Select {
            pred,
            inner: Box::new(self),
        }
    }

    pub fn drop<S: AsRef<str>>(self, attr: &str, det: &[S], default: impl Into<Value>) -> LensExpr {
        LensExpr::Drop {
            attr: attr.to_string(),
            det: det.iter().map(|a| a.as_ref().to_string()).collect(),
            default: default.into(),
            inner: Box::new(self),
        }
    }

    pub fn join(self, right: LensExpr) -> LensExpr {
        LensExpr::Join {
            variant: JoinVariant::DeleteLeft,
            left: Box::new(self),
            right: Box::new(right),
        }
    }

    pub fn rename(self, from: &str, to: &str) -> LensExpr {
        LensExpr::Rename {
            from: from.to_string(),
            to: to.to_string(),
            inner: Box::new(self),
        }
    }

    pub fn then(self, next: LensExpr) -> LensExpr {
        LensExpr::Compose(Box::new(self), Box::new(next))
    }

    pub fn tensor(self, other: LensExpr) -> LensExpr {
        LensExpr::Tensor(Box::new(self), Box::new(other))
    }

    /// The source schema of an expression built from base tables, looking
    /// table types up in `catalog`. Fails for the polymorphic combinators,
    /// whose source cannot be inferred.
    pub fn source_schema(&self, catalog: &dyn Fn(&str) -> Option<RelationType>) -> Result<Schema> {
        match self {
            LensExpr::Base(t) => catalog(t)
                .map(|ty| Schema::table(t.clone(), ty))
                .ok_or_else(|| Error::UnknownTable(t.clone())),
            LensExpr::Select { inner, .. }
            | LensExpr::Drop { inner, .. }
            | LensExpr::Rename { inner, .. } => inner.source_schema(catalog),
            LensExpr::Join { left, right, .. } | LensExpr::Tensor(left, right) => Ok(Tree::pair(
                left.source_schema(catalog)?,
                right.source_schema(catalog)?,
            )),
            LensExpr::Compose(a, _) => a.source_schema(catalog),
            LensExpr::Id | LensExpr::Sym | LensExpr::Assoc => Err(Error::type_error(
                "source",
                "the source of a generic combinator must be given explicitly",
            )),
        }
    }
}

/// A lens that passed type checking, with its source and view schemas.
#[derive(Clone, Debug)]
pub struct TypedLens {
    pub(crate) node: Node,
    pub(crate) source: Schema,
    pub(crate) view: Schema,
}

#[derive(Clone, Debug)]
pub(crate) enum Node {
    Base,
    Id,
    Select {
        pred: Predicate,
        inner: Box<TypedLens>,
    },
    Drop {
        fd: FunDep,
        attr: String,
        default: Value,
        inner: Box<TypedLens>,
    },
    Join {
        left: Box<TypedLens>,
        right: Box<TypedLens>,
    },
    Rename {
        from: String,
        to: String,
        inner: Box<TypedLens>,
    },
    Compose(Box<TypedLens>, Box<TypedLens>),
    Sym,
    Assoc,
    Tensor(Box<TypedLens>, Box<TypedLens>),
}

impl TypedLens {
    pub fn source(&self) -> &Schema {
        &self.source
    }

    pub fn view(&self) -> &Schema {
        &self.view
    }

    /// The view type when the view is a single relation.
    pub fn view_type(&self) -> Option<&RelationType> {
        self.view.as_leaf().map(|t| &t.ty)
    }

    /// The view type of the lens producing this primitive's source.
    pub(crate) fn inner_type(inner: &TypedLens) -> &RelationType {
        inner.view_type().expect("checked at build time")
    }
}

impl fmt::Display for TypedLens {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Base => write!(f, "{}", self.source.as_leaf().map_or("?", |t| &t.name)),
            Node::Id => write!(f, "id"),
            Node::Select { pred, inner } => write!(f, "select[{pred}]({inner})"),
            Node::Drop { fd, default, inner, .. } => write!(f, "drop[{fd}, {default}]({inner})"),
            Node::Join { left, right } => write!(f, "join_dl({left}, {right})"),
            Node::Rename { from, to, inner } => write!(f, "rename[{from}/{to}]({inner})"),
            Node::Compose(a, b) => write!(f, "({a} ; {b})"),
            Node::Sym => write!(f, "sym"),
            Node::Assoc => write!(f, "assoc"),
            Node::Tensor(a, b) => write!(f, "({a} ⊗ {b})"),
        }
    }
}

/// Type checks `expr` against `source`.
pub fn lens_build(expr: &LensExpr, source: &Schema) -> Result<TypedLens> {
    let mut seen = BTreeSet::new();
    for t in source.leaves() {
        if !seen.insert(t.name.as_str()) {
            return Err(Error::type_error(
                "linearity",
                format!("table `{}` is used more than once", t.name),
            ));
        }
    }
    build(expr, source)
}

fn leaf_view<'a>(rule: &'static str, inner: &'a TypedLens) -> Result<&'a Table> {
    inner
        .view
        .as_leaf()
        .ok_or_else(|| Error::type_error(rule, "the source of a primitive must be a single relation"))
}

fn build(expr: &LensExpr, source: &Schema) -> Result<TypedLens> {
    let node_of = |node, view| TypedLens {
        node,
        source: source.clone(),
        view,
    };
    match expr {
        LensExpr::Base(name) => match source {
            Tree::Leaf(t) if &t.name == name => Ok(node_of(Node::Base, source.clone())),
            _ => Err(Error::type_error(
                "base",
                format!("source is not the table `{name}`"),
            )),
        },
        LensExpr::Id => Ok(node_of(Node::Id, source.clone())),
        LensExpr::Select { pred, inner } => {
            let inner = build(inner, source)?;
            let t = leaf_view("select", &inner)?;
            let view = select_type(pred, &t.ty)?;
            let view = Schema::table(t.name.clone(), view);
            Ok(node_of(
                Node::Select {
                    pred: pred.normalize()?,
                    inner: Box::new(inner),
                },
                view,
            ))
        }
        LensExpr::Drop {
            attr,
            det,
            default,
            inner,
        } => {
            let inner = build(inner, source)?;
            let t = leaf_view("drop", &inner)?;
            let (fd, view) = drop_type(attr, det, default, &t.ty)?;
            let view = Schema::table(t.name.clone(), view);
            Ok(node_of(
                Node::Drop {
                    fd,
                    attr: attr.clone(),
                    default: default.clone(),
                    inner: Box::new(inner),
                },
                view,
            ))
        }
        LensExpr::Join {
            variant,
            left,
            right,
        } => {
            if *variant != JoinVariant::DeleteLeft {
                return Err(Error::UnsupportedVariant(format!("{variant:?}")));
            }
            let (s1, s2) = source
                .as_pair()
                .ok_or_else(|| Error::type_error("join", "source must be a pair of schemas"))?;
            let left = build(left, s1)?;
            let right = build(right, s2)?;
            let (l, r) = (leaf_view("join", &left)?, leaf_view("join", &right)?);
            let view = join_type(&l.ty, &r.ty)?;
            let view = Schema::table(format!("{}_{}", l.name, r.name), view);
            Ok(node_of(
                Node::Join {
                    left: Box::new(left),
                    right: Box::new(right),
                },
                view,
            ))
        }
        LensExpr::Rename { from, to, inner } => {
            let inner = build(inner, source)?;
            let t = leaf_view("rename", &inner)?;
            let view = rename_type(from, to, &t.ty)?;
            let view = Schema::table(t.name.clone(), view);
            Ok(node_of(
                Node::Rename {
                    from: from.clone(),
                    to: to.clone(),
                    inner: Box::new(inner),
                },
                view,
            ))
        }
        LensExpr::Compose(a, b) => {
            let a = build(a, source)?;
            let b = build(b, &a.view)?;
            let view = b.view.clone();
            Ok(node_of(Node::Compose(Box::new(a), Box::new(b)), view))
        }
        LensExpr::Sym => match source {
            Tree::Pair(x, y) => Ok(node_of(Node::Sym, Tree::pair((**y).clone(), (**x).clone()))),
            _ => Err(Error::type_error("sym", "source must be a pair")),
        },
        LensExpr::Assoc => match source {
            Tree::Pair(x, yz) => match &**yz {
                Tree::Pair(y, z) => Ok(node_of(
                    Node::Assoc,
                    Tree::pair(Tree::pair((**x).clone(), (**y).clone()), (**z).clone()),
                )),
                _ => Err(Error::type_error("assoc", "source must have the shape X ⊗ (Y ⊗ Z)")),
            },
            _ => Err(Error::type_error("assoc", "source must have the shape X ⊗ (Y ⊗ Z)")),
        },
        LensExpr::Tensor(a, b) => {
            let (s1, s2) = source
                .as_pair()
                .ok_or_else(|| Error::type_error("tensor", "source must be a pair of schemas"))?;
            let a = build(a, s1)?;
            let b = build(b, s2)?;
            let view = Tree::pair(a.view.clone(), b.view.clone());
            Ok(node_of(Node::Tensor(Box::new(a), Box::new(b)), view))
        }
    }
}

fn has_proj(p: &Predicate) -> bool {
    match p {
        Predicate::ProjPred(..) => true,
        Predicate::Not(p) => has_proj(p),
        Predicate::And(p, q) | Predicate::Or(p, q) | Predicate::JoinPred(p, q) => {
            has_proj(p) || has_proj(q)
        }
        Predicate::Renamed { inner, .. } => has_proj(inner),
        _ => false,
    }
}

/// Checks that every comparison in `p` is between values of one kind.
fn check_kinds(rule: &'static str, p: &Predicate, ty: &RelationType) -> Result<()> {
    let kind = |a: &str| {
        ty.kind_of(a)
            .ok_or_else(|| Error::type_error(rule, format!("predicate mentions unknown `{a}`")))
    };
    let clash = |a: &str, k: Kind, v: Kind| {
        Err(Error::type_error(rule, format!("`{a}` has kind {k} but is compared with {v}")))
    };
    match p {
        Predicate::True => Ok(()),
        Predicate::Not(p) => check_kinds(rule, p, ty),
        Predicate::And(p, q) | Predicate::Or(p, q) | Predicate::JoinPred(p, q) => {
            check_kinds(rule, p, ty)?;
            check_kinds(rule, q, ty)
        }
        Predicate::AttrEqConst(a, v) | Predicate::AttrCmp(a, _, v) => {
            let k = kind(a)?;
            if k != v.kind() {
                return clash(a, k, v.kind());
            }
            Ok(())
        }
        Predicate::AttrEqAttr(a, b) => {
            let (ka, kb) = (kind(a)?, kind(b)?);
            if ka != kb {
                return clash(a, ka, kb);
            }
            Ok(())
        }
        Predicate::TupleIn(rel) => {
            for (i, a) in rel.domain().iter().enumerate() {
                let k = kind(a)?;
                if let Some(v) = rel.rows().map(|r| r[i].kind()).find(|&v| v != k) {
                    return clash(a, k, v);
                }
            }
            Ok(())
        }
        Predicate::Renamed { .. } => check_kinds(rule, &p.normalize()?, ty),
        Predicate::ProjPred(..) => Err(Error::type_error(rule, "projected predicates are not allowed")),
    }
}

pub(crate) fn select_type(pred: &Predicate, ty: &RelationType) -> Result<RelationType> {
    if has_proj(pred) {
        return Err(Error::type_error("select", "projected predicates are not allowed"));
    }
    let pred = pred.normalize()?;
    check_kinds("select", &pred, ty)?;
    let outputs: Vec<String> = ty.fds().outputs().into_iter().collect();
    if !ty.pred().ignores(&outputs) {
        return Err(Error::type_error(
            "select",
            format!(
                "source predicate {} mentions dependency outputs {outputs:?}",
                ty.pred()
            ),
        ));
    }
    RelationType::new(
        ty.columns().to_vec(),
        Predicate::and(pred, ty.pred().clone()),
        ty.fds().clone(),
        ty.keys().to_vec(),
    )
}

pub(crate) fn drop_type<S: AsRef<str>>(
    attr: &str,
    det: &[S],
    default: &Value,
    ty: &RelationType,
) -> Result<(FunDep, RelationType)> {
    let kind = ty
        .kind_of(attr)
        .ok_or_else(|| Error::type_error("drop", format!("`{attr}` is not a column")))?;
    if default.kind() != kind {
        return Err(Error::type_error(
            "drop",
            format!("default {default} does not have kind {kind}"),
        ));
    }
    let det: BTreeSet<String> = det.iter().map(|a| a.as_ref().to_string()).collect();
    let (rest, fd) = ty.fds().split_off(attr).ok_or_else(|| {
        Error::type_error("drop", format!("no dependency determines `{attr}`"))
    })?;
    if fd.lhs != det {
        return Err(Error::type_error(
            "drop",
            format!("dependencies do not split as F' ⊎ {{{:?} -> {attr}}}; found {fd}", det),
        ));
    }
    if rest.attributes().contains(attr) {
        return Err(Error::type_error(
            "drop",
            format!("`{attr}` still occurs in the remaining dependencies {rest}"),
        ));
    }
    let at_default = Record::new().with(attr, default.clone());
    let mut kept = Vec::new();
    for c in ty.pred().normalize()?.conjuncts() {
        let attrs = c.attributes();
        if !attrs.contains(attr) {
            kept.push(c.clone());
        } else if attrs.len() > 1 {
            return Err(Error::type_error(
                "drop",
                format!("predicate conjunct {c} relates `{attr}` to other columns"),
            ));
        } else if !c.eval(&at_default)? {
            return Err(Error::type_error(
                "drop",
                format!("default {default} fails the predicate conjunct {c}"),
            ));
        }
    }
    let columns = ty.columns().iter().filter(|(c, _)| c != attr).cloned().collect();
    let keys = ty.keys().iter().filter(|k| *k != attr).cloned().collect();
    let view = RelationType::new(columns, Predicate::all(kept), rest, keys)?;
    Ok((fd, view))
}

pub(crate) fn join_type(l: &RelationType, r: &RelationType) -> Result<RelationType> {
    for (c, k) in r.columns() {
        if let Some(lk) = l.kind_of(c) {
            if lk != *k {
                return Err(Error::type_error(
                    "join",
                    format!("shared column `{c}` has kinds {lk} and {k}"),
                ));
            }
        }
    }
    for (side, ty) in [("left", l), ("right", r)] {
        let outputs: Vec<String> = ty.fds().outputs().into_iter().collect();
        if !ty.pred().ignores(&outputs) {
            return Err(Error::type_error(
                "join",
                format!("{side} predicate {} mentions dependency outputs {outputs:?}", ty.pred()),
            ));
        }
    }
    let shared: Vec<String> = r.attrs().into_iter().filter(|a| l.has_attr(a)).collect();
    let closure = r.fds().closure(&shared);
    if let Some(a) = r.attrs().iter().find(|a| !closure.contains(*a)) {
        return Err(Error::type_error(
            "join",
            format!("the shared columns {shared:?} do not determine right column `{a}`"),
        ));
    }
    let fds = l
        .fds()
        .union(r.fds())
        .map_err(|e| Error::type_error("join", e.to_string()))?;
    let mut columns = l.columns().to_vec();
    columns.extend(r.columns().iter().filter(|(c, _)| !l.has_attr(c)).cloned());
    let mut keys = l.keys().to_vec();
    keys.extend(r.keys().iter().filter(|k| !l.keys().contains(k)).cloned());
    RelationType::new(
        columns,
        Predicate::join_pred(l.pred().clone(), r.pred().clone()),
        fds,
        keys,
    )
}

pub(crate) fn rename_type(from: &str, to: &str, ty: &RelationType) -> Result<RelationType> {
    if !ty.has_attr(from) {
        return Err(Error::type_error("rename", format!("`{from}` is not a column")));
    }
    if ty.has_attr(to) {
        return Err(Error::type_error("rename", format!("`{to}` is already a column")));
    }
    if !is_ident(to) {
        return Err(Error::type_error("rename", format!("`{to}` is not a valid name")));
    }
    let sub = |a: &String| if a == from { to.to_string() } else { a.clone() };
    let columns = ty.columns().iter().map(|(c, k)| (sub(c), *k)).collect();
    let pred = if ty.pred().attributes().contains(from) {
        Predicate::renamed(from, to, ty.pred().clone())
    } else {
        ty.pred().clone()
    };
    let fds = ty
        .fds()
        .rename(from, to)
        .map_err(|e| Error::type_error("rename", e.to_string()))?;
    RelationType::new(columns, pred, fds, ty.keys().iter().map(sub).collect())
}
