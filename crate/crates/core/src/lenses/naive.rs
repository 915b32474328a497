use crate::delta::{query_deval, DeltaEnv, DeltaRelation};
use crate::error::{Error, Result};
use crate::fdeps::{FunDep, FunDepSet};
use crate::lenses::build::{Node, TypedLens};
use crate::lenses::types::Tree;
use crate::relalg::{Predicate, QueryExpr, Relation, Value};

fn leaf(r: Relation) -> Tree<Relation> {
    Tree::Leaf(r)
}

fn single(t: Tree<Relation>) -> Result<Relation> {
    t.into_leaf()
        .ok_or_else(|| Error::schema("shape", "expected a single relation"))
}

fn split<T: Clone>(t: &Tree<T>) -> Result<(Tree<T>, Tree<T>)> {
    t.clone()
        .into_pair()
        .ok_or_else(|| Error::schema("shape", "expected a pair"))
}

/// `get` after checking that `s` conforms to the source schema.
pub fn lens_get(lens: &TypedLens, s: &Tree<Relation>) -> Result<Tree<Relation>> {
    lens.source.conforms(s)?;
    get(lens, s)
}

pub(crate) fn get(lens: &TypedLens, s: &Tree<Relation>) -> Result<Tree<Relation>> {
    Ok(match &lens.node {
        Node::Base | Node::Id => s.clone(),
        Node::Select { pred, inner } => leaf(single(get(inner, s)?)?.select(pred)?),
        Node::Drop { attr, inner, .. } => {
            let m = single(get(inner, s)?)?;
            let keep: Vec<&String> = m.domain().iter().filter(|a| *a != attr).collect();
            leaf(m.project(&keep)?)
        }
        Node::Join { left, right } => {
            let (s1, s2) = split(s)?;
            let m = single(get(left, &s1)?)?;
            leaf(m.join(&single(get(right, &s2)?)?))
        }
        Node::Rename { from, to, inner } => leaf(single(get(inner, s)?)?.rename(from, to)?),
        Node::Compose(a, b) => get(b, &get(a, s)?)?,
        Node::Sym => {
            let (x, y) = split(s)?;
            Tree::pair(y, x)
        }
        Node::Assoc => {
            let (x, yz) = split(s)?;
            let (y, z) = split(&yz)?;
            Tree::pair(Tree::pair(x, y), z)
        }
        Node::Tensor(a, b) => {
            let (x, y) = split(s)?;
            Tree::pair(get(a, &x)?, get(b, &y)?)
        }
    })
}

/// The `get` direction as queries over the given source queries.
pub fn get_query(lens: &TypedLens, src: &Tree<QueryExpr>) -> Result<Tree<QueryExpr>> {
    let single_q = |t: Tree<QueryExpr>| {
        t.into_leaf()
            .ok_or_else(|| Error::schema("shape", "expected a single query"))
    };
    Ok(match &lens.node {
        Node::Base | Node::Id => src.clone(),
        Node::Select { pred, inner } => {
            Tree::Leaf(single_q(get_query(inner, src)?)?.select(pred.clone()))
        }
        Node::Drop { attr, inner, .. } => {
            let keep: Vec<String> = TypedLens::inner_type(inner)
                .attrs()
                .into_iter()
                .filter(|a| a != attr)
                .collect();
            Tree::Leaf(single_q(get_query(inner, src)?)?.project(&keep))
        }
        Node::Join { left, right } => {
            let (s1, s2) = split(src)?;
            let l = single_q(get_query(left, &s1)?)?;
            Tree::Leaf(l.join(single_q(get_query(right, &s2)?)?))
        }
        Node::Rename { from, to, inner } => {
            Tree::Leaf(single_q(get_query(inner, src)?)?.rename(from.clone(), to.clone()))
        }
        Node::Compose(a, b) => get_query(b, &get_query(a, src)?)?,
        Node::Sym => {
            let (x, y) = split(src)?;
            Tree::pair(y, x)
        }
        Node::Assoc => {
            let (x, yz) = split(src)?;
            let (y, z) = split(&yz)?;
            Tree::pair(Tree::pair(x, y), z)
        }
        Node::Tensor(a, b) => {
            let (x, y) = split(src)?;
            Tree::pair(get_query(a, &x)?, get_query(b, &y)?)
        }
    })
}

/// Source queries naming each source table.
pub(crate) fn source_vars(lens: &TypedLens) -> Tree<QueryExpr> {
    lens.source.map(|t| QueryExpr::var(t.name.clone()))
}

/// State-based `put`. Both the source and the new view are checked
/// against their schemas first.
pub fn lens_put_naive(lens: &TypedLens, s: &Tree<Relation>, v: &Tree<Relation>) -> Result<Tree<Relation>> {
    lens.source.conforms(s)?;
    lens.view.conforms(v)?;
    put(lens, s, v)
}

pub(crate) fn put(lens: &TypedLens, s: &Tree<Relation>, v: &Tree<Relation>) -> Result<Tree<Relation>> {
    Ok(match &lens.node {
        Node::Base | Node::Id => v.clone(),
        Node::Select { pred, inner } => {
            let m = single(get(inner, s)?)?;
            let f = TypedLens::inner_type(inner).fds();
            let m2 = select_put(pred, f, &m, &single(v.clone())?)?;
            put(inner, s, &leaf(m2))?
        }
        Node::Drop {
            fd, default, inner, ..
        } => {
            let m = single(get(inner, s)?)?;
            let m2 = drop_put(fd, default, &m, &single(v.clone())?)?;
            put(inner, s, &leaf(m2))?
        }
        Node::Join { left, right } => {
            let (s1, s2) = split(s)?;
            let m = single(get(left, &s1)?)?;
            let n = single(get(right, &s2)?)?;
            let (f, g) = (
                TypedLens::inner_type(left).fds(),
                TypedLens::inner_type(right).fds(),
            );
            let (m2, n2) = join_put(f, g, &m, &n, &single(v.clone())?)?;
            Tree::pair(put(left, &s1, &leaf(m2))?, put(right, &s2, &leaf(n2))?)
        }
        Node::Rename { from, to, inner } => {
            put(inner, s, &leaf(rename_put(from, to, &single(v.clone())?)?))?
        }
        Node::Compose(a, b) => {
            let mid = get(a, s)?;
            put(a, s, &put(b, &mid, v)?)?
        }
        Node::Sym => {
            let (y, x) = split(v)?;
            Tree::pair(x, y)
        }
        Node::Assoc => {
            let (xy, z) = split(v)?;
            let (x, y) = split(&xy)?;
            Tree::pair(x, Tree::pair(y, z))
        }
        Node::Tensor(a, b) => {
            let (s1, s2) = split(s)?;
            let (v1, v2) = split(v)?;
            Tree::pair(put(a, &s1, &v1)?, put(b, &s2, &v2)?)
        }
    })
}

/// Select `put`: `M₀ = merge(σ_¬P M, F, N)`, `N# = σ_P M₀ \ N`, result
/// `M₀ \ N#`.
pub fn select_put(pred: &Predicate, f: &FunDepSet, m: &Relation, n: &Relation) -> Result<Relation> {
    let m0 = f.merge(&m.select(&Predicate::not(pred.clone()))?, n)?;
    let hash = m0.select(pred)?.difference(n)?;
    m0.difference(&hash)
}

/// Drop `put`: default the dropped column, then take its value from `M`
/// wherever the determining columns match.
pub fn drop_put(fd: &FunDep, default: &Value, m: &Relation, n: &Relation) -> Result<Relation> {
    let attr = dropped(fd)?;
    let m1 = n.join(&Relation::singleton(attr, default.clone()));
    FunDepSet::new([fd.clone()])?.revise(&m1, m)
}

/// The original formulation, which only defaults rows that are new to
/// the view.
pub fn drop_put_bohannon(fd: &FunDep, default: &Value, m: &Relation, n: &Relation) -> Result<Relation> {
    let attr = dropped(fd)?;
    let keep: Vec<&String> = m.domain().iter().filter(|a| *a != attr).collect();
    let fresh = n.difference(&m.project(&keep)?)?;
    let m0 = m
        .join(n)
        .union(&fresh.join(&Relation::singleton(attr, default.clone())))?;
    FunDepSet::new([fd.clone()])?.revise(&m0, m)
}

fn dropped(fd: &FunDep) -> Result<&str> {
    match fd.rhs.len() {
        1 => Ok(fd.rhs.iter().next().expect("one element")),
        _ => Err(Error::PreconditionViolated(format!(
            "drop needs a single determined column, got {fd}"
        ))),
    }
}

/// `join_dl` `put`: merge each projection of the view into its table,
/// then delete surplus joined rows from the left.
pub fn join_put(
    f: &FunDepSet,
    g: &FunDepSet,
    m: &Relation,
    n: &Relation,
    o: &Relation,
) -> Result<(Relation, Relation)> {
    let m0 = f.merge(m, &o.project(m.domain())?)?;
    let n1 = g.merge(n, &o.project(n.domain())?)?;
    let l = m0.join(&n1).difference(o)?;
    let m1 = m0.difference(&l.project(m.domain())?)?;
    Ok((m1, n1))
}

/// Rename `put`: undo the renaming.
pub fn rename_put(from: &str, to: &str, n: &Relation) -> Result<Relation> {
    n.rename(to, from)
}

/// `put` of a top-level drop lens using [`drop_put_bohannon`].
pub fn lens_put_drop_bohannon(
    lens: &TypedLens,
    s: &Tree<Relation>,
    v: &Tree<Relation>,
) -> Result<Tree<Relation>> {
    let Node::Drop {
        fd, default, inner, ..
    } = &lens.node
    else {
        return Err(Error::type_error("drop", "lens is not a drop lens"));
    };
    lens.source.conforms(s)?;
    lens.view.conforms(v)?;
    let m = single(get(inner, s)?)?;
    let m2 = drop_put_bohannon(fd, default, &m, &single(v.clone())?)?;
    put(inner, s, &leaf(m2))
}

/// Incremental view maintenance of `get`, by compositional evaluation of
/// the lens's query. With `strict`, a difference whose containment
/// conditions fail is an error rather than a recomputation.
pub fn lens_delta_get(
    lens: &TypedLens,
    s: &Tree<Relation>,
    ds: &Tree<DeltaRelation>,
    strict: bool,
) -> Result<Tree<DeltaRelation>> {
    let mut env = DeltaEnv::new();
    let pairs = lens.source.zip_with(s, |t, r| Ok((t.name.clone(), r.clone())))?;
    let pairs = pairs.zip_with(ds, |(n, r), d| Ok((n.clone(), r.clone(), d.clone())))?;
    for (name, r, d) in pairs.leaves() {
        env.insert(name.clone(), (r.clone(), d.clone()));
    }
    get_query(lens, &source_vars(lens))?.try_map(|q| Ok(query_deval(q, &env, strict)?.1))
}

/// `put(s, get(s) ⊕ Δv) ⊖ s`, the unoptimised incremental `put`.
pub fn lens_delta_put_reference(
    lens: &TypedLens,
    s: &Tree<Relation>,
    dv: &Tree<DeltaRelation>,
) -> Result<Tree<DeltaRelation>> {
    let v = get(lens, s)?;
    let v2 = v.zip_with(dv, |r, d| d.apply_to(r))?;
    let s2 = lens_put_naive(lens, s, &v2)?;
    s2.zip_with(s, DeltaRelation::diff)
}
