use crate::backend::Fetch;
use crate::delta::DeltaRelation;
use crate::error::{Error, Result};
use crate::fdeps::{FunDep, FunDepSet};
use crate::lenses::build::{Node, TypedLens};
use crate::lenses::naive::{get_query, source_vars};
use crate::lenses::types::{RelationType, Tree};
use crate::relalg::{Env, Predicate, QueryExpr, Relation, Value};

/// Incremental `put` against a backend holding the source tables.
///
/// The view delta is validated first: it must be minimal for the current
/// view and the updated view must conform to the view type. Nothing is
/// returned when validation fails.
pub fn lens_delta_put(
    lens: &TypedLens,
    fetch: &dyn Fetch,
    dv: &Tree<DeltaRelation>,
) -> Result<Tree<DeltaRelation>> {
    delta_put(lens, fetch, &source_vars(lens), dv, true)
}

/// [`lens_delta_put`] over an in-memory source instance.
pub fn lens_delta_put_in(
    lens: &TypedLens,
    s: &Tree<Relation>,
    dv: &Tree<DeltaRelation>,
) -> Result<Tree<DeltaRelation>> {
    lens.source.conforms(s)?;
    let pairs = lens.source.zip_with(s, |t, r| Ok((t.name.clone(), r.clone())))?;
    let env: Env = pairs.leaves().into_iter().cloned().collect();
    lens_delta_put(lens, &env, dv)
}

fn single<T: Clone>(t: &Tree<T>) -> Result<T> {
    t.as_leaf()
        .cloned()
        .ok_or_else(|| Error::schema("shape", "expected a single relation"))
}

fn split<T: Clone>(t: &Tree<T>) -> Result<(Tree<T>, Tree<T>)> {
    t.clone()
        .into_pair()
        .ok_or_else(|| Error::schema("shape", "expected a pair"))
}

/// `δput` of `lens` whose source tables are described by the queries
/// `src`. Only the outermost step validates the view delta.
pub(crate) fn delta_put(
    lens: &TypedLens,
    fetch: &dyn Fetch,
    src: &Tree<QueryExpr>,
    dv: &Tree<DeltaRelation>,
    validate: bool,
) -> Result<Tree<DeltaRelation>> {
    lens.view.zip_with(dv, |t, d| {
        if d.domain() == t.ty.attrs().as_slice() {
            Ok(())
        } else {
            Err(Error::schema(
                "domain",
                format!("delta over {:?} for view {:?}", d.domain(), t.ty.attrs()),
            ))
        }
    })?;
    if dv.leaves().iter().all(|d| d.is_empty()) {
        return Ok(lens.source.map(|t| DeltaRelation::empty(t.ty.attrs())));
    }
    Ok(match &lens.node {
        Node::Base | Node::Id | Node::Sym | Node::Assoc => {
            if validate {
                let views = get_query(lens, src)?;
                let checks = lens.view.zip_with(&views, |t, q| Ok((t.ty.clone(), q.clone())))?;
                checks.zip_with(dv, |(ty, q), d| validate_standalone(fetch, ty, q, d))?;
            }
            match &lens.node {
                Node::Sym => {
                    let (dy, dx) = split(dv)?;
                    Tree::pair(dx, dy)
                }
                Node::Assoc => {
                    let (dxy, dz) = split(dv)?;
                    let (dx, dy) = split(&dxy)?;
                    Tree::pair(dx, Tree::pair(dy, dz))
                }
                _ => dv.clone(),
            }
        }
        Node::Select { pred, inner } => {
            let q = single(&get_query(inner, src)?)?;
            let ty = TypedLens::inner_type(inner);
            let dm = select_delta_put(fetch, &q, pred, ty, &single(dv)?, validate)?;
            delta_put(inner, fetch, src, &Tree::Leaf(dm), false)?
        }
        Node::Drop {
            fd, default, inner, ..
        } => {
            let q = single(&get_query(inner, src)?)?;
            let view_ty = single(&lens.view)?.ty;
            let dm = drop_delta_put(fetch, &q, fd, default, &view_ty, &single(dv)?, validate)?;
            delta_put(inner, fetch, src, &Tree::Leaf(dm), false)?
        }
        Node::Join { left, right } => {
            let (s1, s2) = split(src)?;
            let qm = single(&get_query(left, &s1)?)?;
            let qn = single(&get_query(right, &s2)?)?;
            let view_ty = single(&lens.view)?.ty;
            let (dm, dn) = join_delta_put(
                fetch,
                (&qm, TypedLens::inner_type(left)),
                (&qn, TypedLens::inner_type(right)),
                &view_ty,
                &single(dv)?,
                validate,
            )?;
            Tree::pair(
                delta_put(left, fetch, &s1, &Tree::Leaf(dm), false)?,
                delta_put(right, fetch, &s2, &Tree::Leaf(dn), false)?,
            )
        }
        Node::Rename { from, to, inner } => {
            let dm = rename_delta_put(from, to, &single(dv)?)?;
            delta_put(inner, fetch, src, &Tree::Leaf(dm), validate)?
        }
        Node::Compose(a, b) => {
            let mid = delta_put(b, fetch, &get_query(a, src)?, dv, validate)?;
            delta_put(a, fetch, src, &mid, false)?
        }
        Node::Tensor(a, b) => {
            let (s1, s2) = split(src)?;
            let (d1, d2) = split(dv)?;
            Tree::pair(
                delta_put(a, fetch, &s1, &d1, validate)?,
                delta_put(b, fetch, &s2, &d2, validate)?,
            )
        }
    })
}

/// All rows of a delta, inserted or deleted.
fn touched(d: &DeltaRelation) -> Result<Relation> {
    d.plus().union(d.minus())
}

/// `affected_F(rows)`, or plain membership when there are no dependencies.
fn affected_or_rows(f: &FunDepSet, rows: &Relation) -> Result<Predicate> {
    if f.is_empty() {
        Ok(Predicate::tuple_in(rows.clone()))
    } else {
        f.affected(rows)
    }
}

/// Checks a view delta against `current`, a part of the view that holds
/// every view row equal to a delta row and every row sharing a dependency
/// left-hand side with an inserted row.
fn validate_view(ty: &RelationType, current: &Relation, d: &DeltaRelation) -> Result<()> {
    d.check_minimal(current)?;
    ty.check_rows(d.plus())?;
    let updated = d.apply_unchecked(current)?;
    ty.fds()
        .check(&updated)
        .map_err(|e| Error::schema("fd", e.to_string()))
}

fn validate_standalone(fetch: &dyn Fetch, ty: &RelationType, q: &QueryExpr, d: &DeltaRelation) -> Result<()> {
    if d.is_empty() {
        return Ok(());
    }
    let pred = Predicate::or(Predicate::tuple_in(touched(d)?), ty.fds().affected(d.plus())?);
    validate_view(ty, &fetch.fetch(q, &pred)?, d)
}

/// Componentwise `⊕` without the disjointness requirement on the inputs.
fn raw_merge(a: (&Relation, &Relation), b: (&Relation, &Relation)) -> Result<(Relation, Relation)> {
    let plus = a.0.difference(b.1)?.union(&b.0.difference(a.1)?)?;
    let minus = a.1.difference(b.0)?.union(&b.1.difference(a.0)?)?;
    Ok((plus, minus))
}

/// Optimised select `δput`.
///
/// `q` is the select lens's source and `ty = (U, Q, F)` its type. One fetch
/// of `σ_{affected_F(ΔN)}(q)` serves both validation and the merge.
pub fn select_delta_put(
    fetch: &dyn Fetch,
    q: &QueryExpr,
    pred: &Predicate,
    ty: &RelationType,
    dn: &DeltaRelation,
    validate: bool,
) -> Result<DeltaRelation> {
    let f = ty.fds();
    if dn.is_empty() {
        return Ok(dn.clone());
    }
    let affected = f.affected(dn.plus())?;
    let outside = Predicate::and(affected, Predicate::not(pred.clone()));
    let base = if validate {
        let r = fetch.fetch(q, &affected_or_rows(f, &touched(dn)?)?)?;
        let view_ty = ty.clone().with_pred(Predicate::and(pred.clone(), ty.pred().clone()))?;
        validate_view(&view_ty, &r.select(pred)?, dn)?;
        r.select(&outside)?
    } else {
        fetch.fetch(q, &outside)?
    };
    let merged = DeltaRelation::diff(&f.merge(&base, dn.plus())?, &base)?;
    let dm0 = merged.merge(&DeltaRelation::unchecked(
        Relation::empty(dn.domain().iter().cloned()),
        dn.minus().clone(),
    ))?;
    let dn_hash = DeltaRelation::new(dm0.plus().select(pred)?, dm0.minus().select(pred)?)?
        .difference(dn)?;
    let out = dm0.difference(&dn_hash)?;
    DeltaRelation::new(out.plus().clone(), out.minus().clone())
}

/// Optimised drop `δput`: default the dropped column of both delta
/// components, then revise them against the matching source rows.
pub fn drop_delta_put(
    fetch: &dyn Fetch,
    q: &QueryExpr,
    fd: &FunDep,
    default: &Value,
    view_ty: &RelationType,
    dn: &DeltaRelation,
    validate: bool,
) -> Result<DeltaRelation> {
    let attr = fd.rhs.iter().next().expect("single column");
    let all = touched(dn)?;
    let fill = Relation::singleton(attr, default.clone());
    if dn.is_empty() {
        return Ok(DeltaRelation::empty(all.join(&fill).domain().iter().cloned()));
    }
    let by_det = Predicate::tuple_in(all.project(&fd.lhs_vec())?);
    let m = if validate {
        let pred = Predicate::or(by_det, view_ty.fds().affected(&all)?);
        let r = fetch.fetch(q, &pred)?;
        validate_view(view_ty, &r.project(view_ty.attrs().as_slice())?, dn)?;
        r
    } else {
        fetch.fetch(q, &by_det)?
    };
    let f = FunDepSet::new([fd.clone()])?;
    DeltaRelation::new(
        f.revise(&dn.plus().join(&fill), &m)?,
        f.revise(&dn.minus().join(&fill), &m)?,
    )
}

/// Optimised `join_dl` `δput`.
///
/// Issues five fetches for a nonempty view delta: one to validate it, two
/// for the rows affected by merging the inserted projections, and two for
/// the rows sharing join keys with the resulting table deltas. A fetch is
/// issued even when its predicate is `FALSE`, keeping the plan fixed.
pub fn join_delta_put(
    fetch: &dyn Fetch,
    (qm, mty): (&QueryExpr, &RelationType),
    (qn, nty): (&QueryExpr, &RelationType),
    view_ty: &RelationType,
    d_o: &DeltaRelation,
    validate: bool,
) -> Result<(DeltaRelation, DeltaRelation)> {
    let (u, v) = (mty.attrs(), nty.attrs());
    if d_o.is_empty() {
        return Ok((DeltaRelation::empty(u), DeltaRelation::empty(v)));
    }
    if validate {
        let pred = Predicate::or(
            Predicate::tuple_in(touched(d_o)?),
            view_ty.fds().affected(d_o.plus())?,
        );
        let r = fetch.fetch(&qm.clone().join(qn.clone()), &pred)?;
        validate_view(view_ty, &r, d_o)?;
    }
    let (f, g) = (mty.fds(), nty.fds());
    let merged = |q: &QueryExpr, f: &FunDepSet, ins: Relation| -> Result<DeltaRelation> {
        let base = fetch.fetch(q, &affected_or_rows(f, &ins)?)?;
        DeltaRelation::diff(&f.merge(&base, &ins)?, &base)
    };
    let dm0 = merged(qm, f, d_o.plus().project(&u)?)?;
    let dn1 = merged(qn, g, d_o.plus().project(&v)?)?;

    let shared: Vec<&String> = u.iter().filter(|a| v.contains(a)).collect();
    let by_keys = |q: &QueryExpr, d: &DeltaRelation| -> Result<Relation> {
        fetch.fetch(q, &Predicate::tuple_in(touched(d)?.project(&shared)?))
    };
    let m_j = by_keys(qm, &dn1)?;
    let n_j = by_keys(qn, &dm0)?;
    let plus = dm0
        .apply_unchecked(&m_j)?
        .join(dn1.plus())
        .union(&dm0.plus().join(&dn1.apply_unchecked(&n_j)?))?;
    let minus = dm0.minus().join(&n_j).union(&m_j.join(dn1.minus()))?;
    let (l_plus, l_minus) = raw_merge((&plus, &minus), (d_o.minus(), d_o.plus()))?;
    let (m_plus, m_minus) = raw_merge(
        (dm0.plus(), dm0.minus()),
        (&l_minus.project(&u)?, &l_plus.project(&u)?),
    )?;
    Ok((DeltaRelation::new(m_plus, m_minus)?, dn1))
}

/// Rename `δput`: undo the renaming on both components.
pub fn rename_delta_put(from: &str, to: &str, dn: &DeltaRelation) -> Result<DeltaRelation> {
    DeltaRelation::new(dn.plus().rename(to, from)?, dn.minus().rename(to, from)?)
}
