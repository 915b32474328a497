use crate::delta::DeltaRelation;
use crate::error::{Error, Result};
use crate::fdeps::{FunDep, FunDepSet};
use crate::relalg::{Predicate, Relation};

/// `δσ_P(M, ΔM) = (σ_P Δ⁺, σ_P Δ⁻)`.
pub fn dselect(p: &Predicate, m: &Relation, dm: &DeltaRelation) -> Result<DeltaRelation> {
    dm.check_minimal(m)?;
    Ok(DeltaRelation::unchecked(dm.plus().select(p)?, dm.minus().select(p)?))
}

/// `δπ_U(M, ΔM) = (π_U Δ⁺ \ π_U M, π_U Δ⁻ \ π_U(M ⊕ ΔM))`.
pub fn dproject<S: AsRef<str>>(m: &Relation, dm: &DeltaRelation, attrs: &[S]) -> Result<DeltaRelation> {
    dm.check_minimal(m)?;
    if dm.is_empty() {
        return Ok(DeltaRelation::empty(attrs.iter().map(|a| a.as_ref().to_string())));
    }
    let pm = m.project(attrs)?;
    let new = dm.apply_unchecked(m)?;
    let plus = dm.plus().project(attrs)?.difference(&pm)?;
    let minus = dm.minus().project(attrs)?.difference(&new.project(attrs)?)?;
    Ok(DeltaRelation::unchecked(plus, minus))
}

/// Incremental natural join.
pub fn djoin(
    m: &Relation,
    dm: &DeltaRelation,
    n: &Relation,
    dn: &DeltaRelation,
) -> Result<DeltaRelation> {
    dm.check_minimal(m)?;
    dn.check_minimal(n)?;
    join_parts(m, dm, n, dn)
}

pub(crate) fn join_parts(
    m: &Relation,
    dm: &DeltaRelation,
    n: &Relation,
    dn: &DeltaRelation,
) -> Result<DeltaRelation> {
    let m_new = dm.apply_unchecked(m)?;
    let n_new = dn.apply_unchecked(n)?;
    let plus = m_new.join(dn.plus()).union(&dm.plus().join(&n_new))?;
    let minus = dm.minus().join(n).union(&m.join(dn.minus()))?;
    Ok(DeltaRelation::unchecked(plus, minus))
}

/// `δρ_{A/B}`, componentwise.
pub fn drename(m: &Relation, dm: &DeltaRelation, from: &str, to: &str) -> Result<DeltaRelation> {
    dm.check_minimal(m)?;
    // Validate the rename against the base domain even when the delta is empty.
    m.rename(from, to).map(drop)?;
    Ok(DeltaRelation::unchecked(
        dm.plus().rename(from, to)?,
        dm.minus().rename(from, to)?,
    ))
}

/// `ΔM ⊖ ΔN`, valid only when `N ⊆ M` and `N ⊕ ΔN ⊆ M ⊕ ΔM`.
pub fn ddifference(
    m: &Relation,
    dm: &DeltaRelation,
    n: &Relation,
    dn: &DeltaRelation,
) -> Result<DeltaRelation> {
    dm.check_minimal(m)?;
    dn.check_minimal(n)?;
    if !n.is_subset(m)? {
        return Err(Error::PreconditionViolated(
            "difference needs the subtrahend to be contained in the minuend".into(),
        ));
    }
    if !dn.apply_unchecked(n)?.is_subset(&dm.apply_unchecked(m)?)? {
        return Err(Error::PreconditionViolated(
            "difference needs the updated subtrahend to be contained in the updated minuend"
                .into(),
        ));
    }
    dm.difference(dn)
}

/// Incremental union:
/// `((Δ⁺M \ N) ∪ (Δ⁺N \ M), (Δ⁻M \ (N ⊕ ΔN)) ∪ (Δ⁻N \ (M ⊕ ΔM)))`.
pub fn dunion(
    m: &Relation,
    dm: &DeltaRelation,
    n: &Relation,
    dn: &DeltaRelation,
) -> Result<DeltaRelation> {
    dm.check_minimal(m)?;
    dn.check_minimal(n)?;
    let plus = dm
        .plus()
        .difference(n)?
        .union(&dn.plus().difference(m)?)?;
    let minus = dm
        .minus()
        .difference(&dn.apply_unchecked(n)?)?
        .union(&dn.minus().difference(&dm.apply_unchecked(m)?)?)?;
    Ok(DeltaRelation::unchecked(plus, minus))
}

/// Incremental revision of a changing `M` against a fixed `N` under a
/// single dependency `X -> A`: `(revise(Δ⁺M), revise(Δ⁻M))`.
///
/// Revision must be injective on the rows involved, so `M ∪ Δ⁺M` has to
/// satisfy `X -> A`; this also gives `M ⊨ X -> A` and `M ⊕ ΔM ⊨ X -> A`.
pub fn drevise(
    m: &Relation,
    dm: &DeltaRelation,
    fd: &FunDep,
    n: &Relation,
) -> Result<DeltaRelation> {
    dm.check_minimal(m)?;
    if fd.rhs.len() != 1 {
        return Err(Error::PreconditionViolated(format!(
            "incremental revision needs a single right-hand attribute, got {fd}"
        )));
    }
    fd.check(n)?;
    fd.check(&m.union(dm.plus())?).map_err(|e| {
        Error::PreconditionViolated(format!("old and inserted rows must agree on {fd}: {e}"))
    })?;
    revise_parts(dm, fd, n)
}

pub(crate) fn revise_parts(dm: &DeltaRelation, fd: &FunDep, n: &Relation) -> Result<DeltaRelation> {
    let f = FunDepSet::new([fd.clone()])?;
    Ok(DeltaRelation::unchecked(
        f.revise(dm.plus(), n)?,
        f.revise(dm.minus(), n)?,
    ))
}

/// Incremental merge with a fixed `M`: `merge(M, F, Δ⁺N) ⊖ M`.
///
/// With `use_affected` only the rows of `M` selected by
/// `affected_F(Δ⁺N)` take part, which gives the same result.
pub fn dmerge(
    m: &Relation,
    f: &FunDepSet,
    n: &Relation,
    dn: &DeltaRelation,
    use_affected: bool,
) -> Result<DeltaRelation> {
    dn.check_minimal(n)?;
    if f.merge(m, n)? != *m {
        return Err(Error::PreconditionViolated(
            "incremental merge needs merge(M, F, N) = M".into(),
        ));
    }
    f.check(&dn.apply_unchecked(n)?)?;
    merge_parts(m, f, dn.plus(), use_affected)
}

pub(crate) fn merge_parts(
    m: &Relation,
    f: &FunDepSet,
    n_plus: &Relation,
    use_affected: bool,
) -> Result<DeltaRelation> {
    let base = if use_affected {
        m.select(&f.affected(n_plus)?)?
    } else {
        m.clone()
    };
    DeltaRelation::diff(&f.merge(&base, n_plus)?, &base)
}

/// The reference derivative `op(x ⊕ Δx) ⊖ op(x)`.
pub fn oracle_delta(
    op: impl Fn(&Relation) -> Result<Relation>,
    x: &Relation,
    dx: &DeltaRelation,
) -> Result<DeltaRelation> {
    let old = op(x)?;
    let new = op(&dx.apply_to(x)?)?;
    DeltaRelation::diff(&new, &old)
}

/// Binary form of [`oracle_delta`].
pub fn oracle_delta2(
    op: impl Fn(&Relation, &Relation) -> Result<Relation>,
    x: &Relation,
    dx: &DeltaRelation,
    y: &Relation,
    dy: &DeltaRelation,
) -> Result<DeltaRelation> {
    let old = op(x, y)?;
    let new = op(&dx.apply_to(x)?, &dy.apply_to(y)?)?;
    DeltaRelation::diff(&new, &old)
}
