//! Delta relations and delta-correct incremental operators.
//!
//! A delta `(Δ⁺, Δ⁻)` records insertions and deletions. It is minimal for
//! `M` when it inserts nothing already in `M` and deletes only rows of `M`.
//! The operators here take a base value together with a minimal delta and
//! return a minimal delta of the result, checking minimality on entry.

mod ops;
mod query;

use std::fmt;

use crate::error::{Error, Result};
use crate::relalg::Relation;

pub use ops::{
    ddifference, djoin, dmerge, dproject, drename, drevise, dselect, dunion,
    oracle_delta, oracle_delta2,
};
pub use query::{oracle_query_delta, query_deval, DeltaEnv};

/// A pair of disjoint relations over one domain.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DeltaRelation {
    plus: Relation,
    minus: Relation,
}

impl DeltaRelation {
    pub fn new(plus: Relation, minus: Relation) -> Result<DeltaRelation> {
        if !plus.same_domain(&minus) {
            return Err(Error::domain_mismatch(plus.domain(), minus.domain()));
        }
        let (small, big) = if plus.len() <= minus.len() {
            (&plus, &minus)
        } else {
            (&minus, &plus)
        };
        if let Some(r) = small.rows().find(|r| big.contains_row(r)) {
            return Err(Error::Overlap(plus.to_record(r).to_string()));
        }
        Ok(DeltaRelation { plus, minus })
    }

    /// Skips the disjointness check; callers guarantee it.
    pub(crate) fn unchecked(plus: Relation, minus: Relation) -> DeltaRelation {
        debug_assert!(plus.same_domain(&minus));
        debug_assert!(plus.is_disjoint(&minus).unwrap_or(false));
        DeltaRelation { plus, minus }
    }

    pub fn empty<I, S>(attrs: I) -> DeltaRelation
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let e = Relation::empty(attrs);
        DeltaRelation {
            plus: e.clone(),
            minus: e,
        }
    }

    pub fn empty_like(rel: &Relation) -> DeltaRelation {
        DeltaRelation::empty(rel.domain().iter().cloned())
    }

    /// The minimal delta taking `old` to `new`.
    pub fn diff(new: &Relation, old: &Relation) -> Result<DeltaRelation> {
        Ok(DeltaRelation {
            plus: new.difference(old)?,
            minus: old.difference(new)?,
        })
    }

    pub fn plus(&self) -> &Relation {
        &self.plus
    }

    pub fn minus(&self) -> &Relation {
        &self.minus
    }

    pub fn into_parts(self) -> (Relation, Relation) {
        (self.plus, self.minus)
    }

    pub fn domain(&self) -> &[String] {
        self.plus.domain()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty() && self.minus.is_empty()
    }

    /// Total number of inserted and deleted rows.
    pub fn len(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn is_minimal_for(&self, m: &Relation) -> bool {
        self.check_minimal(m).is_ok()
    }

    pub fn check_minimal(&self, m: &Relation) -> Result<()> {
        if !self.plus.same_domain(m) {
            return Err(Error::domain_mismatch(self.domain(), m.domain()));
        }
        if let Some(r) = self.plus.rows().find(|r| m.contains_row(r)) {
            return Err(Error::NotMinimal(format!(
                "inserted row {} is already present",
                m.to_record(r)
            )));
        }
        if let Some(r) = self.minus.rows().find(|r| !m.contains_row(r)) {
            return Err(Error::NotMinimal(format!(
                "deleted row {} is not present",
                m.to_record(r)
            )));
        }
        Ok(())
    }

    /// `ΔM ⊕ ΔN`.
    pub fn merge(&self, other: &DeltaRelation) -> Result<DeltaRelation> {
        let plus = self
            .plus
            .difference(&other.minus)?
            .union(&other.plus.difference(&self.minus)?)?;
        let minus = self
            .minus
            .difference(&other.plus)?
            .union(&other.minus.difference(&self.plus)?)?;
        Ok(DeltaRelation::unchecked(plus, minus))
    }

    pub fn negate(&self) -> DeltaRelation {
        DeltaRelation {
            plus: self.minus.clone(),
            minus: self.plus.clone(),
        }
    }

    /// `ΔM ⊖ ΔN = ΔM ⊕ (⊖ΔN)`.
    pub fn difference(&self, other: &DeltaRelation) -> Result<DeltaRelation> {
        self.merge(&other.negate())
    }

    /// `M ⊕ ΔM`, requiring minimality.
    pub fn apply_to(&self, m: &Relation) -> Result<Relation> {
        self.check_minimal(m)?;
        self.apply_unchecked(m)
    }

    /// `(M \ Δ⁻) ∪ Δ⁺` without the minimality check.
    pub fn apply_unchecked(&self, m: &Relation) -> Result<Relation> {
        let mut out = m.difference(&self.minus)?;
        for r in self.plus.rows() {
            out.insert_row(r.clone());
        }
        Ok(out)
    }

    /// The minimal delta with the same effect on `m`.
    pub fn normalize(&self, m: &Relation) -> Result<DeltaRelation> {
        Ok(DeltaRelation {
            plus: self.plus.difference(m)?,
            minus: self.minus.intersection(m)?,
        })
    }

    /// Applies `f` to both components.
    pub fn map(&self, f: impl Fn(&Relation) -> Result<Relation>) -> Result<DeltaRelation> {
        DeltaRelation::new(f(&self.plus)?, f(&self.minus)?)
    }
}

impl From<Relation> for DeltaRelation {
    fn from(m: Relation) -> Self {
        let minus = Relation::empty(m.domain().iter().cloned());
        DeltaRelation { plus: m, minus }
    }
}

impl fmt::Debug for DeltaRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(+{:?}, -{:?})", self.plus, self.minus)
    }
}
