use std::collections::HashMap;

use log::warn;

use crate::delta::ops::join_parts;
use crate::delta::{ddifference, dunion, DeltaRelation};
use crate::error::{Error, Result};
use crate::relalg::{query_eval, Env, QueryExpr, Relation};

/// Each relation variable paired with a delta minimal for it.
pub type DeltaEnv = HashMap<String, (Relation, DeltaRelation)>;

/// Evaluates `q` and a delta of its result compositionally.
///
/// `Difference` nodes are incrementalised only when their containment side
/// conditions hold. Otherwise the delta is recomputed from scratch, with a
/// warning, or the call fails when `strict` is set.
pub fn query_deval(
    q: &QueryExpr,
    env: &DeltaEnv,
    strict: bool,
) -> Result<(Relation, DeltaRelation)> {
    for (name, (m, dm)) in env {
        dm.check_minimal(m).map_err(|e| match e {
            Error::NotMinimal(w) => Error::NotMinimal(format!("{name}: {w}")),
            e => e,
        })?;
    }
    deval(q, env, &mut Vec::new(), strict)
}

type Scope = Vec<(String, (Relation, DeltaRelation))>;

fn deval(
    q: &QueryExpr,
    env: &DeltaEnv,
    scope: &mut Scope,
    strict: bool,
) -> Result<(Relation, DeltaRelation)> {
    match q {
        QueryExpr::Const(m) => Ok((m.clone(), DeltaRelation::empty_like(m))),
        QueryExpr::Var(v) => scope
            .iter()
            .rev()
            .find(|(n, _)| n == v)
            .map(|(_, p)| p.clone())
            .or_else(|| env.get(v).cloned())
            .ok_or_else(|| Error::UnboundVariable(v.clone())),
        QueryExpr::Select(p, q) => {
            let (m, dm) = deval(q, env, scope, strict)?;
            let out = DeltaRelation::unchecked(dm.plus().select(p)?, dm.minus().select(p)?);
            Ok((m.select(p)?, out))
        }
        QueryExpr::Project(q, attrs) => {
            let (m, dm) = deval(q, env, scope, strict)?;
            let pm = m.project(attrs)?;
            if dm.is_empty() {
                let e = DeltaRelation::empty_like(&pm);
                return Ok((pm, e));
            }
            let new = dm.apply_unchecked(&m)?;
            let plus = dm.plus().project(attrs)?.difference(&pm)?;
            let minus = dm.minus().project(attrs)?.difference(&new.project(attrs)?)?;
            Ok((pm, DeltaRelation::unchecked(plus, minus)))
        }
        QueryExpr::Join(a, b) => {
            let (m, dm) = deval(a, env, scope, strict)?;
            let (n, dn) = deval(b, env, scope, strict)?;
            let d = join_parts(&m, &dm, &n, &dn)?;
            Ok((m.join(&n), d))
        }
        QueryExpr::Rename(q, from, to) => {
            let (m, dm) = deval(q, env, scope, strict)?;
            let d = DeltaRelation::unchecked(dm.plus().rename(from, to)?, dm.minus().rename(from, to)?);
            Ok((m.rename(from, to)?, d))
        }
        QueryExpr::Union(a, b) => {
            let (m, dm) = deval(a, env, scope, strict)?;
            let (n, dn) = deval(b, env, scope, strict)?;
            let d = dunion(&m, &dm, &n, &dn)?;
            Ok((m.union(&n)?, d))
        }
        QueryExpr::Difference(a, b) => {
            let (m, dm) = deval(a, env, scope, strict)?;
            let (n, dn) = deval(b, env, scope, strict)?;
            let base = m.difference(&n)?;
            match ddifference(&m, &dm, &n, &dn) {
                Ok(d) => Ok((base, d)),
                Err(Error::PreconditionViolated(why)) if !strict => {
                    warn!("difference is not incrementalisable here ({why}); recomputing");
                    let new = dm.apply_unchecked(&m)?.difference(&dn.apply_unchecked(&n)?)?;
                    let d = DeltaRelation::diff(&new, &base)?;
                    Ok((base, d))
                }
                Err(e) => Err(e),
            }
        }
        QueryExpr::Let(name, bound, body) => {
            let pair = deval(bound, env, scope, strict)?;
            scope.push((name.clone(), pair));
            let out = deval(body, env, scope, strict);
            scope.pop();
            out
        }
    }
}

/// The reference delta of a whole query: `q(env ⊕ Δ) ⊖ q(env)`.
pub fn oracle_query_delta(q: &QueryExpr, env: &DeltaEnv) -> Result<DeltaRelation> {
    let old: Env = env.iter().map(|(k, (m, _))| (k.clone(), m.clone())).collect();
    let new: Env = env
        .iter()
        .map(|(k, (m, dm))| Ok((k.clone(), dm.apply_to(m)?)))
        .collect::<Result<_>>()?;
    DeltaRelation::diff(&query_eval(q, &new)?, &query_eval(q, &old)?)
}
