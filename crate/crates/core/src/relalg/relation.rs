use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::relalg::{Predicate, Record, Value};

/// One row, positionally aligned with the sorted domain of its relation.
pub type Row = Vec<Value>;

/// A duplicate-free set of rows over a common attribute domain.
///
/// Attributes are kept sorted by name and rows are kept in value order, so
/// two relations with the same contents are structurally equal and iterate
/// identically.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Relation {
    domain: Arc<[String]>,
    rows: BTreeSet<Row>,
}

fn sorted_domain<I, S>(attrs: I) -> Result<Vec<String>>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut d: Vec<String> = attrs.into_iter().map(Into::into).collect();
    if let Some(a) = d.iter().find(|a| a.is_empty()) {
        return Err(Error::MissingAttribute(a.clone()));
    }
    d.sort();
    for w in d.windows(2) {
        if w[0] == w[1] {
            return Err(Error::DomainMismatch {
                left: vec![w[0].clone()],
                right: vec![w[1].clone()],
            });
        }
    }
    Ok(d)
}

/// Positions of `attrs` within `domain`.
pub(crate) fn positions<S: AsRef<str>>(domain: &[String], attrs: &[S]) -> Result<Vec<usize>> {
    attrs
        .iter()
        .map(|a| {
            let a = a.as_ref();
            domain
                .binary_search_by(|d| d.as_str().cmp(a))
                .map_err(|_| Error::MissingAttribute(a.to_string()))
        })
        .collect()
}

impl Relation {
    /// The empty relation over `attrs`. Panics on duplicate or empty names;
    /// use [`Relation::try_empty`] for untrusted input.
    pub fn empty<I, S>(attrs: I) -> Relation
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Relation::try_empty(attrs).expect("invalid relation domain")
    }

    pub fn try_empty<I, S>(attrs: I) -> Result<Relation>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Ok(Relation {
            domain: sorted_domain(attrs)?.into(),
            rows: BTreeSet::new(),
        })
    }

    /// Builds a relation from tuples listed in the order of `attrs`.
    pub fn from_tuples<S, I, T>(attrs: &[S], tuples: I) -> Result<Relation>
    where
        S: AsRef<str>,
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = Value>,
    {
        let mut rel = Relation::try_empty(attrs.iter().map(|a| a.as_ref().to_string()))?;
        // perm[i] is the input column feeding sorted column i.
        let perm: Vec<usize> = rel
            .domain
            .iter()
            .map(|d| attrs.iter().position(|a| a.as_ref() == d).expect("same set"))
            .collect();
        for t in tuples {
            let t: Vec<Value> = t.into_iter().collect();
            if t.len() != attrs.len() {
                return Err(Error::DomainMismatch {
                    left: rel.domain.to_vec(),
                    right: t.iter().map(|v| v.to_string()).collect(),
                });
            }
            rel.rows.insert(perm.iter().map(|&i| t[i].clone()).collect());
        }
        Ok(rel)
    }

    /// Single-attribute integer relation, handy for small examples.
    pub fn ints(attr: &str, values: impl IntoIterator<Item = i64>) -> Relation {
        let mut rel = Relation::empty([attr]);
        for v in values {
            rel.rows.insert(vec![Value::Int(v)]);
        }
        rel
    }

    pub fn from_records<I, S>(attrs: &[S], records: I) -> Result<Relation>
    where
        S: AsRef<str>,
        I: IntoIterator<Item = Record>,
    {
        let mut rel = Relation::try_empty(attrs.iter().map(|a| a.as_ref().to_string()))?;
        for r in records {
            rel.insert_record(&r)?;
        }
        Ok(rel)
    }

    pub(crate) fn from_parts(domain: Arc<[String]>, rows: BTreeSet<Row>) -> Relation {
        debug_assert!(domain.windows(2).all(|w| w[0] < w[1]));
        Relation { domain, rows }
    }

    pub fn domain(&self) -> &[String] {
        &self.domain
    }

    pub(crate) fn shared_domain(&self) -> Arc<[String]> {
        self.domain.clone()
    }

    pub fn has_attr(&self, attr: &str) -> bool {
        self.position(attr).is_some()
    }

    pub fn position(&self, attr: &str) -> Option<usize> {
        self.domain.binary_search_by(|d| d.as_str().cmp(attr)).ok()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &Row> + '_ {
        self.rows.iter()
    }

    pub fn contains_row(&self, row: &[Value]) -> bool {
        self.rows.contains(row)
    }

    pub fn to_record(&self, row: &[Value]) -> Record {
        self.domain
            .iter()
            .zip(row)
            .map(|(a, v)| (a.as_str(), v.clone()))
            .collect()
    }

    pub fn records(&self) -> impl Iterator<Item = Record> + '_ {
        self.rows.iter().map(|r| self.to_record(r))
    }

    fn row_of(&self, record: &Record) -> Result<Row> {
        if record.len() != self.domain.len() {
            return Err(Error::DomainMismatch {
                left: self.domain.to_vec(),
                right: record.domain().map(String::from).collect(),
            });
        }
        self.domain
            .iter()
            .map(|a| record.require(a).cloned())
            .collect()
    }

    pub fn contains_record(&self, record: &Record) -> bool {
        self.row_of(record)
            .map(|r| self.rows.contains(&r))
            .unwrap_or(false)
    }

    pub fn insert_record(&mut self, record: &Record) -> Result<bool> {
        let row = self.row_of(record)?;
        Ok(self.rows.insert(row))
    }

    pub(crate) fn insert_row(&mut self, row: Row) -> bool {
        debug_assert_eq!(row.len(), self.domain.len());
        self.rows.insert(row)
    }

    fn check_domain(&self, other: &Relation) -> Result<()> {
        if self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::domain_mismatch(&self.domain, &other.domain))
        }
    }

    pub fn same_domain(&self, other: &Relation) -> bool {
        self.domain == other.domain
    }

    /// `σ_P(M)`.
    pub fn select(&self, pred: &Predicate) -> Result<Relation> {
        if matches!(pred, Predicate::True) {
            return Ok(self.clone());
        }
        let compiled = pred.compile(&self.domain)?;
        let mut rows = BTreeSet::new();
        for r in &self.rows {
            if compiled.eval(r)? {
                rows.insert(r.clone());
            }
        }
        Ok(Relation::from_parts(self.domain.clone(), rows))
    }

    /// `π_U(M)`. Attribute order in `attrs` is irrelevant.
    pub fn project<S: AsRef<str>>(&self, attrs: &[S]) -> Result<Relation> {
        let domain = sorted_domain(attrs.iter().map(|a| a.as_ref().to_string()))?;
        if domain.as_slice() == &*self.domain {
            return Ok(self.clone());
        }
        let pos = positions(&self.domain, &domain)?;
        let rows = self
            .rows
            .iter()
            .map(|r| pos.iter().map(|&i| r[i].clone()).collect())
            .collect();
        Ok(Relation::from_parts(domain.into(), rows))
    }

    /// Natural join; a cartesian product when the domains are disjoint.
    pub fn join(&self, other: &Relation) -> Relation {
        let shared: Vec<&String> = self
            .domain
            .iter()
            .filter(|a| other.has_attr(a))
            .collect();
        let mut out_domain: Vec<String> = self.domain.to_vec();
        out_domain.extend(other.domain.iter().filter(|a| !self.has_attr(a)).cloned());
        out_domain.sort();
        // For each output column: (from_left, index).
        let layout: Vec<(bool, usize)> = out_domain
            .iter()
            .map(|a| match self.position(a) {
                Some(i) => (true, i),
                None => (false, other.position(a).expect("in union")),
            })
            .collect();
        let lkey: Vec<usize> = shared.iter().map(|a| self.position(a).unwrap()).collect();
        let rkey: Vec<usize> = shared.iter().map(|a| other.position(a).unwrap()).collect();

        let mut index: HashMap<Vec<&Value>, Vec<&Row>> = HashMap::new();
        for r in &other.rows {
            index
                .entry(rkey.iter().map(|&i| &r[i]).collect())
                .or_default()
                .push(r);
        }
        let mut rows = BTreeSet::new();
        for l in &self.rows {
            let key: Vec<&Value> = lkey.iter().map(|&i| &l[i]).collect();
            if let Some(matches) = index.get(&key) {
                for r in matches {
                    rows.insert(
                        layout
                            .iter()
                            .map(|&(left, i)| if left { l[i].clone() } else { r[i].clone() })
                            .collect(),
                    );
                }
            }
        }
        Relation::from_parts(out_domain.into(), rows)
    }

    /// `ρ_{A/B}(M)`: renames attribute `from` to `to`.
    pub fn rename(&self, from: &str, to: &str) -> Result<Relation> {
        let bad = |reason: String| Error::BadRename {
            from: from.into(),
            to: to.into(),
            reason,
        };
        let Some(src) = self.position(from) else {
            return Err(bad(format!("`{from}` is not in the domain")));
        };
        if from == to {
            return Ok(self.clone());
        }
        if self.has_attr(to) {
            return Err(bad(format!("`{to}` is already in the domain")));
        }
        if to.is_empty() {
            return Err(bad("empty attribute name".into()));
        }
        let mut domain: Vec<String> = self.domain.to_vec();
        domain[src] = to.to_string();
        let mut order: Vec<usize> = (0..domain.len()).collect();
        order.sort_by(|&a, &b| domain[a].cmp(&domain[b]));
        let domain: Vec<String> = order.iter().map(|&i| domain[i].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|r| order.iter().map(|&i| r[i].clone()).collect())
            .collect();
        Ok(Relation::from_parts(domain.into(), rows))
    }

    pub fn union(&self, other: &Relation) -> Result<Relation> {
        self.check_domain(other)?;
        let (big, small) = if self.len() >= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut rows = big.rows.clone();
        rows.extend(small.rows.iter().cloned());
        Ok(Relation::from_parts(self.domain.clone(), rows))
    }

    pub fn difference(&self, other: &Relation) -> Result<Relation> {
        self.check_domain(other)?;
        let rows = self
            .rows
            .iter()
            .filter(|r| !other.rows.contains(*r))
            .cloned()
            .collect();
        Ok(Relation::from_parts(self.domain.clone(), rows))
    }

    pub fn intersection(&self, other: &Relation) -> Result<Relation> {
        self.check_domain(other)?;
        let (small, big) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let rows = small
            .rows
            .iter()
            .filter(|r| big.rows.contains(*r))
            .cloned()
            .collect();
        Ok(Relation::from_parts(self.domain.clone(), rows))
    }

    pub fn is_subset(&self, other: &Relation) -> Result<bool> {
        self.check_domain(other)?;
        Ok(self.rows.is_subset(&other.rows))
    }

    pub fn is_disjoint(&self, other: &Relation) -> Result<bool> {
        self.check_domain(other)?;
        Ok(self.rows.is_disjoint(&other.rows))
    }

    /// Relation `{(A=a)}` with one row, used for default completion.
    pub fn singleton(attr: &str, value: Value) -> Relation {
        let mut r = Relation::empty([attr]);
        r.rows.insert(vec![value]);
        r
    }
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{", self.domain.join(","))?;
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "(")?;
            for (j, v) in r.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{v}")?;
            }
            write!(f, ")")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
