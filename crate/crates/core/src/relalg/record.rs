use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::relalg::Value;

/// A finite map from attribute names to values.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Record(BTreeMap<String, Value>);

impl Record {
    pub fn new() -> Self {
        Record(BTreeMap::new())
    }

    pub fn get(&self, attr: &str) -> Option<&Value> {
        self.0.get(attr)
    }

    pub fn require(&self, attr: &str) -> Result<&Value> {
        self.get(attr)
            .ok_or_else(|| Error::MissingAttribute(attr.to_string()))
    }

    pub fn set(&mut self, attr: impl Into<String>, value: impl Into<Value>) {
        self.0.insert(attr.into(), value.into());
    }

    pub fn with(mut self, attr: impl Into<String>, value: impl Into<Value>) -> Self {
        self.set(attr, value);
        self
    }

    pub fn domain(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Restriction `m|U`.
    pub fn project<S: AsRef<str>>(&self, attrs: &[S]) -> Result<Record> {
        let mut out = Record::new();
        for a in attrs {
            let a = a.as_ref();
            out.set(a, self.require(a)?.clone());
        }
        Ok(out)
    }

    /// Antirestriction `m \ U`: drops the given attributes.
    pub fn antirestrict<S: AsRef<str>>(&self, attrs: &[S]) -> Record {
        let mut out = self.clone();
        for a in attrs {
            out.0.remove(a.as_ref());
        }
        out
    }

    /// Overwrites the attributes of `self` that also occur in `other`.
    pub fn update(&self, other: &Record) -> Record {
        let mut out = self.clone();
        for (k, v) in &other.0 {
            if out.0.contains_key(k) {
                out.0.insert(k.clone(), v.clone());
            }
        }
        out
    }

    pub fn rename(&self, from: &str, to: &str) -> Result<Record> {
        if !self.0.contains_key(from) {
            return Err(Error::BadRename {
                from: from.into(),
                to: to.into(),
                reason: format!("`{from}` is not in the record"),
            });
        }
        if from != to && self.0.contains_key(to) {
            return Err(Error::BadRename {
                from: from.into(),
                to: to.into(),
                reason: format!("`{to}` is already in the record"),
            });
        }
        let mut out = self.clone();
        let v = out.0.remove(from).expect("checked above");
        out.0.insert(to.to_string(), v);
        Ok(out)
    }
}

impl<K: Into<String>, V: Into<Value>> FromIterator<(K, V)> for Record {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        Record(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

impl fmt::Debug for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
