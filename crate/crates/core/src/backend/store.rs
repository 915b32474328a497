use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::backend::{load_csv, pushdown, save_csv, Fetch};
use crate::delta::DeltaRelation;
use crate::error::{Error, Result};
use crate::lenses::{RelationType, Schema, Table, Tree};
use crate::relalg::{Predicate, QueryExpr, Relation};

/// One answered fetch, with the base-table reads it caused.
#[derive(Clone, Debug)]
pub struct FetchRecord {
    pub query: QueryExpr,
    pub predicate: Predicate,
    /// `(table, pushed predicate, rows returned)` per base-table read.
    pub scans: Vec<(String, Predicate, usize)>,
    pub rows: usize,
    pub elapsed: Duration,
}

/// Named tables, each conforming to its type. Every fetch is logged.
#[derive(Default)]
pub struct TableStore {
    tables: BTreeMap<String, (RelationType, Relation)>,
    log: Mutex<Vec<FetchRecord>>,
}

impl Clone for TableStore {
    fn clone(&self) -> TableStore {
        TableStore {
            tables: self.tables.clone(),
            log: Mutex::new(Vec::new()),
        }
    }
}

impl std::fmt::Debug for TableStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_map()
            .entries(self.tables.iter().map(|(n, (_, r))| (n, r.len())))
            .finish()
    }
}

impl TableStore {
    pub fn new() -> TableStore {
        TableStore::default()
    }

    /// Adds or replaces a table after checking `rel` against `ty`.
    pub fn insert_table(&mut self, name: &str, ty: RelationType, rel: Relation) -> Result<()> {
        ty.conforms(&rel).map_err(|e| prefix(name, e))?;
        self.tables.insert(name.to_string(), (ty, rel));
        Ok(())
    }

    pub fn create_table(&mut self, name: &str, ty: RelationType) -> Result<()> {
        let empty = ty.empty_relation();
        self.insert_table(name, ty, empty)
    }

    pub fn table(&self, name: &str) -> Result<&Relation> {
        self.entry(name).map(|(_, r)| r)
    }

    pub fn table_type(&self, name: &str) -> Result<&RelationType> {
        self.entry(name).map(|(t, _)| t)
    }

    fn entry(&self, name: &str) -> Result<&(RelationType, Relation)> {
        self.tables
            .get(name)
            .ok_or_else(|| Error::UnknownTable(name.to_string()))
    }

    pub fn names(&self) -> Vec<String> {
        self.tables.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// The schema of the given tables, left-nested in order.
    pub fn schema<S: AsRef<str>>(&self, names: &[S]) -> Result<Schema> {
        let mut it = names.iter();
        let first = it
            .next()
            .ok_or_else(|| Error::schema("shape", "no tables named"))?;
        let leaf = |n: &str| -> Result<Schema> {
            Ok(Schema::table(n, self.table_type(n)?.clone()))
        };
        it.try_fold(leaf(first.as_ref())?, |acc, n| Ok(Tree::pair(acc, leaf(n.as_ref())?)))
    }

    /// Current contents shaped like `schema`. Table types must match.
    pub fn instance(&self, schema: &Schema) -> Result<Tree<Relation>> {
        schema.try_map(|t: &Table| {
            let (ty, r) = self.entry(&t.name)?;
            if ty.attrs() != t.ty.attrs() {
                return Err(Error::schema(
                    "domain",
                    format!("{}: stored {:?}, expected {:?}", t.name, ty.attrs(), t.ty.attrs()),
                ));
            }
            Ok(r.clone())
        })
    }

    /// `σ_P` of one table, logged like any other fetch.
    pub fn scan(&self, name: &str, pred: &Predicate) -> Result<Relation> {
        self.fetch(&QueryExpr::var(name), pred)
    }

    /// Replaces a table by `M ⊕ Δ`. Nothing changes on error.
    pub fn apply_delta(&mut self, name: &str, delta: &DeltaRelation) -> Result<()> {
        let next = self.updated(name, delta)?;
        self.tables.get_mut(name).expect("checked").1 = next;
        Ok(())
    }

    fn updated(&self, name: &str, delta: &DeltaRelation) -> Result<Relation> {
        let (ty, r) = self.entry(name)?;
        let next = delta.apply_to(r)?;
        ty.conforms(&next).map_err(|e| prefix(name, e))?;
        Ok(next)
    }

    /// Applies one delta per leaf of `schema`, all or nothing.
    pub fn apply_deltas(&mut self, schema: &Schema, deltas: &Tree<DeltaRelation>) -> Result<()> {
        let staged = schema.zip_with(deltas, |t, d| Ok((t.name.clone(), self.updated(&t.name, d)?)))?;
        let mut seen = std::collections::BTreeSet::new();
        for (name, _) in staged.leaves() {
            if !seen.insert(name) {
                return Err(Error::type_error("linearity", format!("table `{name}` updated twice")));
            }
        }
        for (name, r) in staged.leaves() {
            self.tables.get_mut(name).expect("checked").1 = r.clone();
        }
        Ok(())
    }

    /// Fetches answered since the last [`TableStore::clear_log`].
    pub fn fetch_log(&self) -> Vec<FetchRecord> {
        self.log.lock().expect("fetch log").clone()
    }

    pub fn clear_log(&self) {
        self.log.lock().expect("fetch log").clear();
    }

    /// Loads `<dir>/<name>.csv` for every table given.
    pub fn load_dir(dir: &Path, tables: &[Table]) -> Result<TableStore> {
        let mut store = TableStore::new();
        for t in tables {
            let path = dir.join(format!("{}.csv", t.name));
            let rel = load_csv(&path, &t.ty)?;
            store.insert_table(&t.name, t.ty.clone(), rel)?;
        }
        Ok(store)
    }

    /// Writes every table to `<dir>/<name>.csv`.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, (ty, r)) in &self.tables {
            save_csv(&dir.join(format!("{name}.csv")), ty, r)?;
        }
        Ok(())
    }
}

fn prefix(name: &str, e: Error) -> Error {
    match e {
        Error::SchemaViolation { constraint, detail } => Error::SchemaViolation {
            constraint,
            detail: format!("{name}: {detail}"),
        },
        e => e,
    }
}

impl Fetch for TableStore {
    fn fetch(&self, query: &QueryExpr, pred: &Predicate) -> Result<Relation> {
        let start = Instant::now();
        let mut scans = Vec::new();
        let mut scan = |t: &str, p: &Predicate| {
            let r = self.table(t)?.select(p)?;
            scans.push((t.to_string(), p.clone(), r.len()));
            Ok(r)
        };
        let domains = |t: &str| self.tables.get(t).map(|(_, r)| r.domain().to_vec());
        let out = pushdown(query, pred, &domains, &mut scan, &mut Vec::new())?;
        let rec = FetchRecord {
            query: query.clone(),
            predicate: pred.clone(),
            scans,
            rows: out.len(),
            elapsed: start.elapsed(),
        };
        log::trace!("fetch {} where {} -> {} rows", rec.query, rec.predicate, rec.rows);
        self.log.lock().expect("fetch log").push(rec);
        Ok(out)
    }
}
