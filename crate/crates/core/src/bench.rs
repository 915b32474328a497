//! Microbenchmarks comparing state-based `put` with incremental `δput`.
//!
//! Tables are synthetic: `t1(A, B, C)` with `A -> B C` and `n` rows, and
//! `t2(B, D)` with `B -> D` and `n / 10` rows. Both paths read the source
//! through [`SqlBackend`], which runs SQL against the reference
//! [`Interpreter`], so query time is measured the same way for each.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backend::{naive_dml, pushdown, sql_dml, sql_where, Fetch, Interpreter, TableStore};
use crate::delta::DeltaRelation;
use crate::error::{Error, Result};
use crate::fdeps::FunDepSet;
use crate::lenses::{
    lens_build, lens_delta_put, lens_get, lens_put_naive, LensExpr, RelationType, Schema, Tree,
    TypedLens,
};
use crate::relalg::{Predicate, QueryExpr, Relation, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    Select,
    Project,
    Join,
    DeltaSize,
    DeltaCalc,
    DeltaApply,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Select,
        Scenario::Project,
        Scenario::Join,
        Scenario::DeltaSize,
        Scenario::DeltaCalc,
        Scenario::DeltaApply,
    ];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Select => "select",
            Scenario::Project => "project",
            Scenario::Join => "join",
            Scenario::DeltaSize => "delta-size",
            Scenario::DeltaCalc => "delta-calc",
            Scenario::DeltaApply => "delta-apply",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Scenario, String> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.to_string() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchConfig {
    pub scenario: Scenario,
    pub n: usize,
    /// Target delta size, for the delta-size and delta-apply scenarios.
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(scenario: Scenario, n: usize) -> BenchConfig {
        BenchConfig {
            scenario,
            n,
            m: 100,
            trials: 5,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::PreconditionViolated(format!("n must be at least 10, got {}", self.n)));
        }
        if self.trials.is_multiple_of(2) {
            return Err(Error::PreconditionViolated(format!(
                "trials must be odd so the median is a sample, got {}",
                self.trials
            )));
        }
        Ok(())
    }
}

/// One line of a report. Times are medians over the trials.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub scenario: Scenario,
    pub n: usize,
    pub m: usize,
    /// Size of the delta actually produced.
    pub delta: usize,
    pub naive_total: Option<Duration>,
    pub naive_query: Option<Duration>,
    pub incr_total: Duration,
    pub incr_query: Duration,
    pub query_count: usize,
}

impl BenchRow {
    pub const HEADER: &'static str =
        "scenario\tn\tm\tdelta\tnaive_total_ms\tnaive_query_ms\tincr_total_ms\tincr_query_ms\tquery_count";

    /// `incr_total / naive_total`.
    pub fn ratio(&self) -> Option<f64> {
        self.naive_total
            .map(|nt| self.incr_total.as_secs_f64() / nt.as_secs_f64().max(1e-9))
    }
}

fn ms(d: Option<Duration>) -> String {
    d.map_or("-".into(), |d| format!("{:.3}", d.as_secs_f64() * 1e3))
}

impl fmt::Display for BenchRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.scenario,
            self.n,
            self.m,
            self.delta,
            ms(self.naive_total),
            ms(self.naive_query),
            ms(Some(self.incr_total)),
            ms(Some(self.incr_query)),
            self.query_count
        )
    }
}

pub fn to_tsv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BenchRow::HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

/// `A -> B C`, written as `A -> B; A -> C` so that the join with `t2`
/// stays in tree form.
pub fn t1_type() -> RelationType {
    RelationType::ints(&["A", "B", "C"])
        .with_fds(FunDepSet::parse("A -> B; A -> C").expect("valid"))
        .and_then(|t| t.with_keys(&["A"]))
        .expect("valid")
}

pub fn t2_type() -> RelationType {
    RelationType::ints(&["B", "D"])
        .with_fds(FunDepSet::parse("B -> D").expect("valid"))
        .and_then(|t| t.with_keys(&["B"]))
        .expect("valid")
}

fn ints(attrs: &[&str], rows: impl IntoIterator<Item = Vec<i64>>) -> Relation {
    Relation::from_tuples(attrs, rows.into_iter().map(|r| r.into_iter().map(Value::Int)))
        .expect("well-formed")
}

/// `t1` with `A` sequential from 0, `B` uniform in `[0, n/10)` and `C`
/// uniform in `[0, 100)`; `t2` with `B` sequential and `D` uniform in
/// `[0, n/10)`.
pub fn generate(n: usize, seed: u64) -> TableStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tenth = (n / 10).max(1) as i64;
    let t1 = ints(
        &["A", "B", "C"],
        (0..n as i64).map(|a| vec![a, rng.gen_range(0..tenth), rng.gen_range(0..100)]),
    );
    let t2 = ints(&["B", "D"], (0..tenth).map(|b| vec![b, rng.gen_range(0..tenth)]));
    let mut store = TableStore::new();
    store.insert_table("t1", t1_type(), t1).expect("conforms");
    store.insert_table("t2", t2_type(), t2).expect("conforms");
    store
}

fn join_schema() -> Schema {
    Tree::pair(Schema::table("t1", t1_type()), Schema::table("t2", t2_type()))
}

fn join_expr() -> LensExpr {
    LensExpr::base("t1").join(LensExpr::base("t2"))
}

/// `select from (join t1 with t2) where C = 3`.
pub fn select_lens() -> TypedLens {
    lens_build(&join_expr().select(Predicate::eq("C", 3)), &join_schema()).expect("well-typed")
}

/// `drop C determined by (A) default 1 from t1`.
pub fn project_lens() -> TypedLens {
    lens_build(
        &LensExpr::base("t1").drop("C", &["A"], 1),
        &Schema::table("t1", t1_type()),
    )
    .expect("well-typed")
}

/// `join t1 with t2`.
pub fn join_lens() -> TypedLens {
    lens_build(&join_expr(), &join_schema()).expect("well-typed")
}

/// Sets `attr` to `value` on rows where `lo <= by < hi` (bounds optional
/// via the `inclusive_lo` flag).
fn set_where(v: &Relation, by: &str, keep: impl Fn(i64) -> bool, attr: &str, value: i64) -> Relation {
    let (bi, ai) = (v.position(by).expect("attr"), v.position(attr).expect("attr"));
    let rows = v.rows().map(|r| {
        let mut r = r.clone();
        if keep(r[bi].as_int().expect("int")) {
            r[ai] = Value::Int(value);
        }
        r
    });
    Relation::from_tuples(v.domain(), rows).expect("same domain")
}

/// The select scenario's update: `D = 5` where `0 <= B <= 100`.
pub fn select_update(v: &Relation) -> Relation {
    set_where(v, "B", |b| (0..=100).contains(&b), "D", 5)
}

/// The project scenario's update: `B = 5` where `60 < A < 80`.
pub fn project_update(v: &Relation) -> Relation {
    set_where(v, "A", |a| 60 < a && a < 80, "B", 5)
}

/// The join scenario's update: `C = 5` where `40 <= B < 50`.
pub fn join_update(v: &Relation) -> Relation {
    set_where(v, "B", |b| (40..50).contains(&b), "C", 5)
}

/// A [`Fetch`] that answers with SQL `SELECT`s run on an [`Interpreter`],
/// counting fetches and timing the statements.
pub struct SqlBackend {
    pub db: Interpreter,
    stats: RefCell<(usize, Duration)>,
}

impl SqlBackend {
    pub fn new(db: Interpreter) -> SqlBackend {
        SqlBackend {
            db,
            stats: RefCell::new((0, Duration::ZERO)),
        }
    }

    pub fn from_store(store: &TableStore) -> Result<SqlBackend> {
        Ok(SqlBackend::new(Interpreter::from_store(store)?))
    }

    /// `(fetch count, time spent in SQL)` since the last reset.
    pub fn stats(&self) -> (usize, Duration) {
        *self.stats.borrow()
    }

    pub fn reset(&self) {
        *self.stats.borrow_mut() = (0, Duration::ZERO);
    }

    fn select(&self, table: &str, p: &Predicate) -> Result<Relation> {
        let text = match p {
            Predicate::True => format!("SELECT * FROM {table}"),
            p => format!("SELECT * FROM {table} WHERE {}", sql_where(p)?),
        };
        let t0 = Instant::now();
        let r = self.db.query(&text);
        let dt = t0.elapsed();
        self.stats.borrow_mut().1 += dt;
        log::debug!("{table}: {} bytes of SQL, {:?}", text.len(), dt);
        r
    }

    /// Reads whole tables, as the state-based path does.
    pub fn read_all(&self, schema: &Schema) -> Result<Tree<Relation>> {
        schema.try_map(|t| self.select(&t.name, &Predicate::True))
    }
}

impl Fetch for SqlBackend {
    fn fetch(&self, query: &QueryExpr, pred: &Predicate) -> Result<Relation> {
        self.stats.borrow_mut().0 += 1;
        let mut scan = |t: &str, p: &Predicate| self.select(t, p);
        let domains = |t: &str| self.db.domain(t);
        pushdown(query, pred, &domains, &mut scan, &mut Vec::new())
    }
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

struct Timings {
    naive_total: Vec<Duration>,
    naive_query: Vec<Duration>,
    incr_total: Vec<Duration>,
    incr_query: Vec<Duration>,
    query_count: usize,
}

/// Times `put` against `δput` for one lens and one view update. The two
/// results are compared before any timing is kept.
fn time_lens(
    store: &TableStore,
    lens: &TypedLens,
    update: &dyn Fn(&Relation) -> Relation,
    trials: usize,
) -> Result<(usize, Timings)> {
    let s = store.instance(lens.source())?;
    let v = lens_get(lens, &s)?.into_leaf().expect("single view");
    let v2 = update(&v);
    let dv = Tree::Leaf(DeltaRelation::diff(&v2, &v)?);
    let size = dv.leaves()[0].len();
    let backend = SqlBackend::from_store(store)?;
    let mut t = Timings {
        naive_total: vec![],
        naive_query: vec![],
        incr_total: vec![],
        incr_query: vec![],
        query_count: 0,
    };
    for trial in 0..trials {
        backend.reset();
        let t0 = Instant::now();
        let src = backend.read_all(lens.source())?;
        let s2 = lens_put_naive(lens, &src, &Tree::Leaf(v2.clone()))?;
        t.naive_total.push(t0.elapsed());
        t.naive_query.push(backend.stats().1);

        backend.reset();
        let t0 = Instant::now();
        let ds = lens_delta_put(lens, &backend, &dv)?;
        t.incr_total.push(t0.elapsed());
        let (count, q) = backend.stats();
        t.incr_query.push(q);
        t.query_count = count;

        if trial == 0 {
            let applied = s.zip_with(&ds, |r, d| d.apply_to(r))?;
            if applied != s2 {
                return Err(Error::PreconditionViolated(
                    "incremental and state-based put disagree".into(),
                ));
            }
        }
    }
    Ok((size, t))
}

fn row(config: &BenchConfig, m: usize, delta: usize, t: Timings) -> BenchRow {
    BenchRow {
        scenario: config.scenario,
        n: config.n,
        m,
        delta,
        naive_total: Some(median(t.naive_total)),
        naive_query: Some(median(t.naive_query)),
        incr_total: median(t.incr_total),
        incr_query: median(t.incr_query),
        query_count: t.query_count,
    }
}

/// Target sizes for the delta-size scenario.
pub const DELTA_SIZES: [usize; 10] = [10, 25, 50, 75, 100, 150, 200, 250, 300, 350];

/// The smallest `b'` (a multiple of 100) such that setting `D = 5` on view
/// rows with `0 < B < b'` gives a delta larger than `m`.
pub fn delta_size_bound(view: &Relation, n: usize, m: usize) -> Option<(i64, Relation, usize)> {
    let limit = (n / 10) as i64 + 100;
    (0..=limit).step_by(100).find_map(|b| {
        let v2 = set_where(view, "B", |x| 0 < x && x < b, "D", 5);
        let size = DeltaRelation::diff(&v2, view).ok()?.len();
        (size > m).then_some((b, v2, size))
    })
}

pub fn run(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let store = generate(config.n, config.seed);
    log::info!("scenario {} n={} trials={}", config.scenario, config.n, config.trials);
    match config.scenario {
        Scenario::Select | Scenario::Project | Scenario::Join => {
            let (lens, update): (TypedLens, fn(&Relation) -> Relation) = match config.scenario {
                Scenario::Select => (select_lens(), select_update),
                Scenario::Project => (project_lens(), project_update),
                _ => (join_lens(), join_update),
            };
            let (size, t) = time_lens(&store, &lens, &update, config.trials)?;
            Ok(vec![row(config, size, size, t)])
        }
        Scenario::DeltaSize => {
            let lens = select_lens();
            let v = lens_get(&lens, &store.instance(lens.source())?)?
                .into_leaf()
                .expect("single view");
            let mut rows = Vec::new();
            for m in DELTA_SIZES {
                let Some((_, v2, _)) = delta_size_bound(&v, config.n, m) else {
                    log::warn!("no update reaches a delta of {m} rows at n={}", config.n);
                    break;
                };
                let (size, t) = time_lens(&store, &lens, &move |_: &Relation| v2.clone(), config.trials)?;
                rows.push(row(config, m, size, t));
            }
            Ok(rows)
        }
        Scenario::DeltaCalc => delta_calc(&store, config),
        Scenario::DeltaApply => delta_apply(&store, config),
    }
}

/// Time to fetch the join view and diff it against an edited copy
/// (`B = 5` where `0 < D < 10`).
fn delta_calc(store: &TableStore, config: &BenchConfig) -> Result<Vec<BenchRow>> {
    let lens = join_lens();
    let backend = SqlBackend::from_store(store)?;
    let (mut total, mut query) = (vec![], vec![]);
    let mut size = 0;
    for _ in 0..config.trials {
        backend.reset();
        let t0 = Instant::now();
        let src = backend.read_all(lens.source())?;
        let v = lens_get(&lens, &src)?.into_leaf().expect("single view");
        let v2 = set_where(&v, "D", |d| 0 < d && d < 10, "B", 5);
        size = DeltaRelation::diff(&v2, &v)?.len();
        total.push(t0.elapsed());
        query.push(backend.stats().1);
    }
    Ok(vec![BenchRow {
        scenario: config.scenario,
        n: config.n,
        m: size,
        delta: size,
        naive_total: None,
        naive_query: None,
        incr_total: median(total),
        incr_query: median(query),
        query_count: 1,
    }])
}

/// A delta on `t1` with `m/4` insertions, `m/4` deletions and `m/2`
/// updates of `C`.
pub fn apply_delta_for(t1: &Relation, n: usize, m: usize, seed: u64) -> DeltaRelation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let tenth = (n / 10).max(1) as i64;
    let rows: Vec<&Vec<Value>> = t1.rows().collect();
    let picks = rand::seq::index::sample(&mut rng, rows.len(), (m / 4 + m / 2).min(rows.len()));
    let (mut plus, mut minus) = (Vec::new(), Vec::new());
    for (i, idx) in picks.iter().enumerate() {
        let r = rows[idx].clone();
        minus.push(r.clone());
        if i >= m / 4 {
            let mut u = r;
            let c = u[2].as_int().expect("int");
            u[2] = Value::Int((c + rng.gen_range(1..100)) % 100);
            plus.push(u);
        }
    }
    for k in 0..(m / 4) as i64 {
        plus.push(vec![
            Value::Int(n as i64 + k),
            Value::Int(rng.gen_range(0..tenth)),
            Value::Int(rng.gen_range(0..100)),
        ]);
    }
    DeltaRelation::new(
        Relation::from_tuples(t1.domain(), plus).expect("well-formed"),
        Relation::from_tuples(t1.domain(), minus).expect("well-formed"),
    )
    .expect("disjoint")
}

/// Key-paired DML against delete-everything-and-reinsert, both executed
/// on the interpreter.
fn delta_apply(store: &TableStore, config: &BenchConfig) -> Result<Vec<BenchRow>> {
    let ty = t1_type();
    let t1 = store.table("t1")?;
    let mut rows = Vec::new();
    let sizes: Vec<usize> = if config.m > 0 {
        vec![config.m]
    } else {
        (1..=10).map(|k| k * 100).collect()
    };
    for m in sizes {
        let d = apply_delta_for(t1, config.n, m, config.seed);
        let target = d.apply_to(t1)?;
        let (mut nt, mut nq, mut it, mut iq) = (vec![], vec![], vec![], vec![]);
        let mut count = 0;
        for trial in 0..config.trials {
            let mut db = Interpreter::from_store(store)?;
            let t0 = Instant::now();
            let stmts = sql_dml("t1", &ty, &d)?;
            let q0 = Instant::now();
            db.run(&stmts)?;
            iq.push(q0.elapsed());
            it.push(t0.elapsed());
            count = stmts.len();
            if trial == 0 && db.table("t1")? != target {
                return Err(Error::PreconditionViolated("key-paired DML gave the wrong table".into()));
            }

            let mut db = Interpreter::from_store(store)?;
            let t0 = Instant::now();
            let stmts = naive_dml("t1", &ty, &target)?;
            let q0 = Instant::now();
            db.run(&stmts)?;
            nq.push(q0.elapsed());
            nt.push(t0.elapsed());
            if trial == 0 && db.table("t1")? != target {
                return Err(Error::PreconditionViolated("naive DML gave the wrong table".into()));
            }
        }
        rows.push(BenchRow {
            scenario: config.scenario,
            n: config.n,
            m,
            delta: d.len(),
            naive_total: Some(median(nt)),
            naive_query: Some(median(nq)),
            incr_total: median(it),
            incr_query: median(iq),
            query_count: count,
        });
    }
    Ok(rows)
}

/// The smallest `m` at which the state-based path is faster.
pub fn crossover(rows: &[BenchRow]) -> Option<usize> {
    rows.iter()
        .find(|r| r.naive_total.is_some_and(|nt| nt < r.incr_total))
        .map(|r| r.m)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation, with ties given their average rank.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_shape_and_determinism() {
        let s = generate(1000, 7);
        assert_eq!(s.table("t1").unwrap().len(), 1000);
        assert_eq!(s.table("t2").unwrap().len(), 100);
        assert!(t1_type().fds().satisfied_by(s.table("t1").unwrap()));
        let again = generate(1000, 7);
        assert_eq!(s.table("t1").unwrap(), again.table("t1").unwrap());
        assert_ne!(s.table("t1").unwrap(), generate(1000, 8).table("t1").unwrap());
        assert_eq!(generate(10, 1).table("t2").unwrap().len(), 1);
    }

    #[test]
    fn sql_backend_agrees_with_store() {
        let s = generate(200, 3);
        let b = SqlBackend::from_store(&s).unwrap();
        let q = QueryExpr::var("t1").join(QueryExpr::var("t2"));
        let p = Predicate::or(Predicate::eq("C", 3), Predicate::tuple_in(Relation::ints("D", [1, 2])));
        assert_eq!(b.fetch(&q, &p).unwrap(), s.fetch(&q, &p).unwrap());
        assert_eq!(b.stats().0, 1);
    }

    #[test]
    fn scenarios_run_and_agree() {
        for sc in [Scenario::Select, Scenario::Project, Scenario::Join] {
            let mut c = BenchConfig::new(sc, 1000);
            c.trials = 1;
            let rows = run(&c).unwrap();
            assert_eq!(rows.len(), 1);
            assert!(rows[0].delta > 0, "{sc}");
        }
        let mut c = BenchConfig::new(Scenario::Join, 1000);
        c.trials = 1;
        assert_eq!(run(&c).unwrap()[0].query_count, 5);
        let mut c = BenchConfig::new(Scenario::DeltaApply, 1000);
        c.trials = 1;
        c.m = 40;
        let r = run(&c).unwrap();
        assert_eq!(r[0].delta, 10 + 10 + 2 * 20);
        let mut c = BenchConfig::new(Scenario::DeltaCalc, 1000);
        c.trials = 1;
        assert!(run(&c).unwrap()[0].naive_total.is_none());
    }

    #[test]
    fn config_checks() {
        let mut c = BenchConfig::new(Scenario::Select, 5);
        assert!(run(&c).is_err());
        c.n = 100;
        c.trials = 2;
        assert!(run(&c).is_err());
        assert_eq!("delta-size".parse::<Scenario>().unwrap(), Scenario::DeltaSize);
    }

    #[test]
    fn rank_correlation() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!(spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 2.0]) > 0.8);
    }
}
