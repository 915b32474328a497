//! `relens`: query and update CSV-backed tables through relational lenses.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use relens::backend::{
    naive_dml, read_delta_csv, save_csv, sql_dml, write_csv, SqlStatement, TableStore,
};
use relens::bench::{self, BenchConfig, BenchRow, Scenario};
use relens::dsl::Program;
use relens::lenses::{
    lens_delta_get, lens_delta_put, lens_get, lens_put_naive, RelationType, Tree, TypedLens,
};
use relens::{DeltaRelation, Error, Relation};

#[derive(Parser)]
#[command(name = "relens", version, about = "Updatable relational views over CSV tables")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the view as CSV.
    Get(Source),
    /// Replace the view with a new one using state-based put.
    Put(PutArgs),
    /// Propagate a view delta (or a new view) incrementally.
    Dput(DputArgs),
    /// Print the SQL that `dput` would run, changing nothing.
    Sql(DputArgs),
    /// Run microbenchmarks and print a TSV report.
    Bench(BenchArgs),
    /// Type check a lens, and verify it against the tables when given.
    Check(CheckArgs),
}

#[derive(Args)]
struct Source {
    /// Lens file declaring tables and lenses.
    #[arg(long)]
    lens: PathBuf,
    /// Directory holding `<table>.csv` files.
    #[arg(long)]
    db: PathBuf,
    /// Which lens to use (default: the last one declared).
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct Output {
    /// Also write the generated SQL to this file.
    #[arg(long, value_name = "FILE")]
    emit_sql: Option<PathBuf>,
    /// Generate SQL that replaces whole tables instead of key-paired DML.
    #[arg(long)]
    naive_dml: bool,
    /// Compute and report, but leave the tables unchanged.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct PutArgs {
    #[command(flatten)]
    source: Source,
    /// The updated view as CSV.
    #[arg(long)]
    view: PathBuf,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct DputArgs {
    #[command(flatten)]
    source: Source,
    /// View delta as CSV with a leading `+`/`-` column.
    #[arg(long, conflicts_with = "view", required_unless_present = "view")]
    delta: Option<PathBuf>,
    /// The updated view; the delta is its difference with the current view.
    #[arg(long)]
    view: Option<PathBuf>,
    /// Use state-based put and diff the result instead.
    #[arg(long)]
    naive: bool,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    lens: PathBuf,
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    /// A view delta to check incremental put against state-based put.
    #[arg(long, requires = "db")]
    delta: Option<PathBuf>,
    /// Fail instead of recomputing when a difference cannot be incrementalised.
    #[arg(long)]
    strict_incremental: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Scenarios to run (default: all).
    #[arg(long = "scenario", value_name = "NAME")]
    scenarios: Vec<Scenario>,
    /// Row counts for t1 (default 1000, 5000, 10000).
    #[arg(long = "n", value_name = "N")]
    n: Vec<usize>,
    /// Delta size for delta-apply (default: a sweep from 100 to 1000).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Use n = 200000 for the per-lens scenarios.
    #[arg(long)]
    large: bool,
}

/// Maps errors to exit codes: 2 parse, 3 type, 4 schema or data, 1 other.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Parse { .. }) => 2,
        Some(Error::TypeError { .. } | Error::NotTreeForm(_) | Error::UnsupportedVariant(_)) => 3,
        Some(
            Error::SchemaViolation { .. }
            | Error::FdViolation { .. }
            | Error::NotMinimal(_)
            | Error::Overlap(_)
            | Error::KeyCollision(_)
            | Error::DomainMismatch { .. },
        ) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Get(src) => get(&src),
        Command::Put(args) => put(&args),
        Command::Dput(args) => dput(&args, false),
        Command::Sql(args) => dput(&args, true),
        Command::Bench(args) => run_bench(&args),
        Command::Check(args) => check(&args),
    }
}

struct Loaded {
    lens: TypedLens,
    store: TableStore,
}

fn load_lens(path: &Path, name: Option<&str>) -> anyhow::Result<(Program, TypedLens)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let prog = Program::parse(&text)?;
    let lens = prog.build(name)?;
    Ok((prog, lens))
}

fn load(src: &Source) -> anyhow::Result<Loaded> {
    let (prog, lens) = load_lens(&src.lens, src.name.as_deref())?;
    let store = TableStore::load_dir(&src.db, &prog.tables)
        .with_context(|| format!("loading tables from {}", src.db.display()))?;
    Ok(Loaded { lens, store })
}

fn view_type(lens: &TypedLens) -> anyhow::Result<&RelationType> {
    match lens.view_type() {
        Some(t) => Ok(t),
        None => bail!("the lens has several views; only single-view lenses are supported here"),
    }
}

fn read_view(path: &Path, ty: &RelationType) -> anyhow::Result<Relation> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(relens::backend::read_csv(file, ty)?)
}

fn get(src: &Source) -> anyhow::Result<()> {
    let Loaded { lens, store } = load(src)?;
    let ty = view_type(&lens)?;
    let v = lens_get(&lens, &store.instance(lens.source())?)?;
    let v = v.into_leaf().expect("single view");
    write_csv(io::stdout().lock(), ty, &v)?;
    Ok(())
}

/// Source table names paired with their deltas, in table-name order.
fn named_deltas(lens: &TypedLens, ds: &Tree<DeltaRelation>) -> anyhow::Result<Vec<(String, DeltaRelation)>> {
    let pairs = lens.source().zip_with(ds, |t, d| Ok((t.name.clone(), d.clone())))?;
    let mut out: Vec<_> = pairs.leaves().into_iter().cloned().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Applies the deltas, emits SQL and saves changed tables. Everything is
/// computed before anything is written.
fn commit(
    store: &mut TableStore,
    db: &Path,
    deltas: &[(String, DeltaRelation)],
    out: &Output,
    print_sql: bool,
) -> anyhow::Result<()> {
    let mut next = store.clone();
    let mut script: Vec<SqlStatement> = Vec::new();
    for (name, d) in deltas {
        next.apply_delta(name, d)?;
        if d.is_empty() {
            continue;
        }
        let ty = store.table_type(name)?;
        script.extend(if out.naive_dml {
            naive_dml(name, ty, next.table(name)?)?
        } else {
            sql_dml(name, ty, d)?
        });
    }
    let text: String = script.iter().map(|s| format!("{s}\n")).collect();
    if let Some(path) = &out.emit_sql {
        fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    if print_sql {
        io::stdout().write_all(text.as_bytes())?;
        return Ok(());
    }
    for (name, d) in deltas {
        log::info!("{name}: +{} -{}", d.plus().len(), d.minus().len());
    }
    if out.dry_run {
        return Ok(());
    }
    for (name, d) in deltas {
        if !d.is_empty() {
            save_csv(&db.join(format!("{name}.csv")), next.table_type(name)?, next.table(name)?)?;
        }
    }
    *store = next;
    Ok(())
}

fn put(args: &PutArgs) -> anyhow::Result<()> {
    let Loaded { lens, mut store } = load(&args.source)?;
    let v2 = read_view(&args.view, view_type(&lens)?)?;
    let s = store.instance(lens.source())?;
    let s2 = lens_put_naive(&lens, &s, &Tree::Leaf(v2))?;
    let ds = s2.zip_with(&s, DeltaRelation::diff)?;
    let deltas = named_deltas(&lens, &ds)?;
    commit(&mut store, &args.source.db, &deltas, &args.out, false)
}

fn dput(args: &DputArgs, print_sql: bool) -> anyhow::Result<()> {
    let Loaded { lens, mut store } = load(&args.source)?;
    let ty = view_type(&lens)?;
    let s = store.instance(lens.source())?;
    let dv = match (&args.delta, &args.view) {
        (Some(path), _) => {
            let f = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
            read_delta_csv(f, ty)?
        }
        (None, Some(path)) => {
            let v = lens_get(&lens, &s)?.into_leaf().expect("single view");
            DeltaRelation::diff(&read_view(path, ty)?, &v)?
        }
        (None, None) => bail!("give --delta or --view"),
    };
    let ds = if args.naive {
        let v = lens_get(&lens, &s)?.into_leaf().expect("single view");
        let s2 = lens_put_naive(&lens, &s, &Tree::Leaf(dv.apply_to(&v)?))?;
        s2.zip_with(&s, DeltaRelation::diff)?
    } else {
        let ds = lens_delta_put(&lens, &store, &Tree::Leaf(dv))?;
        log::info!("{} fetches", store.fetch_log().len());
        ds
    };
    let deltas = named_deltas(&lens, &ds)?;
    commit(&mut store, &args.source.db, &deltas, &args.out, print_sql)
}

fn check(args: &CheckArgs) -> anyhow::Result<()> {
    let (prog, lens) = load_lens(&args.lens, args.name.as_deref())?;
    let mut out = io::stdout().lock();
    for t in lens.source().leaves() {
        writeln!(out, "source {}: {}", t.name, describe(&t.ty))?;
    }
    for t in lens.view().leaves() {
        writeln!(out, "view {}: {}", t.name, describe(&t.ty))?;
    }
    let Some(db) = &args.db else {
        return Ok(());
    };
    let store = TableStore::load_dir(db, &prog.tables)?;
    let s = store.instance(lens.source())?;
    let v = lens_get(&lens, &s)?;
    if lens_put_naive(&lens, &s, &v)? != s {
        bail!("GetPut fails on these tables");
    }
    writeln!(out, "tables conform; GetPut holds")?;
    let Some(path) = &args.delta else {
        return Ok(());
    };
    let ty = view_type(&lens)?;
    let f = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let dv = Tree::Leaf(read_delta_csv(f, ty)?);
    let ds = lens_delta_put(&lens, &store, &dv)?;
    let v2 = v.zip_with(&dv, |r, d| d.apply_to(r))?;
    let s2 = lens_put_naive(&lens, &s, &v2)?;
    if s.zip_with(&ds, |r, d| d.apply_to(r))? != s2 {
        bail!("incremental put disagrees with state-based put");
    }
    if lens_delta_get(&lens, &s, &ds, args.strict_incremental)? != dv {
        bail!("the source delta does not reproduce the view delta");
    }
    if lens_get(&lens, &s2)? != v2 {
        bail!("PutGet fails for this delta");
    }
    writeln!(out, "delta accepted; incremental and state-based put agree")?;
    Ok(())
}

fn describe(ty: &RelationType) -> String {
    let cols: Vec<String> = ty.columns().iter().map(|(c, k)| format!("{c}:{k}")).collect();
    let mut s = format!("({})", cols.join(", "));
    if !ty.keys().is_empty() {
        s.push_str(&format!(" keys [{}]", ty.keys().join(", ")));
    }
    s.push_str(&format!(" fds [{}]", ty.fds()));
    s.push_str(&format!(" where {}", ty.pred()));
    s
}

fn run_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let scenarios = if args.scenarios.is_empty() {
        Scenario::ALL.to_vec()
    } else {
        args.scenarios.clone()
    };
    let mut out = io::stdout().lock();
    writeln!(out, "{}", BenchRow::HEADER)?;
    for sc in scenarios {
        let ns: Vec<usize> = match (sc, args.large) {
            _ if !args.n.is_empty() => args.n.clone(),
            (Scenario::Select | Scenario::Project | Scenario::Join, true) => vec![200_000],
            (Scenario::DeltaSize, _) => vec![20_000],
            (Scenario::DeltaApply, _) => vec![10_000],
            _ => vec![1_000, 5_000, 10_000],
        };
        for n in ns {
            let config = BenchConfig {
                scenario: sc,
                n,
                m: args.m.unwrap_or(0),
                trials: args.trials,
                seed: args.seed,
            };
            let rows = bench::run(&config)?;
            for r in &rows {
                writeln!(out, "{r}")?;
            }
            out.flush()?;
            if sc == Scenario::DeltaSize {
                summarize(&rows);
            }
        }
    }
    Ok(())
}

fn summarize(rows: &[BenchRow]) {
    match bench::crossover(rows) {
        Some(m) => eprintln!("crossover at m = {m}"),
        None => eprintln!("no crossover in the measured range"),
    }
    if rows.len() > 1 {
        let m: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
        let t: Vec<f64> = rows.iter().map(|r| r.incr_total.as_secs_f64()).collect();
        eprintln!("spearman(m, incremental time) = {:.3}", bench::spearman(&m, &t));
    }
}
