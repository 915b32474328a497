use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::backend::{SqlStatement, TableStore};
use crate::error::{Error, Result};
use crate::relalg::{Kind, Relation, Value};

/// A small evaluator for the canonical SQL dialect, standing in for a
/// database server. Each table has a primary-key index on its keys (all
/// columns when none are declared); no other indexes exist.
#[derive(Clone, Debug, Default)]
pub struct Interpreter {
    tables: BTreeMap<String, ITable>,
}

#[derive(Clone, Debug)]
struct ITable {
    columns: Vec<(String, Kind)>,
    key: Vec<usize>,
    rows: BTreeMap<Vec<Value>, Vec<Value>>,
}

impl ITable {
    fn col(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|(c, _)| c == name)
            .ok_or_else(|| Error::Sql(format!("unknown column `{name}`")))
    }

    fn key_of(&self, row: &[Value]) -> Vec<Value> {
        self.key.iter().map(|&i| row[i].clone()).collect()
    }

    fn check_kind(&self, i: usize, v: &Value) -> Result<()> {
        let (c, k) = &self.columns[i];
        if v.kind() != *k {
            return Err(Error::Sql(format!("column `{c}` has kind {k}, got {v}")));
        }
        Ok(())
    }

    /// Keys of rows satisfying `cond`, using the key index when `cond`
    /// pins down the key columns.
    fn matching(&self, cond: &Cond) -> Result<Vec<Vec<Value>>> {
        let mut out = Vec::new();
        if let Some(keys) = self.candidates(cond) {
            for key in keys {
                if let Some(row) = self.rows.get(&key) {
                    if cond.eval(row)? {
                        out.push(key);
                    }
                }
            }
            return Ok(out);
        }
        for (k, row) in &self.rows {
            if cond.eval(row)? {
                out.push(k.clone());
            }
        }
        Ok(out)
    }

    /// A superset of the keys of matching rows, when the index can tell.
    fn candidates(&self, cond: &Cond) -> Option<BTreeSet<Vec<Value>>> {
        fn eqs(c: &Cond, out: &mut BTreeMap<usize, Value>) {
            match c {
                Cond::And(a, b) => {
                    eqs(a, out);
                    eqs(b, out);
                }
                Cond::Cmp(i, CmpOp::Eq, Operand::Const(v)) => {
                    out.insert(*i, v.clone());
                }
                _ => {}
            }
        }
        let mut fixed = BTreeMap::new();
        eqs(cond, &mut fixed);
        if let Some(key) = self.key.iter().map(|i| fixed.get(i).cloned()).collect::<Option<Vec<_>>>() {
            return Some(BTreeSet::from([key]));
        }
        match cond {
            Cond::Const(false) => Some(BTreeSet::new()),
            Cond::In(cols, set) => {
                let pos: Vec<usize> = self
                    .key
                    .iter()
                    .map(|k| cols.iter().position(|c| c == k))
                    .collect::<Option<_>>()?;
                Some(set.iter().map(|t| pos.iter().map(|&p| t[p].clone()).collect()).collect())
            }
            Cond::And(a, b) => match (self.candidates(a), self.candidates(b)) {
                (Some(x), Some(y)) => Some(if x.len() <= y.len() { x } else { y }),
                (x, y) => x.or(y),
            },
            Cond::Or(a, b) => {
                let mut x = self.candidates(a)?;
                x.extend(self.candidates(b)?);
                Some(x)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, Debug)]
enum Operand {
    Const(Value),
    Col(usize),
}

#[derive(Clone, Debug)]
enum Cond {
    Const(bool),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
    Cmp(usize, CmpOp, Operand),
    /// `(c1, c2, ..) IN (...)`, with a single column as the common case.
    In(Vec<usize>, BTreeSet<Vec<Value>>),
}

fn compare(a: &Value, b: &Value) -> Result<Ordering> {
    a.compare(b).map_err(|e| Error::Sql(e.to_string()))
}

impl Cond {
    fn eval(&self, row: &[Value]) -> Result<bool> {
        Ok(match self {
            Cond::Const(b) => *b,
            Cond::Not(c) => !c.eval(row)?,
            Cond::And(a, b) => a.eval(row)? && b.eval(row)?,
            Cond::Or(a, b) => a.eval(row)? || b.eval(row)?,
            Cond::Cmp(i, op, rhs) => {
                let rhs = match rhs {
                    Operand::Const(v) => v,
                    Operand::Col(j) => &row[*j],
                };
                let o = compare(&row[*i], rhs)?;
                match op {
                    CmpOp::Eq => o == Ordering::Equal,
                    CmpOp::Ne => o != Ordering::Equal,
                    CmpOp::Lt => o == Ordering::Less,
                    CmpOp::Le => o != Ordering::Greater,
                    CmpOp::Gt => o == Ordering::Greater,
                    CmpOp::Ge => o != Ordering::Less,
                }
            }
            Cond::In(cols, set) => {
                let t: Vec<Value> = cols.iter().map(|&i| row[i].clone()).collect();
                set.contains(&t)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Int(i64),
    Str(String),
    Sym(&'static str),
}

fn tokenize(text: &str) -> Result<Vec<Tok>> {
    let cs: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphabetic() || c == '_' {
            let s = i;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(Tok::Word(cs[s..i].iter().collect()));
        } else if c.is_ascii_digit() || (c == '-' && cs.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let s = i;
            i += 1;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let lit: String = cs[s..i].iter().collect();
            out.push(Tok::Int(lit.parse().map_err(|_| Error::Sql(format!("bad integer {lit}")))?));
        } else if c == '\'' {
            let mut s = String::new();
            i += 1;
            loop {
                match cs.get(i) {
                    None => return Err(Error::Sql("unterminated string".into())),
                    Some('\'') if cs.get(i + 1) == Some(&'\'') => {
                        s.push('\'');
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            out.push(Tok::Str(s));
        } else {
            let two: String = cs[i..(i + 2).min(cs.len())].iter().collect();
            let sym = match two.as_str() {
                "<>" => Some("<>"),
                "<=" => Some("<="),
                ">=" => Some(">="),
                _ => None,
            };
            if let Some(s) = sym {
                out.push(Tok::Sym(s));
                i += 2;
                continue;
            }
            let s = match c {
                '(' => "(",
                ')' => ")",
                ',' => ",",
                ';' => ";",
                '=' => "=",
                '<' => "<",
                '>' => ">",
                '*' => "*",
                _ => return Err(Error::Sql(format!("unexpected character `{c}`"))),
            };
            out.push(Tok::Sym(s));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, ahead: usize) -> Option<&Tok> {
        self.toks.get(self.pos + ahead)
    }

    fn next(&mut self) -> Result<Tok> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Sql("unexpected end of input".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn kw(&mut self, kw: &str) -> Result<()> {
        if self.is_kw(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Sql(format!("expected {kw}, found {:?}", self.peek())))
        }
    }

    fn sym(&mut self, s: &str) -> Result<()> {
        match self.next()? {
            Tok::Sym(t) if t == s => Ok(()),
            t => Err(Error::Sql(format!("expected `{s}`, found {t:?}"))),
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(t)) if *t == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.next()? {
            Tok::Word(w) => Ok(w),
            t => Err(Error::Sql(format!("expected a name, found {t:?}"))),
        }
    }

    fn value(&mut self) -> Result<Value> {
        match self.next()? {
            Tok::Int(i) => Ok(Value::Int(i)),
            Tok::Str(s) => Ok(Value::str(&s)),
            Tok::Word(w) if w.eq_ignore_ascii_case("true") => Ok(Value::Bool(true)),
            Tok::Word(w) if w.eq_ignore_ascii_case("false") => Ok(Value::Bool(false)),
            t => Err(Error::Sql(format!("expected a literal, found {t:?}"))),
        }
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        self.sym("(")?;
        let mut out = vec![item(self)?];
        while self.eat_sym(",") {
            out.push(item(self)?);
        }
        self.sym(")")?;
        Ok(out)
    }

    fn cond(&mut self, t: &ITable) -> Result<Cond> {
        let mut c = self.conj(t)?;
        while self.is_kw("or") {
            self.pos += 1;
            c = Cond::Or(Box::new(c), Box::new(self.conj(t)?));
        }
        Ok(c)
    }

    fn conj(&mut self, t: &ITable) -> Result<Cond> {
        let mut c = self.neg(t)?;
        while self.is_kw("and") {
            self.pos += 1;
            c = Cond::And(Box::new(c), Box::new(self.neg(t)?));
        }
        Ok(c)
    }

    fn neg(&mut self, t: &ITable) -> Result<Cond> {
        if self.is_kw("not") {
            self.pos += 1;
            return Ok(Cond::Not(Box::new(self.neg(t)?)));
        }
        self.atom(t)
    }

    fn atom(&mut self, t: &ITable) -> Result<Cond> {
        let row_value = matches!(
            (self.peek_at(0), self.peek_at(1), self.peek_at(2)),
            (Some(Tok::Sym("(")), Some(Tok::Word(_)), Some(Tok::Sym(",")))
        );
        if row_value {
            let cols = self.list(|p| t.col(&p.ident()?))?;
            if !self.is_kw("in") {
                return Err(Error::Sql("expected IN after a column list".into()));
            }
            self.pos += 1;
            let tuples = self.list(|p| p.list(|p| p.value()))?;
            let mut set = BTreeSet::new();
            for tup in tuples {
                if tup.len() != cols.len() {
                    return Err(Error::Sql(format!("expected {} values in each tuple", cols.len())));
                }
                for (&c, v) in cols.iter().zip(&tup) {
                    t.check_kind(c, v)?;
                }
                set.insert(tup);
            }
            return Ok(Cond::In(cols, set));
        }
        if self.eat_sym("(") {
            let c = self.cond(t)?;
            self.sym(")")?;
            return Ok(c);
        }
        if self.is_kw("true") {
            self.pos += 1;
            return Ok(Cond::Const(true));
        }
        if self.is_kw("false") {
            self.pos += 1;
            return Ok(Cond::Const(false));
        }
        let col = t.col(&self.ident()?)?;
        if self.is_kw("in") {
            self.pos += 1;
            let vals = self.list(|p| p.value())?;
            for v in &vals {
                t.check_kind(col, v)?;
            }
            return Ok(Cond::In(vec![col], vals.into_iter().map(|v| vec![v]).collect()));
        }
        let op = match self.next()? {
            Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("<>") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            t => return Err(Error::Sql(format!("expected a comparison, found {t:?}"))),
        };
        let rhs = match self.peek() {
            Some(Tok::Word(w)) if !w.eq_ignore_ascii_case("true") && !w.eq_ignore_ascii_case("false") => {
                let w = w.clone();
                self.pos += 1;
                Operand::Col(t.col(&w)?)
            }
            _ => {
                let v = self.value()?;
                t.check_kind(col, &v)?;
                Operand::Const(v)
            }
        };
        Ok(Cond::Cmp(col, op, rhs))
    }

    fn where_clause(&mut self, t: &ITable) -> Result<Cond> {
        if self.is_kw("where") {
            self.pos += 1;
            self.cond(t)
        } else {
            Ok(Cond::Const(true))
        }
    }
}

impl Interpreter {
    pub fn new() -> Interpreter {
        Interpreter::default()
    }

    /// Copies every table of `store`, with its declared columns and keys.
    pub fn from_store(store: &TableStore) -> Result<Interpreter> {
        let mut it = Interpreter::new();
        for name in store.names() {
            let ty = store.table_type(&name)?;
            let keys = ty.effective_keys();
            it.create_table(&name, ty.columns().to_vec(), &keys)?;
            it.load(&name, store.table(&name)?)?;
        }
        Ok(it)
    }

    pub fn create_table<S: AsRef<str>>(
        &mut self,
        name: &str,
        columns: Vec<(String, Kind)>,
        keys: &[S],
    ) -> Result<()> {
        let key = keys
            .iter()
            .map(|k| {
                columns
                    .iter()
                    .position(|(c, _)| c == k.as_ref())
                    .ok_or_else(|| Error::Sql(format!("unknown key column `{}`", k.as_ref())))
            })
            .collect::<Result<_>>()?;
        self.tables.insert(
            name.to_string(),
            ITable {
                columns,
                key,
                rows: BTreeMap::new(),
            },
        );
        Ok(())
    }

    fn load(&mut self, name: &str, rel: &Relation) -> Result<()> {
        let t = self.table_mut(name)?;
        let pos: Vec<usize> = t
            .columns
            .iter()
            .map(|(c, _)| rel.position(c).ok_or_else(|| Error::MissingAttribute(c.clone())))
            .collect::<Result<_>>()?;
        for r in rel.rows() {
            let row: Vec<Value> = pos.iter().map(|&i| r[i].clone()).collect();
            if t.rows.insert(t.key_of(&row), row).is_some() {
                return Err(Error::Sql(format!("duplicate key in table `{name}`")));
            }
        }
        Ok(())
    }

    fn table_mut(&mut self, name: &str) -> Result<&mut ITable> {
        self.tables
            .get_mut(name)
            .ok_or_else(|| Error::UnknownTable(name.to_string()))
    }

    /// Sorted column names of a table.
    pub fn domain(&self, name: &str) -> Option<Vec<String>> {
        let t = self.tables.get(name)?;
        let mut d: Vec<String> = t.columns.iter().map(|(c, _)| c.clone()).collect();
        d.sort();
        Some(d)
    }

    /// Current contents of a table as a relation.
    pub fn table(&self, name: &str) -> Result<Relation> {
        let t = self
            .tables
            .get(name)
            .ok_or_else(|| Error::UnknownTable(name.to_string()))?;
        let cols: Vec<&String> = t.columns.iter().map(|(c, _)| c).collect();
        Relation::from_tuples(&cols, t.rows.values().cloned())
    }

    pub fn run(&mut self, stmts: &[SqlStatement]) -> Result<usize> {
        stmts.iter().map(|s| self.execute(s.text())).sum()
    }

    /// Executes every statement in `text`, returning the number of rows
    /// changed.
    pub fn execute(&mut self, text: &str) -> Result<usize> {
        let toks = tokenize(text)?;
        let mut p = Parser { toks: &toks, pos: 0 };
        let mut changed = 0;
        while p.peek().is_some() {
            if p.eat_sym(";") {
                continue;
            }
            changed += self.statement(&mut p)?;
            if p.peek().is_some() {
                p.sym(";")?;
            }
        }
        Ok(changed)
    }

    /// Runs a single `SELECT * FROM t [WHERE c]`.
    pub fn query(&self, text: &str) -> Result<Relation> {
        let toks = tokenize(text)?;
        let mut p = Parser { toks: &toks, pos: 0 };
        p.kw("select")?;
        p.sym("*")?;
        p.kw("from")?;
        let name = p.ident()?;
        let t = self
            .tables
            .get(&name)
            .ok_or_else(|| Error::UnknownTable(name.clone()))?;
        let cond = p.where_clause(t)?;
        p.eat_sym(";");
        if p.peek().is_some() {
            return Err(Error::Sql("trailing input after query".into()));
        }
        let cols: Vec<&String> = t.columns.iter().map(|(c, _)| c).collect();
        let keys = t.matching(&cond)?;
        Relation::from_tuples(&cols, keys.iter().map(|k| t.rows[k].clone()))
    }

    fn statement(&mut self, p: &mut Parser) -> Result<usize> {
        if p.is_kw("insert") {
            p.kw("insert")?;
            p.kw("into")?;
            let name = p.ident()?;
            let cols = p.list(|p| p.ident())?;
            p.kw("values")?;
            let vals = p.list(|p| p.value())?;
            let t = self.table_mut(&name)?;
            if cols.len() != t.columns.len() || vals.len() != cols.len() {
                return Err(Error::Sql(format!("INSERT into `{name}` must give every column once")));
            }
            let mut row = vec![None; t.columns.len()];
            for (c, v) in cols.iter().zip(vals) {
                let i = t.col(c)?;
                t.check_kind(i, &v)?;
                if row[i].replace(v).is_some() {
                    return Err(Error::Sql(format!("column `{c}` given twice")));
                }
            }
            let row: Vec<Value> = row.into_iter().map(|v| v.expect("all columns")).collect();
            let key = t.key_of(&row);
            if t.rows.contains_key(&key) {
                return Err(Error::Sql(format!("duplicate key {key:?} in `{name}`")));
            }
            t.rows.insert(key, row);
            Ok(1)
        } else if p.is_kw("update") {
            p.kw("update")?;
            let name = p.ident()?;
            p.kw("set")?;
            let t = self.table_mut(&name)?;
            let mut sets = Vec::new();
            loop {
                let i = t.col(&p.ident()?)?;
                p.sym("=")?;
                let v = p.value()?;
                t.check_kind(i, &v)?;
                sets.push((i, v));
                if !p.eat_sym(",") {
                    break;
                }
            }
            let cond = p.where_clause(t)?;
            let hits = t.matching(&cond)?;
            let mut updated = Vec::with_capacity(hits.len());
            for k in &hits {
                let mut row = t.rows.remove(k).expect("matched");
                for (i, v) in &sets {
                    row[*i] = v.clone();
                }
                updated.push(row);
            }
            for row in updated {
                let key = t.key_of(&row);
                if t.rows.insert(key.clone(), row).is_some() {
                    return Err(Error::Sql(format!("duplicate key {key:?} in `{name}`")));
                }
            }
            Ok(hits.len())
        } else if p.is_kw("delete") {
            p.kw("delete")?;
            p.kw("from")?;
            let name = p.ident()?;
            let t = self.table_mut(&name)?;
            let cond = p.where_clause(t)?;
            let hits = t.matching(&cond)?;
            for k in &hits {
                t.rows.remove(k);
            }
            Ok(hits.len())
        } else {
            Err(Error::Sql(format!("unsupported statement starting {:?}", p.peek())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interp() -> Interpreter {
        let mut it = Interpreter::new();
        it.create_table(
            "t",
            vec![("k".into(), Kind::Int), ("s".into(), Kind::Str), ("b".into(), Kind::Bool)],
            &["k"],
        )
        .unwrap();
        it.execute(
            "INSERT INTO t (k, s, b) VALUES (1, 'a', TRUE); \
             INSERT INTO t (k, s, b) VALUES (2, 'it''s', FALSE); \
             INSERT INTO t (s, k, b) VALUES ('c', -3, TRUE);",
        )
        .unwrap();
        it
    }

    #[test]
    fn dml_round_trip() {
        let mut it = interp();
        assert_eq!(it.table("t").unwrap().len(), 3);
        assert_eq!(it.execute("UPDATE t SET s = 'z', b = FALSE WHERE k = 1;").unwrap(), 1);
        assert_eq!(it.execute("DELETE FROM t WHERE (k IN (2, 9)) OR (s = 'nope');").unwrap(), 1);
        let r = it.query("SELECT * FROM t WHERE NOT (k < 0)").unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.records().next().unwrap().get("s"), Some(&Value::str("z")));
        assert_eq!(it.execute("DELETE FROM t;").unwrap(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        let mut it = interp();
        assert!(it.execute("INSERT INTO t (k, s, b) VALUES (1, 'dup', TRUE);").is_err());
        assert!(it.execute("UPDATE t SET k = 'x' WHERE k = 1;").is_err());
        assert!(it.execute("DELETE FROM nowhere;").is_err());
        assert!(it.query("SELECT * FROM t WHERE k = 'a'").is_err());
        assert!(it.execute("UPDATE t SET s = 'x' WHERE s = 'unterminated").is_err());
    }

    #[test]
    fn column_comparison_and_constants() {
        let it = interp();
        assert_eq!(it.query("SELECT * FROM t WHERE TRUE AND NOT (FALSE)").unwrap().len(), 3);
        assert_eq!(it.query("SELECT * FROM t WHERE s = s").unwrap().len(), 3);
        assert_eq!(it.query("SELECT * FROM t WHERE b = TRUE AND k >= 1").unwrap().len(), 1);
    }

    #[test]
    fn row_value_membership() {
        let it = interp();
        let q = |w: &str| it.query(&format!("SELECT * FROM t WHERE {w}")).unwrap().len();
        assert_eq!(q("(k, s) IN ((1, 'a'), (2, 'a'), (-3, 'c'))"), 2);
        assert_eq!(q("(s, k) IN (('a', 1))"), 1);
        // key lookups combined with other conditions and disjunctions
        assert_eq!(q("k IN (1, 2, 7) AND b = TRUE"), 1);
        assert_eq!(q("(k IN (1)) OR (k IN (2))"), 2);
        assert_eq!(q("(k IN (1)) OR (s = 'c')"), 2);
        assert!(it.query("SELECT * FROM t WHERE (k, s) IN ((1, 2))").is_err());
        assert!(it.query("SELECT * FROM t WHERE (k, s) IN ((1))").is_err());
    }
}
