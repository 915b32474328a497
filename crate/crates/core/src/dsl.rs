//! The lens file format.
//!
//! One declaration per line; `#` starts a comment.
//!
//! ```text
//! table tracks (track:str, date:int, rating:int, album:str) keys [track, album] fds [track -> date rating]
//! table albums (album:str, quantity:int) keys [album] fds [album -> quantity]
//! lens joined = join tracks with albums
//! lens dropped = drop date determined by (track) default 2018 from joined
//! lens popular = select from dropped where quantity > 2
//! ```
//!
//! Lens expressions are `select from L where P`, `join L with L`,
//! `drop A determined by (X, ...) default v from L`, `rename A to B in L`,
//! `tensor L with L`, `sym from L`, `assoc from L` and `id from L`, where
//! `L` is a table, an earlier lens, or a parenthesised expression. A lens
//! name stands for its whole definition, so each can be used once.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fdeps::{FunDep, FunDepSet};
use crate::lenses::{lens_build, JoinVariant, LensExpr, RelationType, Schema, Table, TypedLens};
use crate::relalg::{CmpOp, Kind, Predicate, Relation, Value};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Sym(&'static str),
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 16] = [
    "->", "<>", "!=", "<=", ">=", "(", ")", "[", "]", ",", ";", ":", "=", "<", ">", "*",
];

fn lex(text: &str, line: usize) -> Result<Vec<Spanned>> {
    let cs: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = if c.is_alphabetic() || c == '_' {
            let s = i;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            Tok::Ident(cs[s..i].iter().collect())
        } else if c.is_ascii_digit() || (c == '-' && cs.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let s = i;
            i += 1;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let lit: String = cs[s..i].iter().collect();
            Tok::Int(
                lit.parse()
                    .map_err(|_| Error::parse(line, col, format!("integer `{lit}` out of range")))?,
            )
        } else if c == '\'' {
            let mut s = String::new();
            i += 1;
            loop {
                match cs.get(i) {
                    None => return Err(Error::parse(line, col, "unterminated string")),
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
            Tok::Str(s)
        } else {
            let rest: String = cs[i..(i + 2).min(cs.len())].iter().collect();
            let sym = SYMBOLS
                .iter()
                .find(|s| rest.starts_with(**s))
                .ok_or_else(|| Error::parse(line, col, format!("unexpected character `{c}`")))?;
            i += sym.chars().count();
            Tok::Sym(sym)
        };
        out.push(Spanned { tok, line, col });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    line: usize,
    end_col: usize,
}

impl Parser {
    fn new(text: &str, line: usize) -> Result<Parser> {
        Ok(Parser {
            toks: lex(text, line)?,
            pos: 0,
            line,
            end_col: text.chars().count() + 1,
        })
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (line, col) = match self.toks.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => (self.line, self.end_col),
        };
        Err(Error::parse(line, col, msg))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn found(&self) -> String {
        match self.peek() {
            None => "end of line".into(),
            Some(Tok::Ident(s)) => format!("`{s}`"),
            Some(Tok::Int(i)) => format!("`{i}`"),
            Some(Tok::Str(s)) => format!("'{s}'"),
            Some(Tok::Sym(s)) => format!("`{s}`"),
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.is_kw(kw);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", self.found()))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(t)) if *t == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.is_sym(s);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.found()))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.err(format!("expected a name, found {}", self.found())),
        }
    }

    fn value(&mut self) -> Result<Value> {
        let v = match self.peek() {
            Some(Tok::Int(i)) => Value::Int(*i),
            Some(Tok::Str(s)) => Value::str(s),
            Some(Tok::Ident(w)) if w.eq_ignore_ascii_case("true") => Value::Bool(true),
            Some(Tok::Ident(w)) if w.eq_ignore_ascii_case("false") => Value::Bool(false),
            _ => return self.err(format!("expected a literal, found {}", self.found())),
        };
        self.pos += 1;
        Ok(v)
    }

    fn comma_list<T>(&mut self, close: &str, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        let mut out = Vec::new();
        if self.eat_sym(close) {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat_sym(close) {
                return Ok(out);
            }
            self.sym(",")?;
        }
    }

    fn finish(&self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            self.err(format!("unexpected {}", self.found()))
        }
    }

    // predicates

    fn pred(&mut self) -> Result<Predicate> {
        let mut p = self.conj()?;
        while self.eat_kw("or") {
            p = Predicate::Or(Box::new(p), Box::new(self.conj()?));
        }
        Ok(p)
    }

    fn conj(&mut self) -> Result<Predicate> {
        let mut p = self.neg()?;
        while self.eat_kw("and") {
            p = Predicate::And(Box::new(p), Box::new(self.neg()?));
        }
        Ok(p)
    }

    fn neg(&mut self) -> Result<Predicate> {
        if self.eat_kw("not") {
            return Ok(Predicate::not(self.neg()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Predicate> {
        if self.eat_kw("true") {
            return Ok(Predicate::True);
        }
        if self.eat_kw("false") {
            return Ok(Predicate::falsity());
        }
        if self.is_sym("(") {
            // either a parenthesised predicate or an attribute tuple `(A, B) in (...)`
            let save = self.pos;
            self.pos += 1;
            if let Ok(attrs) = self.comma_list(")", Parser::ident) {
                if attrs.len() > 1 && self.eat_kw("in") {
                    return self.tuple_in(&attrs);
                }
            }
            self.pos = save + 1;
            let p = self.pred()?;
            self.sym(")")?;
            return Ok(p);
        }
        let attr = self.ident()?;
        if self.eat_kw("in") {
            return self.tuple_in(&[attr]);
        }
        let op = match self.peek() {
            Some(Tok::Sym("=")) => None,
            Some(Tok::Sym("<>" | "!=")) => Some(CmpOp::Ne),
            Some(Tok::Sym("<")) => Some(CmpOp::Lt),
            Some(Tok::Sym("<=")) => Some(CmpOp::Le),
            Some(Tok::Sym(">")) => Some(CmpOp::Gt),
            Some(Tok::Sym(">=")) => Some(CmpOp::Ge),
            _ => return self.err(format!("expected a comparison, found {}", self.found())),
        };
        self.pos += 1;
        if let Some(Tok::Ident(w)) = self.peek() {
            if op.is_none() && !w.eq_ignore_ascii_case("true") && !w.eq_ignore_ascii_case("false") {
                let other = self.ident()?;
                return Ok(Predicate::eq_attr(attr, other));
            }
        }
        let v = self.value()?;
        Ok(match op {
            None => Predicate::eq(attr, v),
            Some(op) => Predicate::cmp(attr, op, v),
        })
    }

    fn tuple_in(&mut self, attrs: &[String]) -> Result<Predicate> {
        self.sym("(")?;
        let n = attrs.len();
        let rows = self.comma_list(")", |p| {
            if n == 1 {
                return Ok(vec![p.value()?]);
            }
            p.sym("(")?;
            let row = p.comma_list(")", Parser::value)?;
            if row.len() != n {
                return p.err(format!("expected {n} values per tuple"));
            }
            Ok(row)
        })?;
        let rel = Relation::from_tuples(attrs, rows).or_else(|e| self.err(e.to_string()))?;
        Ok(Predicate::tuple_in(rel))
    }

    // declarations

    fn table(&mut self) -> Result<Table> {
        let name = self.ident()?;
        self.sym("(")?;
        let columns = self.comma_list(")", |p| {
            let c = p.ident()?;
            p.sym(":")?;
            let k = p.ident()?;
            match k.parse::<Kind>() {
                Ok(k) => Ok((c, k)),
                Err(e) => {
                    p.pos -= 1;
                    p.err(e)
                }
            }
        })?;
        let (mut keys, mut fds, mut pred) = (Vec::new(), FunDepSet::empty(), Predicate::True);
        while !self.at_end() {
            if self.eat_kw("keys") {
                self.sym("[")?;
                keys = self.comma_list("]", Parser::ident)?;
            } else if self.eat_kw("fds") {
                self.sym("[")?;
                fds = self.fds()?;
            } else if self.eat_kw("where") {
                pred = self.pred()?;
            } else {
                return self.err(format!("expected `keys`, `fds` or `where`, found {}", self.found()));
            }
        }
        let ty = RelationType::new(columns, pred, fds, keys).or_else(|e| self.err(e.to_string()))?;
        Ok(Table::new(name, ty))
    }

    /// `A B -> C; D -> E ]`, names optionally comma separated.
    fn fds(&mut self) -> Result<FunDepSet> {
        let mut deps = Vec::new();
        let names = |p: &mut Parser, stop: &[&str]| -> Result<Vec<String>> {
            let mut v = Vec::new();
            while !stop.iter().any(|s| p.is_sym(s)) {
                v.push(p.ident()?);
                p.eat_sym(",");
            }
            if v.is_empty() {
                return p.err("expected attribute names");
            }
            Ok(v)
        };
        if self.eat_sym("]") {
            return Ok(FunDepSet::empty());
        }
        loop {
            let lhs = names(self, &["->"])?;
            self.sym("->")?;
            let rhs = names(self, &[";", "]"])?;
            deps.push(FunDep::new(lhs, rhs));
            if self.eat_sym("]") {
                break;
            }
            self.sym(";")?;
        }
        FunDepSet::new(deps).or_else(|e| self.err(e.to_string()))
    }

    fn lens(&mut self, lenses: &BTreeMap<String, LensExpr>) -> Result<LensExpr> {
        if self.eat_kw("select") {
            self.kw("from")?;
            let inner = self.operand(lenses)?;
            self.kw("where")?;
            return Ok(inner.select(self.pred()?));
        }
        if self.eat_kw("join") {
            let left = self.operand(lenses)?;
            self.kw("with")?;
            let right = self.operand(lenses)?;
            if self.eat_kw("on") {
                // informational; the join is natural
                self.comma_list_bare()?;
            }
            let variant = if self.eat_kw("delete") {
                match self.ident()?.to_ascii_lowercase().as_str() {
                    "left" => JoinVariant::DeleteLeft,
                    "right" => JoinVariant::DeleteRight,
                    "both" => JoinVariant::DeleteBoth,
                    _ => {
                        self.pos -= 1;
                        return self.err("expected `left`, `right` or `both`");
                    }
                }
            } else {
                JoinVariant::DeleteLeft
            };
            return Ok(LensExpr::Join {
                variant,
                left: Box::new(left),
                right: Box::new(right),
            });
        }
        if self.eat_kw("drop") {
            let attr = self.ident()?;
            self.kw("determined")?;
            self.kw("by")?;
            let det = if self.eat_sym("(") {
                self.comma_list(")", Parser::ident)?
            } else {
                vec![self.ident()?]
            };
            self.kw("default")?;
            let default = self.value()?;
            self.kw("from")?;
            let inner = self.operand(lenses)?;
            return Ok(inner.drop(&attr, &det, default));
        }
        if self.eat_kw("rename") {
            let from = self.ident()?;
            self.kw("to")?;
            let to = self.ident()?;
            self.kw("in")?;
            return Ok(self.operand(lenses)?.rename(&from, &to));
        }
        if self.eat_kw("tensor") {
            let a = self.operand(lenses)?;
            self.kw("with")?;
            return Ok(a.tensor(self.operand(lenses)?));
        }
        for (kw, comb) in [("sym", LensExpr::Sym), ("assoc", LensExpr::Assoc), ("id", LensExpr::Id)] {
            if self.eat_kw(kw) {
                self.kw("from")?;
                return Ok(self.operand(lenses)?.then(comb));
            }
        }
        self.operand(lenses)
    }

    fn comma_list_bare(&mut self) -> Result<Vec<String>> {
        let mut out = vec![self.ident()?];
        while self.eat_sym(",") {
            out.push(self.ident()?);
        }
        Ok(out)
    }

    fn operand(&mut self, lenses: &BTreeMap<String, LensExpr>) -> Result<LensExpr> {
        if self.eat_sym("(") {
            let e = self.lens(lenses)?;
            self.sym(")")?;
            return Ok(e);
        }
        let name = self.ident()?;
        Ok(lenses.get(&name).cloned().unwrap_or(LensExpr::Base(name)))
    }
}

/// Parses a predicate such as `quantity > 2 and album in ('a', 'b')`.
pub fn parse_predicate(text: &str) -> Result<Predicate> {
    let mut p = Parser::new(text, 1)?;
    let pred = p.pred()?;
    p.finish()?;
    Ok(pred)
}

/// A parsed lens file.
#[derive(Clone, Debug, Default)]
pub struct Program {
    pub tables: Vec<Table>,
    pub lenses: Vec<(String, LensExpr)>,
}

impl Program {
    pub fn parse(text: &str) -> Result<Program> {
        let mut prog = Program::default();
        let mut defined: BTreeMap<String, LensExpr> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let mut p = Parser::new(line, i + 1)?;
            if p.at_end() {
                continue;
            }
            if p.eat_kw("table") {
                let t = p.table()?;
                if prog.table(&t.name).is_some() || defined.contains_key(&t.name) {
                    return Err(Error::parse(i + 1, 1, format!("`{}` declared twice", t.name)));
                }
                prog.tables.push(t);
            } else if p.eat_kw("lens") {
                let name = p.ident()?;
                if prog.table(&name).is_some() || defined.contains_key(&name) {
                    return p.err(format!("`{name}` declared twice"));
                }
                p.sym("=")?;
                let e = p.lens(&defined)?;
                p.finish()?;
                defined.insert(name.clone(), e.clone());
                prog.lenses.push((name, e));
            } else {
                return p.err(format!("expected `table` or `lens`, found {}", p.found()));
            }
        }
        Ok(prog)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// The expression of the named lens, or of the last one.
    pub fn lens_expr(&self, name: Option<&str>) -> Result<&LensExpr> {
        let found = match name {
            Some(n) => self.lenses.iter().find(|(l, _)| l == n),
            None => self.lenses.last(),
        };
        found.map(|(_, e)| e).ok_or_else(|| {
            Error::type_error("lens", name.map_or("no lens declared".into(), |n| format!("no lens `{n}`")))
        })
    }

    /// Type checks a lens against the declared tables.
    pub fn build(&self, name: Option<&str>) -> Result<TypedLens> {
        let e = self.lens_expr(name)?;
        let catalog = |t: &str| self.table(t).map(|t| t.ty.clone());
        let source: Schema = e.source_schema(&catalog)?;
        lens_build(e, &source)
    }
}
