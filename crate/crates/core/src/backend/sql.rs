use std::collections::BTreeMap;
use std::fmt;

use crate::delta::DeltaRelation;
use crate::error::{Error, Result};
use crate::lenses::RelationType;
use crate::relalg::{Predicate, Relation, Row, Value};

/// One statement of the canonical dialect, terminated by a semicolon.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SqlStatement(String);

impl SqlStatement {
    pub fn text(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SqlStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for SqlStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Renders a predicate as an SQL condition.
pub fn sql_where(p: &Predicate) -> Result<String> {
    match p {
        Predicate::True => Ok("TRUE".into()),
        p if p.is_falsity() => Ok("FALSE".into()),
        Predicate::Not(p) => Ok(format!("NOT ({})", sql_where(p)?)),
        Predicate::And(a, b) => Ok(format!("({}) AND ({})", sql_where(a)?, sql_where(b)?)),
        Predicate::Or(a, b) => Ok(format!("({}) OR ({})", sql_where(a)?, sql_where(b)?)),
        Predicate::AttrEqConst(a, v) => Ok(format!("{a} = {}", v.to_sql())),
        Predicate::AttrEqAttr(a, b) => Ok(format!("{a} = {b}")),
        Predicate::AttrCmp(a, op, v) => Ok(format!("{a} {} {}", op.symbol(), v.to_sql())),
        Predicate::TupleIn(rel) => Ok(tuple_in(rel)),
        Predicate::Renamed { .. } | Predicate::JoinPred(..) => sql_where(&p.normalize()?),
        Predicate::ProjPred(..) => Err(Error::Unrenderable("ProjPred".into())),
    }
}

fn tuple_in(rel: &Relation) -> String {
    let d = rel.domain();
    if rel.is_empty() {
        return "FALSE".into();
    }
    if d.is_empty() {
        return "TRUE".into();
    }
    if d.len() == 1 {
        let vals: Vec<String> = rel.rows().map(|r| r[0].to_sql()).collect();
        return format!("{} IN ({})", d[0], vals.join(", "));
    }
    let tuple = |r: &Row| {
        let vals: Vec<String> = r.iter().map(Value::to_sql).collect();
        format!("({})", vals.join(", "))
    };
    let tuples: Vec<String> = rel.rows().map(tuple).collect();
    format!("({}) IN ({})", d.join(", "), tuples.join(", "))
}

struct Layout {
    cols: Vec<String>,
    col_pos: Vec<usize>,
    key_cols: Vec<String>,
    key_pos: Vec<usize>,
}

impl Layout {
    fn new(ty: &RelationType, rel: &Relation) -> Result<Layout> {
        let pos = |a: &String| {
            rel.position(a)
                .ok_or_else(|| Error::MissingAttribute(a.clone()))
        };
        let cols: Vec<String> = ty.columns().iter().map(|(c, _)| c.clone()).collect();
        let key_cols = ty.effective_keys();
        Ok(Layout {
            col_pos: cols.iter().map(pos).collect::<Result<_>>()?,
            key_pos: key_cols.iter().map(pos).collect::<Result<_>>()?,
            cols,
            key_cols,
        })
    }

    fn key(&self, r: &Row) -> Vec<Value> {
        self.key_pos.iter().map(|&i| r[i].clone()).collect()
    }

    fn key_cond(&self, key: &[Value]) -> String {
        let eqs: Vec<String> = self
            .key_cols
            .iter()
            .zip(key)
            .map(|(c, v)| format!("{c} = {}", v.to_sql()))
            .collect();
        eqs.join(" AND ")
    }

    fn insert(&self, table: &str, r: &Row) -> SqlStatement {
        let vals: Vec<String> = self.col_pos.iter().map(|&i| r[i].to_sql()).collect();
        SqlStatement(format!(
            "INSERT INTO {table} ({}) VALUES ({});",
            self.cols.join(", "),
            vals.join(", ")
        ))
    }
}

/// Translates a table delta into DML.
///
/// A deleted and an inserted row with the same key become one `UPDATE` of
/// the non-key columns. Statements come out as deletes, then updates, then
/// inserts, each sorted by key.
pub fn sql_dml(table: &str, ty: &RelationType, delta: &DeltaRelation) -> Result<Vec<SqlStatement>> {
    let lay = Layout::new(ty, delta.plus())?;
    let mut plus: BTreeMap<Vec<Value>, &Row> = BTreeMap::new();
    for r in delta.plus().rows() {
        if plus.insert(lay.key(r), r).is_some() {
            return Err(Error::KeyCollision(format!("{table}: {}", lay.key_cond(&lay.key(r)))));
        }
    }
    let mut minus: BTreeMap<Vec<Value>, &Row> = BTreeMap::new();
    for r in delta.minus().rows() {
        if minus.insert(lay.key(r), r).is_some() {
            return Err(Error::KeyCollision(format!("{table}: {}", lay.key_cond(&lay.key(r)))));
        }
    }
    let (mut deletes, mut updates, mut inserts) = (Vec::new(), Vec::new(), Vec::new());
    for key in minus.keys() {
        if !plus.contains_key(key) {
            deletes.push(SqlStatement(format!(
                "DELETE FROM {table} WHERE {};",
                lay.key_cond(key)
            )));
        }
    }
    for (key, r) in &plus {
        if minus.contains_key(key) {
            let sets: Vec<String> = lay
                .cols
                .iter()
                .zip(&lay.col_pos)
                .filter(|(c, _)| !lay.key_cols.contains(c))
                .map(|(c, &i)| format!("{c} = {}", r[i].to_sql()))
                .collect();
            updates.push(SqlStatement(format!(
                "UPDATE {table} SET {} WHERE {};",
                sets.join(", "),
                lay.key_cond(key)
            )));
        } else {
            inserts.push(lay.insert(table, r));
        }
    }
    deletes.extend(updates);
    deletes.extend(inserts);
    Ok(deletes)
}

/// Replaces the whole table: one unconditional `DELETE` followed by an
/// `INSERT` per row.
pub fn naive_dml(table: &str, ty: &RelationType, rel: &Relation) -> Result<Vec<SqlStatement>> {
    let lay = Layout::new(ty, rel)?;
    let mut rows: Vec<&Row> = rel.rows().collect();
    rows.sort_by_key(|r| lay.key(r));
    let mut out = vec![SqlStatement(format!("DELETE FROM {table};"))];
    out.extend(rows.into_iter().map(|r| lay.insert(table, r)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdeps::FunDepSet;
    use crate::relalg::{CmpOp, Kind};

    #[test]
    fn where_rendering() {
        let p = Predicate::or(
            Predicate::tuple_in(Relation::ints("A", [1, 2, 4])),
            Predicate::tuple_in(Relation::ints("B", [1, 3, 5])),
        );
        assert_eq!(sql_where(&p).unwrap(), "(A IN (1, 2, 4)) OR (B IN (1, 3, 5))");
        assert_eq!(sql_where(&Predicate::True).unwrap(), "TRUE");
        assert_eq!(sql_where(&Predicate::eq("album", "Galore")).unwrap(), "album = 'Galore'");
        assert_eq!(
            sql_where(&Predicate::not(Predicate::cmp("A", CmpOp::Ne, 3))).unwrap(),
            "NOT (A <> 3)"
        );
        assert_eq!(sql_where(&Predicate::eq("s", "it's")).unwrap(), "s = 'it''s'");
        let pairs = Relation::from_tuples(&["A", "B"], [[1, 2], [3, 4]].map(|r| r.map(Value::Int)))
            .unwrap();
        assert_eq!(
            sql_where(&Predicate::tuple_in(pairs)).unwrap(),
            "(A, B) IN ((1, 2), (3, 4))"
        );
        assert!(matches!(
            sql_where(&Predicate::ProjPred(Box::new(Predicate::True), vec![])),
            Err(Error::Unrenderable(_))
        ));
    }

    fn tracks_type() -> RelationType {
        RelationType::new(
            vec![
                ("track".into(), Kind::Str),
                ("date".into(), Kind::Int),
                ("rating".into(), Kind::Int),
                ("album".into(), Kind::Str),
            ],
            Predicate::True,
            FunDepSet::parse("track -> date rating").unwrap(),
            vec!["track".into(), "album".into()],
        )
        .unwrap()
    }

    fn tracks(rows: &[(&str, i64, i64, &str)]) -> Relation {
        Relation::from_tuples(
            &["track", "date", "rating", "album"],
            rows.iter().map(|&(t, d, r, a)| vec![Value::str(t), d.into(), r.into(), Value::str(a)]),
        )
        .unwrap()
    }

    #[test]
    fn paired_rows_become_updates() {
        let d = DeltaRelation::new(
            tracks(&[("Lullaby", 1989, 4, "Galore"), ("Lullaby", 1989, 4, "Show")]),
            tracks(&[("Lullaby", 1989, 3, "Galore"), ("Lullaby", 1989, 3, "Show")]),
        )
        .unwrap();
        let text: Vec<String> = sql_dml("tracks", &tracks_type(), &d)
            .unwrap()
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(
            text,
            [
                "UPDATE tracks SET date = 1989, rating = 4 WHERE track = 'Lullaby' AND album = 'Galore';",
                "UPDATE tracks SET date = 1989, rating = 4 WHERE track = 'Lullaby' AND album = 'Show';",
            ]
        );
    }

    #[test]
    fn inserts_deletes_and_collisions() {
        let e = tracks(&[]);
        let ins = DeltaRelation::new(tracks(&[("New", 2018, 1, "X")]), e.clone()).unwrap();
        assert_eq!(
            sql_dml("tracks", &tracks_type(), &ins).unwrap()[0].text(),
            "INSERT INTO tracks (track, date, rating, album) VALUES ('New', 2018, 1, 'X');"
        );
        let del = ins.negate();
        assert_eq!(
            sql_dml("tracks", &tracks_type(), &del).unwrap()[0].text(),
            "DELETE FROM tracks WHERE track = 'New' AND album = 'X';"
        );
        assert!(sql_dml("tracks", &tracks_type(), &DeltaRelation::empty_like(&e))
            .unwrap()
            .is_empty());
        let clash = DeltaRelation::new(tracks(&[("A", 1, 1, "X"), ("A", 2, 2, "X")]), e).unwrap();
        assert!(matches!(
            sql_dml("tracks", &tracks_type(), &clash),
            Err(Error::KeyCollision(_))
        ));
    }

    #[test]
    fn naive_replaces_everything() {
        let r = tracks(&[("B", 1, 1, "X"), ("A", 1, 1, "X")]);
        let out = naive_dml("tracks", &tracks_type(), &r).unwrap();
        assert_eq!(out[0].text(), "DELETE FROM tracks;");
        assert_eq!(out.len(), 3);
        assert!(out[1].text().contains("'A'"));
    }
}
