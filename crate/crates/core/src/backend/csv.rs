//! CSV persistence. The header holds one `name:type` cell per column;
//! delta files put an unnamed sign column (`+` or `-`) first.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::delta::DeltaRelation;
use crate::error::{Error, Result};
use crate::lenses::RelationType;
use crate::relalg::{Kind, Relation, Value};

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r)
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

/// Maps header cells to positions in the relation domain.
fn header(rec: &csv::StringRecord, ty: &RelationType, skip: usize) -> Result<Vec<(usize, Kind)>> {
    let line = line_of(rec);
    let attrs = ty.attrs();
    let mut out = Vec::new();
    for (i, cell) in rec.iter().enumerate().skip(skip) {
        let col = i + 1;
        let (name, kind) = cell
            .split_once(':')
            .ok_or_else(|| Error::parse(line, col, format!("header cell `{cell}` is not name:type")))?;
        let (name, kind) = (name.trim(), kind.trim());
        let kind: Kind = kind
            .parse()
            .map_err(|_| Error::parse(line, col, format!("unknown type `{kind}`")))?;
        match ty.kind_of(name) {
            Some(k) if k == kind => {}
            Some(k) => return Err(Error::parse(line, col, format!("`{name}` is declared {k}, header says {kind}"))),
            None => return Err(Error::parse(line, col, format!("unexpected column `{name}`"))),
        }
        let pos = attrs.iter().position(|a| a == name).expect("declared");
        if out.iter().any(|(p, _)| *p == pos) {
            return Err(Error::parse(line, col, format!("column `{name}` repeated")));
        }
        out.push((pos, kind));
    }
    if out.len() != attrs.len() {
        return Err(Error::parse(
            line,
            rec.len() + 1,
            format!("header must list every column of {:?}", attrs),
        ));
    }
    Ok(out)
}

fn row(rec: &csv::StringRecord, cols: &[(usize, Kind)], skip: usize) -> Result<Vec<Value>> {
    let line = line_of(rec);
    if rec.len() != cols.len() + skip {
        return Err(Error::parse(
            line,
            rec.len().min(cols.len() + skip) + 1,
            format!("expected {} cells, found {}", cols.len() + skip, rec.len()),
        ));
    }
    let mut vals = vec![Value::Bool(false); cols.len()];
    for (j, &(pos, kind)) in cols.iter().enumerate() {
        let cell = &rec[j + skip];
        vals[pos] = Value::parse_as(kind, cell)
            .ok_or_else(|| Error::parse(line, j + skip + 1, format!("`{cell}` is not a {kind}")))?;
    }
    Ok(vals)
}

fn lift(e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::parse(p.line() as usize, 1, e.to_string()),
        None => Error::Csv(e),
    }
}

/// Reads a relation of type `ty`. An empty input is the empty relation.
pub fn read_csv<R: Read>(input: R, ty: &RelationType) -> Result<Relation> {
    let mut rdr = reader(input);
    let mut recs = rdr.records();
    let attrs = ty.attrs();
    let Some(head) = recs.next() else {
        return Ok(Relation::empty(attrs));
    };
    let cols = header(&head.map_err(lift)?, ty, 0)?;
    let mut rows = Vec::new();
    for rec in recs {
        rows.push(row(&rec.map_err(lift)?, &cols, 0)?);
    }
    Relation::from_tuples(&attrs, rows)
}

/// Reads a delta: `+` rows go to `Δ⁺`, `-` rows to `Δ⁻`.
pub fn read_delta_csv<R: Read>(input: R, ty: &RelationType) -> Result<DeltaRelation> {
    let mut rdr = reader(input);
    let mut recs = rdr.records();
    let attrs = ty.attrs();
    let Some(head) = recs.next() else {
        return Ok(DeltaRelation::empty(attrs));
    };
    let head = head.map_err(lift)?;
    if head.get(0).map(str::trim) != Some("") {
        return Err(Error::parse(line_of(&head), 1, "first header cell must be empty (the sign column)"));
    }
    let cols = header(&head, ty, 1)?;
    let (mut plus, mut minus) = (Vec::new(), Vec::new());
    for rec in recs {
        let rec = rec.map_err(lift)?;
        let vals = row(&rec, &cols, 1)?;
        match rec[0].trim() {
            "+" => plus.push(vals),
            "-" => minus.push(vals),
            s => return Err(Error::parse(line_of(&rec), 1, format!("sign must be + or -, found `{s}`"))),
        }
    }
    DeltaRelation::new(Relation::from_tuples(&attrs, plus)?, Relation::from_tuples(&attrs, minus)?)
}

fn header_cells(ty: &RelationType) -> Vec<String> {
    ty.columns().iter().map(|(c, k)| format!("{c}:{k}")).collect()
}

fn cells(ty: &RelationType, rel: &Relation, r: &[Value]) -> Result<Vec<String>> {
    ty.columns()
        .iter()
        .map(|(c, _)| {
            rel.position(c)
                .map(|i| r[i].to_plain())
                .ok_or_else(|| Error::MissingAttribute(c.clone()))
        })
        .collect()
}

/// Writes `rel` with columns in the declared order of `ty`.
pub fn write_csv<W: Write>(out: W, ty: &RelationType, rel: &Relation) -> Result<()> {
    if rel.domain() != ty.attrs().as_slice() {
        return Err(Error::domain_mismatch(rel.domain(), &ty.attrs()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header_cells(ty))?;
    for r in rel.rows() {
        w.write_record(cells(ty, rel, r)?)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes insertions first, then deletions.
pub fn write_delta_csv<W: Write>(out: W, ty: &RelationType, delta: &DeltaRelation) -> Result<()> {
    if delta.domain() != ty.attrs().as_slice() {
        return Err(Error::domain_mismatch(delta.domain(), &ty.attrs()));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec![String::new()];
    head.extend(header_cells(ty));
    w.write_record(head)?;
    for (sign, rel) in [("+", delta.plus()), ("-", delta.minus())] {
        for r in rel.rows() {
            let mut rec = vec![sign.to_string()];
            rec.extend(cells(ty, rel, r)?);
            w.write_record(rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_csv(path: &Path, ty: &RelationType) -> Result<Relation> {
    read_csv(File::open(path)?, ty)
}

pub fn save_csv(path: &Path, ty: &RelationType, rel: &Relation) -> Result<()> {
    write_csv(File::create(path)?, ty, rel)
}

pub fn load_delta_csv(path: &Path, ty: &RelationType) -> Result<DeltaRelation> {
    read_delta_csv(File::open(path)?, ty)
}

pub fn save_delta_csv(path: &Path, ty: &RelationType, delta: &DeltaRelation) -> Result<()> {
    write_delta_csv(File::create(path)?, ty, delta)
}
