//! The running music example: an `albums` table, a `tracks` table, and
//! the lenses and updates used throughout the docs and tests.

use crate::delta::DeltaRelation;
use crate::fdeps::FunDepSet;
use crate::lenses::{lens_build, LensExpr, RelationType, Schema, TypedLens};
use crate::relalg::{CmpOp, Kind, Predicate, Relation, Value};

/// The lens file for the composed pipeline.
pub const PIPELINE_DSL: &str = "\
table tracks (track:str, date:int, rating:int, album:str) keys [track, album] fds [track -> date rating]
table albums (album:str, quantity:int) keys [album] fds [album -> quantity]
lens joined = join tracks with albums
lens dropped = drop date determined by (track) default 2018 from joined
lens popular = select from dropped where quantity > 2
";

/// The lens file for the single select lens.
pub const GALORE_DSL: &str = "\
table tracks (track:str, date:int, rating:int, album:str) keys [track, album] fds [track -> date rating]
lens galore = select from tracks where album = 'Galore'
";

pub fn tracks_type() -> RelationType {
    RelationType::new(
        vec![
            ("track".into(), Kind::Str),
            ("date".into(), Kind::Int),
            ("rating".into(), Kind::Int),
            ("album".into(), Kind::Str),
        ],
        Predicate::True,
        FunDepSet::parse("track -> date rating").expect("valid"),
        vec!["track".into(), "album".into()],
    )
    .expect("valid")
}

pub fn albums_type() -> RelationType {
    RelationType::new(
        vec![("album".into(), Kind::Str), ("quantity".into(), Kind::Int)],
        Predicate::True,
        FunDepSet::parse("album -> quantity").expect("valid"),
        vec!["album".into()],
    )
    .expect("valid")
}

/// Rows `(track, date, rating, album)`.
pub fn tracks_rel(rows: &[(&str, i64, i64, &str)]) -> Relation {
    Relation::from_tuples(
        &["track", "date", "rating", "album"],
        rows.iter()
            .map(|&(t, d, r, a)| vec![Value::str(t), Value::Int(d), Value::Int(r), Value::str(a)]),
    )
    .expect("well-formed")
}

pub fn albums_rel(rows: &[(&str, i64)]) -> Relation {
    Relation::from_tuples(
        &["album", "quantity"],
        rows.iter().map(|&(a, q)| vec![Value::str(a), Value::Int(q)]),
    )
    .expect("well-formed")
}

/// Rows `(track, rating, album, quantity)` of the pipeline view.
pub fn popular_rel(rows: &[(&str, i64, &str, i64)]) -> Relation {
    Relation::from_tuples(
        &["track", "rating", "album", "quantity"],
        rows.iter()
            .map(|&(t, r, a, q)| vec![Value::str(t), Value::Int(r), Value::str(a), Value::Int(q)]),
    )
    .expect("well-formed")
}

pub fn tracks() -> Relation {
    tracks_rel(&[
        ("Lullaby", 1989, 3, "Galore"),
        ("Lullaby", 1989, 3, "Show"),
        ("Lovesong", 1989, 5, "Galore"),
        ("Lovesong", 1989, 5, "Paris"),
        ("Trust", 1992, 4, "Wish"),
    ])
}

pub fn albums() -> Relation {
    albums_rel(&[
        ("Disintegration", 6),
        ("Show", 3),
        ("Galore", 1),
        ("Paris", 4),
        ("Wish", 5),
    ])
}

/// `select from tracks where album = 'Galore'`.
pub fn galore_lens() -> TypedLens {
    let expr = LensExpr::base("tracks").select(Predicate::eq("album", "Galore"));
    lens_build(&expr, &Schema::table("tracks", tracks_type())).expect("well-typed")
}

/// The Galore view after Lullaby's rating changes from 3 to 4.
pub fn galore_view_updated() -> Relation {
    tracks_rel(&[("Lullaby", 1989, 4, "Galore"), ("Lovesong", 1989, 5, "Galore")])
}

pub fn pipeline_schema() -> Schema {
    crate::lenses::Tree::pair(
        Schema::table("tracks", tracks_type()),
        Schema::table("albums", albums_type()),
    )
}

/// Join tracks with albums, drop `date` (determined by `track`, default
/// 2018), keep rows with `quantity > 2`.
pub fn pipeline_expr() -> LensExpr {
    LensExpr::base("tracks")
        .join(LensExpr::base("albums"))
        .drop("date", &["track"], 2018)
        .select(Predicate::cmp("quantity", CmpOp::Gt, 2))
}

pub fn pipeline_lens() -> TypedLens {
    lens_build(&pipeline_expr(), &pipeline_schema()).expect("well-typed")
}

pub fn pipeline_view() -> Relation {
    popular_rel(&[
        ("Lullaby", 3, "Show", 3),
        ("Lovesong", 5, "Paris", 4),
        ("Trust", 4, "Wish", 5),
    ])
}

/// Lullaby is rerated, Lovesong moves from Paris to Disintegration (whose
/// quantity becomes 7) and Trust is removed.
pub fn pipeline_view_updated() -> Relation {
    popular_rel(&[
        ("Lullaby", 4, "Show", 3),
        ("Lovesong", 5, "Disintegration", 7),
    ])
}

pub fn pipeline_view_delta() -> DeltaRelation {
    DeltaRelation::diff(&pipeline_view_updated(), &pipeline_view()).expect("same domain")
}
