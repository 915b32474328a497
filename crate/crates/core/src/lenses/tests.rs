use super::*;
use crate::backend::{sql_dml, TableStore};
use crate::delta::DeltaRelation;
use crate::error::Error;
use crate::fdeps::FunDepSet;
use crate::music::*;
use crate::relalg::{CmpOp, Kind, Predicate, Relation, Value};

fn leaf<T>(x: T) -> Tree<T> {
    Tree::Leaf(x)
}

fn music() -> Tree<Relation> {
    Tree::pair(leaf(tracks()), leaf(albums()))
}

#[test]
fn galore_get_and_put() {
    let l = galore_lens();
    let v = lens_get(&l, &leaf(tracks())).unwrap();
    assert_eq!(
        v,
        leaf(tracks_rel(&[("Lullaby", 1989, 3, "Galore"), ("Lovesong", 1989, 5, "Galore")]))
    );
    let s2 = lens_put_naive(&l, &leaf(tracks()), &leaf(galore_view_updated())).unwrap();
    assert_eq!(
        s2,
        leaf(tracks_rel(&[
            ("Lullaby", 1989, 4, "Galore"),
            ("Lullaby", 1989, 4, "Show"),
            ("Lovesong", 1989, 5, "Galore"),
            ("Lovesong", 1989, 5, "Paris"),
            ("Trust", 1992, 4, "Wish"),
        ]))
    );
}

#[test]
fn galore_delta_put() {
    let l = galore_lens();
    let dv = DeltaRelation::new(
        tracks_rel(&[("Lullaby", 1989, 4, "Galore")]),
        tracks_rel(&[("Lullaby", 1989, 3, "Galore")]),
    )
    .unwrap();
    let ds = lens_delta_put_in(&l, &leaf(tracks()), &leaf(dv.clone())).unwrap();
    let expect = DeltaRelation::new(
        tracks_rel(&[("Lullaby", 1989, 4, "Galore"), ("Lullaby", 1989, 4, "Show")]),
        tracks_rel(&[("Lullaby", 1989, 3, "Galore"), ("Lullaby", 1989, 3, "Show")]),
    )
    .unwrap();
    assert_eq!(ds, leaf(expect.clone()));
    assert_eq!(lens_delta_put_reference(&l, &leaf(tracks()), &leaf(dv)).unwrap(), leaf(expect));
}

#[test]
fn galore_delta_put_uses_one_restricted_fetch() {
    let l = galore_lens();
    let mut store = TableStore::new();
    store.insert_table("tracks", tracks_type(), tracks()).unwrap();
    let dv = DeltaRelation::diff(&galore_view_updated(), &lens_get(&l, &leaf(tracks())).unwrap().into_leaf().unwrap())
        .unwrap();
    lens_delta_put(&l, &store, &leaf(dv)).unwrap();
    let log = store.fetch_log();
    assert_eq!(log.len(), 1);
    assert!(log[0].scans.iter().all(|(_, p, _)| *p != Predicate::True));
}

#[test]
fn pipeline_types() {
    let l = pipeline_lens();
    let ty = l.view_type().unwrap();
    assert_eq!(ty.attrs(), ["album", "quantity", "rating", "track"]);
    assert_eq!(
        ty.fds(),
        &FunDepSet::parse("track -> rating; album -> quantity").unwrap()
    );
}

#[test]
fn pipeline_get() {
    let l = pipeline_lens();
    assert_eq!(lens_get(&l, &music()).unwrap(), leaf(pipeline_view()));
}

fn pipeline_source_deltas() -> (DeltaRelation, DeltaRelation) {
    (
        DeltaRelation::new(
            tracks_rel(&[
                ("Lullaby", 1989, 4, "Galore"),
                ("Lullaby", 1989, 4, "Show"),
                ("Lovesong", 1989, 5, "Disintegration"),
            ]),
            tracks_rel(&[
                ("Lullaby", 1989, 3, "Galore"),
                ("Lullaby", 1989, 3, "Show"),
                ("Lovesong", 1989, 5, "Paris"),
                ("Trust", 1992, 4, "Wish"),
            ]),
        )
        .unwrap(),
        DeltaRelation::new(
            albums_rel(&[("Disintegration", 7)]),
            albums_rel(&[("Disintegration", 6)]),
        )
        .unwrap(),
    )
}

#[test]
fn pipeline_put_and_delta_put_agree() {
    let l = pipeline_lens();
    let (dt, da) = pipeline_source_deltas();
    let s2 = lens_put_naive(&l, &music(), &leaf(pipeline_view_updated())).unwrap();
    assert_eq!(
        s2,
        Tree::pair(
            leaf(dt.apply_to(&tracks()).unwrap()),
            leaf(da.apply_to(&albums()).unwrap())
        )
    );
    let ds = lens_delta_put_in(&l, &music(), &leaf(pipeline_view_delta())).unwrap();
    assert_eq!(ds, Tree::pair(leaf(dt), leaf(da)));
}

#[test]
fn pipeline_sql_script() {
    let (dt, da) = pipeline_source_deltas();
    let mut script: Vec<String> = sql_dml("albums", &albums_type(), &da)
        .unwrap()
        .iter()
        .map(|s| s.to_string())
        .collect();
    script.extend(sql_dml("tracks", &tracks_type(), &dt).unwrap().iter().map(|s| s.to_string()));
    assert_eq!(
        script,
        [
            "UPDATE albums SET quantity = 7 WHERE album = 'Disintegration';",
            "DELETE FROM tracks WHERE track = 'Lovesong' AND album = 'Paris';",
            "DELETE FROM tracks WHERE track = 'Trust' AND album = 'Wish';",
            "UPDATE tracks SET date = 1989, rating = 4 WHERE track = 'Lullaby' AND album = 'Galore';",
            "UPDATE tracks SET date = 1989, rating = 4 WHERE track = 'Lullaby' AND album = 'Show';",
            "INSERT INTO tracks (track, date, rating, album) VALUES ('Lovesong', 1989, 5, 'Disintegration');",
        ]
    );
}

#[test]
fn pipeline_fetches_are_restricted() {
    let l = pipeline_lens();
    let mut store = TableStore::new();
    store.insert_table("tracks", tracks_type(), tracks()).unwrap();
    store.insert_table("albums", albums_type(), albums()).unwrap();
    let ds = lens_delta_put(&l, &store, &leaf(pipeline_view_delta())).unwrap();
    let (dt, da) = pipeline_source_deltas();
    assert_eq!(ds, Tree::pair(leaf(dt), leaf(da)));
    // select (which also validates), drop, then four for the inner join
    assert_eq!(store.fetch_log().len(), 6);
    assert!(store
        .fetch_log()
        .iter()
        .flat_map(|r| r.scans.iter())
        .all(|(_, p, _)| *p != Predicate::True));
}

#[test]
fn drop_inserts_take_the_default() {
    let l = lens_build(
        &LensExpr::base("tracks").drop("date", &["track"], 2018),
        &Schema::table("tracks", tracks_type()),
    )
    .unwrap();
    let v = lens_get(&l, &leaf(tracks())).unwrap().into_leaf().unwrap();
    let new = Relation::from_tuples(
        &["album", "rating", "track"],
        [vec![Value::str("X"), Value::Int(1), Value::str("New")]],
    )
    .unwrap();
    let s2 = lens_put_naive(&l, &leaf(tracks()), &leaf(v.union(&new).unwrap())).unwrap();
    assert!(s2
        .as_leaf()
        .unwrap()
        .contains_row(&[Value::str("X"), Value::Int(2018), Value::Int(1), Value::str("New")]));
    assert_eq!(
        lens_put_drop_bohannon(&l, &leaf(tracks()), &leaf(v.union(&new).unwrap())).unwrap(),
        s2
    );
}

#[test]
fn typing_errors() {
    let src = Schema::table("tracks", tracks_type());
    // date is not determined by rating alone
    let bad_det = LensExpr::base("tracks").drop("date", &["rating"], 2018);
    assert!(matches!(lens_build(&bad_det, &src), Err(Error::TypeError { rule: "drop", .. })));
    // track is on the left of a dependency
    let lhs = LensExpr::base("tracks").drop("track", &["date"], "x");
    assert!(matches!(lens_build(&lhs, &src), Err(Error::TypeError { .. })));
    let clash = LensExpr::base("tracks").rename("track", "album");
    assert!(matches!(lens_build(&clash, &src), Err(Error::TypeError { rule: "rename", .. })));
    let kind = LensExpr::base("tracks").select(Predicate::cmp("album", CmpOp::Gt, 3));
    assert!(matches!(lens_build(&kind, &src), Err(Error::TypeError { .. })));
    let twice = Tree::pair(src.clone(), src.clone());
    let j = LensExpr::base("tracks").join(LensExpr::base("tracks"));
    assert!(matches!(lens_build(&j, &twice), Err(Error::TypeError { rule: "linearity", .. })));
    let dr = LensExpr::Join {
        variant: JoinVariant::DeleteRight,
        left: Box::new(LensExpr::base("tracks")),
        right: Box::new(LensExpr::base("albums")),
    };
    assert!(matches!(lens_build(&dr, &pipeline_schema()), Err(Error::UnsupportedVariant(_))));
    assert!(lens_build(&LensExpr::base("albums"), &src).is_err());
}

#[test]
fn id_sym_assoc_tensor() {
    let src = pipeline_schema();
    let id = lens_build(&LensExpr::Id, &src).unwrap();
    assert_eq!(id.view(), id.source());
    assert_eq!(lens_get(&id, &music()).unwrap(), music());

    let sym = lens_build(&LensExpr::Sym, &src).unwrap();
    let swapped = lens_get(&sym, &music()).unwrap();
    assert_eq!(swapped, Tree::pair(leaf(albums()), leaf(tracks())));
    let d = Tree::pair(
        leaf(DeltaRelation::new(albums_rel(&[("New", 1)]), albums_rel(&[])).unwrap()),
        leaf(DeltaRelation::empty_like(&tracks())),
    );
    let ds = lens_delta_put_in(&sym, &music(), &d).unwrap();
    assert_eq!(ds.as_pair().unwrap().1, &d.as_pair().unwrap().0.clone());

    let three = Tree::pair(
        Schema::table("a", RelationType::ints(&["A"])),
        Tree::pair(
            Schema::table("b", RelationType::ints(&["B"])),
            Schema::table("c", RelationType::ints(&["C"])),
        ),
    );
    let assoc = lens_build(&LensExpr::Assoc, &three).unwrap();
    let s = three.map(|t| Relation::ints(&t.ty.attrs()[0], [1]));
    let v = lens_get(&assoc, &s).unwrap();
    assert_eq!(lens_put_naive(&assoc, &s, &v).unwrap(), s);

    let t = LensExpr::base("tracks")
        .select(Predicate::eq("album", "Wish"))
        .tensor(LensExpr::base("albums"));
    let tl = lens_build(&t, &src).unwrap();
    let v = lens_get(&tl, &music()).unwrap();
    assert_eq!(v.leaves()[0].len(), 1);
    assert_eq!(lens_put_naive(&tl, &music(), &v).unwrap(), music());
}

#[test]
fn rename_round_trip() {
    let l = lens_build(
        &LensExpr::base("albums").rename("quantity", "stock"),
        &Schema::table("albums", albums_type()),
    )
    .unwrap();
    let ty = l.view_type().unwrap();
    assert_eq!(ty.kind_of("stock"), Some(Kind::Int));
    let v = lens_get(&l, &leaf(albums())).unwrap().into_leaf().unwrap();
    let dv = DeltaRelation::new(
        Relation::from_tuples(&["album", "stock"], [vec![Value::str("Wish"), Value::Int(9)]]).unwrap(),
        v.select(&Predicate::eq("album", "Wish")).unwrap(),
    )
    .unwrap();
    let ds = lens_delta_put_in(&l, &leaf(albums()), &leaf(dv)).unwrap();
    assert_eq!(
        ds,
        leaf(DeltaRelation::new(albums_rel(&[("Wish", 9)]), albums_rel(&[("Wish", 5)])).unwrap())
    );
}

#[test]
fn invalid_view_deltas_are_rejected() {
    let l = galore_lens();
    let s = leaf(tracks());
    // outside the selection
    let off = DeltaRelation::new(tracks_rel(&[("X", 1, 1, "Show")]), tracks_rel(&[])).unwrap();
    assert!(matches!(
        lens_delta_put_in(&l, &s, &leaf(off)),
        Err(Error::SchemaViolation { constraint: "predicate", .. })
    ));
    // breaks track -> date rating inside the view
    let fd = DeltaRelation::new(tracks_rel(&[("Lullaby", 1989, 1, "Galore")]), tracks_rel(&[])).unwrap();
    assert!(matches!(lens_delta_put_in(&l, &s, &leaf(fd)), Err(Error::SchemaViolation { .. })));
    // deletes a row that is not there
    let gone = DeltaRelation::new(tracks_rel(&[]), tracks_rel(&[("Nope", 1, 1, "Galore")])).unwrap();
    assert!(matches!(lens_delta_put_in(&l, &s, &leaf(gone)), Err(Error::NotMinimal(_))));
    let empty = DeltaRelation::empty_like(&tracks());
    assert!(lens_delta_put_in(&l, &s, &leaf(empty)).unwrap().leaves()[0].is_empty());
}
