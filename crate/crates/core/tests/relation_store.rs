mod common;

use std::collections::HashMap;
use std::io::Write;

use common::*;
use datamarket::prelude::*;
use datamarket::relation::{read_csv, KeyPair};
use proptest::prelude::*;

fn write_tmp(content: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(content.as_bytes()).unwrap();
    f
}

#[test]
fn loads_five_line_file() {
    let f = write_tmp("A,B\na1,b1\na1,b1\na1,b2\na1,b3\na2,b2\n");
    let rel = load_csv(f.path(), "d").unwrap();
    assert_eq!(rel.n_attrs(), 2);
    assert_eq!(rel.n_rows(), 5);
    assert_eq!(rel, small_ab());
}

#[test]
fn header_only_file_is_empty() {
    let f = write_tmp("A,B,C\n");
    let rel = load_csv(f.path(), "d").unwrap();
    assert_eq!(rel.n_rows(), 0);
    assert_eq!(rel.n_attrs(), 3);
}

#[test]
fn mixed_arity_names_the_line() {
    let f = write_tmp("A,B\n1,2\n3\n");
    match load_csv(f.path(), "d") {
        Err(Error::Ingestion { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected ingestion error, got {other:?}"),
    }
}

#[test]
fn duplicate_header_is_schema_error() {
    let f = write_tmp("A,A\n1,2\n");
    assert!(matches!(load_csv(f.path(), "d"), Err(Error::Schema(_))));
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load_csv("/nonexistent/file.csv", "d"), Err(Error::Io(_))));
}

#[test]
fn empty_fields_are_null_and_numeric_columns_are_detected() {
    let rel = read_csv("x,y,z\n1,a,\n2.5,,3\n".as_bytes(), "d", "inline").unwrap();
    assert!(rel.is_numeric(0));
    assert!(!rel.is_numeric(1));
    assert!(rel.is_numeric(2));
    assert_eq!(rel.value(1, 0), &Value::Num(2.5));
    assert!(rel.value(1, 1).is_null());
    assert!(rel.value(0, 2).is_null());
}

#[test]
fn join_of_quality_example_has_five_rows() {
    let j = equi_join(&large_abc(), &small_cde(), &attrs("C")).unwrap();
    assert_eq!(j.n_rows(), 5);
    assert_eq!(j.schema(), &["A", "B", "C", "D", "E"]);
    let rows: Vec<String> = (0..5).map(|r| j.row(r).iter().map(|v| v.to_string()).collect::<Vec<_>>().join("/")).collect();
    assert_eq!(
        rows,
        vec![
            "a1/b2/c1/d1/e1",
            "a1/b2/c1/d1/e1",
            "a1/b2/c2/d1/e2",
            "a1/b3/c3/d1/e2",
            "a1/b3/c3/d1/e2"
        ]
    );
}

#[test]
fn self_join_on_key_preserves_rows() {
    let rel = Relation::from_strings("k", &["id", "v"], &[&["1", "x"], &["2", "y"], &["3", "x"]]).unwrap();
    let j = equi_join(&rel, &rel, &rel.attr_set()).unwrap();
    assert_eq!(j.n_rows(), 3);
}

#[test]
fn disjoint_keys_join_to_nothing() {
    let l = Relation::from_strings("l", &["k", "a"], &[&["1", "x"], &["2", "y"]]).unwrap();
    let r = Relation::from_strings("r", &["k", "b"], &[&["3", "x"], &["4", "y"]]).unwrap();
    assert_eq!(equi_join(&l, &r, &attrs("k")).unwrap().n_rows(), 0);
}

#[test]
fn join_argument_errors() {
    let l = Relation::from_strings("l", &["k", "a"], &[&["1", "x"]]).unwrap();
    let r = Relation::from_strings("r", &["k", "a"], &[&["1", "x"]]).unwrap();
    assert!(matches!(equi_join(&l, &r, &AttrSet::new()), Err(Error::Argument(_))));
    assert!(matches!(equi_join(&l, &r, &attrs("z")), Err(Error::Argument(_))));
    // `a` is shared but not listed
    assert!(matches!(equi_join(&l, &r, &attrs("k")), Err(Error::Argument(_))));
}

#[test]
fn null_never_joins_null() {
    let l = Relation::from_strings("l", &["k", "a"], &[&["", "x"], &["1", "y"]]).unwrap();
    let r = Relation::from_strings("r", &["k", "b"], &[&["", "x"], &["1", "y"]]).unwrap();
    assert_eq!(equi_join(&l, &r, &attrs("k")).unwrap().n_rows(), 1);
}

fn key(s: &str) -> Option<Vec<Value>> {
    Some(vec![Value::text(s)])
}

#[test]
fn outer_pairs_hand_example() {
    let x = Relation::from_strings("x", &["k"], &[&["a"], &["a"], &["b"]]).unwrap();
    let y = Relation::from_strings("y", &["k"], &[&["a"], &["c"]]).unwrap();
    let p = full_outer_join_pairs(&x, &y, &attrs("k")).unwrap();
    assert_eq!(
        p.pairs,
        vec![
            KeyPair { left: key("a"), right: key("a"), count: 2 },
            KeyPair { left: key("b"), right: None, count: 1 },
            KeyPair { left: None, right: key("c"), count: 1 },
        ]
    );
    assert_eq!(p.total(), 4);
}

#[test]
fn outer_pairs_perfect_match_and_disjoint() {
    let x = Relation::from_strings("x", &["k"], &[&["a"], &["b"]]).unwrap();
    let p = full_outer_join_pairs(&x, &x, &attrs("k")).unwrap();
    assert_eq!(p.pairs.len(), 2);
    assert!(p.pairs.iter().all(|kp| kp.is_matched() && kp.count == 1));
    let y = Relation::from_strings("y", &["k"], &[&["c"], &["d"]]).unwrap();
    let q = full_outer_join_pairs(&x, &y, &attrs("k")).unwrap();
    assert!(q.pairs.iter().all(|kp| !kp.is_matched()));
    assert_eq!(q.total(), 4);
}

fn exact_fd_relation(n: usize) -> Relation {
    let rows: Vec<Vec<Value>> = (0..n)
        .map(|i| vec![Value::from((i % 50) as i64), Value::text(&format!("y{}", i % 50 % 7))])
        .collect();
    Relation::from_rows("exact", &["x", "y"], rows).unwrap()
}

#[test]
fn injection_fraction_zero_is_identity() {
    let rel = exact_fd_relation(100);
    let out = inject_inconsistency(&rel, &DirtSpec::new(0.0, 7).unwrap(), &[fd("x->y")]).unwrap();
    assert_eq!(out, rel);
}

#[test]
fn injection_lowers_quality_and_is_deterministic() {
    let rel = exact_fd_relation(1000);
    let f = fd("x->y");
    assert_eq!(quality_fd(&rel, &f).unwrap(), 1.0);
    let spec = DirtSpec::new(0.3, 11).unwrap();
    let a = inject_inconsistency(&rel, &spec, &[f.clone()]).unwrap();
    let b = inject_inconsistency(&rel, &spec, &[f.clone()]).unwrap();
    assert_eq!(a, b);
    assert!(quality_fd(&a, &f).unwrap() < 1.0);
    let changed = (0..rel.n_rows()).filter(|&r| rel.row(r) != a.row(r)).count();
    assert_eq!(changed, 300);
}

#[test]
fn injection_rejects_bad_fraction() {
    assert!(DirtSpec::new(1.5, 0).is_err());
    let rel = exact_fd_relation(10);
    let spec = DirtSpec { fraction: 2.0, targets: vec![], seed: 0 };
    assert!(matches!(inject_inconsistency(&rel, &spec, &[fd("x->y")]), Err(Error::Argument(_))));
}

#[test]
fn catalog_index_inverts_schemas_and_manifest_round_trips() {
    let (d1, d2) = lattice_pair();
    let cat = Catalog::new(vec![d1, d2]).unwrap();
    assert_eq!(cat.holders("B").unwrap().len(), 2);
    assert_eq!(cat.holders("A").unwrap().iter().collect::<Vec<_>>(), vec!["d1"]);
    let dir = tempfile::tempdir().unwrap();
    let manifest = cat.write_dir(dir.path()).unwrap();
    let back = Catalog::from_manifest(&manifest).unwrap();
    assert_eq!(back.names(), cat.names());
    for r in cat.relations() {
        assert_eq!(back.get(r.name()).unwrap().as_ref(), r.as_ref());
    }
    assert!(Catalog::new(vec![small_ab(), small_ab()]).is_err());
}

fn cell() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(String::new()),
        "[a-c]{1,2}",
        (-5i32..5).prop_map(|x| x.to_string()),
        Just("x,\"y\"".to_string()),
        Just("1.5".to_string()),
    ]
}

fn table(max_rows: usize) -> impl Strategy<Value = Vec<Vec<String>>> {
    (1usize..4).prop_flat_map(move |m| prop::collection::vec(prop::collection::vec(cell(), m), 0..max_rows))
}

fn to_rel(name: &str, schema: &[&str], rows: &[Vec<String>]) -> Relation {
    let m = rows.first().map_or(schema.len(), Vec::len);
    let refs: Vec<Vec<&str>> = rows.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
    let slices: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
    Relation::from_strings(name, &schema[..m], &slices).unwrap()
}

proptest! {
    #[test]
    fn csv_round_trip(rows in table(30)) {
        let rel = to_rel("t", &["p", "q", "r"], &rows);
        let text = rel.to_csv_string().unwrap();
        let once = read_csv(text.as_bytes(), "t", "mem").unwrap();
        let twice = read_csv(once.to_csv_string().unwrap().as_bytes(), "t", "mem").unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once.n_rows(), rel.n_rows());
    }

    #[test]
    fn join_count_matches_nested_loop(
        l in prop::collection::vec((0u8..6, 0u8..3), 0..60),
        r in prop::collection::vec((0u8..6, 0u8..3), 0..60),
    ) {
        let lrel = Relation::from_rows("l", &["k", "a"], l.iter().map(|&(k, a)| vec![Value::from(k as i64), Value::from(a as i64)]).collect()).unwrap();
        let rrel = Relation::from_rows("r", &["k", "b"], r.iter().map(|&(k, b)| vec![Value::from(k as i64), Value::from(b as i64)]).collect()).unwrap();
        let nested = l.iter().map(|x| r.iter().filter(|y| y.0 == x.0).count()).sum::<usize>();
        prop_assert_eq!(equi_join(&lrel, &rrel, &attrs("k")).unwrap().n_rows(), nested);
        // outer-join pair count: matched products plus unmatched frequencies
        let mut fl: HashMap<u8, u64> = HashMap::new();
        let mut fr: HashMap<u8, u64> = HashMap::new();
        for x in &l { *fl.entry(x.0).or_default() += 1; }
        for y in &r { *fr.entry(y.0).or_default() += 1; }
        let expect: u64 = fl.iter().map(|(k, &f)| fr.get(k).map_or(f, |&g| f * g)).sum::<u64>()
            + fr.iter().filter(|(k, _)| !fl.contains_key(k)).map(|(_, &g)| g).sum::<u64>();
        prop_assert_eq!(full_outer_join_pairs(&lrel, &rrel, &attrs("k")).unwrap().total(), expect);
    }

    #[test]
    fn injection_changes_exactly_ceil_fraction(n in 8usize..200, frac in 0.0f64..=1.0, seed in 0u64..1000) {
        let rel = exact_fd_relation(n);
        let out = inject_inconsistency(&rel, &DirtSpec::new(frac, seed).unwrap(), &[fd("x->y")]).unwrap();
        let changed = (0..n).filter(|&r| rel.row(r) != out.row(r)).count();
        prop_assert_eq!(changed, (frac * n as f64 - 1e-9).ceil().max(0.0) as usize);
    }
}
