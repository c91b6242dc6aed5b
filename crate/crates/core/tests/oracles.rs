//! The test-side oracles checked against known values.

mod common;

use std::collections::BTreeSet;

use common::*;
use meettree::qftype::meet_witness;
use meettree::tree::MeetTree;

fn fig1() -> MeetTree {
    MeetTree::from_edges(&[
        ("r", None),
        ("g", Some("r")),
        ("p", Some("g")),
        ("a", Some("p")),
        ("b", Some("p")),
        ("c", Some("g")),
    ])
    .unwrap()
}

#[test]
fn tree_counts_match_rooted_tree_numbers() {
    let counts: Vec<usize> = (1..=5).map(|n| all_trees(n).iter().filter(|t| t.len() == n).count()).collect();
    assert_eq!(counts, [1, 1, 2, 4, 9]);
}

#[test]
fn extensions_of_a_point() {
    // the point alone, or one new node above or below it
    let one = all_extensions(&MeetTree::singleton("m0"), 1);
    assert_eq!(one.len(), 3);
}

#[test]
fn naive_meet_on_fig1() {
    let t = fig1();
    let anc = ancestor_table(&t);
    let ix = idx_map(&t);
    assert_eq!(t.name(naive_meet(&t, &anc, ix["a"], ix["c"])), "g");
    assert_eq!(t.name(naive_meet(&t, &anc, ix["a"], ix["b"])), "p");
    let set: BTreeSet<usize> = [ix["a"], ix["b"], ix["c"]].into();
    let cl: BTreeSet<&str> = naive_closure(&t, &anc, &set).into_iter().map(|i| t.name(i)).collect();
    assert_eq!(cl, ["a", "b", "c", "g", "p"].into());
}

#[test]
fn witness_checker_rejects_a_broken_witness() {
    let t = fig1();
    let m = t.indices(&["r", "g", "c"]).unwrap();
    let b = t.index_list(&["a", "b"]).unwrap();
    let w = meet_witness(&t, &m, &b).unwrap();
    witness_postconditions(&t, &m, &b, &w).unwrap();
    let mut no_d = w.clone();
    no_d.d.retain(|x| x != "p");
    assert!(witness_postconditions(&t, &m, &b, &no_d).is_err());
    let mut wrong = w.clone();
    wrong.a_map.insert("p".into(), "g".into());
    assert!(witness_postconditions(&t, &m, &b, &wrong).is_err());
}

#[test]
fn canonical_code_identifies_mirror_decorations() {
    let t = MeetTree::from_edges(&[("m0", None), ("x", Some("m0")), ("y", Some("m0")), ("z", Some("m0"))]).unwrap();
    let cps = cone_pairs(&t);
    let named = |x: usize| (x == 0).then(|| "m0".to_string());
    let codes: BTreeSet<String> = cps.iter().map(|&c| decorated_code(&decorate(&t, &[c]), &named)).collect();
    assert_eq!(codes.len(), 1);
    assert_ne!(decorated_code(&decorate(&t, &[]), &named), decorated_code(&decorate(&t, &cps[..1]), &named));
}

#[test]
fn dot_reader_accepts_and_rejects() {
    assert!(dot::parse("digraph g { a -> b; \"x y\" [shape=triangle]; }").is_ok());
    assert!(dot::parse("digraph { a -- b }").is_err());
    assert!(dot::parse("digraph { a -> }").is_err());
    assert!(dot::parse("digraph { a -> b ").is_err());
}
