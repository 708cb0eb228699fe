//! The binding functions called from Rust; no interpreter is started.

use hanfkit_py::{evaluate, find_gap, hanf_tuple, hnf, large_gaps_witness, metrics, model_check};

const GRAPH: &str = "universe 4\nrel E 2\nE 0 1\nE 0 2\nE 1 2\nE 3 0\n";

#[test]
fn metrics_of_example() {
    let (size, nqr, br, bw, fs, fnum) =
        metrics("(ex x (pred prime (# (y) (E x y))))", None).unwrap();
    assert_eq!((size, nqr, br, bw), (16, 0, 2, 1));
    assert!(fs.is_empty() && fnum.is_empty());
    let (.., fs, fnum) = metrics("(pred leq %k (# (y) (E x y)))", Some("E/2")).unwrap();
    assert_eq!((fs, fnum), (vec!["x".to_string()], vec!["k".to_string()]));
}

#[test]
fn evaluation_paths_agree() {
    let phi = "(pred prime (# (y) (E x y)))";
    for x in 0..4 {
        let assign = Some([("x".to_string(), x)].into_iter().collect());
        assert_eq!(
            evaluate(phi, GRAPH, assign.clone()).unwrap(),
            model_check(phi, GRAPH, assign).unwrap()
        );
    }
    assert!(evaluate(
        "(E x x)",
        GRAPH,
        Some([("x".to_string(), 7)].into_iter().collect())
    )
    .is_err());
}

#[test]
fn compile_and_tuple() {
    assert!(hnf("(ex x (E x x))", 2, true, None)
        .unwrap()
        .starts_with("(pred exists"));
    let t = hanf_tuple("universe 3\nrel E 2\nE 0 1\nE 1 2\nE 2 0\n", 1, 2).unwrap();
    assert_eq!(t.values().copied().collect::<Vec<_>>(), vec![3]);
}

#[test]
fn richness() {
    let (x, q, ok) = large_gaps_witness(1, 2, 2, None).unwrap();
    assert!(ok);
    assert_eq!(x[0], q as i128);
    assert!(large_gaps_witness(1, 2, 2, Some(5)).is_err());
    assert_eq!(find_gap("div2", 100, 3).unwrap(), None);
    assert!(find_gap("eq", 100, 3).is_err());
}
