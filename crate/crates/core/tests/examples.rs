use mmjoin_core::apps::{ssj_mmjoin, InvertedLists, PrefixTree, SetFamily, SsjConfig};
use mmjoin_core::joinproject::{star_heavy_matrices, two_path_heavy_matrices};
use mmjoin_core::matmul::multiply_counts;
use mmjoin_core::oracle;
use mmjoin_core::{
    partition_two_path, star_join, two_path_join, IndexedRelation, Relation, ThresholdPlan,
};

const R: [(u32, u32); 14] = [
    (1, 6), (2, 1), (2, 2), (3, 5), (3, 3), (4, 4), (4, 1),
    (4, 6), (5, 4), (5, 5), (5, 6), (6, 4), (6, 5), (6, 2),
];
const S: [(u32, u32); 14] = [
    (1, 6), (1, 2), (2, 6), (2, 3), (3, 3), (4, 4), (4, 5),
    (4, 1), (5, 4), (5, 5), (5, 6), (6, 2), (6, 5), (6, 6),
];
const T: [(u32, u32); 15] = [
    (1, 1), (1, 3), (2, 2), (6, 1), (3, 3), (3, 4), (4, 4), (4, 5),
    (4, 6), (5, 4), (5, 5), (5, 6), (6, 2), (6, 5), (6, 6),
];
const U: [(u32, u32); 13] = [
    (1, 1), (2, 2), (2, 5), (3, 3), (4, 4), (4, 5), (4, 6),
    (5, 4), (5, 5), (5, 6), (6, 4), (6, 5), (6, 6),
];

fn rel(name: &str, pairs: &[(u32, u32)]) -> IndexedRelation {
    IndexedRelation::build(Relation::from_pairs(name, pairs.iter().copied()))
}

fn sorted(mut v: Vec<(u32, u32)>) -> Vec<(u32, u32)> {
    v.sort_unstable();
    v
}

#[test]
fn example2_partition() {
    let (r, s) = (rel("R", &R), rel("S", &S));
    let (pr, ps) = partition_two_path(&r, &s, 2, 2).unwrap();
    assert_eq!(
        sorted(pr.heavy.clone()),
        vec![(4, 4), (4, 6), (5, 4), (5, 5), (5, 6), (6, 4), (6, 5)]
    );
    assert_eq!(
        sorted(ps.heavy.clone()),
        vec![(4, 4), (4, 5), (5, 4), (5, 5), (5, 6), (6, 5), (6, 6)]
    );
    assert_eq!(pr.light.len(), 7);
    assert_eq!(ps.light.len(), 7);
}

#[test]
fn example2_matrices() {
    let (r, s) = (rel("R", &R), rel("S", &S));
    let (m1, m2) = two_path_heavy_matrices(&r, &s, 2, 2).unwrap();
    assert_eq!(m1.row_keys.iter().map(|k| k[0]).collect::<Vec<_>>(), vec![4, 5, 6]);
    assert_eq!(m2.col_keys.iter().map(|k| k[0]).collect::<Vec<_>>(), vec![4, 5, 6]);
    assert_eq!(m1.to_rows(), vec![vec![1, 0, 1], vec![1, 1, 1], vec![1, 1, 0]]);
    assert_eq!(m2.to_rows(), vec![vec![1, 1, 0], vec![1, 1, 1], vec![0, 1, 1]]);
    let m = multiply_counts(&m1, &m2).unwrap();
    assert_eq!(m.to_rows(), vec![vec![1, 2, 1], vec![2, 3, 2], vec![2, 2, 1]]);
}

#[test]
fn example2_output_matches_oracle() {
    let (r, s) = (rel("R", &R), rel("S", &S));
    let expected = oracle::two_path_counts(r.base(), s.base());
    for plan in [
        ThresholdPlan::partitioned(2, 2),
        ThresholdPlan::partitioned(1, 1),
        ThresholdPlan::full_join(),
    ] {
        let out = two_path_join(&r, &s, &plan, true).unwrap();
        let got: Vec<_> = oracle::counted(&out).into_iter().map(|(t, n)| ((t[0], t[1]), n)).collect();
        assert_eq!(got, expected.clone().into_iter().collect::<Vec<_>>());
    }
    // every heavy pair is in the output
    let out = two_path_join(&r, &s, &ThresholdPlan::partitioned(2, 2), false).unwrap();
    for a in 4..=6 {
        for c in 4..=6 {
            assert!(out.contains(&[a, c]));
        }
    }
}

#[test]
fn star_example_heavy_rows() {
    let rels = [rel("R", &R), rel("S", &S), rel("T", &T), rel("U", &U)];
    let refs: Vec<_> = rels.iter().collect();
    let (v, w) = star_heavy_matrices(&refs, 2, 2, 1 << 16).unwrap();
    assert_eq!(v.rows(), 9);
    assert_eq!(v.col_keys.iter().map(|k| k[0]).collect::<Vec<_>>(), vec![4, 5, 6]);
    let row = |key: [u32; 2]| {
        let i = (0..v.rows()).find(|&i| v.row_keys.get(i) == key).unwrap();
        v.row(i).to_vec()
    };
    assert_eq!(row([4, 4]), vec![1, 0, 0]);
    assert_eq!(row([4, 5]), vec![1, 0, 1]);
    assert_eq!(row([6, 6]), vec![0, 1, 0]);
    assert_eq!(w.cols(), 3);
}

#[test]
fn star_example_matches_oracle() {
    let rels = [rel("R", &R), rel("S", &S), rel("T", &T), rel("U", &U)];
    let refs: Vec<_> = rels.iter().collect();
    let bases: Vec<_> = rels.iter().map(|r| r.base()).collect();
    for k in 2..=4 {
        let expected = oracle::star_counts(&bases[..k]);
        for (d1, d2) in [(2, 2), (1, 1), (3, 1), (10, 10)] {
            let out = star_join(&refs[..k], d1, d2, true).unwrap();
            assert_eq!(oracle::counted(&out), expected, "k={k} d=({d1},{d2})");
        }
    }
}

#[test]
fn star_two_equals_two_path() {
    let (r, s) = (rel("R", &R), rel("S", &S));
    let star = star_join(&[&r, &s], 2, 2, true).unwrap();
    let two = two_path_join(&r, &s, &ThresholdPlan::partitioned(2, 2), true).unwrap();
    assert_eq!(star, two);
}

fn example3() -> (SetFamily, InvertedLists) {
    // b1..b7 -> 1..7, C1..C6 -> 1..6
    let queries = SetFamily::from_sets(vec![
        vec![],
        vec![1, 2, 3],
        vec![1, 2, 4],
        vec![1, 5, 7],
        vec![1, 5],
    ]);
    let lists = InvertedLists::from_lists(vec![
        vec![],
        vec![1, 2, 3, 4],
        vec![1, 2, 3],
        vec![3, 5],
        vec![4, 6],
        vec![3, 4],
        vec![],
        vec![5],
    ]);
    (queries, lists)
}

#[test]
fn example3_node_states() {
    let (queries, lists) = example3();
    let tree = PrefixTree::build(&queries, &lists);
    assert_eq!(tree.path(1), &[1, 2, 3]);
    assert_eq!(tree.path(2), &[1, 2, 4]);
    let (o, u) = tree.node_state(&[1, 2], 2).unwrap();
    assert_eq!((o, u), (vec![1, 2, 3], vec![4]));
    let (o, u) = tree.node_state(&[1, 5], 2).unwrap();
    assert_eq!((o, u), (vec![3, 4], vec![1, 2]));
    assert!(tree.node_state(&[2], 2).is_none());
}

#[test]
fn example3_operation_count() {
    let (queries, lists) = example3();
    let first_two = SetFamily::from_sets(vec![vec![], queries.set(1).to_vec(), queries.set(2).to_vec()]);
    let tree = PrefixTree::build(&first_two, &lists);
    let shared = tree.evaluate(2, 8);
    let plain = tree.evaluate(2, 0);
    assert_eq!(shared.ops, 9);
    assert_eq!(plain.ops, 18);
    assert_eq!(shared.pairs, plain.pairs);
    assert_eq!(shared.pairs, vec![(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3), (2, 4)]);
}

#[test]
fn example3_similarity_self_join() {
    let (queries, _) = example3();
    let got: Vec<_> = ssj_mmjoin(&queries, 2, &SsjConfig::default())
        .unwrap()
        .into_iter()
        .map(|p| (p.a, p.b))
        .collect();
    assert_eq!(got, vec![(1, 2), (3, 4)]);
    let expected: Vec<_> = oracle::ssj(&queries, 2).into_iter().map(|p| (p.a, p.b)).collect();
    assert_eq!(got, expected);
}
