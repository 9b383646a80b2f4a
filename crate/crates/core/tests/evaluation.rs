mod common;

use common::oracle;
use proptest::prelude::*;
use scriptenc::classifier::LabelMatrix;
use scriptenc::evaluation::{
    cardinality_from_permutations, cutoff_sweep, merge_equivalents, micro_f1, pair_permutations,
    parse_tag_embeddings, perplexity_from_counts, similarity_counts, similarity_f1, tag_perplexity,
    TagEmbeddingSpace,
};
use scriptenc::Error;

const TOY: &str = include_str!("fixtures/toy_tag_embeddings.tsv");
const CUTOFFS: [f64; 7] = [100.0, 95.0, 90.0, 85.0, 80.0, 75.0, 70.0];

fn matrix(rows: &[Vec<u8>]) -> LabelMatrix {
    LabelMatrix::from_rows(rows).unwrap()
}

#[test]
fn crime_for_heist_depends_on_cutoff() {
    let spaces = parse_tag_embeddings(TOY, "toy").unwrap();
    let genre = &spaces["genre"];
    let vs: Vec<Vec<f64>> = TOY
        .lines()
        .filter(|l| l.starts_with("genre"))
        .map(|l| l.split('\t').nth(2).unwrap().split(' ').map(|x| x.parse().unwrap()).collect())
        .collect();
    let (c, h) = (genre.index("crime").unwrap(), genre.index("heist").unwrap());
    let pct = oracle::percentile(&vs, c, h);
    assert_eq!(genre.similarity_percentile("crime", "heist").unwrap(), pct);
    assert_eq!(pct, 90.0);

    let mut pred = vec![vec![0u8; genre.len()]];
    pred[0][c] = 1;
    let mut gold = vec![vec![0u8; genre.len()]];
    gold[0][h] = 1;
    let at = similarity_counts(&matrix(&pred), &matrix(&gold), genre, pct).unwrap();
    assert_eq!((at.tp, at.fp, at.fn_), (1, 0, 0));
    let above = similarity_counts(&matrix(&pred), &matrix(&gold), genre, pct + 0.5).unwrap();
    assert_eq!((above.tp, above.fp, above.fn_), (0, 1, 1));
}

#[test]
fn unknown_tag_is_an_error() {
    let spaces = parse_tag_embeddings(TOY, "toy").unwrap();
    assert!(matches!(spaces["mood"].similarity_percentile("dark", "noir"), Err(Error::UnknownTag(_))));
}

#[test]
fn chained_similarity_merges_transitively() {
    // a~b and b~c are the two most similar pairs; a~c is not
    let s = TagEmbeddingSpace::new(
        "t",
        vec!["a".into(), "b".into(), "c".into(), "d".into()],
        vec![vec![1.0, 0.0], vec![0.8, 0.6], vec![0.28, 0.96], vec![-1.0, -0.1]],
    )
    .unwrap();
    let (ab, bc, ac) = (s.percentile(0, 1), s.percentile(1, 2), s.percentile(0, 2));
    let cutoff = ab.min(bc);
    assert!(ac < cutoff);
    let classes = merge_equivalents(&s, cutoff);
    assert_eq!(classes.classes, vec![vec![0, 1, 2], vec![3]]);
    assert_eq!(classes.aggregate(&[1.0, 2.0, 3.0, 4.0]), vec![6.0, 4.0]);
}

#[test]
fn appendix_formulas() {
    assert_eq!(pair_permutations(5).unwrap(), 20);
    for n in 2u64..=100 {
        let p = pair_permutations(n).unwrap();
        assert_eq!(n * n - n - p, 0);
        assert_eq!(cardinality_from_permutations(p as f64), n as f64);
    }
    assert!(matches!(pair_permutations(1), Err(Error::DomainError(_))));
    assert!((tag_perplexity(&[0.125; 8]).unwrap() - 8.0).abs() < 1e-12);
    assert!(matches!(tag_perplexity(&[0.7, 0.7]), Err(Error::InvalidDistribution(_))));
}

#[test]
fn sweep_first_row_is_exact_f1() {
    let spaces = parse_tag_embeddings(TOY, "toy").unwrap();
    let genre = &spaces["genre"];
    let pred = vec![vec![1, 0, 0, 1, 0], vec![0, 1, 1, 0, 0], vec![0, 0, 0, 0, 1]];
    let gold = vec![vec![0, 1, 0, 1, 0], vec![0, 1, 0, 0, 1], vec![0, 0, 1, 0, 0]];
    let rows = cutoff_sweep(&matrix(&pred), &matrix(&gold), genre, &[5.0, 3.0, 2.0, 1.0, 1.0], &[100.0, 90.0, 80.0, 70.0]).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].f1, oracle::exact_f1(&pred, &gold));
    assert_eq!(rows[0].classes, 5);
    assert_eq!(rows[0].perplexity_reduction, 0.0);
    for w in rows.windows(2) {
        assert!(w[1].f1 >= w[0].f1);
        assert!(w[1].perplexity <= w[0].perplexity + 1e-12);
    }
}

fn fixture() -> impl Strategy<Value = (Vec<Vec<u8>>, Vec<Vec<u8>>, Vec<Vec<f64>>)> {
    (2usize..9, 1usize..10).prop_flat_map(|(l, n)| {
        (
            prop::collection::vec(prop::collection::vec(0u8..=1, l), n),
            prop::collection::vec(prop::collection::vec(0u8..=1, l), n),
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), l)
                .prop_filter("nonzero vectors", |vs| vs.iter().all(|v| v.iter().any(|x| x.abs() > 1e-3))),
        )
    })
}

fn space(vs: &[Vec<f64>]) -> TagEmbeddingSpace {
    let tags = (0..vs.len()).map(|i| format!("t{i}")).collect();
    TagEmbeddingSpace::new("attr", tags, vs.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cutoff_100_equals_exact_micro_f1((pred, gold, vs) in fixture()) {
        let s = space(&vs);
        let (p, g) = (matrix(&pred), matrix(&gold));
        let oracle = oracle::exact_f1(&pred, &gold);
        prop_assert_eq!(similarity_f1(&p, &g, &s, 100.0).unwrap(), oracle);
        prop_assert_eq!(micro_f1(&p, &g).unwrap(), oracle);
    }

    #[test]
    fn f1_nondecreasing_as_cutoff_drops((pred, gold, vs) in fixture()) {
        let s = space(&vs);
        let (p, g) = (matrix(&pred), matrix(&gold));
        let f: Vec<f64> = CUTOFFS.iter().map(|&c| similarity_f1(&p, &g, &s, c).unwrap()).collect();
        for w in f.windows(2) {
            prop_assert!(w[1] >= w[0], "{:?}", f);
        }
    }

    #[test]
    fn percentiles_match_oracle(vs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 2..8)) {
        prop_assume!(vs.iter().all(|v| v.iter().any(|x| x.abs() > 1e-3)));
        let s = space(&vs);
        for i in 0..vs.len() {
            for j in 0..vs.len() {
                prop_assert_eq!(s.percentile(i, j), oracle::percentile(&vs, i, j));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn merging_never_increases_perplexity(
        (counts, vs) in (2usize..12).prop_flat_map(|l| (
            prop::collection::vec(0.0f64..50.0, l),
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), l),
        )),
        cutoff in 0.0f64..=100.0,
    ) {
        prop_assume!(counts.iter().sum::<f64>() > 0.0);
        prop_assume!(vs.iter().all(|v| v.iter().any(|x| x.abs() > 1e-3)));
        let s = space(&vs);
        let before = perplexity_from_counts(&counts).unwrap();
        let classes = merge_equivalents(&s, cutoff);
        let after = perplexity_from_counts(&classes.aggregate(&counts)).unwrap();
        prop_assert!(after <= before * (1.0 + 1e-12), "{after} > {before}");
        // classes partition the tags
        let mut seen: Vec<usize> = classes.classes.concat();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..vs.len()).collect::<Vec<_>>());
    }
}
