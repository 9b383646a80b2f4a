mod common;

use common::values;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scriptenc::descriptor::{
    descriptor_loss_value, hinge_term, kmeans, orthogonality_penalty, orthogonality_value, reconstruct,
    semantic_coherence, Cooccurrence, DescriptorConfig, DescriptorModel,
};
use scriptenc::tensor::{Graph, ParamStore, Tensor};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn reconstruction_and_penalty_match_direct_arithmetic() {
    let (k, d) = (3, 5);
    let r: Vec<Vec<f64>> = (0..k).map(|i| values(300 + i as u64, d)).collect();
    let o = [0.2, 0.5, 0.3];
    let want: Vec<f64> = (0..d).map(|c| (0..k).map(|j| o[j] * r[j][c]).sum()).collect();
    let mut frob = 0.0;
    for i in 0..k {
        for j in 0..k {
            let e = dot(&r[i], &r[j]) - if i == j { 1.0 } else { 0.0 };
            frob += e * e;
        }
    }

    let mut g = Graph::new();
    let rv = g.constant(Tensor::matrix(k, d, r.concat()).unwrap());
    let ov = g.constant(Tensor::vector(o.to_vec()));
    let w = reconstruct(&mut g, rv, ov).unwrap();
    for (a, b) in g.value(w).data().iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
    let p = orthogonality_penalty(&mut g, rv).unwrap();
    assert!((g.value(p).item() - frob.sqrt()).abs() < 1e-12);
    assert!((orthogonality_value(&r) - frob.sqrt()).abs() < 1e-12);
}

#[test]
fn three_negative_loss_matches_direct_evaluation() {
    let d = 4;
    let r: Vec<Vec<f64>> = (0..2).map(|i| values(310 + i, d)).collect();
    let w = values(320, d);
    let u = values(321, d);
    let negs: Vec<Vec<f64>> = (0..3).map(|i| values(330 + i, d)).collect();
    let hinge: f64 = negs.iter().map(|n| (1.0 - dot(&w, &u) + dot(&w, n)).max(0.0)).sum();
    let want = hinge + 10.0 * orthogonality_value(&r);
    assert!((descriptor_loss_value(&w, &u, &negs, &r, 10.0) - want).abs() < 1e-12);

    let mut g = Graph::new();
    let wv = g.constant(Tensor::vector(w));
    let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
    let h = hinge_term(&mut g, wv, &u, &refs).unwrap();
    assert!((g.value(h).item() - hinge).abs() < 1e-12);
}

#[test]
fn kmeans_recovers_planted_cluster_means() {
    let centers = [vec![5.0, 5.0, 0.0], vec![-5.0, 0.0, 5.0]];
    let mut points = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for i in 0..20 {
            let noise = values(400 + (c * 20 + i) as u64, 3);
            points.push(center.iter().zip(noise).map(|(x, e)| x + 0.5 * e).collect::<Vec<f64>>());
        }
    }
    let means: Vec<Vec<f64>> = (0..2)
        .map(|c| (0..3).map(|d| points[c * 20..(c + 1) * 20].iter().map(|p| p[d]).sum::<f64>() / 20.0).collect())
        .collect();
    for seed in 0..5 {
        let mut got = kmeans(&points, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        got.sort_by(|a, b| b[0].total_cmp(&a[0]));
        for (g, m) in got.iter().zip(&means) {
            assert!(g.iter().zip(m).all(|(a, b)| (a - b).abs() < 1e-12), "{got:?} vs {means:?}");
        }
    }
}

#[test]
fn coherence_on_five_documents_matches_hand_count() {
    let docs = Cooccurrence::new([
        vec!["fire", "smoke", "truck"],
        vec!["fire", "smoke"],
        vec!["fire", "ladder"],
        vec!["smoke", "truck", "ladder"],
        vec!["truck"],
    ]);
    let words: Vec<String> = ["fire", "smoke", "truck"].iter().map(|s| s.to_string()).collect();
    // D(fire)=3, D(smoke)=3; D(smoke,fire)=2, D(truck,fire)=1, D(truck,smoke)=2
    let want = (3.0f64 / 3.0).ln() + (2.0f64 / 3.0).ln() + (3.0f64 / 3.0).ln();
    assert!((semantic_coherence(&words, &docs).unwrap() - want).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn weights_stay_on_simplex(seed in any::<u64>(), scenes in 1usize..30, alpha in 0.0f64..=1.0, recurrent in any::<bool>()) {
        let (k, d) = (4, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r0: Vec<Vec<f64>> = (0..k).map(|i| values(seed ^ i as u64, d)).collect();
        let cfg = DescriptorConfig { k, hidden: 7, alpha, recurrent, ..DescriptorConfig::default() };
        let mut store = ParamStore::new();
        let model = DescriptorModel::new(cfg, d, &r0, &mut store, &mut rng).unwrap();
        let vs: Vec<Vec<f64>> = (0..scenes).map(|t| values(seed.wrapping_add(t as u64 * 7919), d).into_iter().map(|x| 20.0 * x).collect()).collect();
        for o in model.scene_weights(&store, &vs).unwrap() {
            prop_assert!((o.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(o.iter().all(|&x| x >= 0.0));
        }
    }
}
