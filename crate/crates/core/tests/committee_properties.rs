use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rashomon_al::committee::Committee;
use rashomon_al::tree::SparseTree;

#[test]
fn entropy_reference_values() {
    let c = |p: &[usize]| Committee::new(p.iter().map(|&y| SparseTree::leaf(y)).collect()).unwrap();
    assert_eq!(c(&[1, 1, 1]).vote_entropy(&[], 2), 0.0);
    assert!((c(&[0, 0, 1]).vote_entropy(&[], 2) - 0.636514).abs() < 1e-6);
    let exact = -(2.0f64 / 3.0) * (2.0f64 / 3.0).ln() - (1.0f64 / 3.0) * (1.0f64 / 3.0).ln();
    assert!((c(&[0, 0, 1]).vote_entropy(&[], 2) - exact).abs() < 1e-9);
    let exact = -0.5f64 * 0.5f64.ln() - 2.0 * 0.25 * 0.25f64.ln();
    assert!((c(&[0, 0, 1, 2]).vote_entropy(&[], 4) - exact).abs() < 1e-9);
    assert!((exact - 1.039721).abs() < 1e-6);
}

#[test]
fn entropy_ignores_order_and_weight_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let n_classes = rng.gen_range(2..5);
        let size = rng.gen_range(1..15);
        let preds: Vec<usize> = (0..size).map(|_| rng.gen_range(0..n_classes)).collect();
        let weights: Vec<f64> = (0..size).map(|_| rng.gen_range(1..6) as f64).collect();
        let members: Vec<SparseTree> = preds.iter().map(|&y| SparseTree::leaf(y)).collect();
        let base = Committee::weighted(members.clone(), weights.clone()).unwrap().vote_entropy(&[], n_classes);

        let mut order: Vec<usize> = (0..size).collect();
        order.shuffle(&mut rng);
        let shuffled = Committee::weighted(
            order.iter().map(|&i| members[i].clone()).collect(),
            order.iter().map(|&i| weights[i]).collect(),
        )
        .unwrap();
        assert!((shuffled.vote_entropy(&[], n_classes) - base).abs() < 1e-12);

        let k = rng.gen_range(1..10) as f64;
        let scaled = Committee::weighted(members, weights.iter().map(|w| w * k).collect()).unwrap();
        assert!((scaled.vote_entropy(&[], n_classes) - base).abs() < 1e-12);
        assert!(base >= 0.0 && base <= (n_classes as f64).ln() + 1e-12);
    }
}
