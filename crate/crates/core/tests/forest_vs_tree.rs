use rashomon_al::learners::{greedy_tree, train_forest, ForestConfig};
use rashomon_al::synthetic::monk1;

#[test]
fn forest_fits_monk1_at_least_as_well_as_one_tree() {
    let data = monk1(0);
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let accuracy = |pred: &dyn Fn(&[u8]) -> usize| {
        rows.iter().filter(|&&r| pred(data.row(r)) == data.label(r)).count() as f64 / rows.len() as f64
    };
    let mut wins = 0;
    for seed in 0..20 {
        let cfg = ForestConfig { seed, ..ForestConfig::default() };
        let forest = train_forest(&data, &rows, &cfg).unwrap();
        let k = cfg.features_per_split(data.n_features());
        let tree = greedy_tree(&data, &rows, cfg.max_depth, k, seed).unwrap();
        let f = accuracy(&|x| forest.ensemble_predict(x, 2));
        let t = accuracy(&|x| tree.predict(x));
        if f >= t {
            wins += 1;
        }
    }
    assert!(wins >= 18, "forest matched the single tree in only {wins}/20 seeds");
}
