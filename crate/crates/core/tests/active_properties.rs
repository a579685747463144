use rashomon_al::active::{run, ActiveConfig, ActiveLearner, RecordingOracle, Strategy};
use rashomon_al::committee::Committee;
use rashomon_al::dataset::BinaryDataset;
use rashomon_al::enumerator::EnumConfig;
use rashomon_al::synthetic::monk1;

fn monk_cfg(seed: u64) -> ActiveConfig {
    ActiveConfig {
        enumeration: EnumConfig::new(0.01, 0.03).with_depth_cap(3),
        seed,
        ..ActiveConfig::default()
    }
}

#[test]
fn dureal_matches_the_all_trees_committee() {
    let data = monk1(0);
    let split = data.split(0.2, 0.2, 7).unwrap();
    let mut learner = ActiveLearner::new(&data, &data, &split, Strategy::Dureal, monk_cfg(7)).unwrap();
    for _ in 0..10 {
        let set = learner.snapshot().rashomon_set().unwrap();
        let all = Committee::new(set.trees().cloned().collect()).unwrap();
        let scores = learner.scores();
        assert_eq!(scores.len(), learner.state().candidate.len());
        let mut best: Option<(usize, f64)> = None;
        for &(row, s) in &scores {
            let reference = all.vote_entropy(data.row(row), 2);
            assert!((s - reference).abs() <= 1e-12, "row {row}: {s} vs {reference}");
            if best.is_none_or(|(_, b)| reference > b) {
                best = Some((row, reference));
            }
        }
        let record = learner.step().unwrap();
        assert_eq!(record.chosen_row, best.map(|b| b.0));
    }
}

fn poisoned(data: &BinaryDataset, rows: &[usize]) -> BinaryDataset {
    let mut labels = data.labels().to_vec();
    for &r in rows {
        labels[r] = 1 - labels[r];
    }
    data.with_labels(labels).unwrap()
}

#[test]
fn selectors_never_read_candidate_labels() {
    let data = monk1(0);
    let split = data.split(0.2, 0.2, 3).unwrap();
    for strategy in Strategy::ALL {
        let oracle = RecordingOracle::new(&data);
        let clean = run(&data, &oracle, &split, strategy, 12, monk_cfg(3)).unwrap();
        let chosen: Vec<usize> = clean.iter().filter_map(|r| r.chosen_row).collect();

        // the oracle saw the labelled rows and the queries, nothing else
        let mut expected: Vec<usize> = split.train.iter().chain(&split.test).chain(&chosen).copied().collect();
        let mut seen = oracle.queried();
        expected.sort_unstable();
        seen.sort_unstable();
        assert_eq!(seen, expected, "{strategy}");

        // corrupting every candidate label in the feature table changes nothing
        let features = poisoned(&data, &split.candidate);
        let dirty = run(&features, &data, &split, strategy, 12, monk_cfg(3)).unwrap();
        // corrupting never-queried labels in the oracle changes nothing either
        let untouched: Vec<usize> = split.candidate.iter().filter(|r| !chosen.contains(r)).copied().collect();
        let oracle = poisoned(&data, &untouched);
        let relabelled = run(&data, &oracle, &split, strategy, 12, monk_cfg(3)).unwrap();
        for other in [&dirty, &relabelled] {
            let a: Vec<_> = clean.iter().map(|r| (r.chosen_row, r.selector_score, r.test_f1)).collect();
            let b: Vec<_> = other.iter().map(|r| (r.chosen_row, r.selector_score, r.test_f1)).collect();
            assert_eq!(a, b, "{strategy}");
        }
    }
}

#[test]
fn passive_choice_is_uniform() {
    let data = BinaryDataset::new(
        (0..6).map(|i| vec![u8::from(i % 2 == 0)]).collect(),
        vec![0, 1, 0, 1, 0, 1],
        vec!["x".into()],
        2,
    )
    .unwrap();
    let split = rashomon_al::dataset::SplitIndices {
        train: vec![0],
        candidate: vec![1, 2, 3, 4],
        test: vec![5],
        seed: 0,
    };
    let trials = 10_000;
    let mut counts = [0usize; 4];
    for seed in 0..trials {
        let cfg = ActiveConfig {
            enumeration: EnumConfig::new(0.01, 0.0).with_depth_cap(1),
            seed,
            ..ActiveConfig::default()
        };
        let mut l = ActiveLearner::new(&data, &data, &split, Strategy::Passive, cfg).unwrap();
        counts[l.step().unwrap().chosen_row.unwrap() - 1] += 1;
    }
    let expected = trials as f64 / 4.0;
    let sd = (trials as f64 * 0.25 * 0.75).sqrt();
    for c in counts {
        assert!((c as f64 - expected).abs() <= 3.0 * sd, "{counts:?}");
    }
}
