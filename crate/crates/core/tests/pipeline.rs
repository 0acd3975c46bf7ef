use std::sync::Arc;

use dpforest::dp::query_distribution;
use dpforest::forest::fill_leaf_labels;
use dpforest::rng::{self, StreamDomain};
use dpforest::synth::{self, SYNTH_A};
use dpforest::{
    build_tree, read_dataset, train, write_dataset, AccessCounter, Dataset, Epsilon, FeatureSchema,
    FeatureSpec, FeatureValue, ForestModel, LabelCounts, Record, RecordSource, SelectionMode,
    SensitivityMode, TrainConfig,
};

fn eps(v: f64) -> Epsilon {
    Epsilon::new(v).unwrap()
}

#[test]
fn csv_train_save_load_predict() {
    let data = synth::generate(SYNTH_A, 2_000, &mut rng::from_seed(1)).unwrap();
    let mut csv = Vec::new();
    write_dataset(&data, &mut csv).unwrap();
    let reloaded = read_dataset(csv.as_slice(), data.schema_arc().clone()).unwrap();
    assert_eq!(reloaded, data);

    let out = train(
        &reloaded,
        &TrainConfig::new(eps(0.5)).with_trees(25).with_seed(3),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    out.model.save(&path).unwrap();
    let loaded = ForestModel::load(&path).unwrap();
    assert_eq!(loaded.to_json(), out.model.to_json());
    for r in data.records() {
        assert_eq!(loaded.predict(&r.values), out.model.predict(&r.values));
        assert_eq!(
            loaded.predict_scores(&r.values),
            out.model.predict_scores(&r.values)
        );
    }
}

#[test]
fn serialized_model_holds_no_counts_or_diagnostics() {
    let data = synth::generate(SYNTH_A, 1_000, &mut rng::from_seed(2)).unwrap();
    let out = train(
        &data,
        &TrainConfig::new(eps(1.0))
            .with_trees(10)
            .with_diagnostics(true),
    )
    .unwrap();
    assert!(out.diagnostics.is_some());
    let json: serde_json::Value = serde_json::from_str(&out.model.to_json()).unwrap();

    fn keys(v: &serde_json::Value, out: &mut Vec<String>) {
        match v {
            serde_json::Value::Object(m) => {
                for (k, v) in m {
                    out.push(k.clone());
                    keys(v, out);
                }
            }
            serde_json::Value::Array(a) => a.iter().for_each(|v| keys(v, out)),
            _ => {}
        }
    }
    let mut all = Vec::new();
    keys(&json, &mut all);
    for banned in [
        "count",
        "counts",
        "total",
        "gap",
        "flipped",
        "diagnostics",
        "smooth_sensitivity",
    ] {
        assert!(
            !all.iter().any(|k| k == banned),
            "model JSON has `{banned}`"
        );
    }
}

#[test]
fn prediction_reads_no_training_data() {
    let data = synth::generate(SYNTH_A, 1_000, &mut rng::from_seed(4)).unwrap();
    let counted = AccessCounter::new(&data);
    let out = train(&counted, &TrainConfig::new(eps(1.0)).with_trees(10)).unwrap();
    assert_eq!(counted.reads(), data.len());
    counted.reset();
    let probe = synth::generate(SYNTH_A, 100, &mut rng::from_seed(5)).unwrap();
    let cost = out.ledger.composed_cost();
    for r in probe.records() {
        out.model.predict(&r.values);
        out.model.predict_scores(&r.values);
    }
    assert_eq!(counted.reads(), 0);
    assert_eq!(out.ledger.composed_cost(), cost);
}

#[test]
fn refilled_leaf_labels_follow_the_mechanism() {
    let schema = Arc::new(
        FeatureSchema::new(
            vec![FeatureSpec::discrete("f", ["a", "b"])],
            "y",
            vec!["p".into(), "q".into(), "r".into()],
        )
        .unwrap(),
    );
    // leaf a: {p:3, q:1, r:0}; leaf b: {p:0, q:1, r:1}
    let rows = [(0, 0), (0, 0), (0, 0), (0, 1), (1, 1), (1, 2)];
    let records = rows
        .iter()
        .map(|&(f, label)| Record {
            values: vec![FeatureValue::Discrete(f)],
            label,
        })
        .collect();
    let data = Dataset::new(schema.clone(), records).unwrap();
    let tree = build_tree(&schema, 1, &mut rng::from_seed(0)).unwrap();
    let leaves: Vec<usize> = tree.leaves().collect();
    assert_eq!(leaves.len(), 2);

    let e = eps(0.7);
    let expected = [
        query_distribution(
            &LabelCounts::new(vec![3, 1, 0]),
            e,
            SelectionMode::Most,
            SensitivityMode::Smooth,
        )
        .unwrap(),
        query_distribution(
            &LabelCounts::new(vec![0, 1, 1]),
            e,
            SelectionMode::Most,
            SensitivityMode::Smooth,
        )
        .unwrap(),
    ];
    let draws = 100_000;
    let mut hits = [[0usize; 3]; 2];
    for i in 0..draws {
        let mut r = rng::substream(9, StreamDomain::LeafLabels, i);
        let (t, _) = fill_leaf_labels(
            tree.clone(),
            &data,
            e,
            SensitivityMode::Smooth,
            &mut r,
            false,
        )
        .unwrap();
        for (slot, &leaf) in leaves.iter().enumerate() {
            hits[slot][t.label(leaf).unwrap()] += 1;
        }
    }
    for slot in 0..2 {
        // the first leaf is the one reached by value "a"
        for l in 0..3 {
            let freq = hits[slot][l] as f64 / draws as f64;
            assert!(
                (freq - expected[slot][l]).abs() < 0.01,
                "leaf {slot} label {l}: {freq} vs {}",
                expected[slot][l]
            );
        }
    }
}
