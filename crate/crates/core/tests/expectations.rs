//! Properties that only hold on average, checked as means over seeded runs
//! on one fixed dataset.

use dpforest::eval::{collect_diagnostics, DiagnosticsReport};
use dpforest::rng;
use dpforest::synth::{self, SYNTH_F};
use dpforest::{train, Dataset, Epsilon, SensitivityMode, TrainConfig};

const RUNS: u64 = 30;

fn fixture() -> Dataset {
    synth::generate(SYNTH_F, 6_000, &mut rng::from_seed(21)).unwrap()
}

fn diagnostics(data: &Dataset, config: TrainConfig) -> DiagnosticsReport {
    let out = train(data, &config.with_diagnostics(true)).unwrap();
    collect_diagnostics([out.diagnostics.as_ref()]).unwrap()
}

#[test]
fn global_sensitivity_flips_more_labels() {
    let data = fixture();
    let (mut smooth, mut global) = (0.0, 0.0);
    for seed in 0..RUNS {
        // same seed, same trees and partitions: only the sensitivity differs
        let base = TrainConfig::new(Epsilon::new(1.0).unwrap())
            .with_trees(10)
            .with_seed(seed);
        smooth += diagnostics(&data, base.clone()).flip_fraction;
        global += diagnostics(&data, base.with_sensitivity(SensitivityMode::Global)).flip_fraction;
    }
    assert!(
        global >= smooth,
        "global {global} < smooth {smooth} (sums over {RUNS} runs)"
    );
}

#[test]
fn empty_leaves_grow_with_forest_size() {
    let data = fixture();
    let mut means = Vec::new();
    for tau in [1, 5, 20, 60] {
        let total: f64 = (0..RUNS)
            .map(|seed| {
                let config = TrainConfig::new(Epsilon::new(1.0).unwrap())
                    .with_trees(tau)
                    .with_seed(seed);
                diagnostics(&data, config).empty_leaf_fraction.mean
            })
            .sum();
        means.push(total / RUNS as f64);
    }
    assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
}
