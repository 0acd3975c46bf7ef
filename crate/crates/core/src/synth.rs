//! Synthetic balanced binary classification data.
//!
//! Each class is one unit-variance Gaussian cluster centred on a distinct
//! vertex of the hypercube `{-1, +1}^k` (`k` informative features). The
//! informative block is then multiplied by a random `k × k` mixing matrix
//! with entries in `[-1, 1)`, shared by both classes. Random features are
//! independent `N(0, 1)` noise. This follows the broad recipe of
//! scikit-learn's `make_classification` with one cluster per class; it does
//! not reproduce that generator's exact output.
//!
//! Schema bounds are taken from the generated data (min/max widened by 5% of
//! the range on each side). That is fine for benchmarks but would leak
//! information if done on real private data.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, FeatureValue, Record};
use crate::error::{Error, Result};
use crate::schema::{FeatureSchema, FeatureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthPreset {
    pub name: &'static str,
    pub n_informative: usize,
    pub n_random: usize,
}

impl SynthPreset {
    pub const fn new(name: &'static str, n_informative: usize, n_random: usize) -> Self {
        SynthPreset {
            name,
            n_informative,
            n_random,
        }
    }

    pub fn num_features(&self) -> usize {
        self.n_informative + self.n_random
    }

    pub fn by_name(name: &str) -> Option<SynthPreset> {
        PRESETS
            .iter()
            .copied()
            .find(|p| p.name.eq_ignore_ascii_case(name))
    }
}

pub const SYNTH_A: SynthPreset = SynthPreset::new("SynthA", 5, 0);
pub const SYNTH_B: SynthPreset = SynthPreset::new("SynthB", 10, 0);
pub const SYNTH_C: SynthPreset = SynthPreset::new("SynthC", 15, 0);
pub const SYNTH_D: SynthPreset = SynthPreset::new("SynthD", 10, 5);
pub const SYNTH_E: SynthPreset = SynthPreset::new("SynthE", 5, 10);
pub const SYNTH_F: SynthPreset = SynthPreset::new("SynthF", 5, 5);
pub const SYNTH_G: SynthPreset = SynthPreset::new("SynthG", 10, 10);

pub const PRESETS: [SynthPreset; 7] = [
    SYNTH_A, SYNTH_B, SYNTH_C, SYNTH_D, SYNTH_E, SYNTH_F, SYNTH_G,
];

pub const LABEL_COLUMN: &str = "class";

fn random_vertex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    (0..k)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Generate `n` records, `n/2` per class, in shuffled order.
pub fn generate<R: Rng + ?Sized>(preset: SynthPreset, n: usize, rng: &mut R) -> Result<Dataset> {
    if preset.n_informative == 0 {
        return Err(Error::param("need at least one informative feature"));
    }
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::param(format!(
            "synthetic data needs an even number of records >= 2, got {n}"
        )));
    }
    let k = preset.n_informative;
    let m = preset.num_features();

    let first = random_vertex(k, rng);
    let second = loop {
        let v = random_vertex(k, rng);
        if v != first {
            break v;
        }
    };
    let centers = [first, second];
    let mixing: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();

    let mut rows: Vec<(Vec<f64>, usize)> = Vec::with_capacity(n);
    let mut z = vec![0.0; k];
    for i in 0..n {
        let class = usize::from(i >= n / 2);
        for (zj, c) in z.iter_mut().zip(&centers[class]) {
            *zj = c + rng.sample::<f64, _>(StandardNormal);
        }
        let mut x = vec![0.0; m];
        for (j, xj) in x.iter_mut().enumerate().take(k) {
            *xj = z.iter().zip(&mixing).map(|(zi, row)| zi * row[j]).sum();
        }
        for xj in x.iter_mut().skip(k) {
            *xj = rng.sample(StandardNormal);
        }
        rows.push((x, class));
    }
    rows.shuffle(rng);

    let features = (0..m)
        .map(|j| {
            let (lo, hi) = rows
                .iter()
                .map(|(x, _)| x[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
            FeatureSpec::continuous(format!("x{j}"), lo - pad, hi + pad)
        })
        .collect();
    let schema = Arc::new(FeatureSchema::new(
        features,
        LABEL_COLUMN,
        vec!["0".into(), "1".into()],
    )?);
    let records = rows
        .into_iter()
        .map(|(x, label)| Record {
            values: x.into_iter().map(FeatureValue::Continuous).collect(),
            label,
        })
        .collect();
    Dataset::new(schema, records)
}
