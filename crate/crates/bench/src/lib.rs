//! Synthetic fixtures shared by the benchmarks.

use dprecourse_core::{Dataset, FeatureSchema, FeatureSpec, LogisticModel, Outcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn schema(width: usize) -> FeatureSchema {
    let features = (0..width)
        .map(|i| FeatureSpec::continuous(&format!("x{i}"), 0.0, 1.0))
        .collect();
    FeatureSchema::new(features, "y", "1").expect("valid schema")
}

/// Uniform records in the unit cube labeled by the sign of `sum(x) - width/2`.
pub fn dataset(n: usize, width: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..width).map(|_| rng.random::<f64>()).collect())
        .collect();
    let labels = rows
        .iter()
        .map(|r| {
            if r.iter().sum::<f64>() > width as f64 / 2.0 {
                Outcome::Favorable
            } else {
                Outcome::Unfavorable
            }
        })
        .collect();
    Dataset::new(schema(width), rows, labels).expect("valid dataset")
}

/// The model matching [`dataset`]'s labeling rule.
pub fn model(width: usize) -> LogisticModel {
    LogisticModel {
        weights: vec![4.0; width],
        bias: -2.0 * width as f64,
        favorable_label: "1".into(),
        schema_fingerprint: schema(width).fingerprint(),
    }
}
