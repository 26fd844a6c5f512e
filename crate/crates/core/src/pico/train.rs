use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{token_features, viterbi, SequenceModel, Transitions};
use super::{validate_bio, LabeledSequence, NUM_LABELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    /// Reshuffle the training order every epoch.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            seed: 0,
            shuffle: true,
        }
    }
}

/// Running weights `w` plus the timestamp-weighted sums `u` used to recover
/// the average `w - u / T` in one pass.
#[derive(Default)]
struct Averaged {
    w: HashMap<String, [f64; NUM_LABELS]>,
    u: HashMap<String, [f64; NUM_LABELS]>,
    tw: [[f64; NUM_LABELS]; NUM_LABELS + 1],
    tu: [[f64; NUM_LABELS]; NUM_LABELS + 1],
}

impl Averaged {
    fn bump_feature(&mut self, feature: &str, label: usize, delta: f64, t: f64) {
        self.w.entry(feature.to_string()).or_insert([0.0; NUM_LABELS])[label] += delta;
        self.u.entry(feature.to_string()).or_insert([0.0; NUM_LABELS])[label] += (t - 1.0) * delta;
    }

    fn bump_transition(&mut self, prev: usize, next: usize, delta: f64, t: f64) {
        self.tw[prev][next] += delta;
        self.tu[prev][next] += (t - 1.0) * delta;
    }

    fn emissions(&self, feats: &[Vec<String>]) -> Vec<[f64; NUM_LABELS]> {
        feats
            .iter()
            .map(|fs| {
                let mut s = [0.0; NUM_LABELS];
                for f in fs {
                    if let Some(w) = self.w.get(f) {
                        for (a, b) in s.iter_mut().zip(w) {
                            *a += b;
                        }
                    }
                }
                s
            })
            .collect()
    }

    fn finish(self, t: f64) -> SequenceModel {
        let mut model = SequenceModel::zeros();
        for (feature, w) in self.w {
            let u = self.u[&feature];
            let avg: [f64; NUM_LABELS] = std::array::from_fn(|i| w[i] - u[i] / t);
            if avg.iter().any(|v| *v != 0.0) {
                model.features.insert(feature, avg);
            }
        }
        let mut transitions: Transitions = [[0.0; NUM_LABELS]; NUM_LABELS + 1];
        for (p, row) in transitions.iter_mut().enumerate() {
            for (n, v) in row.iter_mut().enumerate() {
                *v = self.tw[p][n] - self.tu[p][n] / t;
            }
        }
        model.transitions = transitions;
        model
    }
}

/// Averaged structured perceptron.
///
/// Each instance is decoded with the current weights; on a mistake the gold
/// features are rewarded and the predicted ones penalised by 1. The returned
/// model holds weights averaged over every instance visit. Deterministic for a
/// fixed `config.seed`.
pub fn train(data: &[LabeledSequence], config: &TrainConfig) -> Result<SequenceModel> {
    for seq in data {
        if seq.tokens.len() != seq.labels.len() {
            return Err(Error::LengthMismatch(format!(
                "sequence `{}`: {} tokens vs {} labels",
                seq.id,
                seq.tokens.len(),
                seq.labels.len()
            )));
        }
        validate_bio(&seq.id, &seq.labels)?;
    }
    let feats: Vec<Vec<Vec<String>>> = data.iter().map(|s| token_features(&s.tokens)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut acc = Averaged::default();
    let mut t = 0.0;

    for _ in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for &i in &order {
            t += 1.0;
            let gold = &data[i].labels;
            let predicted = viterbi(&acc.emissions(&feats[i]), &acc.tw);
            if &predicted == gold {
                continue;
            }
            let mut prev_gold = NUM_LABELS;
            let mut prev_pred = NUM_LABELS;
            for (pos, (g, p)) in gold.iter().zip(&predicted).enumerate() {
                let (g, p) = (g.index(), p.index());
                if g != p {
                    for f in &feats[i][pos] {
                        acc.bump_feature(f, g, 1.0, t);
                        acc.bump_feature(f, p, -1.0, t);
                    }
                }
                if (prev_gold, g) != (prev_pred, p) {
                    acc.bump_transition(prev_gold, g, 1.0, t);
                    acc.bump_transition(prev_pred, p, -1.0, t);
                }
                prev_gold = g;
                prev_pred = p;
            }
        }
    }
    if t == 0.0 {
        return Ok(SequenceModel::zeros());
    }
    Ok(acc.finish(t))
}
