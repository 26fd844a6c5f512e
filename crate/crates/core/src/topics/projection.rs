use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::TopicModel;

/// Jensen-Shannon divergence in nats; bounded by ln 2.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let kl = |a: &[f64], m: &[f64]| -> f64 {
        a.iter()
            .zip(m)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| x * (x / y).ln())
            .sum()
    };
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    (0.5 * kl(p, &m) + 0.5 * kl(q, &m)).max(0.0)
}

/// Classical multidimensional scaling of a symmetric distance matrix.
///
/// Double-centres the squared distances and keeps the two largest
/// eigenpairs; an eigenvalue that is negative or zero up to rounding gives a
/// zero coordinate. Each eigenvector's sign is fixed so its largest-magnitude
/// component is positive.
pub fn classical_mds(distances: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = distances.len();
    if n == 0 {
        return Vec::new();
    }
    let sq = DMatrix::from_fn(n, n, |i, j| distances[i][j] * distances[i][j]);
    let row_mean: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_mean[i] - row_mean[j] + grand));
    let eig = SymmetricEigen::new(b);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    // Rounding noise around a zero eigenvalue would otherwise survive the sqrt.
    let tolerance = eig.eigenvalues.amax() * 1e-12;
    let mut coords = vec![[0.0; 2]; n];
    for (dim, &e) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[e];
        if lambda <= tolerance {
            continue;
        }
        let vector = eig.eigenvectors.column(e);
        let pivot = (0..n)
            .max_by(|&a, &b| vector[a].abs().total_cmp(&vector[b].abs()).then(b.cmp(&a)))
            .unwrap();
        let sign = if vector[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (i, c) in coords.iter_mut().enumerate() {
            c[dim] = sign * vector[i] * lambda.sqrt();
        }
    }
    coords
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapTopic {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    /// Share of all training tokens assigned to the topic.
    pub weight: f64,
    pub top_terms: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMap2D {
    pub topics: Vec<MapTopic>,
}

impl TopicMap2D {
    /// Keeps only the listed topics, in the given order.
    pub fn restrict(&self, ids: &[usize]) -> TopicMap2D {
        TopicMap2D {
            topics: ids
                .iter()
                .filter_map(|id| self.topics.iter().find(|t| t.id == *id).cloned())
                .collect(),
        }
    }
}

/// Lays topics out by classical scaling of their pairwise JS divergences.
pub fn project_2d(model: &TopicModel, top_n: usize) -> TopicMap2D {
    let k = model.k;
    let distances: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| js_divergence(&model.topic_term[a], &model.topic_term[b]))
                .collect()
        })
        .collect();
    let coords = classical_mds(&distances);
    let total: usize = model.topic_tokens.iter().sum();
    TopicMap2D {
        topics: (0..k)
            .map(|id| MapTopic {
                id,
                x: coords[id][0],
                y: coords[id][1],
                weight: if total == 0 {
                    0.0
                } else {
                    model.topic_tokens[id] as f64 / total as f64
                },
                top_terms: model
                    .top_terms(id, top_n)
                    .into_iter()
                    .map(|(t, p)| (t.to_string(), p))
                    .collect(),
            })
            .collect(),
    }
}
