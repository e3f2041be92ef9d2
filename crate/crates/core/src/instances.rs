//! Seeded random instance generators used by tests, benches and the CLI battery.

use rand::Rng;

use crate::graph::Graph;

/// Erdos-Renyi graph `G(n, prob)` with weights uniform in `[0.5, 2]`,
/// resampled until connected.
pub fn random_connected_graph<R: Rng + ?Sized>(rng: &mut R, n: usize, prob: f64) -> Graph {
    assert!(n >= 1);
    loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen::<f64>() < prob {
                    edges.push((i, j, rng.gen_range(0.5..=2.0)));
                }
            }
        }
        if let Ok(g) = Graph::new(n, edges) {
            return g;
        }
    }
}

/// Ring on `n` vertices plus `chords` random extra edges; weights in `[0.5, 2]`.
/// Average degree stays bounded, so arc count grows linearly in `n`.
pub fn random_sparse_graph<R: Rng + ?Sized>(rng: &mut R, n: usize, chords: usize) -> Graph {
    assert!(n >= 3);
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        seen.insert((i.min(j), i.max(j)));
        edges.push((i, j, rng.gen_range(0.5..=2.0)));
    }
    let max_chords = n * (n - 1) / 2 - n;
    while edges.len() < n + chords.min(max_chords) {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i != j && seen.insert((i.min(j), i.max(j))) {
            edges.push((i, j, rng.gen_range(0.5..=2.0)));
        }
    }
    Graph::new(n, edges).expect("ring is connected")
}

/// Probability vector with entries drawn uniformly in `[0.1, 1]` then normalized.
pub fn random_marginal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..=1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// `m1 x m2` cost matrix with entries uniform in `[0, 1]`.
pub fn random_cost<R: Rng + ?Sized>(rng: &mut R, m1: usize, m2: usize) -> Vec<Vec<f64>> {
    (0..m1)
        .map(|_| (0..m2).map(|_| rng.gen::<f64>()).collect())
        .collect()
}
