//! Shared fixtures for integration tests.

use ndarray::Array2;
use qdc_core::graph::GraphDataset;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Random connected graph: a random spanning tree plus `extra_edges`
/// uniformly sampled non-duplicate edges. Labels alternate between two
/// classes so homophily-style tests have something to chew on.
pub fn random_connected_graph(n: usize, extra_edges: usize, seed: u64) -> GraphDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n - 1 + extra_edges);
    let mut seen = std::collections::HashSet::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push((u, v));
        seen.insert((u, v));
    }
    let mut added = 0;
    while added < extra_edges {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b {
            continue;
        }
        let pair = (a.min(b), a.max(b));
        if seen.insert(pair) {
            edges.push(pair);
            added += 1;
        }
    }
    let labels: Vec<usize> = (0..n).map(|v| v % 2).collect();
    let features = Array2::from_shape_fn((n, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0);
    GraphDataset::new(n, edges, features, labels, vec![]).unwrap()
}

/// Path graph P_n.
pub fn path_graph(n: usize) -> GraphDataset {
    let edges: Vec<(usize, usize)> = (0..n - 1).map(|v| (v, v + 1)).collect();
    GraphDataset::new(n, edges, Array2::zeros((n, 1)), vec![0; n], vec![]).unwrap()
}

/// Complete graph K_n.
pub fn complete_graph(n: usize) -> GraphDataset {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            edges.push((a, b));
        }
    }
    GraphDataset::new(n, edges, Array2::zeros((n, 1)), vec![0; n], vec![]).unwrap()
}
