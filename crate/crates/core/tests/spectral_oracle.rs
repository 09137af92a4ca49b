//! Folded-spectrum solver checked against the dense oracle.

mod common;

use common::{complete_graph, path_graph, random_connected_graph};
use qdc_core::graph::normalized_operator;
use qdc_core::spectral::{dense_eigensolve, folded_eigensolve, FoldedOptions};

fn tight() -> FoldedOptions {
    FoldedOptions {
        tol: 1e-10,
        ..FoldedOptions::default()
    }
}

#[test]
fn k3_at_top_of_spectrum() {
    let l = normalized_operator(&complete_graph(3));
    let es = folded_eigensolve(&l, 1.0, 1, &tight()).unwrap();
    assert_eq!(es.num_pairs(), 1);
    assert!((es.eigenvalues[0] - 1.0).abs() < 1e-10);
    let expected = 1.0 / 3.0f64.sqrt();
    let sign = es.eigenvectors[[0, 0]].signum();
    for i in 0..3 {
        assert!((es.eigenvectors[[i, 0] ] - sign * expected).abs() < 1e-8);
    }
}

#[test]
fn path_graph_band_matches_oracle() {
    let l = normalized_operator(&path_graph(10));
    let oracle = dense_eigensolve(&l).unwrap();
    let es = folded_eigensolve(&l, 0.0, 4, &tight()).unwrap();
    assert_eq!(es.num_pairs(), 4);
    // The four oracle eigenvalues nearest 0.
    let mut by_dist: Vec<f64> = oracle.eigenvalues.clone();
    by_dist.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    for (got, want) in es.eigenvalues.iter().zip(&by_dist) {
        assert!(
            (got - want).abs() < 1e-8,
            "eigenvalue {got} vs oracle {want}"
        );
    }
    // Sorted by distance to the target.
    for w in es.eigenvalues.windows(2) {
        assert!(w[0].abs() <= w[1].abs() + 1e-12);
    }
}

#[test]
fn full_band_equals_oracle_spectrum() {
    for seed in [3u64, 11, 42] {
        let n = 40 + (seed as usize % 3) * 17;
        let g = random_connected_graph(n, n, seed);
        let l = normalized_operator(&g);
        let oracle = dense_eigensolve(&l).unwrap();
        let es = folded_eigensolve(&l, 0.25, n, &tight()).unwrap();
        assert_eq!(es.num_pairs(), n);
        let mut got = es.eigenvalues.clone();
        got.sort_by(|a, b| a.total_cmp(b));
        for (g, o) in got.iter().zip(&oracle.eigenvalues) {
            assert!((g - o).abs() < 1e-8, "{g} vs {o}");
        }
    }
}

#[test]
fn interior_band_picks_nearest_values() {
    for seed in 0..5u64 {
        let n = 60 + (seed as usize) * 35;
        let g = random_connected_graph(n, 2 * n, 100 + seed);
        let l = normalized_operator(&g);
        let mu = -0.3 + 0.2 * seed as f64;
        let oracle = dense_eigensolve(&l).unwrap();
        let es = folded_eigensolve(&l, mu, 8, &tight()).unwrap();
        let mut oracle_dists: Vec<f64> = oracle.eigenvalues.iter().map(|e| (e - mu).abs()).collect();
        oracle_dists.sort_by(|a, b| a.total_cmp(b));
        for (i, e) in es.eigenvalues.iter().enumerate().take(8) {
            let nearest = oracle
                .eigenvalues
                .iter()
                .map(|o| (e - o).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-8, "eigenvalue {e} not in oracle spectrum");
            assert!(
                ((e - mu).abs() - oracle_dists[i]).abs() < 1e-8,
                "pair {i} at distance {} is not the {i}-th nearest ({})",
                (e - mu).abs(),
                oracle_dists[i]
            );
        }
    }
}

#[test]
fn orthonormal_and_small_residuals() {
    let g = random_connected_graph(120, 240, 9);
    let l = normalized_operator(&g);
    let es = folded_eigensolve(&l, 0.5, 12, &tight()).unwrap();
    assert!(es.gram_defect() < 1e-8, "gram defect {}", es.gram_defect());
    for (i, r) in es.meta.residual_norms.iter().enumerate() {
        assert!(*r < 1e-8, "pair {i} residual {r}");
    }
    assert!(es.meta.converged);
}

#[test]
fn deterministic_given_seed() {
    let g = random_connected_graph(80, 120, 5);
    let l = normalized_operator(&g);
    let a = folded_eigensolve(&l, 0.1, 6, &tight()).unwrap();
    let b = folded_eigensolve(&l, 0.1, 6, &tight()).unwrap();
    assert_eq!(a.eigenvalues, b.eigenvalues);
    assert_eq!(a.eigenvectors, b.eigenvectors);
    let other_seed = FoldedOptions {
        seed: 7,
        ..tight()
    };
    let c = folded_eigensolve(&l, 0.1, 6, &other_seed).unwrap();
    // Same eigenvalues from a different starting block.
    for (a, c) in a.eigenvalues.iter().zip(&c.eigenvalues) {
        assert!((a - c).abs() < 1e-8);
    }
}

#[test]
fn degenerate_cluster_is_not_cut() {
    // K3: eigenvalues {0, 0, 1}. Asking for 2 pairs near 0 hits the
    // degenerate pair exactly; asking for 1 must pull in the whole cluster.
    let l = normalized_operator(&complete_graph(3));
    let es = folded_eigensolve(&l, 0.0, 1, &tight()).unwrap();
    assert_eq!(es.num_pairs(), 2, "degenerate cluster extended");
    assert!(es.eigenvalues.iter().all(|e| e.abs() < 1e-10));
}

#[test]
fn rejects_bad_arguments() {
    let l = normalized_operator(&complete_graph(3));
    assert!(folded_eigensolve(&l, 0.0, 0, &tight()).is_err());
    assert!(folded_eigensolve(&l, 0.0, 4, &tight()).is_err());
    let bad_tol = FoldedOptions {
        tol: 0.0,
        ..FoldedOptions::default()
    };
    assert!(folded_eigensolve(&l, 0.0, 1, &bad_tol).is_err());
}

#[test]
fn folded_operator_composition_matches_dense() {
    // (L - mu I)^2 applied via composed sparse products must equal the dense
    // square exactly as composed.
    let g = random_connected_graph(30, 40, 2);
    let l = normalized_operator(&g);
    let mu = 0.37;
    let dense = l.to_dense();
    let n = l.dim();
    let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
    let mut lx = vec![0.0; n];
    l.matvec(&x, &mut lx);
    let mut llx = vec![0.0; n];
    l.matvec(&lx, &mut llx);
    let composed: Vec<f64> = (0..n)
        .map(|i| llx[i] - 2.0 * mu * lx[i] + mu * mu * x[i])
        .collect();
    // Dense route with the same composition order.
    let xd = ndarray::Array1::from_vec(x.clone());
    let lxd = dense.dot(&xd);
    let llxd = dense.dot(&lxd);
    for i in 0..n {
        let want = llxd[i] - 2.0 * mu * lxd[i] + mu * mu * xd[i];
        assert!((composed[i] - want).abs() < 1e-12);
    }
}
