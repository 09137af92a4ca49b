//! Eigensolvers for the normalized operator: a dense full-spectrum oracle for
//! small graphs and a folded-spectrum LOBPCG solver for a band of eigenpairs
//! nearest a target value.

mod cache;
mod lobpcg;

pub use cache::{load_eigen_cache, store_eigen_cache, EigenCacheKey};

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::sparse::SparseMatrix;
use crate::{Error, Result};

/// Largest dimension the dense solver accepts by default.
pub const DEFAULT_DENSE_LIMIT: usize = 2000;

/// Shift applied to the target on the single convergence retry.
pub const RETRY_SHIFT: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverMeta {
    pub iterations: usize,
    /// Residual norms ||L phi - E phi|| for each reported pair.
    pub residual_norms: Vec<f64>,
    pub converged: bool,
    pub retry_applied: bool,
    pub from_cache: bool,
}

/// A band of eigenpairs of a symmetric operator. Eigenvectors are the columns
/// of an N x k matrix. The folded solver orders pairs by |E - target|
/// ascending; the dense oracle orders ascending by value with `target` unset.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
    pub target: Option<f64>,
    pub meta: SolverMeta,
}

impl EigenSystem {
    pub fn num_pairs(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// Max |Gram(Phi) - I| entry; orthonormality diagnostic.
    pub fn gram_defect(&self) -> f64 {
        let phi = &self.eigenvectors;
        let gram = phi.t().dot(phi);
        let k = self.num_pairs();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[[i, j]] - target).abs());
            }
        }
        worst
    }
}

/// Full spectrum of a symmetric sparse matrix via dense decomposition;
/// the ground-truth oracle for every iterative path.
pub fn dense_eigensolve(l: &SparseMatrix) -> Result<EigenSystem> {
    dense_eigensolve_with_limit(l, DEFAULT_DENSE_LIMIT)
}

pub fn dense_eigensolve_with_limit(l: &SparseMatrix, limit: usize) -> Result<EigenSystem> {
    let n = l.dim();
    if n > limit {
        return Err(Error::DenseLimitExceeded { n, limit });
    }
    let mut dense = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, v) in l.row(i) {
            dense[(i, j)] = v;
        }
    }
    let eig = dense.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[src]);
        for row in 0..n {
            eigenvectors[[row, col]] = eig.eigenvectors[(row, src)];
        }
    }
    let residual_norms = residuals(l, &eigenvalues, &eigenvectors);
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
        target: None,
        meta: SolverMeta {
            iterations: 0,
            residual_norms,
            converged: true,
            retry_applied: false,
            from_cache: false,
        },
    })
}

/// Options for [`folded_eigensolve`]. Defaults: tolerance 1e-6 on the folded
/// operator residual, 500 iterations before the single retry, block size 64.
#[derive(Debug, Clone, Copy)]
pub struct FoldedOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub block_size: usize,
    pub seed: u64,
    /// Pairs whose distance to the target ties the k-th within this gap are
    /// pulled in so degenerate clusters are never cut.
    pub cluster_gap: f64,
}

impl Default for FoldedOptions {
    fn default() -> Self {
        FoldedOptions {
            tol: 1e-6,
            max_iter: 500,
            block_size: 64,
            seed: 0,
            cluster_gap: 1e-9,
        }
    }
}

/// The k eigenpairs of L nearest `mu`, computed by running LOBPCG on the
/// folded operator (L - mu I)^2 with matrix-vector products only. Eigenvalues
/// are recovered as Rayleigh quotients of L, never from the folded operator.
/// On inner-solver failure the solve is retried once with the target shifted
/// by [`RETRY_SHIFT`].
pub fn folded_eigensolve(
    l: &SparseMatrix,
    mu: f64,
    k: usize,
    opts: &FoldedOptions,
) -> Result<EigenSystem> {
    let n = l.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidParam {
            name: "k",
            message: format!("need 1 <= k <= N, got k={k} with N={n}"),
        });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParam {
            name: "tol",
            message: "tolerance must be positive".into(),
        });
    }
    match lobpcg::folded_band(l, mu, mu, k, opts, false) {
        Ok(es) => Ok(es),
        Err(Error::EigensolveFailed { .. }) => {
            lobpcg::folded_band(l, mu, mu + RETRY_SHIFT, k, opts, true)
        }
        Err(e) => Err(e),
    }
}

pub(crate) fn residuals(
    l: &SparseMatrix,
    eigenvalues: &[f64],
    eigenvectors: &Array2<f64>,
) -> Vec<f64> {
    let n = l.dim();
    let mut lx = vec![0.0; n];
    eigenvalues
        .iter()
        .enumerate()
        .map(|(col, &e)| {
            let x: Vec<f64> = eigenvectors.column(col).iter().copied().collect();
            l.matvec(&x, &mut lx);
            lx.iter()
                .zip(&x)
                .map(|(&a, &b)| (a - e * b) * (a - e * b))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_operator, GraphDataset};
    use approx::assert_abs_diff_eq;
    use ndarray::Array2 as NdArray2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_connected_graph(n: usize, extra_edges: usize, seed: u64) -> GraphDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for v in 1..n {
            let u = rng.gen_range(0..v);
            edges.push((u, v));
        }
        let mut added = 0;
        while added < extra_edges {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b && !edges.contains(&(a.min(b), a.max(b))) {
                edges.push((a.min(b), a.max(b)));
                added += 1;
            }
        }
        GraphDataset::new(
            n,
            edges,
            NdArray2::zeros((n, 1)),
            vec![0; n],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn dense_triangle_spectrum() {
        let g = crate::graph::GraphDataset::new(
            3,
            vec![(0, 1), (1, 2), (0, 2)],
            NdArray2::zeros((3, 1)),
            vec![0, 0, 0],
            vec![],
        )
        .unwrap();
        let es = dense_eigensolve(&normalized_operator(&g)).unwrap();
        assert_abs_diff_eq!(es.eigenvalues[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(es.eigenvalues[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(es.eigenvalues[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dense_two_vertex_spectrum() {
        let g = crate::graph::GraphDataset::new(
            2,
            vec![(0, 1)],
            NdArray2::zeros((2, 1)),
            vec![0, 0],
            vec![],
        )
        .unwrap();
        let es = dense_eigensolve(&normalized_operator(&g)).unwrap();
        assert_abs_diff_eq!(es.eigenvalues[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(es.eigenvalues[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dense_orthonormal_on_random_graph() {
        let g = random_connected_graph(50, 60, 7);
        let es = dense_eigensolve(&normalized_operator(&g)).unwrap();
        assert!(es.gram_defect() < 1e-10, "gram defect {}", es.gram_defect());
    }

    #[test]
    fn dense_limit_enforced() {
        let g = random_connected_graph(12, 0, 0);
        let err = dense_eigensolve_with_limit(&normalized_operator(&g), 10);
        assert!(matches!(err, Err(Error::DenseLimitExceeded { .. })));
    }

    #[test]
    fn dense_spectrum_in_unit_interval_on_random_graphs() {
        for seed in 0..6 {
            let n = 20 + (seed as usize) * 30;
            let g = random_connected_graph(n, n / 2, seed);
            let es = dense_eigensolve(&normalized_operator(&g)).unwrap();
            for &e in &es.eigenvalues {
                assert!(
                    (-1.0 - 1e-10..=1.0 + 1e-10).contains(&e),
                    "eigenvalue {e} outside [-1, 1]"
                );
            }
        }
    }
}
