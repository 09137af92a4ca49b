//! Heat and Schrödinger propagation on graphs via dense spectral expansion.
//!
//! Both propagators evolve under the PSD operator `L_psd = I - L`, whose
//! nullspace is the stationary direction: heat flow decays every other mode,
//! quantum evolution rotates their phases and conserves the norm.

use ndarray::Array2;

use crate::graph::GraphDataset;
use crate::sparse::SparseMatrix;
use crate::spectral::{dense_eigensolve_with_limit, EigenSystem};
use crate::{Error, Result};

/// Snapshots of a propagation over a time grid. For quantum runs the values
/// are occupation probabilities |psi_i|^2; for heat runs the field itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationRun {
    pub time_grid: Vec<f64>,
    pub initial_state: Vec<f64>,
    /// One length-N array per grid time.
    pub snapshots: Vec<Vec<f64>>,
}

/// Two complete graphs of `lobe_size` vertices joined by a path of
/// `path_length` vertices. Vertex order: first lobe, path, second lobe.
pub fn barbell_graph(lobe_size: usize, path_length: usize) -> Result<GraphDataset> {
    if lobe_size < 3 {
        return Err(Error::InvalidParam {
            name: "lobe_size",
            message: "lobes must have at least 3 vertices".into(),
        });
    }
    if path_length < 1 {
        return Err(Error::InvalidParam {
            name: "path_length",
            message: "path must have at least 1 vertex".into(),
        });
    }
    let n = 2 * lobe_size + path_length;
    let mut edges = Vec::new();
    let lobe_b = lobe_size + path_length;
    for a in 0..lobe_size {
        for b in (a + 1)..lobe_size {
            edges.push((a, b));
            edges.push((lobe_b + a, lobe_b + b));
        }
    }
    // Path vertices chain together and bridge the two lobes.
    for p in 0..path_length.saturating_sub(1) {
        edges.push((lobe_size + p, lobe_size + p + 1));
    }
    edges.push((lobe_size - 1, lobe_size));
    edges.push((lobe_size + path_length - 1, lobe_b));
    GraphDataset::new(n, edges, Array2::zeros((n, 1)), vec![0; n], vec![])
}

/// `I - L` for the normalized operator; PSD with spectrum in [0, 2].
pub fn psd_laplacian(l: &SparseMatrix) -> SparseMatrix {
    let n = l.dim();
    let mut triplets = Vec::with_capacity(l.nnz() + n);
    for i in 0..n {
        let mut has_diag = false;
        for (j, v) in l.row(i) {
            if i == j {
                has_diag = true;
                let d = 1.0 - v;
                if d != 0.0 {
                    triplets.push((i, j, d));
                }
            } else {
                triplets.push((i, j, -v));
            }
        }
        if !has_diag {
            triplets.push((i, i, 1.0));
        }
    }
    SparseMatrix::from_triplets(n, triplets).expect("psd operator stays symmetric")
}

fn validate_grid(time_grid: &[f64]) -> Result<()> {
    if time_grid.first() != Some(&0.0) {
        return Err(Error::InvalidParam {
            name: "time_grid",
            message: "grid must start at 0".into(),
        });
    }
    if time_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParam {
            name: "time_grid",
            message: "grid must be strictly ascending".into(),
        });
    }
    Ok(())
}

/// [0, dt, 2 dt, ..., steps * dt]
pub fn uniform_grid(steps: usize, dt: f64) -> Vec<f64> {
    (0..=steps).map(|s| s as f64 * dt).collect()
}

fn spectral_setup(l_psd: &SparseMatrix, state: &[f64]) -> Result<(EigenSystem, Vec<f64>)> {
    if state.len() != l_psd.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} on {} vertices",
            state.len(),
            l_psd.dim()
        )));
    }
    let es = dense_eigensolve_with_limit(l_psd, usize::MAX)?;
    // Expansion coefficients c_a = <phi_a, state>.
    let coeffs: Vec<f64> = (0..es.num_pairs())
        .map(|a| {
            es.eigenvectors
                .column(a)
                .iter()
                .zip(state)
                .map(|(&p, &s)| p * s)
                .sum()
        })
        .collect();
    Ok((es, coeffs))
}

/// f(t) = sum_a exp(-E_a t) <phi_a, f0> phi_a.
pub fn heat_propagate(
    l_psd: &SparseMatrix,
    f0: &[f64],
    time_grid: &[f64],
) -> Result<PropagationRun> {
    validate_grid(time_grid)?;
    let (es, coeffs) = spectral_setup(l_psd, f0)?;
    let n = l_psd.dim();
    let snapshots = time_grid
        .iter()
        .map(|&t| {
            let mut f = vec![0.0; n];
            for (a, &c) in coeffs.iter().enumerate() {
                let scale = c * (-es.eigenvalues[a] * t).exp();
                if scale == 0.0 {
                    continue;
                }
                for (fi, &p) in f.iter_mut().zip(es.eigenvectors.column(a)) {
                    *fi += scale * p;
                }
            }
            f
        })
        .collect();
    Ok(PropagationRun {
        time_grid: time_grid.to_vec(),
        initial_state: f0.to_vec(),
        snapshots,
    })
}

/// psi(t) = sum_a exp(-i E_a t) <phi_a, psi0> phi_a, recorded as |psi_i|^2.
/// The complex amplitude is carried as separate real and imaginary parts.
pub fn schrodinger_propagate(
    l_psd: &SparseMatrix,
    psi0: &[f64],
    time_grid: &[f64],
) -> Result<PropagationRun> {
    validate_grid(time_grid)?;
    let norm: f64 = psi0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParam {
            name: "psi0",
            message: format!("initial state must be unit norm, got {norm}"),
        });
    }
    let (es, coeffs) = spectral_setup(l_psd, psi0)?;
    let n = l_psd.dim();
    let snapshots = time_grid
        .iter()
        .map(|&t| {
            let mut re = vec![0.0; n];
            let mut im = vec![0.0; n];
            for (a, &c) in coeffs.iter().enumerate() {
                let phase = es.eigenvalues[a] * t;
                let (s, cos) = phase.sin_cos();
                let (cr, ci) = (c * cos, -c * s);
                for ((r, i), &p) in re.iter_mut().zip(im.iter_mut()).zip(es.eigenvectors.column(a))
                {
                    *r += cr * p;
                    *i += ci * p;
                }
            }
            re.iter().zip(&im).map(|(&r, &i)| r * r + i * i).collect()
        })
        .collect();
    Ok(PropagationRun {
        time_grid: time_grid.to_vec(),
        initial_state: psi0.iter().map(|v| v * v).collect(),
        snapshots,
    })
}

/// f^T L_psd f, the smoothness energy dissipated by heat flow.
pub fn dirichlet_energy(l_psd: &SparseMatrix, f: &[f64]) -> f64 {
    let mut lf = vec![0.0; f.len()];
    l_psd.matvec(f, &mut lf);
    f.iter().zip(&lf).map(|(&a, &b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::normalized_operator;
    use approx::assert_abs_diff_eq;

    fn two_vertex_psd() -> SparseMatrix {
        let g = GraphDataset::new(
            2,
            vec![(0, 1)],
            Array2::zeros((2, 1)),
            vec![0, 0],
            vec![],
        )
        .unwrap();
        psd_laplacian(&normalized_operator(&g))
    }

    #[test]
    fn barbell_counts() {
        let g = barbell_graph(3, 1).unwrap();
        assert_eq!(g.num_vertices(), 7);
        assert_eq!(g.num_edges(), 8);
        let g = barbell_graph(5, 2).unwrap();
        assert_eq!(g.num_vertices(), 12);
        assert_eq!(g.num_edges(), 23);
    }

    #[test]
    fn barbell_connected() {
        let g = barbell_graph(4, 3).unwrap();
        let adj = g.neighbor_lists();
        let mut seen = vec![false; g.num_vertices()];
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            stack.extend(adj[v].iter().copied().filter(|&u| !seen[u]));
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn barbell_rejects_degenerate_sizes() {
        assert!(barbell_graph(2, 1).is_err());
        assert!(barbell_graph(3, 0).is_err());
    }

    #[test]
    fn heat_two_vertex_analytic() {
        let l_psd = two_vertex_psd();
        let grid = vec![0.0, 0.5, 1.0, 2.0, 5.0];
        let run = heat_propagate(&l_psd, &[1.0, 0.0], &grid).unwrap();
        for (k, &t) in grid.iter().enumerate() {
            let expect0 = (1.0 + (-t).exp()) / 2.0;
            let expect1 = (1.0 - (-t).exp()) / 2.0;
            assert_abs_diff_eq!(run.snapshots[k][0], expect0, epsilon = 1e-12);
            assert_abs_diff_eq!(run.snapshots[k][1], expect1, epsilon = 1e-12);
        }
    }

    #[test]
    fn heat_identity_at_t_zero() {
        let g = barbell_graph(4, 2).unwrap();
        let l_psd = psd_laplacian(&normalized_operator(&g));
        let f0: Vec<f64> = (0..g.num_vertices()).map(|v| v as f64 - 3.0).collect();
        let run = heat_propagate(&l_psd, &f0, &[0.0, 1.0]).unwrap();
        for (a, b) in run.snapshots[0].iter().zip(&f0) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn schrodinger_two_vertex_rabi() {
        let l_psd = two_vertex_psd();
        let grid = vec![0.0, 0.5, 1.0, 2.0, std::f64::consts::PI];
        let run = schrodinger_propagate(&l_psd, &[1.0, 0.0], &grid).unwrap();
        for (k, &t) in grid.iter().enumerate() {
            let transfer = (t / 2.0).sin().powi(2);
            assert_abs_diff_eq!(run.snapshots[k][1], transfer, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(run.snapshots[4][1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn schrodinger_rejects_unnormalized() {
        let l_psd = two_vertex_psd();
        assert!(schrodinger_propagate(&l_psd, &[1.0, 0.5], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn grid_validation() {
        let l_psd = two_vertex_psd();
        assert!(heat_propagate(&l_psd, &[1.0, 0.0], &[0.5, 1.0]).is_err());
        assert!(heat_propagate(&l_psd, &[1.0, 0.0], &[0.0, 1.0, 1.0]).is_err());
    }
}
