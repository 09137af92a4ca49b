//! Block LOBPCG on the folded operator (L - mu I)^2 with hard deflation.
//!
//! Vectors are stored as matrix *rows* so that inner products and sparse
//! applications run over contiguous memory. The folded operator is never
//! materialized: each application composes two sparse products,
//! F x = L(L x) - 2 mu (L x) + mu^2 x.

use nalgebra::DMatrix;
use ndarray::{s, Array1, Array2, ArrayView2};

use crate::rng::SeedStream;
use crate::sparse::SparseMatrix;
use crate::spectral::{EigenSystem, FoldedOptions, SolverMeta};
use crate::{Error, Result};

/// Rows whose norm collapses below this after projection are linearly
/// dependent on the basis built so far and get dropped.
const DEPENDENCE_DROP: f64 = 1e-8;

struct Folded<'a> {
    l: &'a SparseMatrix,
    mu: f64,
}

impl Folded<'_> {
    /// F x for every row of x.
    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut lx = Array2::zeros(x.dim());
        self.l.matvec_rows(x, &mut lx);
        let mut llx = Array2::zeros(x.dim());
        self.l.matvec_rows(lx.view(), &mut llx);
        let mu = self.mu;
        llx.zip_mut_with(&lx, |ll, &lv| *ll -= 2.0 * mu * lv);
        llx.zip_mut_with(&x.to_owned(), |ll, &xv| *ll += mu * mu * xv);
        llx
    }
}

use crate::rng::standard_normal;

/// Removes the span of `basis` rows from every row of `v` (two passes).
fn project_out(v: &mut Array2<f64>, basis: ArrayView2<'_, f64>) {
    if basis.nrows() == 0 || v.nrows() == 0 {
        return;
    }
    for _ in 0..2 {
        let coeff = v.dot(&basis.t());
        let correction = coeff.dot(&basis);
        *v -= &correction;
    }
}

/// Modified Gram-Schmidt with reorthogonalization over rows; dependent or
/// non-finite rows are dropped.
fn orthonormalize_rows(v: Array2<f64>) -> Array2<f64> {
    let n = v.ncols();
    let mut kept: Vec<Array1<f64>> = Vec::with_capacity(v.nrows());
    for row in v.rows() {
        let mut row = row.to_owned();
        let pre = row.dot(&row).sqrt();
        if !pre.is_finite() || pre == 0.0 {
            continue;
        }
        row.mapv_inplace(|x| x / pre);
        for _ in 0..2 {
            for q in &kept {
                let c = row.dot(q);
                row.scaled_add(-c, q);
            }
        }
        let norm = row.dot(&row).sqrt();
        if norm > DEPENDENCE_DROP {
            row.mapv_inplace(|x| x / norm);
            kept.push(row);
        }
    }
    let mut out = Array2::zeros((kept.len(), n));
    for (i, row) in kept.into_iter().enumerate() {
        out.row_mut(i).assign(&row);
    }
    out
}

/// Ascending eigendecomposition of a small symmetric matrix. Returns
/// (eigenvalues, eigenvector columns).
fn sym_eig_small(g: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let q = g.nrows();
    let mut m = DMatrix::<f64>::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            m[(i, j)] = 0.5 * (g[[i, j]] + g[[j, i]]);
        }
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vals = Vec::with_capacity(q);
    let mut vecs = Array2::zeros((q, q));
    for (col, &src) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[src]);
        for row in 0..q {
            vecs[[row, col]] = eig.eigenvectors[(row, src)];
        }
    }
    (vals, vecs)
}

struct BandResult {
    /// Locked folded-operator Ritz values, one per row of `vectors`.
    thetas: Vec<f64>,
    /// Locked vectors as rows, orthonormal.
    vectors: Array2<f64>,
    iterations: usize,
}

/// Runs deflated LOBPCG until `want` smallest eigenpairs of the folded
/// operator are locked, or the iteration budget runs out.
fn lobpcg_lowest(
    op: &Folded<'_>,
    n: usize,
    want: usize,
    opts: &FoldedOptions,
) -> std::result::Result<BandResult, (usize, f64, usize)> {
    let seeds = SeedStream::new(opts.seed);
    let mut locked = Array2::<f64>::zeros((0, n));
    let mut locked_thetas: Vec<f64> = Vec::with_capacity(want);
    let mut iterations = 0usize;
    let mut batch = 0u64;
    let mut worst_active = f64::INFINITY;

    while locked_thetas.len() < want {
        let b = opts.block_size.min(want - locked_thetas.len()).max(1);
        let mut rng = seeds.rng("lobpcg-init", batch);
        batch += 1;
        let mut x = Array2::from_shape_fn((b, n), |_| standard_normal(&mut rng));
        project_out(&mut x, locked.view());
        let mut x = orthonormalize_rows(x);
        if x.nrows() == 0 {
            // Complement exhausted numerically; cannot happen for want <= n.
            return Err((want - locked_thetas.len(), worst_active, iterations));
        }
        let mut fx = op.apply(x.view());
        let mut thetas: Vec<f64> = (0..x.nrows())
            .map(|r| x.row(r).dot(&fx.row(r)))
            .collect();
        let mut p = Array2::<f64>::zeros((0, n));

        loop {
            // Residuals of the current Ritz block, ordered by theta ascending.
            let mut residual = fx.clone();
            for (r, &t) in thetas.iter().enumerate() {
                let xr = x.row(r).to_owned();
                residual.row_mut(r).scaled_add(-t, &xr);
            }
            let res_norms: Vec<f64> = residual
                .rows()
                .into_iter()
                .map(|r| r.dot(&r).sqrt())
                .collect();

            // Hard-lock the converged prefix.
            let mut lock_count = 0;
            while lock_count < x.nrows()
                && res_norms[lock_count] <= opts.tol * (1.0 + thetas[lock_count].abs())
                && locked_thetas.len() + lock_count < want
            {
                lock_count += 1;
            }
            if lock_count > 0 {
                let mut grown = Array2::zeros((locked.nrows() + lock_count, n));
                grown.slice_mut(s![..locked.nrows(), ..]).assign(&locked);
                grown
                    .slice_mut(s![locked.nrows().., ..])
                    .assign(&x.slice(s![..lock_count, ..]));
                locked = grown;
                locked_thetas.extend_from_slice(&thetas[..lock_count]);
                x = x.slice(s![lock_count.., ..]).to_owned();
                fx = fx.slice(s![lock_count.., ..]).to_owned();
                residual = residual.slice(s![lock_count.., ..]).to_owned();
                thetas.drain(..lock_count);
                if p.nrows() >= lock_count {
                    p = p.slice(s![lock_count.., ..]).to_owned();
                }
            }
            if locked_thetas.len() >= want {
                break;
            }
            if x.nrows() == 0 {
                break; // restart with a fresh random block
            }
            worst_active = res_norms
                .get(lock_count)
                .copied()
                .unwrap_or(worst_active);
            if iterations >= opts.max_iter {
                return Err((
                    want - locked_thetas.len(),
                    worst_active,
                    iterations,
                ));
            }
            iterations += 1;

            // Search space [X, W, P] orthonormal to the locked set.
            let active = x.nrows();
            let mut w = residual;
            for mut row in w.rows_mut() {
                let norm = row.dot(&row).sqrt();
                if norm > 0.0 && norm.is_finite() {
                    row.mapv_inplace(|v| v / norm);
                }
            }
            let mut v = Array2::zeros((active + w.nrows() + p.nrows(), n));
            v.slice_mut(s![..active, ..]).assign(&x);
            v.slice_mut(s![active..active + w.nrows(), ..]).assign(&w);
            if p.nrows() > 0 {
                v.slice_mut(s![active + w.nrows().., ..]).assign(&p);
            }
            project_out(&mut v, locked.view());
            let v = orthonormalize_rows(v);
            let fv = op.apply(v.view());
            let g = v.dot(&fv.t());
            let (vals, vecs) = sym_eig_small(&g);
            let take = active.min(v.nrows());
            let c = vecs.slice(s![.., ..take]).to_owned();
            let x_new = c.t().dot(&v);
            let fx_new = c.t().dot(&fv);
            // Direction history: the same Ritz combinations with the
            // coefficients of the X block zeroed out.
            let mut c_p = c.clone();
            c_p.slice_mut(s![..active, ..]).fill(0.0);
            let p_new = orthonormalize_rows(c_p.t().dot(&v));

            x = x_new;
            fx = fx_new;
            thetas = vals[..take].to_vec();
            p = p_new;
        }
    }

    Ok(BandResult {
        thetas: locked_thetas,
        vectors: locked,
        iterations,
    })
}

/// Full folded-band solve: LOBPCG on (L - mu_solve I)^2, Rayleigh recovery of
/// the eigenvalues of L, per-cluster Rayleigh-Ritz refinement, and ordering
/// by distance to `mu_report`.
pub(crate) fn folded_band(
    l: &SparseMatrix,
    mu_report: f64,
    mu_solve: f64,
    k: usize,
    opts: &FoldedOptions,
    retry_applied: bool,
) -> Result<EigenSystem> {
    let n = l.dim();
    let op = Folded { l, mu: mu_solve };
    // A few extra pairs so ties at the cutoff can be detected and the whole
    // degenerate cluster pulled in.
    let mut want = (k + 8).min(n);
    loop {
        let band = lobpcg_lowest(&op, n, want, opts).map_err(
            |(unconverged, worst_residual, _)| Error::EigensolveFailed {
                requested: k,
                unconverged,
                worst_residual,
                retry_applied,
            },
        )?;
        let refined = refine_band(l, band, mu_report, opts, retry_applied);
        let dist = |e: f64| (e - mu_report).abs();
        let mut cut = k;
        while cut < refined.eigenvalues.len()
            && dist(refined.eigenvalues[cut]) <= dist(refined.eigenvalues[k - 1]) + opts.cluster_gap
        {
            cut += 1;
        }
        // If the tie extends past everything we computed, compute more.
        if cut == want && want < n {
            want = (want + 16).min(n);
            continue;
        }
        let mut es = refined;
        es.eigenvalues.truncate(cut);
        es.meta.residual_norms.truncate(cut);
        es.eigenvectors = es.eigenvectors.slice(s![.., ..cut]).to_owned();
        return Ok(es);
    }
}

/// Rayleigh quotients on L, cluster-wise Rayleigh-Ritz to split folded
/// degeneracies (E = mu +/- x) into proper eigenpairs of L, and distance sort.
fn refine_band(
    l: &SparseMatrix,
    band: BandResult,
    mu_report: f64,
    opts: &FoldedOptions,
    retry_applied: bool,
) -> EigenSystem {
    let n = l.dim();
    let m = band.thetas.len();
    // Reorder locked rows by theta ascending before grouping.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| band.thetas[a].total_cmp(&band.thetas[b]));
    let mut y = Array2::zeros((m, n));
    let mut thetas = Vec::with_capacity(m);
    for (r, &src) in order.iter().enumerate() {
        y.row_mut(r).assign(&band.vectors.row(src));
        thetas.push(band.thetas[src]);
    }

    let mut ly = Array2::zeros((m, n));
    l.matvec_rows(y.view(), &mut ly);

    // Group rows whose folded Ritz values coincide within a modest tolerance;
    // each group spans a union of eigenspaces of L.
    let group_gap = |t: f64| (10.0 * opts.tol).max(1e-7) * (1.0 + t.abs());
    let mut eigenvalues = vec![0.0; m];
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && thetas[end] - thetas[end - 1] <= group_gap(thetas[end]) {
            end += 1;
        }
        let g = end - start;
        if g == 1 {
            eigenvalues[start] = y.row(start).dot(&ly.row(start));
        } else {
            let yg = y.slice(s![start..end, ..]).to_owned();
            let lyg = ly.slice(s![start..end, ..]).to_owned();
            let small = yg.dot(&lyg.t());
            let (vals, vecs) = sym_eig_small(&small);
            let rotated = vecs.t().dot(&yg);
            let rotated_l = vecs.t().dot(&lyg);
            y.slice_mut(s![start..end, ..]).assign(&rotated);
            ly.slice_mut(s![start..end, ..]).assign(&rotated_l);
            eigenvalues[start..end].copy_from_slice(&vals[..g]);
        }
        start = end;
    }

    // Sort by distance to the requested target.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        let da = (eigenvalues[a] - mu_report).abs();
        let db = (eigenvalues[b] - mu_report).abs();
        da.total_cmp(&db).then(eigenvalues[a].total_cmp(&eigenvalues[b]))
    });

    let mut sorted_vals = Vec::with_capacity(m);
    let mut phi = Array2::zeros((n, m));
    let mut residual_norms = Vec::with_capacity(m);
    for (col, &src) in order.iter().enumerate() {
        sorted_vals.push(eigenvalues[src]);
        let diff = &ly.row(src) - &(eigenvalues[src] * &y.row(src));
        residual_norms.push(diff.dot(&diff).sqrt());
        phi.column_mut(col).assign(&y.row(src));
    }

    EigenSystem {
        eigenvalues: sorted_vals,
        eigenvectors: phi,
        target: Some(mu_report),
        meta: SolverMeta {
            iterations: band.iterations,
            residual_norms,
            converged: true,
            retry_applied,
            from_cache: false,
        },
    }
}
