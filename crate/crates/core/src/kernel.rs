//! Filter-weighted kernel assembly, sparsification, renormalization, and the
//! heat / personalized-pagerank diffusion baselines.
//!
//! The rewired kernel is Q = sum_a w(E_a) phi_a phi_a^T for a filter w over
//! the eigenvalues. Assembly goes through Psi = Phi diag(sqrt(w)) so each
//! entry is a plain dot product of two rows of Psi; multiplication commutes,
//! so Q is bit-exactly symmetric even across independently computed row
//! blocks.

use std::fs;
use std::io::Read;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sparse::SparseMatrix;
use crate::spectral::{folded_eigensolve, EigenSystem, FoldedOptions};
use crate::{Error, Result};

/// Default number of rows per assembly block.
pub const DEFAULT_BLOCK_ROWS: usize = 1024;

/// Default eigenpair budget: min(512, N).
pub const DEFAULT_EIGEN_BUDGET: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// Gaussian band filter centered at mu with width sigma.
    Gaussian { mu: f64, sigma: f64 },
    /// Product-of-sigmoids band filter centered at mu with half-width gamma.
    Bandpass { mu: f64, gamma: f64 },
    /// Heat diffusion baseline exp(-t (I - L)).
    Heat { t: f64 },
    /// Personalized-pagerank baseline alpha (I - (1 - alpha) L)^{-1}.
    Ppr { alpha: f64 },
}

impl KernelFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelFamily::Gaussian { sigma, .. } if sigma <= 0.0 => Err(Error::InvalidParam {
                name: "sigma",
                message: "gaussian width must be positive".into(),
            }),
            KernelFamily::Bandpass { gamma, .. } if gamma <= 0.0 => Err(Error::InvalidParam {
                name: "gamma",
                message: "bandpass half-width must be positive".into(),
            }),
            KernelFamily::Heat { t } if t <= 0.0 => Err(Error::InvalidParam {
                name: "t",
                message: "heat time must be positive".into(),
            }),
            KernelFamily::Ppr { alpha } if !(0.0 < alpha && alpha <= 1.0) => {
                Err(Error::InvalidParam {
                    name: "alpha",
                    message: "teleport probability must be in (0, 1]".into(),
                })
            }
            _ => Ok(()),
        }
    }

    /// True for the spectral families that need an eigensystem.
    pub fn is_spectral(&self) -> bool {
        matches!(self, KernelFamily::Gaussian { .. } | KernelFamily::Bandpass { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sparsifier {
    /// Drop entries with |Q_ij| < eps.
    Threshold { eps: f64 },
    /// Keep the k largest-magnitude entries per row, then symmetrize by
    /// union.
    TopK { k: usize },
}

impl Sparsifier {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Sparsifier::Threshold { eps } if eps < 0.0 => Err(Error::InvalidParam {
                name: "eps",
                message: "threshold must be non-negative".into(),
            }),
            Sparsifier::TopK { k } if k == 0 => Err(Error::InvalidParam {
                name: "k",
                message: "top-k must be at least 1".into(),
            }),
            _ => Ok(()),
        }
    }
}

/// Filter family, sparsification rule, and eigenpair budget for one kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub family: KernelFamily,
    pub sparsify: Sparsifier,
    /// Number of eigenpairs to compute; defaults to min(512, N).
    pub eigen_budget: Option<usize>,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        self.sparsify.validate()
    }

    pub fn resolved_budget(&self, n: usize) -> usize {
        self.eigen_budget.unwrap_or(DEFAULT_EIGEN_BUDGET).min(n)
    }
}

/// Eigensolver summary carried alongside a rewired kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelProvenance {
    pub eigen_pairs: usize,
    pub solver_iterations: usize,
    pub retry_applied: bool,
    pub worst_residual: f64,
    pub nnz_before: usize,
    pub nnz_after: usize,
}

/// A sparsified, degree-renormalized propagation kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct RewiredKernel {
    pub matrix: SparseMatrix,
    pub spec: KernelSpec,
    pub provenance: KernelProvenance,
}

/// w_a = exp(-(E_a - mu)^2 / (2 sigma^2)), in (0, 1] with 1 iff E = mu.
pub fn gaussian_filter_weights(eigenvalues: &[f64], mu: f64, sigma: f64) -> Result<Vec<f64>> {
    if sigma <= 0.0 {
        return Err(Error::InvalidParam {
            name: "sigma",
            message: "gaussian width must be positive".into(),
        });
    }
    let denom = 2.0 * sigma * sigma;
    Ok(eigenvalues
        .iter()
        .map(|&e| (-(e - mu) * (e - mu) / denom).exp())
        .collect())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// w_a = sigmoid(E_a - mu + gamma) * sigmoid(mu + gamma - E_a), a smooth
/// band of half-width gamma around mu.
pub fn bandpass_filter_weights(eigenvalues: &[f64], mu: f64, gamma: f64) -> Result<Vec<f64>> {
    if gamma <= 0.0 {
        return Err(Error::InvalidParam {
            name: "gamma",
            message: "bandpass half-width must be positive".into(),
        });
    }
    Ok(eigenvalues
        .iter()
        .map(|&e| sigmoid(e - mu + gamma) * sigmoid(mu + gamma - e))
        .collect())
}

pub fn filter_weights(family: &KernelFamily, eigenvalues: &[f64]) -> Result<Vec<f64>> {
    match *family {
        KernelFamily::Gaussian { mu, sigma } => gaussian_filter_weights(eigenvalues, mu, sigma),
        KernelFamily::Bandpass { mu, gamma } => bandpass_filter_weights(eigenvalues, mu, gamma),
        _ => Err(Error::InvalidParam {
            name: "family",
            message: "diffusion baselines do not use eigenvalue filters".into(),
        }),
    }
}

/// One horizontal slab of the dense kernel.
#[derive(Debug, Clone)]
pub struct RowBlock {
    pub start_row: usize,
    pub rows: Array2<f64>,
}

/// Streams Q in row blocks of fixed height; the full dense matrix is never
/// resident.
pub struct KernelBlocks {
    psi: Array2<f64>,
    block_rows: usize,
    next: usize,
}

impl Iterator for KernelBlocks {
    type Item = RowBlock;

    fn next(&mut self) -> Option<RowBlock> {
        let n = self.psi.nrows();
        if self.next >= n {
            return None;
        }
        let start = self.next;
        let end = (start + self.block_rows).min(n);
        self.next = end;
        Some(RowBlock {
            start_row: start,
            rows: kernel_rows(&self.psi, start, end),
        })
    }
}

fn weighted_basis(es: &EigenSystem, weights: &[f64]) -> Result<Array2<f64>> {
    if weights.len() != es.num_pairs() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} eigenpairs",
            weights.len(),
            es.num_pairs()
        )));
    }
    if let Some(&w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidParam {
            name: "weights",
            message: format!("filter weights must be finite and non-negative, got {w}"),
        });
    }
    let mut psi = es.eigenvectors.clone();
    for (mut col, &w) in psi.columns_mut().into_iter().zip(weights) {
        let s = w.sqrt();
        col.mapv_inplace(|v| v * s);
    }
    Ok(psi)
}

fn row_dot(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let a = a.as_slice().expect("contiguous");
    let b = b.as_slice().expect("contiguous");
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

fn kernel_rows(psi: &Array2<f64>, start: usize, end: usize) -> Array2<f64> {
    let n = psi.nrows();
    let mut out = Array2::zeros((end - start, n));
    for r in start..end {
        let pr = psi.row(r);
        let mut row = out.row_mut(r - start);
        let row = row.as_slice_mut().expect("contiguous");
        for j in 0..n {
            row[j] = row_dot(pr, psi.row(j));
        }
    }
    out
}

/// Q = Phi diag(w) Phi^T as a stream of row blocks.
pub fn assemble_kernel(
    es: &EigenSystem,
    weights: &[f64],
    block_rows: usize,
) -> Result<KernelBlocks> {
    Ok(KernelBlocks {
        psi: weighted_basis(es, weights)?,
        block_rows: block_rows.max(1),
        next: 0,
    })
}

/// Dense Q, for small systems and tests.
pub fn assemble_dense(es: &EigenSystem, weights: &[f64]) -> Result<Array2<f64>> {
    let psi = weighted_basis(es, weights)?;
    Ok(kernel_rows(&psi, 0, psi.nrows()))
}

fn select_row_entries(row: &[f64], sparsifier: &Sparsifier) -> Vec<(usize, f64)> {
    match *sparsifier {
        Sparsifier::Threshold { eps } => row
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0.0 && v.abs() >= eps)
            .map(|(j, &v)| (j, v))
            .collect(),
        Sparsifier::TopK { k } => {
            let mut entries: Vec<(usize, f64)> = row
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v != 0.0)
                .map(|(j, &v)| (j, v))
                .collect();
            // Largest magnitude first; ties broken by column for determinism.
            entries.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
            entries.truncate(k);
            entries
        }
    }
}

/// Applies the sparsification rule to streamed kernel rows. Threshold mode
/// keeps |Q_ij| >= eps with the signed value; top-k keeps per-row selections
/// symmetrized by union. Returns the matrix and the count of nonzero entries
/// seen before sparsification.
pub fn sparsify(
    blocks: impl IntoIterator<Item = RowBlock>,
    dim: usize,
    sparsifier: &Sparsifier,
) -> Result<(SparseMatrix, usize)> {
    sparsifier.validate()?;
    let mut selections: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
    let mut nnz_before = 0usize;
    for block in blocks {
        for (offset, row) in block.rows.rows().into_iter().enumerate() {
            let i = block.start_row + offset;
            let row = row.as_slice().expect("contiguous");
            nnz_before += row.iter().filter(|&&v| v != 0.0).count();
            selections[i] = select_row_entries(row, sparsifier);
        }
    }
    Ok((symmetrize_union(dim, selections), nnz_before))
}

/// Parallel sparsification straight from the eigensystem; blocks are
/// independent work units and the result does not depend on the schedule.
pub fn sparsify_from_eigens(
    es: &EigenSystem,
    weights: &[f64],
    sparsifier: &Sparsifier,
    block_rows: usize,
) -> Result<(SparseMatrix, usize)> {
    sparsifier.validate()?;
    let psi = weighted_basis(es, weights)?;
    let n = psi.nrows();
    let block_rows = block_rows.max(1);
    let starts: Vec<usize> = (0..n).step_by(block_rows).collect();
    let per_block: Vec<(usize, Vec<Vec<(usize, f64)>>)> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + block_rows).min(n);
            let rows = kernel_rows(&psi, start, end);
            let mut nnz = 0usize;
            let sel: Vec<Vec<(usize, f64)>> = rows
                .rows()
                .into_iter()
                .map(|row| {
                    let row = row.as_slice().expect("contiguous");
                    nnz += row.iter().filter(|&&v| v != 0.0).count();
                    select_row_entries(row, sparsifier)
                })
                .collect();
            (nnz, sel)
        })
        .collect();
    let mut selections: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut nnz_before = 0;
    for (nnz, sel) in per_block {
        nnz_before += nnz;
        selections.extend(sel);
    }
    Ok((symmetrize_union(n, selections), nnz_before))
}

/// Keeps an entry if either endpoint selected it. Values are bit-identical on
/// both sides, so the union stays exactly symmetric.
fn symmetrize_union(dim: usize, selections: Vec<Vec<(usize, f64)>>) -> SparseMatrix {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
    for (i, sel) in selections.into_iter().enumerate() {
        for (j, v) in sel {
            rows[i].push((j, v));
            if j != i {
                rows[j].push((i, v));
            }
        }
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|&(j, _)| j);
        row.dedup_by_key(|&mut (j, _)| j);
    }
    SparseMatrix::from_sorted_rows(dim, rows)
}

/// Q_sym = D^{-1/2} Q~ D^{-1/2} with D the diagonal of absolute row sums.
/// Rows with zero sum stay zero.
pub fn renormalize(q: &SparseMatrix) -> SparseMatrix {
    q.scale_sym(&q.abs_row_sums())
}

/// Spectral kernel (gaussian or bandpass) from an existing eigensystem.
pub fn build_spectral_kernel(
    es: &EigenSystem,
    spec: &KernelSpec,
    block_rows: usize,
) -> Result<RewiredKernel> {
    spec.validate()?;
    let weights = filter_weights(&spec.family, &es.eigenvalues)?;
    let (q_tilde, nnz_before) = sparsify_from_eigens(es, &weights, &spec.sparsify, block_rows)?;
    let nnz_after = q_tilde.nnz();
    let matrix = renormalize(&q_tilde);
    let worst_residual = es
        .meta
        .residual_norms
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    Ok(RewiredKernel {
        matrix,
        spec: *spec,
        provenance: KernelProvenance {
            eigen_pairs: es.num_pairs(),
            solver_iterations: es.meta.iterations,
            retry_applied: es.meta.retry_applied,
            worst_residual,
            nnz_before,
            nnz_after,
        },
    })
}

/// Full kernel pipeline from the normalized operator: eigensolve (for the
/// spectral families) or iterative diffusion (for the baselines), then
/// sparsify and renormalize.
pub fn build_rewired_kernel(
    l: &SparseMatrix,
    spec: &KernelSpec,
    folded: &FoldedOptions,
    block_rows: usize,
) -> Result<RewiredKernel> {
    spec.validate()?;
    match spec.family {
        KernelFamily::Gaussian { mu, .. } | KernelFamily::Bandpass { mu, .. } => {
            let k = spec.resolved_budget(l.dim());
            let es = folded_eigensolve(l, mu, k, folded)?;
            build_spectral_kernel(&es, spec, block_rows)
        }
        KernelFamily::Heat { .. } | KernelFamily::Ppr { .. } => gdc_baseline(l, spec),
    }
}

/// Generalized diffusion baseline: S = alpha (I - (1-alpha) L)^{-1} for ppr,
/// S = exp(-t (I - L)) for heat; sparsified and renormalized like Q.
pub fn gdc_baseline(l: &SparseMatrix, spec: &KernelSpec) -> Result<RewiredKernel> {
    spec.validate()?;
    let s = match spec.family {
        KernelFamily::Ppr { alpha } => ppr_diffusion(l, alpha)?,
        KernelFamily::Heat { t } => heat_diffusion(l, t),
        _ => {
            return Err(Error::InvalidParam {
                name: "family",
                message: "gdc baseline requires heat or ppr".into(),
            })
        }
    };
    let n = l.dim();
    let mut nnz_before = 0usize;
    let mut selections: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for row in s.rows() {
        let row = row.as_slice().expect("contiguous");
        nnz_before += row.iter().filter(|&&v| v != 0.0).count();
        selections.push(select_row_entries(row, &spec.sparsify));
    }
    let q_tilde = symmetrize_union(n, selections);
    let nnz_after = q_tilde.nnz();
    Ok(RewiredKernel {
        matrix: renormalize(&q_tilde),
        spec: *spec,
        provenance: KernelProvenance {
            eigen_pairs: 0,
            solver_iterations: 0,
            retry_applied: false,
            worst_residual: 0.0,
            nnz_before,
            nnz_after,
        },
    })
}

const DIFFUSION_TOL: f64 = 1e-8;

/// Neumann iteration X <- alpha I + (1-alpha) L X; converges geometrically
/// since ||(1-alpha) L||_2 <= 1 - alpha. Exact symmetry is enforced on exit.
fn ppr_diffusion(l: &SparseMatrix, alpha: f64) -> Result<Array2<f64>> {
    let n = l.dim();
    if alpha == 1.0 {
        return Ok(Array2::eye(n));
    }
    let mut x = Array2::eye(n) * alpha;
    let mut lx = Array2::zeros((n, n));
    // Geometric tail bound: stop once (1-alpha)^m <= tol * alpha.
    let max_iter = ((DIFFUSION_TOL * alpha).ln() / (1.0 - alpha).ln()).ceil() as usize + 2;
    let mut delta = f64::INFINITY;
    for _ in 0..max_iter {
        l.matmul_dense(x.view(), &mut lx);
        let mut next = Array2::eye(n) * alpha;
        next.zip_mut_with(&lx, |acc: &mut f64, &v| *acc += (1.0 - alpha) * v);
        delta = (&next - &x).iter().fold(0.0f64, |a, &d| a.max(d.abs()));
        x = next;
        if delta <= DIFFUSION_TOL {
            break;
        }
    }
    if delta > DIFFUSION_TOL {
        return Err(Error::SolveFailed {
            iterations: max_iter,
            residual: delta,
        });
    }
    symmetrize_in_place(&mut x);
    Ok(x)
}

/// exp(-t (I - L)) by scaling and squaring around a short Taylor series.
fn heat_diffusion(l: &SparseMatrix, t: f64) -> Array2<f64> {
    let n = l.dim();
    // Scale so the series argument has norm <= 1; I - L has spectrum in [0, 2].
    let squarings = (2.0 * t).log2().ceil().max(0.0) as u32;
    let tau = t / f64::powi(2.0, squarings as i32);
    // exp(-tau (I - L)) = e^{-tau} exp(tau L)
    let mut sum = Array2::eye(n);
    let mut term = Array2::eye(n);
    let mut buf = Array2::zeros((n, n));
    let mut k = 1.0f64;
    loop {
        l.matmul_dense(term.view(), &mut buf);
        term.assign(&buf);
        term.mapv_inplace(|v| v * tau / k);
        sum += &term;
        // ||term|| <= tau^k / k!; 2x slack covers the remaining tail.
        let worst = term.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if 2.0 * worst < DIFFUSION_TOL {
            break;
        }
        k += 1.0;
    }
    sum.mapv_inplace(|v| v * (-tau).exp());
    for _ in 0..squarings {
        buf.assign(&sum.dot(&sum));
        sum.assign(&buf);
    }
    symmetrize_in_place(&mut sum);
    sum
}

fn symmetrize_in_place(x: &mut Array2<f64>) {
    let n = x.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (x[[i, j]] + x[[j, i]]);
            x[[i, j]] = v;
            x[[j, i]] = v;
        }
    }
}

/// Writes the kernel binary: u64 N, u64 nnz, u64 json length, spec +
/// provenance JSON, row offsets, column indices, values, little-endian.
pub fn save_kernel(kernel: &RewiredKernel, path: &Path) -> Result<()> {
    let m = &kernel.matrix;
    let header = serde_json::json!({
        "spec": kernel.spec,
        "provenance": kernel.provenance,
    });
    let header_bytes = serde_json::to_vec(&header).expect("header serialize");
    let mut buf: Vec<u8> = Vec::new();
    buf.write_u64::<LittleEndian>(m.dim() as u64).unwrap();
    buf.write_u64::<LittleEndian>(m.nnz() as u64).unwrap();
    buf.write_u64::<LittleEndian>(header_bytes.len() as u64).unwrap();
    buf.extend_from_slice(&header_bytes);
    for &o in m.row_offsets() {
        buf.write_u64::<LittleEndian>(o as u64).unwrap();
    }
    for &c in m.col_indices() {
        buf.write_u64::<LittleEndian>(c as u64).unwrap();
    }
    for &v in m.values() {
        buf.write_f64::<LittleEndian>(v).unwrap();
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_kernel(path: &Path) -> Result<RewiredKernel> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |message: &str| Error::CorruptArtifact {
        what: "kernel file",
        message: message.to_string(),
    };
    let mut cursor = &data[..];
    let n = cursor.read_u64::<LittleEndian>().map_err(|_| corrupt("truncated"))? as usize;
    let nnz = cursor.read_u64::<LittleEndian>().map_err(|_| corrupt("truncated"))? as usize;
    let hlen = cursor.read_u64::<LittleEndian>().map_err(|_| corrupt("truncated"))? as usize;
    if cursor.len() < hlen {
        return Err(corrupt("truncated header"));
    }
    let header: serde_json::Value =
        serde_json::from_slice(&cursor[..hlen]).map_err(|e| corrupt(&e.to_string()))?;
    cursor = &cursor[hlen..];
    let spec: KernelSpec = serde_json::from_value(header["spec"].clone())
        .map_err(|e| corrupt(&format!("bad spec: {e}")))?;
    let provenance: KernelProvenance = serde_json::from_value(header["provenance"].clone())
        .map_err(|e| corrupt(&format!("bad provenance: {e}")))?;
    let mut offsets = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        offsets.push(cursor.read_u64::<LittleEndian>().map_err(|_| corrupt("truncated offsets"))? as usize);
    }
    let mut triplets = Vec::with_capacity(nnz);
    let mut cols = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        cols.push(cursor.read_u64::<LittleEndian>().map_err(|_| corrupt("truncated columns"))? as usize);
    }
    for (idx, &col) in cols.iter().enumerate() {
        let v = cursor
            .read_f64::<LittleEndian>()
            .map_err(|_| corrupt("truncated values"))?;
        let row = offsets.partition_point(|&o| o <= idx) - 1;
        triplets.push((row, col, v));
    }
    let mut rest = [0u8; 1];
    if (&mut cursor).read(&mut rest).unwrap_or(0) != 0 {
        return Err(corrupt("trailing bytes"));
    }
    let matrix = SparseMatrix::from_triplets(n, triplets)?;
    Ok(RewiredKernel {
        matrix,
        spec,
        provenance,
    })
}
