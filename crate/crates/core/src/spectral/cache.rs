//! Binary cache of eigensystems keyed by (graph hash, mu, k, tol).
//!
//! Layout, all little-endian: u64 N, u64 k, f64 mu, f64 tol, then k
//! eigenvalues, then Phi in column-major order as f64.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::spectral::{EigenSystem, SolverMeta};
use crate::{Error, Result};

/// Cache identity of a folded solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenCacheKey {
    pub graph_hash: [u8; 32],
    pub mu: f64,
    pub k: usize,
    pub tol: f64,
}

impl EigenCacheKey {
    fn file_name(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.graph_hash);
        h.update(self.mu.to_le_bytes());
        h.update((self.k as u64).to_le_bytes());
        h.update(self.tol.to_le_bytes());
        let digest: [u8; 32] = h.finalize().into();
        let hex: String = digest[..16].iter().map(|b| format!("{b:02x}")).collect();
        format!("{hex}.eig")
    }
}

pub fn store_eigen_cache(dir: &Path, key: &EigenCacheKey, es: &EigenSystem) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(key.file_name());
    let mut buf: Vec<u8> = Vec::new();
    let n = es.dim();
    let k = es.num_pairs();
    buf.write_u64::<LittleEndian>(n as u64).unwrap();
    buf.write_u64::<LittleEndian>(k as u64).unwrap();
    buf.write_f64::<LittleEndian>(key.mu).unwrap();
    buf.write_f64::<LittleEndian>(key.tol).unwrap();
    for &e in &es.eigenvalues {
        buf.write_f64::<LittleEndian>(e).unwrap();
    }
    for col in es.eigenvectors.columns() {
        for &v in col {
            buf.write_f64::<LittleEndian>(v).unwrap();
        }
    }
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Returns the cached eigensystem if present. The number of stored pairs may
/// exceed the requested k (degenerate cluster extension); it is returned as
/// stored.
pub fn load_eigen_cache(dir: &Path, key: &EigenCacheKey) -> Result<Option<EigenSystem>> {
    let path: PathBuf = dir.join(key.file_name());
    if !path.exists() {
        return Ok(None);
    }
    let data = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let mut cursor = &data[..];
    let corrupt = |message: &str| Error::CorruptArtifact {
        what: "eigen cache",
        message: message.to_string(),
    };
    let n = cursor
        .read_u64::<LittleEndian>()
        .map_err(|_| corrupt("truncated header"))? as usize;
    let k = cursor
        .read_u64::<LittleEndian>()
        .map_err(|_| corrupt("truncated header"))? as usize;
    let mu = cursor
        .read_f64::<LittleEndian>()
        .map_err(|_| corrupt("truncated header"))?;
    let tol = cursor
        .read_f64::<LittleEndian>()
        .map_err(|_| corrupt("truncated header"))?;
    if mu.to_bits() != key.mu.to_bits() || tol.to_bits() != key.tol.to_bits() {
        return Err(corrupt("header does not match cache key"));
    }
    let mut eigenvalues = Vec::with_capacity(k);
    for _ in 0..k {
        eigenvalues.push(
            cursor
                .read_f64::<LittleEndian>()
                .map_err(|_| corrupt("truncated eigenvalues"))?,
        );
    }
    let mut eigenvectors = Array2::zeros((n, k));
    for col in 0..k {
        for row in 0..n {
            eigenvectors[[row, col]] = cursor
                .read_f64::<LittleEndian>()
                .map_err(|_| corrupt("truncated eigenvectors"))?;
        }
    }
    let mut rest = [0u8; 1];
    if cursor.read(&mut rest).unwrap_or(0) != 0 {
        return Err(corrupt("trailing bytes"));
    }
    Ok(Some(EigenSystem {
        eigenvalues,
        eigenvectors,
        target: Some(mu),
        meta: SolverMeta {
            iterations: 0,
            residual_norms: Vec::new(),
            converged: true,
            retry_applied: false,
            from_cache: true,
        },
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let es = EigenSystem {
            eigenvalues: vec![0.25, -0.5],
            eigenvectors: ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]),
            target: Some(0.3),
            meta: SolverMeta::default(),
        };
        let key = EigenCacheKey {
            graph_hash: [7u8; 32],
            mu: 0.3,
            k: 2,
            tol: 1e-6,
        };
        assert!(load_eigen_cache(dir.path(), &key).unwrap().is_none());
        store_eigen_cache(dir.path(), &key, &es).unwrap();
        let loaded = load_eigen_cache(dir.path(), &key).unwrap().unwrap();
        assert_eq!(loaded.eigenvalues, es.eigenvalues);
        assert_eq!(loaded.eigenvectors, es.eigenvectors);
        assert!(loaded.meta.from_cache);
        let other = EigenCacheKey { mu: 0.4, ..key };
        assert!(load_eigen_cache(dir.path(), &other).unwrap().is_none());
    }
}
