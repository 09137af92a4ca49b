//! Graph data model: dataset ingestion, the normalized propagation operator,
//! the homophily metric, and split management.
//!
//! A graph bundle is a directory of four files:
//!   edges.tsv     one `i<TAB>j` pair per line, 0-indexed decimal
//!   features.csv  N lines of d comma-separated decimals
//!   labels.txt    N lines, one integer class id
//!   splits.json   array of {"train":[..],"val":[..],"test":[..]} (optional)

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::SeedStream;
use crate::sparse::SparseMatrix;
use crate::{Error, Result};

/// Disjoint train/validation/test vertex index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl Split {
    fn validate(&self, n: usize) -> Result<()> {
        if self.train_idx.is_empty() || self.val_idx.is_empty() || self.test_idx.is_empty() {
            return Err(Error::InvalidSplit("empty train/val/test set".into()));
        }
        let mut seen = vec![false; n];
        for idx in [&self.train_idx, &self.val_idx, &self.test_idx] {
            for &v in idx {
                if v >= n {
                    return Err(Error::InvalidSplit(format!(
                        "vertex {v} out of range for {n} vertices"
                    )));
                }
                if seen[v] {
                    return Err(Error::InvalidSplit(format!(
                        "vertex {v} appears in more than one part"
                    )));
                }
                seen[v] = true;
            }
        }
        Ok(())
    }
}

/// An undirected, unweighted vertex-labeled graph with dense features.
/// Edges are stored once as ordered pairs (i < j); immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
    features: Array2<f64>,
    labels: Vec<usize>,
    splits: Vec<Split>,
}

/// Counts of input rows dropped during ingestion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub dropped_self_loops: usize,
    pub dropped_duplicate_edges: usize,
}

impl GraphDataset {
    /// Validates and canonicalizes the parts: edges are deduplicated as
    /// unordered pairs, self-loops rejected, labels checked contiguous.
    pub fn new(
        num_vertices: usize,
        edges: Vec<(usize, usize)>,
        features: Array2<f64>,
        labels: Vec<usize>,
        splits: Vec<Split>,
    ) -> Result<Self> {
        if features.nrows() != num_vertices {
            return Err(Error::InvalidGraph(format!(
                "features has {} rows for {} vertices",
                features.nrows(),
                num_vertices
            )));
        }
        if labels.len() != num_vertices {
            return Err(Error::InvalidGraph(format!(
                "labels has {} entries for {} vertices",
                labels.len(),
                num_vertices
            )));
        }
        let mut canonical = Vec::with_capacity(edges.len());
        let mut seen = HashSet::with_capacity(edges.len());
        for (i, j) in edges {
            if i >= num_vertices || j >= num_vertices {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) out of range for {num_vertices} vertices"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
            }
            let pair = (i.min(j), i.max(j));
            if !seen.insert(pair) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    pair.0, pair.1
                )));
            }
            canonical.push(pair);
        }
        canonical.sort_unstable();
        if num_vertices > 0 {
            let num_classes = labels.iter().max().map_or(0, |m| m + 1);
            let mut present = vec![false; num_classes];
            for &l in &labels {
                present[l] = true;
            }
            if let Some(missing) = present.iter().position(|p| !p) {
                return Err(Error::InvalidGraph(format!(
                    "class ids not contiguous: class {missing} has no vertices"
                )));
            }
        }
        for s in &splits {
            s.validate(num_vertices)?;
        }
        Ok(GraphDataset {
            num_vertices,
            edges: canonical,
            features,
            labels,
            splits,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    /// Edge count under the unordered-pair convention.
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn with_splits(mut self, splits: Vec<Split>) -> Result<Self> {
        for s in &splits {
            s.validate(self.num_vertices)?;
        }
        self.splits = splits;
        Ok(self)
    }

    /// Neighbor lists from the original adjacency (no self-loops).
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_vertices];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    /// The 0/1 adjacency matrix A (no self-loops).
    pub fn adjacency(&self) -> SparseMatrix {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_vertices];
        for &(i, j) in &self.edges {
            rows[i].push((j, 1.0));
            rows[j].push((i, 1.0));
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(j, _)| j);
        }
        SparseMatrix::from_sorted_rows(self.num_vertices, rows)
    }

    /// SHA-256 over the canonical bundle content, for manifests and caching.
    pub fn content_hash(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.num_vertices as u64).to_le_bytes());
        for &(i, j) in &self.edges {
            h.update((i as u64).to_le_bytes());
            h.update((j as u64).to_le_bytes());
        }
        for v in self.features.iter() {
            h.update(v.to_le_bytes());
        }
        for &l in &self.labels {
            h.update((l as u64).to_le_bytes());
        }
        for s in &self.splits {
            for part in [&s.train_idx, &s.val_idx, &s.test_idx] {
                for &v in part {
                    h.update((v as u64).to_le_bytes());
                }
                h.update([0xaa]);
            }
        }
        h.finalize().into()
    }
}

/// `L = D^{-1/2} (A + I) D^{-1/2}` where D is the degree matrix of A + I.
/// Symmetric with spectrum in [-1, 1] and strictly positive diagonal.
pub fn normalized_operator(g: &GraphDataset) -> SparseMatrix {
    let n = g.num_vertices();
    let mut degrees = vec![1.0f64; n]; // self-loop
    for &(i, j) in g.edges() {
        degrees[i] += 1.0;
        degrees[j] += 1.0;
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for v in 0..n {
        rows[v].push((v, 1.0 / degrees[v]));
    }
    for &(i, j) in g.edges() {
        let w = 1.0 / (degrees[i] * degrees[j]).sqrt();
        rows[i].push((j, w));
        rows[j].push((i, w));
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|&(j, _)| j);
    }
    SparseMatrix::from_sorted_rows(n, rows)
}

/// Mean over vertices of the fraction of neighbors sharing the vertex label.
/// Neighborhoods come from the original adjacency; isolated vertices
/// contribute zero.
pub fn homophily(g: &GraphDataset) -> f64 {
    if g.num_vertices() == 0 {
        return 0.0;
    }
    let labels = g.labels();
    let mut same = vec![0usize; g.num_vertices()];
    let mut deg = vec![0usize; g.num_vertices()];
    for &(i, j) in g.edges() {
        deg[i] += 1;
        deg[j] += 1;
        if labels[i] == labels[j] {
            same[i] += 1;
            same[j] += 1;
        }
    }
    let total: f64 = (0..g.num_vertices())
        .map(|v| {
            if deg[v] == 0 {
                0.0
            } else {
                same[v] as f64 / deg[v] as f64
            }
        })
        .sum();
    total / g.num_vertices() as f64
}

/// Number of splits produced by [`generate_random_splits`].
pub const NUM_RANDOM_SPLITS: usize = 10;

/// Ten deterministic per-class stratified splits. Fractions apply per class
/// with largest-remainder rounding so the global part sizes match
/// `round(fraction * N)` as closely as stratification allows.
pub fn generate_random_splits(
    g: &GraphDataset,
    seed: u64,
    fractions: (f64, f64, f64),
) -> Result<Vec<Split>> {
    let (ft, fv, fe) = fractions;
    if ft <= 0.0 || fv <= 0.0 || fe <= 0.0 {
        return Err(Error::InvalidParam {
            name: "fractions",
            message: "all fractions must be positive".into(),
        });
    }
    if ft + fv + fe > 1.0 + 1e-12 {
        return Err(Error::InvalidParam {
            name: "fractions",
            message: format!("fractions sum to {} > 1", ft + fv + fe),
        });
    }
    let num_classes = g.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (v, &l) in g.labels().iter().enumerate() {
        by_class[l].push(v);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < 3 {
            return Err(Error::InvalidSplit(format!(
                "class {c} has {} members; stratified splits need at least 3",
                members.len()
            )));
        }
    }
    let seeds = SeedStream::new(seed);
    let mut splits = Vec::with_capacity(NUM_RANDOM_SPLITS);
    for s in 0..NUM_RANDOM_SPLITS {
        let mut rng = seeds.rng("split", s as u64);
        let mut train = Vec::new();
        let mut val = Vec::new();
        let mut test = Vec::new();
        // Per-class counts by largest remainder, with one vertex per part
        // guaranteed.
        let mut class_counts: Vec<(usize, usize, usize)> = Vec::with_capacity(num_classes);
        for members in &by_class {
            let m = members.len();
            let counts = apportion(m, [ft, fv, fe]);
            class_counts.push((counts[0], counts[1], counts[2]));
        }
        for (members, &(nt, nv, ne)) in by_class.iter().zip(&class_counts) {
            let mut shuffled = members.clone();
            shuffled.shuffle(&mut rng);
            train.extend_from_slice(&shuffled[..nt]);
            val.extend_from_slice(&shuffled[nt..nt + nv]);
            test.extend_from_slice(&shuffled[nt + nv..nt + nv + ne]);
        }
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        let split = Split {
            train_idx: train,
            val_idx: val,
            test_idx: test,
        };
        split.validate(g.num_vertices())?;
        splits.push(split);
    }
    Ok(splits)
}

/// Splits `m` items into three parts proportional to `fractions`, flooring
/// then distributing the remainder by largest fractional part, with at least
/// one item per part. The part sizes sum to round(m * sum(fractions)).
fn apportion(m: usize, fractions: [f64; 3]) -> [usize; 3] {
    let total_frac: f64 = fractions.iter().sum();
    let target = (m as f64 * total_frac).round() as usize;
    let raw: Vec<f64> = fractions.iter().map(|f| m as f64 * f).collect();
    let mut counts: Vec<usize> = raw.iter().map(|&r| r.floor() as usize).collect();
    let mut rem: Vec<(f64, usize)> = raw
        .iter()
        .enumerate()
        .map(|(k, &r)| (r - r.floor(), k))
        .collect();
    rem.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let assigned: usize = counts.iter().sum();
    for i in 0..target.saturating_sub(assigned) {
        counts[rem[i % 3].1] += 1;
    }
    // Guarantee one per part by stealing from the largest.
    for k in 0..3 {
        while counts[k] == 0 {
            let largest = (0..3).max_by_key(|&j| counts[j]).unwrap();
            if counts[largest] <= 1 {
                break;
            }
            counts[largest] -= 1;
            counts[k] += 1;
        }
    }
    [counts[0], counts[1], counts[2]]
}

/// Reads a graph bundle directory. Duplicate edges and self-loops are dropped
/// and counted rather than rejected.
pub fn load_graph_bundle(dir: &Path) -> Result<(GraphDataset, IngestStats)> {
    let edges_path = dir.join("edges.tsv");
    let features_path = dir.join("features.csv");
    let labels_path = dir.join("labels.txt");
    let splits_path = dir.join("splits.json");

    let features = read_features(&features_path)?;
    let labels = read_labels(&labels_path)?;
    let n = labels.len();
    if features.nrows() != n {
        return Err(Error::InvalidGraph(format!(
            "features.csv has {} rows but labels.txt has {} entries",
            features.nrows(),
            n
        )));
    }

    let mut stats = IngestStats::default();
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    let file = fs::File::open(&edges_path).map_err(|e| Error::io(&edges_path, e))?;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&edges_path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.ok_or_else(|| Error::parse(&edges_path, lineno + 1, "expected i<TAB>j"))?
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::parse(&edges_path, lineno + 1, e.to_string()))
        };
        let i = parse(parts.next())?;
        let j = parse(parts.next())?;
        if i >= n || j >= n {
            return Err(Error::parse(
                &edges_path,
                lineno + 1,
                format!("vertex index out of range: ({i}, {j}) with N={n}"),
            ));
        }
        if i == j {
            stats.dropped_self_loops += 1;
            continue;
        }
        let pair = (i.min(j), i.max(j));
        if seen.insert(pair) {
            edges.push(pair);
        } else {
            stats.dropped_duplicate_edges += 1;
        }
    }

    let splits = if splits_path.exists() {
        let text = fs::read_to_string(&splits_path).map_err(|e| Error::io(&splits_path, e))?;
        serde_json::from_str::<Vec<Split>>(&text).map_err(|e| Error::parse(&splits_path, 0, e.to_string()))?
    } else {
        Vec::new()
    };

    let dataset = GraphDataset::new(n, edges, features, labels, splits)?;
    Ok((dataset, stats))
}

/// Writes the canonical bundle files; the output reloads bit-identically.
pub fn save_graph_bundle(g: &GraphDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let edges_path = dir.join("edges.tsv");
    let mut w = BufWriter::new(fs::File::create(&edges_path).map_err(|e| Error::io(&edges_path, e))?);
    for &(i, j) in g.edges() {
        writeln!(w, "{i}\t{j}").map_err(|e| Error::io(&edges_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&edges_path, e))?;

    let features_path = dir.join("features.csv");
    let mut w =
        BufWriter::new(fs::File::create(&features_path).map_err(|e| Error::io(&features_path, e))?);
    for row in g.features().rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(&features_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&features_path, e))?;

    let labels_path = dir.join("labels.txt");
    let mut w = BufWriter::new(fs::File::create(&labels_path).map_err(|e| Error::io(&labels_path, e))?);
    for &l in g.labels() {
        writeln!(w, "{l}").map_err(|e| Error::io(&labels_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&labels_path, e))?;

    if !g.splits().is_empty() {
        let splits_path = dir.join("splits.json");
        let text = serde_json::to_string(g.splits()).expect("splits serialize");
        fs::write(&splits_path, text).map_err(|e| Error::io(&splits_path, e))?;
    }
    Ok(())
}

fn read_features(path: &Path) -> Result<Array2<f64>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    format!("expected {} columns, got {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, d), flat)
        .map_err(|e| Error::parse(path, 0, e.to_string()))
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        labels.push(
            line.parse::<usize>()
                .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?,
        );
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;

    pub(crate) fn tiny(num_vertices: usize, edges: &[(usize, usize)], labels: &[usize]) -> GraphDataset {
        let features = Array2::zeros((num_vertices, 2));
        GraphDataset::new(num_vertices, edges.to_vec(), features, labels.to_vec(), vec![]).unwrap()
    }

    #[test]
    fn normalized_operator_single_vertex() {
        let g = tiny(1, &[], &[0]);
        let l = normalized_operator(&g);
        assert_eq!(l.to_dense(), arr2(&[[1.0]]));
    }

    #[test]
    fn normalized_operator_two_vertices() {
        let g = tiny(2, &[(0, 1)], &[0, 0]);
        let l = normalized_operator(&g);
        assert_eq!(l.to_dense(), arr2(&[[0.5, 0.5], [0.5, 0.5]]));
    }

    #[test]
    fn normalized_operator_triangle() {
        let g = tiny(3, &[(0, 1), (1, 2), (0, 2)], &[0, 0, 0]);
        let l = normalized_operator(&g);
        let third = 1.0 / 3.0;
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(l.get(i, j), third, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn normalized_operator_exactly_symmetric() {
        let g = tiny(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)], &[0; 5]);
        let l = normalized_operator(&g);
        for i in 0..5 {
            for (j, v) in l.row(i) {
                assert_eq!(v, l.get(j, i));
            }
        }
    }

    #[test]
    fn homophily_two_connected_same_label() {
        let g = tiny(2, &[(0, 1)], &[0, 0]);
        assert_eq!(homophily(&g), 1.0);
    }

    #[test]
    fn homophily_isolated_vertex_contributes_zero() {
        let g = tiny(3, &[(0, 1)], &[0, 0, 1]);
        assert_abs_diff_eq!(homophily(&g), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn homophily_invariant_under_label_permutation() {
        let edges = [(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)];
        let labels = [0, 1, 0, 2];
        // permutation 0->2, 1->0, 2->1
        let permuted: Vec<usize> = labels.iter().map(|&l| [2, 0, 1][l]).collect();
        let a = tiny(4, &edges, &labels);
        let b = tiny(4, &edges, &permuted);
        assert_eq!(homophily(&a), homophily(&b));
    }

    #[test]
    fn dataset_rejects_bad_inputs() {
        let features = Array2::zeros((2, 1));
        assert!(GraphDataset::new(2, vec![(0, 0)], features.clone(), vec![0, 0], vec![]).is_err());
        assert!(GraphDataset::new(2, vec![(0, 2)], features.clone(), vec![0, 0], vec![]).is_err());
        assert!(GraphDataset::new(2, vec![], features.clone(), vec![0, 2], vec![]).is_err());
        assert!(GraphDataset::new(2, vec![], features, vec![0], vec![]).is_err());
    }

    #[test]
    fn splits_deterministic_and_sized() {
        let labels: Vec<usize> = (0..100).map(|v| v % 4).collect();
        let g = GraphDataset::new(
            100,
            vec![(0, 1)],
            Array2::zeros((100, 2)),
            labels,
            vec![],
        )
        .unwrap();
        let a = generate_random_splits(&g, 0, (0.48, 0.32, 0.20)).unwrap();
        let b = generate_random_splits(&g, 0, (0.48, 0.32, 0.20)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), NUM_RANDOM_SPLITS);
        for s in &a {
            assert_eq!(s.train_idx.len(), 48);
            assert_eq!(s.val_idx.len(), 32);
            assert_eq!(s.test_idx.len(), 20);
        }
        let c = generate_random_splits(&g, 1, (0.48, 0.32, 0.20)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn splits_reject_bad_fractions() {
        let g = tiny(6, &[(0, 1)], &[0, 0, 0, 1, 1, 1]);
        assert!(generate_random_splits(&g, 0, (0.6, 0.6, 0.2)).is_err());
        assert!(generate_random_splits(&g, 0, (0.0, 0.5, 0.2)).is_err());
    }

    #[test]
    fn splits_reject_tiny_class() {
        let g = tiny(5, &[(0, 1)], &[0, 0, 0, 1, 1]);
        assert!(generate_random_splits(&g, 0, (0.4, 0.3, 0.3)).is_err());
    }

    #[test]
    fn bundle_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let features = arr2(&[
            [0.125, -3.5, 1.0e-7],
            [2.0, 0.3333333333333333, 4.0],
            [-1.0, 0.0, 9.9e200],
        ]);
        let splits = vec![Split {
            train_idx: vec![0],
            val_idx: vec![1],
            test_idx: vec![2],
        }];
        let g = GraphDataset::new(3, vec![(1, 0), (1, 2)], features, vec![0, 1, 1], splits).unwrap();
        let first = dir.path().join("first");
        save_graph_bundle(&g, &first).unwrap();
        let (loaded, stats) = load_graph_bundle(&first).unwrap();
        assert_eq!(stats, IngestStats::default());
        assert_eq!(loaded, g);
        let second = dir.path().join("second");
        save_graph_bundle(&loaded, &second).unwrap();
        for name in ["edges.tsv", "features.csv", "labels.txt", "splits.json"] {
            let a = fs::read(first.join(name)).unwrap();
            let b = fs::read(second.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs");
        }
    }

    #[test]
    fn loader_drops_duplicates_and_self_loops() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("edges.tsv"), "0\t1\n1\t0\n1\t1\n0\t1\n").unwrap();
        fs::write(dir.path().join("features.csv"), "1.0,2.0,3.0\n4.0,5.0,6.0\n").unwrap();
        fs::write(dir.path().join("labels.txt"), "0\n1\n").unwrap();
        let (g, stats) = load_graph_bundle(dir.path()).unwrap();
        assert_eq!(g.num_vertices(), 2);
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.feature_dim(), 3);
        assert_eq!(stats.dropped_self_loops, 1);
        assert_eq!(stats.dropped_duplicate_edges, 2);
    }

    #[test]
    fn loader_errors_on_missing_file_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_graph_bundle(dir.path()).is_err());
        fs::write(dir.path().join("edges.tsv"), "0\t1\n").unwrap();
        fs::write(dir.path().join("features.csv"), "1.0\n2.0\n3.0\n").unwrap();
        fs::write(dir.path().join("labels.txt"), "0\n1\n").unwrap();
        let err = load_graph_bundle(dir.path()).unwrap_err();
        assert!(matches!(err, Error::InvalidGraph(_)), "{err}");
        fs::write(dir.path().join("features.csv"), "1.0\n2.0\n").unwrap();
        fs::write(dir.path().join("edges.tsv"), "0\t5\n").unwrap();
        assert!(load_graph_bundle(dir.path()).is_err());
    }
}
