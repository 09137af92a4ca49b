//! Spectral homophily curves, the random-search sweep harness, and split
//! aggregation.

use std::collections::BTreeMap;
use std::sync::Mutex;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gnn::{train, Combinator, Model, ModelArch, TowerConfig, TrainConfig, TrainRun};
use crate::graph::{homophily, normalized_operator, GraphDataset, Split};
use crate::kernel::{
    build_spectral_kernel, gdc_baseline, KernelFamily, KernelSpec, RewiredKernel, Sparsifier,
    DEFAULT_BLOCK_ROWS,
};
use crate::rng::SeedStream;
use crate::sparse::SparseMatrix;
use crate::spectral::{dense_eigensolve_with_limit, folded_eigensolve, FoldedOptions};
use crate::{Error, Result};

/// Entries of a filtered adjacency below this magnitude are dropped before
/// computing per-cluster homophily.
pub const CURVE_SPARSIFY_THRESHOLD: f64 = 1e-7;

/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const EIGENVALUE_CLUSTER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub eigenvalue: f64,
    pub homophily: f64,
    pub multiplicity: usize,
}

/// Homophily of the adjacency reconstructed from each unique eigenvalue's
/// eigenvectors, one point per eigenvalue cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralHomophilyCurve {
    pub points: Vec<CurvePoint>,
    pub global_homophily: f64,
    pub sparsify_threshold: f64,
}

/// Homophily over an explicit neighbor structure; isolated vertices
/// contribute zero.
fn support_homophily(labels: &[usize], neighbors: &[Vec<usize>]) -> f64 {
    let n = labels.len();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = (0..n)
        .map(|v| {
            if neighbors[v].is_empty() {
                return 0.0;
            }
            let same = neighbors[v]
                .iter()
                .filter(|&&u| labels[u] == labels[v])
                .count();
            same as f64 / neighbors[v].len() as f64
        })
        .sum();
    total / n as f64
}

/// Neighbor lists of the support of sum_a phi_a phi_a^T over `cols`, with
/// entries below the threshold and the diagonal removed.
fn projector_support(
    phi: &Array2<f64>,
    cols: std::ops::Range<usize>,
    threshold: f64,
) -> Vec<Vec<usize>> {
    let n = phi.nrows();
    let block = phi.slice(ndarray::s![.., cols.clone()]).to_owned();
    let mut neighbors = vec![Vec::new(); n];
    for i in 0..n {
        let ri = block.row(i);
        for j in (i + 1)..n {
            let value: f64 = ri
                .iter()
                .zip(block.row(j))
                .map(|(&a, &b)| a * b)
                .sum();
            if value.abs() >= threshold {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    neighbors
}

/// Builds the homophily-vs-eigenvalue curve from the full dense spectrum of
/// the normalized operator. Degenerate clusters report the mean homophily of
/// their single-eigenvector adjacencies.
pub fn spectral_homophily(g: &GraphDataset) -> Result<SpectralHomophilyCurve> {
    spectral_homophily_with_limit(g, crate::spectral::DEFAULT_DENSE_LIMIT)
}

pub fn spectral_homophily_with_limit(
    g: &GraphDataset,
    dense_limit: usize,
) -> Result<SpectralHomophilyCurve> {
    let l = normalized_operator(g);
    let es = dense_eigensolve_with_limit(&l, dense_limit)?;
    let labels = g.labels();
    let n = es.num_pairs();
    let mut points = Vec::new();
    let mut start = 0usize;
    while start < n {
        let mut end = start + 1;
        while end < n && es.eigenvalues[end] - es.eigenvalues[end - 1] <= EIGENVALUE_CLUSTER_TOL {
            end += 1;
        }
        let multiplicity = end - start;
        let homophily = if multiplicity == 1 {
            let support =
                projector_support(&es.eigenvectors, start..end, CURVE_SPARSIFY_THRESHOLD);
            support_homophily(labels, &support)
        } else {
            let mut acc = 0.0;
            for col in start..end {
                let support =
                    projector_support(&es.eigenvectors, col..col + 1, CURVE_SPARSIFY_THRESHOLD);
                acc += support_homophily(labels, &support);
            }
            acc / multiplicity as f64
        };
        let eigenvalue =
            es.eigenvalues[start..end].iter().sum::<f64>() / multiplicity as f64;
        points.push(CurvePoint {
            eigenvalue,
            homophily,
            multiplicity,
        });
        start = end;
    }
    Ok(SpectralHomophilyCurve {
        points,
        global_homophily: homophily(g),
        sparsify_threshold: CURVE_SPARSIFY_THRESHOLD,
    })
}

/// Arithmetic mean and population standard deviation of per-split test
/// accuracies.
pub fn aggregate_splits(accuracies: &[f64]) -> Result<(f64, f64)> {
    if accuracies.len() < 2 {
        return Err(Error::InvalidParam {
            name: "accuracies",
            message: "aggregation needs at least 2 runs".into(),
        });
    }
    let n = accuracies.len() as f64;
    let mean = accuracies.iter().sum::<f64>() / n;
    let var = accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Gcn,
    GcnQdc,
    GcnBpdc,
    GcnGdc,
    GcnMultiscaleQdc,
}

impl ModelFamily {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "gcn" => Ok(ModelFamily::Gcn),
            "gcn+qdc" => Ok(ModelFamily::GcnQdc),
            "gcn+bpdc" => Ok(ModelFamily::GcnBpdc),
            "gcn+gdc" => Ok(ModelFamily::GcnGdc),
            "gcn+multiscale-qdc" | "gcn+msqdc" => Ok(ModelFamily::GcnMultiscaleQdc),
            other => Err(Error::InvalidParam {
                name: "model",
                message: format!(
                    "unknown family `{other}`; expected gcn, gcn+qdc, gcn+bpdc, gcn+gdc, \
                     or gcn+multiscale-qdc"
                ),
            }),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelFamily::Gcn => "gcn",
            ModelFamily::GcnQdc => "gcn+qdc",
            ModelFamily::GcnBpdc => "gcn+bpdc",
            ModelFamily::GcnGdc => "gcn+gdc",
            ModelFamily::GcnMultiscaleQdc => "gcn+multiscale-qdc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(usize),
    Float(f64),
    Choice(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            ParamValue::Int(v) => *v as f64,
            ParamValue::Float(v) => *v,
            ParamValue::Choice(_) => f64::NAN,
        }
    }

    pub fn as_usize(&self) -> usize {
        match self {
            ParamValue::Int(v) => *v,
            ParamValue::Float(v) => *v as usize,
            ParamValue::Choice(_) => 0,
        }
    }
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Choice(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamDistribution {
    Categorical(Vec<ParamValue>),
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
}

impl ParamDistribution {
    pub fn sample(&self, rng: &mut impl Rng) -> ParamValue {
        match self {
            ParamDistribution::Categorical(options) => {
                let i = rng.gen_range(0..options.len());
                options[i].clone()
            }
            ParamDistribution::Uniform { lo, hi } => ParamValue::Float(rng.gen_range(*lo..*hi)),
            ParamDistribution::LogUniform { lo, hi } => {
                let u = rng.gen_range(lo.ln()..hi.ln());
                ParamValue::Float(u.exp())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<(String, ParamDistribution)>,
}

fn ints(values: &[usize]) -> ParamDistribution {
    ParamDistribution::Categorical(values.iter().map(|&v| ParamValue::Int(v)).collect())
}

const LAYER_CHOICES: &[usize] = &[1, 2];
const HIDDEN_CHOICES: &[usize] = &[2, 4, 8, 16, 32, 64, 128];

/// The tuned parameters and ranges for each model family.
pub fn search_space(family: ModelFamily) -> SearchSpace {
    let mut params: Vec<(String, ParamDistribution)> = Vec::new();
    let tower = |prefix: &str, params: &mut Vec<(String, ParamDistribution)>| {
        params.push((format!("{prefix}num_layers"), ints(LAYER_CHOICES)));
        params.push((format!("{prefix}hidden_dim"), ints(HIDDEN_CHOICES)));
        params.push((
            format!("{prefix}dropout"),
            ParamDistribution::Uniform { lo: 0.0, hi: 0.99 },
        ));
    };
    match family {
        ModelFamily::Gcn => tower("", &mut params),
        ModelFamily::GcnQdc => {
            tower("", &mut params);
            params.push(("mu".into(), ParamDistribution::Uniform { lo: -1.0, hi: 1.0 }));
            params.push(("sigma".into(), ParamDistribution::Uniform { lo: 0.1, hi: 1.0 }));
            params.push((
                "eps".into(),
                ParamDistribution::LogUniform { lo: 1e-7, hi: 1e-1 },
            ));
        }
        ModelFamily::GcnBpdc => {
            tower("", &mut params);
            params.push(("mu".into(), ParamDistribution::Uniform { lo: -1.0, hi: 1.0 }));
            params.push(("gamma".into(), ParamDistribution::Uniform { lo: 0.1, hi: 1.0 }));
            params.push((
                "eps".into(),
                ParamDistribution::LogUniform { lo: 1e-7, hi: 1e-1 },
            ));
        }
        ModelFamily::GcnGdc => {
            tower("", &mut params);
            params.push((
                "alpha".into(),
                ParamDistribution::Uniform { lo: 0.001, hi: 0.5 },
            ));
            params.push((
                "eps".into(),
                ParamDistribution::Uniform { lo: 1e-7, hi: 1e-1 },
            ));
        }
        ModelFamily::GcnMultiscaleQdc => {
            tower("gcn_", &mut params);
            tower("qdc_", &mut params);
            params.push(("mu".into(), ParamDistribution::Uniform { lo: -1.0, hi: 1.0 }));
            params.push(("sigma".into(), ParamDistribution::Uniform { lo: 0.1, hi: 1.0 }));
            params.push((
                "eps".into(),
                ParamDistribution::LogUniform { lo: 1e-7, hi: 1e-1 },
            ));
            params.push((
                "combinator".into(),
                ParamDistribution::Categorical(vec![
                    ParamValue::Choice("concat".into()),
                    ParamValue::Choice("add".into()),
                ]),
            ));
        }
    }
    params.push((
        "lr".into(),
        ParamDistribution::LogUniform { lo: 1e-4, hi: 1e-1 },
    ));
    params.push((
        "weight_decay".into(),
        ParamDistribution::Uniform { lo: 0.0, hi: 0.9 },
    ));
    SearchSpace { params }
}

/// Draws every parameter in declaration order.
pub fn sample_space(space: &SearchSpace, rng: &mut impl Rng) -> BTreeMap<String, ParamValue> {
    space
        .params
        .iter()
        .map(|(name, dist)| (name.clone(), dist.sample(rng)))
        .collect()
}

/// A sampled configuration resolved into model architecture, optional kernel,
/// and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSetup {
    pub arch: ModelArch,
    pub kernel: Option<KernelSpec>,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

pub fn resolve_trial(
    family: ModelFamily,
    draws: &BTreeMap<String, ParamValue>,
) -> Result<TrialSetup> {
    let get = |name: &str| -> Result<&ParamValue> {
        draws.get(name).ok_or_else(|| Error::InvalidParam {
            name: "draws",
            message: format!("missing parameter `{name}`"),
        })
    };
    let tower = |prefix: &str| -> Result<TowerConfig> {
        Ok(TowerConfig {
            num_layers: get(&format!("{prefix}num_layers"))?.as_usize(),
            hidden_dim: get(&format!("{prefix}hidden_dim"))?.as_usize(),
            dropout: get(&format!("{prefix}dropout"))?.as_f64(),
        })
    };
    let learning_rate = get("lr")?.as_f64();
    let weight_decay = get("weight_decay")?.as_f64();
    let threshold = |eps: f64| Sparsifier::Threshold { eps };
    let (arch, kernel) = match family {
        ModelFamily::Gcn => (ModelArch::Single(tower("")?), None),
        ModelFamily::GcnQdc => (
            ModelArch::Single(tower("")?),
            Some(KernelSpec {
                family: KernelFamily::Gaussian {
                    mu: get("mu")?.as_f64(),
                    sigma: get("sigma")?.as_f64(),
                },
                sparsify: threshold(get("eps")?.as_f64()),
                eigen_budget: None,
            }),
        ),
        ModelFamily::GcnBpdc => (
            ModelArch::Single(tower("")?),
            Some(KernelSpec {
                family: KernelFamily::Bandpass {
                    mu: get("mu")?.as_f64(),
                    gamma: get("gamma")?.as_f64(),
                },
                sparsify: threshold(get("eps")?.as_f64()),
                eigen_budget: None,
            }),
        ),
        ModelFamily::GcnGdc => (
            ModelArch::Single(tower("")?),
            Some(KernelSpec {
                family: KernelFamily::Ppr {
                    alpha: get("alpha")?.as_f64(),
                },
                sparsify: threshold(get("eps")?.as_f64()),
                eigen_budget: None,
            }),
        ),
        ModelFamily::GcnMultiscaleQdc => {
            let combinator = match get("combinator")? {
                ParamValue::Choice(c) if c == "add" => Combinator::Add,
                ParamValue::Choice(c) if c == "concat" => Combinator::Concat,
                other => {
                    return Err(Error::InvalidParam {
                        name: "combinator",
                        message: format!("expected concat or add, got {other}"),
                    })
                }
            };
            let gcn_tower = tower("gcn_")?;
            let mut qdc_tower = tower("qdc_")?;
            if combinator == Combinator::Add {
                // Add requires equal widths; the left tower's draw wins.
                qdc_tower.hidden_dim = gcn_tower.hidden_dim;
            }
            (
                ModelArch::Multiscale {
                    towers: [gcn_tower, qdc_tower],
                    combinator,
                },
                Some(KernelSpec {
                    family: KernelFamily::Gaussian {
                        mu: get("mu")?.as_f64(),
                        sigma: get("sigma")?.as_f64(),
                    },
                    sparsify: threshold(get("eps")?.as_f64()),
                    eigen_budget: None,
                }),
            )
        }
    };
    Ok(TrialSetup {
        arch,
        kernel,
        learning_rate,
        weight_decay,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum TrialStatus {
    Ok,
    Failed(String),
}

/// One sweep trial: the sampled configuration with accuracy statistics over
/// all splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub draws: BTreeMap<String, ParamValue>,
    pub setup: TrialSetup,
    pub status: TrialStatus,
    pub val_mean: f64,
    pub val_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
}

/// Trials ranked by mean validation accuracy; failed trials are kept aside
/// so the total count is preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub family: ModelFamily,
    pub total_trials: usize,
    pub ranked: Vec<Trial>,
    pub failed: Vec<Trial>,
}

impl Leaderboard {
    pub fn best(&self) -> Option<&Trial> {
        self.ranked.first()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub trials: usize,
    pub seed: u64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub folded: FoldedOptions,
    pub block_rows: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            trials: 250,
            seed: 0,
            max_epochs: 1000,
            early_stop_patience: 50,
            folded: FoldedOptions::default(),
            block_rows: DEFAULT_BLOCK_ROWS,
        }
    }
}

/// Shared eigensystem store so trials that need the same band solve it once.
struct EigenStore<'a> {
    l: &'a SparseMatrix,
    folded: FoldedOptions,
    budget: usize,
    cache: Mutex<BTreeMap<u64, std::sync::Arc<crate::spectral::EigenSystem>>>,
}

impl<'a> EigenStore<'a> {
    fn new(l: &'a SparseMatrix, folded: FoldedOptions, budget: usize) -> Self {
        EigenStore {
            l,
            folded,
            budget,
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    fn get(&self, mu: f64) -> Result<std::sync::Arc<crate::spectral::EigenSystem>> {
        // With a full-spectrum budget the band does not depend on mu.
        let key = if self.budget == self.l.dim() {
            0u64
        } else {
            mu.to_bits()
        };
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let solve_mu = if self.budget == self.l.dim() { 0.0 } else { mu };
        let es = folded_eigensolve(self.l, solve_mu, self.budget, &self.folded)?;
        let es = std::sync::Arc::new(es);
        self.cache.lock().unwrap().insert(key, es.clone());
        Ok(es)
    }
}

fn build_trial_kernel(
    l: &SparseMatrix,
    spec: &KernelSpec,
    store: &EigenStore<'_>,
    block_rows: usize,
) -> Result<RewiredKernel> {
    match spec.family {
        KernelFamily::Gaussian { mu, .. } | KernelFamily::Bandpass { mu, .. } => {
            let es = store.get(mu)?;
            build_spectral_kernel(&es, spec, block_rows)
        }
        _ => gdc_baseline(l, spec),
    }
}

/// Runs `opts.trials` independently sampled trials, each trained on every
/// split, and ranks them by mean validation accuracy. Deterministic in
/// `opts.seed`; trial failures are recorded, not fatal.
pub fn run_search(
    family: ModelFamily,
    g: &GraphDataset,
    splits: &[Split],
    opts: &SearchOptions,
) -> Result<Leaderboard> {
    if splits.is_empty() {
        return Err(Error::InvalidSplit("sweep needs at least one split".into()));
    }
    let space = search_space(family);
    let l = normalized_operator(g);
    let budget = KernelSpec {
        family: KernelFamily::Gaussian { mu: 0.0, sigma: 1.0 },
        sparsify: Sparsifier::Threshold { eps: 0.0 },
        eigen_budget: None,
    }
    .resolved_budget(g.num_vertices());
    let store = EigenStore::new(&l, opts.folded, budget);
    let seeds = SeedStream::new(opts.seed);

    let trials: Vec<Trial> = (0..opts.trials)
        .into_par_iter()
        .map(|index| {
            let mut sampler = seeds.rng("sampler", index as u64);
            let draws = sample_space(&space, &mut sampler);
            let setup = resolve_trial(family, &draws).expect("space and resolver agree");
            let trial_seeds = seeds.substream("trial", index as u64);
            match evaluate_trial(g, &l, &setup, splits, &store, opts, &trial_seeds) {
                Ok((val, test)) => {
                    let (val_mean, val_std) = mean_std(&val);
                    let (test_mean, test_std) = mean_std(&test);
                    Trial {
                        index,
                        draws,
                        setup,
                        status: TrialStatus::Ok,
                        val_mean,
                        val_std,
                        test_mean,
                        test_std,
                    }
                }
                Err(err) => Trial {
                    index,
                    draws,
                    setup,
                    status: TrialStatus::Failed(err.to_string()),
                    val_mean: f64::NAN,
                    val_std: f64::NAN,
                    test_mean: f64::NAN,
                    test_std: f64::NAN,
                },
            }
        })
        .collect();

    let (mut ranked, failed): (Vec<Trial>, Vec<Trial>) = trials
        .into_iter()
        .partition(|t| t.status == TrialStatus::Ok);
    ranked.sort_by(|a, b| {
        b.val_mean
            .total_cmp(&a.val_mean)
            .then(a.index.cmp(&b.index))
    });
    Ok(Leaderboard {
        family,
        total_trials: opts.trials,
        ranked,
        failed,
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.len() < 2 {
        let mean = values.first().copied().unwrap_or(f64::NAN);
        return (mean, 0.0);
    }
    aggregate_splits(values).expect("length checked")
}

fn evaluate_trial(
    g: &GraphDataset,
    l: &SparseMatrix,
    setup: &TrialSetup,
    splits: &[Split],
    store: &EigenStore<'_>,
    opts: &SearchOptions,
    trial_seeds: &SeedStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let kernel = match &setup.kernel {
        Some(spec) => Some(build_trial_kernel(l, spec, store, opts.block_rows)?),
        None => None,
    };
    let props: Vec<&SparseMatrix> = match (&setup.arch, &kernel) {
        (ModelArch::Single(_), None) => vec![l],
        (ModelArch::Single(_), Some(k)) => vec![&k.matrix],
        (ModelArch::Multiscale { .. }, Some(k)) => vec![l, &k.matrix],
        (ModelArch::Multiscale { .. }, None) => {
            return Err(Error::InvalidParam {
                name: "kernel",
                message: "multiscale model needs a kernel".into(),
            })
        }
    };
    let model = Model::new(setup.arch.clone(), props)?;
    let mut val = Vec::with_capacity(splits.len());
    let mut test = Vec::with_capacity(splits.len());
    for (s, split) in splits.iter().enumerate() {
        let tc = TrainConfig {
            learning_rate: setup.learning_rate,
            weight_decay: setup.weight_decay,
            max_epochs: opts.max_epochs,
            early_stop_patience: opts.early_stop_patience,
            seed: trial_seeds.rng("train-seed", s as u64).next_u64(),
            ..TrainConfig::default()
        };
        let run: TrainRun = train(&model, g.features(), g.labels(), split, &tc)?;
        val.push(run.best_val_accuracy);
        test.push(run.test_accuracy);
    }
    Ok((val, test))
}
