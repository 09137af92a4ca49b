//! Model architecture, parameters, and the hand-derived forward/backward
//! passes.
//!
//! A propagation layer computes `A = S drop(H) W`; hidden layers apply ReLU,
//! the final single-tower layer stays linear, and multiscale towers feed a
//! linear readout after combining. Dropout uses inverted scaling and is drawn
//! only in training mode.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::sparse::SparseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combinator {
    Concat,
    Add,
}

/// Depth, width, and dropout of one message-passing tower.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TowerConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
}

impl TowerConfig {
    fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.num_layers > 2 {
            return Err(Error::InvalidParam {
                name: "num_layers",
                message: format!("supported depths are 1 and 2, got {}", self.num_layers),
            });
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidParam {
                name: "hidden_dim",
                message: "hidden dimension must be positive".into(),
            });
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParam {
                name: "dropout",
                message: format!("dropout must be in [0, 1), got {}", self.dropout),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum ModelArch {
    /// One tower whose final layer emits logits directly.
    Single(TowerConfig),
    /// Two towers over different propagation matrices, combined and fed to a
    /// linear readout.
    Multiscale {
        towers: [TowerConfig; 2],
        combinator: Combinator,
    },
}

impl ModelArch {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelArch::Single(t) => t.validate(),
            ModelArch::Multiscale { towers, combinator } => {
                towers[0].validate()?;
                towers[1].validate()?;
                if *combinator == Combinator::Add && towers[0].hidden_dim != towers[1].hidden_dim {
                    return Err(Error::DimensionMismatch(format!(
                        "add combinator needs equal tower widths, got {} and {}",
                        towers[0].hidden_dim, towers[1].hidden_dim
                    )));
                }
                Ok(())
            }
        }
    }

    fn num_towers(&self) -> usize {
        match self {
            ModelArch::Single(_) => 1,
            ModelArch::Multiscale { .. } => 2,
        }
    }
}

/// Architecture plus the propagation matrices it runs on.
pub struct Model<'a> {
    arch: ModelArch,
    props: Vec<&'a SparseMatrix>,
}

/// Weights, indexable in a fixed order (towers then readout) so the
/// optimizer and checkpoints see a flat list.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub towers: Vec<Vec<Array2<f64>>>,
    pub readout: Option<Array2<f64>>,
}

pub type Grads = Params;

impl Params {
    pub fn zeros_like(&self) -> Params {
        Params {
            towers: self
                .towers
                .iter()
                .map(|layers| layers.iter().map(|w| Array2::zeros(w.dim())).collect())
                .collect(),
            readout: self.readout.as_ref().map(|w| Array2::zeros(w.dim())),
        }
    }

    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut out: Vec<&Array2<f64>> = self.towers.iter().flatten().collect();
        if let Some(r) = &self.readout {
            out.push(r);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out: Vec<&mut Array2<f64>> = self.towers.iter_mut().flatten().collect();
        if let Some(r) = &mut self.readout {
            out.push(r);
        }
        out
    }

    pub fn named_tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = Vec::new();
        for (t, layers) in self.towers.iter().enumerate() {
            for (l, w) in layers.iter().enumerate() {
                out.push((format!("tower{t}.layer{l}.weight"), w));
            }
        }
        if let Some(r) = &self.readout {
            out.push(("readout.weight".to_string(), r));
        }
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

struct LayerStash {
    /// Inverted-scale dropout mask; absent in eval mode or at dropout 0.
    mask: Option<Array2<f64>>,
    /// Propagated post-dropout input S z.
    p: Array2<f64>,
    /// Pre-activation p W.
    a: Array2<f64>,
    relu: bool,
}

struct TowerStash {
    layers: Vec<LayerStash>,
}

/// Everything the backward pass needs from one forward evaluation.
pub struct ForwardPass {
    towers: Vec<TowerStash>,
    combined: Option<Array2<f64>>,
    pub logits: Array2<f64>,
}

impl<'a> Model<'a> {
    /// `props` carries one matrix for a single-tower model, two (left = the
    /// normalized operator, right = the rewired kernel) for multiscale.
    pub fn new(arch: ModelArch, props: Vec<&'a SparseMatrix>) -> Result<Self> {
        arch.validate()?;
        if props.len() != arch.num_towers() {
            return Err(Error::DimensionMismatch(format!(
                "{} propagation matrices for {} towers",
                props.len(),
                arch.num_towers()
            )));
        }
        if props.len() == 2 && props[0].dim() != props[1].dim() {
            return Err(Error::DimensionMismatch(
                "propagation matrices differ in size".into(),
            ));
        }
        Ok(Model { arch, props })
    }

    pub fn arch(&self) -> &ModelArch {
        &self.arch
    }

    pub fn num_vertices(&self) -> usize {
        self.props[0].dim()
    }

    fn tower_configs(&self) -> Vec<TowerConfig> {
        match &self.arch {
            ModelArch::Single(t) => vec![*t],
            ModelArch::Multiscale { towers, .. } => towers.to_vec(),
        }
    }

    /// Glorot-uniform initialization, drawn in fixed tensor order.
    pub fn init_params(&self, in_dim: usize, num_classes: usize, rng: &mut ChaCha8Rng) -> Params {
        let glorot = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
            let s = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-s..s))
        };
        let mut towers = Vec::new();
        for cfg in self.tower_configs() {
            let single = matches!(self.arch, ModelArch::Single(_));
            let mut layers = Vec::new();
            for l in 0..cfg.num_layers {
                let rows = if l == 0 { in_dim } else { cfg.hidden_dim };
                let last = l + 1 == cfg.num_layers;
                let cols = if single && last {
                    num_classes
                } else {
                    cfg.hidden_dim
                };
                layers.push(glorot(rows, cols, rng));
            }
            towers.push(layers);
        }
        let readout = match &self.arch {
            ModelArch::Single(_) => None,
            ModelArch::Multiscale { towers: t, combinator } => {
                let width = match combinator {
                    Combinator::Concat => t[0].hidden_dim + t[1].hidden_dim,
                    Combinator::Add => t[0].hidden_dim,
                };
                Some(glorot(width, num_classes, rng))
            }
        };
        Params { towers, readout }
    }

    /// Forward pass. `dropout_rng` enables training mode; masks are drawn in
    /// tower-major, layer-major order.
    pub fn forward(
        &self,
        x: &Array2<f64>,
        params: &Params,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardPass> {
        let n = self.num_vertices();
        if x.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "features have {} rows for {} vertices",
                x.nrows(),
                n
            )));
        }
        let configs = self.tower_configs();
        let single = matches!(self.arch, ModelArch::Single(_));
        let mut tower_stashes = Vec::with_capacity(configs.len());
        let mut tower_outputs = Vec::with_capacity(configs.len());
        for (t, cfg) in configs.iter().enumerate() {
            let weights = &params.towers[t];
            if weights.len() != cfg.num_layers {
                return Err(Error::DimensionMismatch(format!(
                    "tower {t} has {} weight tensors for {} layers",
                    weights.len(),
                    cfg.num_layers
                )));
            }
            let mut h = x.clone();
            let mut layers = Vec::with_capacity(cfg.num_layers);
            for (l, w) in weights.iter().enumerate() {
                if h.ncols() != w.nrows() {
                    return Err(Error::DimensionMismatch(format!(
                        "tower {t} layer {l}: input width {} vs weight rows {}",
                        h.ncols(),
                        w.nrows()
                    )));
                }
                let mask = match &mut dropout_rng {
                    Some(rng) if cfg.dropout > 0.0 => {
                        let keep = 1.0 - cfg.dropout;
                        Some(Array2::from_shape_fn(h.dim(), |_| {
                            if rng.gen::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        }))
                    }
                    _ => None,
                };
                let z = match &mask {
                    Some(m) => &h * m,
                    None => h.clone(),
                };
                let mut p = Array2::zeros(z.dim());
                self.props[t].matmul_dense(z.view(), &mut p);
                let a = p.dot(w);
                let last = l + 1 == cfg.num_layers;
                let relu = !(single && last);
                h = if relu { a.mapv(|v| v.max(0.0)) } else { a.clone() };
                layers.push(LayerStash { mask, p, a, relu });
            }
            tower_outputs.push(h);
            tower_stashes.push(TowerStash { layers });
        }

        let (combined, logits) = match &self.arch {
            ModelArch::Single(_) => (None, tower_outputs.pop().expect("one tower")),
            ModelArch::Multiscale { combinator, .. } => {
                let right = tower_outputs.pop().expect("two towers");
                let left = tower_outputs.pop().expect("two towers");
                let combined = match combinator {
                    Combinator::Concat => {
                        ndarray::concatenate(ndarray::Axis(1), &[left.view(), right.view()])
                            .expect("same row count")
                    }
                    Combinator::Add => &left + &right,
                };
                let readout = params.readout.as_ref().ok_or_else(|| {
                    Error::DimensionMismatch("multiscale model missing readout weight".into())
                })?;
                let logits = combined.dot(readout);
                (Some(combined), logits)
            }
        };
        Ok(ForwardPass {
            towers: tower_stashes,
            combined,
            logits,
        })
    }

    /// Reverse pass from d(loss)/d(logits).
    pub fn backward(&self, pass: &ForwardPass, dlogits: &Array2<f64>, params: &Params) -> Grads {
        let mut grads = params.zeros_like();
        let mut tower_douts: Vec<Array2<f64>> = Vec::with_capacity(pass.towers.len());
        match &self.arch {
            ModelArch::Single(_) => tower_douts.push(dlogits.clone()),
            ModelArch::Multiscale { towers, combinator } => {
                let combined = pass.combined.as_ref().expect("multiscale stash");
                let readout = params.readout.as_ref().expect("multiscale readout");
                *grads.readout.as_mut().expect("readout grad") = combined.t().dot(dlogits);
                let dcombined = dlogits.dot(&readout.t());
                match combinator {
                    Combinator::Concat => {
                        let w0 = towers[0].hidden_dim;
                        tower_douts
                            .push(dcombined.slice(ndarray::s![.., ..w0]).to_owned());
                        tower_douts
                            .push(dcombined.slice(ndarray::s![.., w0..]).to_owned());
                    }
                    Combinator::Add => {
                        tower_douts.push(dcombined.clone());
                        tower_douts.push(dcombined);
                    }
                }
            }
        }

        for (t, (stash, mut dh)) in pass
            .towers
            .iter()
            .zip(tower_douts.into_iter())
            .enumerate()
        {
            for (l, layer) in stash.layers.iter().enumerate().rev() {
                let da = if layer.relu {
                    let mut da = dh;
                    da.zip_mut_with(&layer.a, |g, &a| {
                        if a <= 0.0 {
                            *g = 0.0;
                        }
                    });
                    da
                } else {
                    dh
                };
                grads.towers[t][l] = layer.p.t().dot(&da);
                let dp = da.dot(&params.towers[t][l].t());
                let mut dz = Array2::zeros(dp.dim());
                self.props[t].matmul_dense(dp.view(), &mut dz);
                dh = match &layer.mask {
                    Some(m) => dz * m,
                    None => dz,
                };
            }
        }
        grads
    }
}

/// Mean softmax cross-entropy over `idx`; returns the loss and d(loss)/d(logits)
/// (zero outside `idx`).
pub fn softmax_cross_entropy(
    logits: &Array2<f64>,
    labels: &[usize],
    idx: &[usize],
) -> (f64, Array2<f64>) {
    assert!(!idx.is_empty(), "loss needs a non-empty index set");
    let mut dlogits = Array2::zeros(logits.dim());
    let scale = 1.0 / idx.len() as f64;
    let mut loss = 0.0;
    for &i in idx {
        let row = logits.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let sum_exp: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum_exp.ln();
        loss += (lse - row[labels[i]]) * scale;
        let mut drow = dlogits.row_mut(i);
        for (c, d) in drow.iter_mut().enumerate() {
            let p = (row[c] - lse).exp();
            *d = scale * (p - if c == labels[i] { 1.0 } else { 0.0 });
        }
    }
    (loss, dlogits)
}

/// Fraction of `idx` whose argmax logit matches the label; argmax ties go to
/// the lowest class id.
pub fn accuracy(logits: &Array2<f64>, labels: &[usize], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let correct = idx
        .iter()
        .filter(|&&i| {
            let row = logits.row(i);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best == labels[i]
        })
        .count();
    correct as f64 / idx.len() as f64
}
