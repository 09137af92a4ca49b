//! Adam with decoupled weight decay, the training loop, and gradient
//! checking against central finite differences.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::gnn::model::{accuracy, softmax_cross_entropy, Grads, Model, Params};
use crate::graph::Split;
use crate::rng::SeedStream;
use crate::{Error, Result};

/// Adam moment settings; decay is decoupled and scaled by the learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

struct AdamState {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
}

impl AdamState {
    fn new(params: &Params) -> Self {
        let zeros: Vec<Array2<f64>> = params
            .tensors()
            .iter()
            .map(|w| Array2::zeros(w.dim()))
            .collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(
        &mut self,
        params: &mut Params,
        grads: &Grads,
        lr: f64,
        weight_decay: f64,
        cfg: &AdamConfig,
    ) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for ((w, g), (m, v)) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(&mut *w)
                .and(g)
                .and(&mut *m)
                .and(&mut *v)
                .for_each(|w, &g, m, v| {
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w -= lr * (m_hat / (v_hat.sqrt() + cfg.eps) + weight_decay * *w);
                });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            weight_decay: 0.0,
            max_epochs: 1000,
            early_stop_patience: 50,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 {
            return Err(Error::InvalidParam {
                name: "learning_rate",
                message: "learning rate must be non-negative".into(),
            });
        }
        if self.early_stop_patience >= self.max_epochs {
            return Err(Error::InvalidParam {
                name: "early_stop_patience",
                message: "patience must be below max_epochs".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

/// Outcome of one training run. Test accuracy is evaluated exactly once, on
/// the parameters restored from the best-validation epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub test_accuracy: f64,
    pub wall_time_ms: u64,
}

/// Full-batch training with early stopping on validation accuracy.
/// Deterministic given `tc.seed`; divergence (non-finite loss) is an error,
/// not a panic.
pub fn train(
    model: &Model<'_>,
    features: &Array2<f64>,
    labels: &[usize],
    split: &Split,
    tc: &TrainConfig,
) -> Result<TrainRun> {
    tc.validate()?;
    let start = std::time::Instant::now();
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let seeds = SeedStream::new(tc.seed);
    let mut init_rng = seeds.rng("init", 0);
    let mut dropout_rng = seeds.rng("dropout", 0);
    let mut params = model.init_params(features.ncols(), num_classes, &mut init_rng);
    let mut adam = AdamState::new(&params);

    let mut epochs = Vec::new();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = params.clone();
    let mut since_best = 0usize;

    for epoch in 0..tc.max_epochs {
        let pass = model.forward(features, &params, Some(&mut dropout_rng))?;
        let (loss, dlogits) = softmax_cross_entropy(&pass.logits, labels, &split.train_idx);
        if !loss.is_finite() {
            return Err(Error::TrainDiverged { epoch });
        }
        let grads = model.backward(&pass, &dlogits, &params);
        adam.step(&mut params, &grads, tc.learning_rate, tc.weight_decay, &tc.adam);

        let eval = model.forward(features, &params, None)?;
        let val_acc = accuracy(&eval.logits, labels, &split.val_idx);
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_accuracy: val_acc,
        });
        if val_acc > best_val {
            best_val = val_acc;
            best_epoch = epoch;
            best_params = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= tc.early_stop_patience {
                break;
            }
        }
    }

    let eval = model.forward(features, &best_params, None)?;
    let test_accuracy = accuracy(&eval.logits, labels, &split.test_idx);
    Ok(TrainRun {
        epochs,
        best_epoch,
        best_val_accuracy: best_val,
        test_accuracy,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

/// Compares analytic gradients with central finite differences on a random
/// sample of parameter coordinates (all of them if the model is smaller than
/// `samples`). Dropout must be off, which holds because evaluation mode is
/// used throughout. Returns the worst relative error.
pub fn gradient_check(
    model: &Model<'_>,
    features: &Array2<f64>,
    labels: &[usize],
    idx: &[usize],
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let seeds = SeedStream::new(seed);
    let mut init_rng = seeds.rng("init", 0);
    let mut params = model.init_params(features.ncols(), num_classes, &mut init_rng);

    let pass = model.forward(features, &params, None)?;
    let (_, dlogits) = softmax_cross_entropy(&pass.logits, labels, idx);
    let grads = model.backward(&pass, &dlogits, &params);

    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let mut coords: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .flat_map(|(t, &len)| (0..len).map(move |i| (t, i)))
        .collect();
    let mut pick_rng = seeds.rng("coords", 0);
    coords.shuffle(&mut pick_rng);
    coords.truncate(samples.min(coords.len()).max(1));

    let loss_at = |params: &Params| -> Result<f64> {
        let pass = model.forward(features, params, None)?;
        Ok(softmax_cross_entropy(&pass.logits, labels, idx).0)
    };

    let mut worst = 0.0f64;
    for (t, flat) in coords {
        let original = {
            let tensors = params.tensors();
            *tensors[t].as_slice().expect("contiguous").get(flat).unwrap()
        };
        set_coord(&mut params, t, flat, original + epsilon);
        let plus = loss_at(&params)?;
        set_coord(&mut params, t, flat, original - epsilon);
        let minus = loss_at(&params)?;
        set_coord(&mut params, t, flat, original);
        let fd = (plus - minus) / (2.0 * epsilon);
        let analytic = grads.tensors()[t].as_slice().expect("contiguous")[flat];
        let denom = (analytic.abs() + fd.abs()).max(1e-8);
        worst = worst.max((analytic - fd).abs() / denom);
    }
    Ok(worst)
}

fn set_coord(params: &mut Params, tensor: usize, flat: usize, value: f64) {
    let mut tensors = params.tensors_mut();
    tensors[tensor].as_slice_mut().expect("contiguous")[flat] = value;
}
