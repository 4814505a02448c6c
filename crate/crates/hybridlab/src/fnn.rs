//! Minimal feedforward neural network: dense layers, ReLU hidden
//! activations, linear output, input z-score normalization, and mini-batch
//! stochastic gradient descent (plain or adaptive-moment) on an MSE cost.
//!
//! Training is single-threaded and bit-deterministic for a fixed seed.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-input-feature normalization statistics, frozen at train time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(dim: usize) -> Self {
        NormStats { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Column-wise mean and population std; near-constant columns get
    /// std = 1 so normalization stays well defined.
    pub fn from_data(x: &Array2<f64>) -> Self {
        let n = x.nrows() as f64;
        let mean: Vec<f64> = x.mean_axis(Axis(0)).unwrap().to_vec();
        let std: Vec<f64> = x
            .axis_iter(Axis(1))
            .zip(&mean)
            .map(|(col, &m)| {
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                let s = var.sqrt();
                if s < 1e-12 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        NormStats { mean, std }
    }

    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::Argument(format!(
                "normalize: expected {} features, got {}",
                self.mean.len(),
                x.len()
            )));
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 2000,
            seed: 0,
            validation_fraction: 0.1,
            patience: 50,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Argument("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be >= 1".into()));
        }
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return Err(Error::Argument("validation_fraction must be in [0, 0.5]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Dense feedforward network. `weights[l]` has shape (out, in); hidden
/// layers use ReLU, the output layer is linear. Raw inputs are normalized
/// with `norm` before the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FnnModelData", into = "FnnModelData")]
pub struct FnnModel {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub norm: NormStats,
}

/// Serialized form with nested row-major weight arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FnnModelData {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    norm_stats: NormStats,
}

impl TryFrom<FnnModelData> for FnnModel {
    type Error = Error;
    fn try_from(d: FnnModelData) -> Result<Self> {
        let weights = d
            .weights
            .into_iter()
            .map(|w| {
                let rows = w.len();
                let cols = w.first().map_or(0, |r| r.len());
                if w.iter().any(|r| r.len() != cols) {
                    return Err(Error::Data("ragged weight matrix".into()));
                }
                Array2::from_shape_vec((rows, cols), w.into_iter().flatten().collect())
                    .map_err(|e| Error::Data(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let biases = d.biases.into_iter().map(Array1::from_vec).collect();
        let model = FnnModel { layer_sizes: d.layer_sizes, weights, biases, norm: d.norm_stats };
        model.check_shapes()?;
        Ok(model)
    }
}

impl From<FnnModel> for FnnModelData {
    fn from(m: FnnModel) -> Self {
        FnnModelData {
            layer_sizes: m.layer_sizes,
            weights: m
                .weights
                .iter()
                .map(|w| w.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: m.biases.iter().map(|b| b.to_vec()).collect(),
            norm_stats: m.norm,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub d_weights: Vec<Array2<f64>>,
    pub d_biases: Vec<Array1<f64>>,
}

impl FnnModel {
    /// Fan-in-scaled uniform initialization, seeded.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Argument("layer_sizes needs >= 2 nonzero entries".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = 1.0 / (n_in as f64).sqrt();
            let mut m = Array2::zeros((n_out, n_in));
            for v in m.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
            weights.push(m);
            biases.push(Array1::zeros(n_out));
        }
        Ok(FnnModel {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            norm: NormStats::identity(layer_sizes[0]),
        })
    }

    fn check_shapes(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.weights.len() != self.layer_sizes.len() - 1 {
            return Err(Error::Data("layer/weight count mismatch".into()));
        }
        for (l, w) in self.weights.iter().enumerate() {
            if w.nrows() != self.layer_sizes[l + 1] || w.ncols() != self.layer_sizes[l] {
                return Err(Error::Data(format!("weight {l} shape mismatch")));
            }
            if self.biases[l].len() != self.layer_sizes[l + 1] {
                return Err(Error::Data(format!("bias {l} shape mismatch")));
            }
        }
        if self.norm.mean.len() != self.layer_sizes[0] || self.norm.std.len() != self.layer_sizes[0] {
            return Err(Error::Data("norm stats dimension mismatch".into()));
        }
        if self.norm.std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Data("norm std must be > 0".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Forward pass on one raw (unnormalized) input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite input to forward".into()));
        }
        let xn = self.norm.normalize(x)?;
        let mut z = Array1::from_vec(xn);
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            z = w.dot(&z) + b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
        }
        Ok(z.to_vec())
    }

    /// Forward pass on a batch of raw inputs (rows = samples).
    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_batch_cached(x)?.0)
    }

    /// Returns (output, per-layer post-activations of normalized input).
    fn forward_batch_cached(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Vec<Array2<f64>>)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Argument(format!(
                "forward: expected {} input columns, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        let mut zn = x.clone();
        for (mut col, (m, s)) in zn.axis_iter_mut(Axis(1)).zip(self.norm.mean.iter().zip(&self.norm.std)) {
            col.mapv_inplace(|v| (v - m) / s);
        }
        let mut acts = vec![zn];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts.last().unwrap().dot(&w.t()) + b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        let out = acts.last().unwrap().clone();
        Ok((out, acts))
    }

    /// Mean squared error (1/N) sum ||y_i - f(x_i)||^2 over a batch.
    pub fn mse_loss(&self, x: &Array2<f64>, y: &Array2<f64>) -> Result<f64> {
        if x.nrows() == 0 {
            return Err(Error::Argument("empty batch".into()));
        }
        if x.nrows() != y.nrows() || y.ncols() != self.output_dim() {
            return Err(Error::Argument("batch shape mismatch".into()));
        }
        let pred = self.forward_batch(x)?;
        let diff = &pred - y;
        Ok(diff.iter().map(|v| v * v).sum::<f64>() / x.nrows() as f64)
    }

    /// Exact gradient of `mse_loss` with respect to every weight and bias.
    /// The ReLU subgradient at 0 is taken as 0.
    pub fn backward(&self, x: &Array2<f64>, y: &Array2<f64>) -> Result<Gradients> {
        if x.nrows() == 0 {
            return Err(Error::Argument("empty batch".into()));
        }
        if x.nrows() != y.nrows() || y.ncols() != self.output_dim() {
            return Err(Error::Argument("batch shape mismatch".into()));
        }
        let n = x.nrows() as f64;
        let (pred, acts) = self.forward_batch_cached(x)?;
        // delta for the linear output layer
        let mut delta = (&pred - y) * (2.0 / n);
        let layers = self.weights.len();
        let mut d_weights = vec![Array2::zeros((0, 0)); layers];
        let mut d_biases = vec![Array1::zeros(0); layers];
        for l in (0..layers).rev() {
            // force standard layout so flat indexing lines up with weights
            d_weights[l] = delta.t().dot(&acts[l]).as_standard_layout().to_owned();
            d_biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l]);
                // acts[l] is the ReLU output of layer l; positive output
                // identifies positive pre-activation
                back.zip_mut_with(&acts[l], |d, a| {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        Ok(Gradients { d_weights, d_biases })
    }
}

/// Trains with mini-batch gradient descent. Normalization statistics are
/// computed from the training split only and frozen into the returned
/// model, which is the best-validation-loss snapshot over all epochs.
pub fn train(
    mut model: FnnModel,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    cfg: &TrainConfig,
) -> Result<(FnnModel, Vec<EpochStats>)> {
    cfg.validate()?;
    if inputs.nrows() == 0 {
        return Err(Error::Argument("empty training set".into()));
    }
    if inputs.nrows() != targets.nrows() {
        return Err(Error::Argument("inputs/targets length mismatch".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = inputs.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64) * cfg.validation_fraction).floor() as usize;
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();

    let x_train = inputs.select(Axis(0), &train_idx);
    let y_train = targets.select(Axis(0), &train_idx);
    let x_val = inputs.select(Axis(0), &val_idx);
    let y_val = targets.select(Axis(0), &val_idx);

    model.norm = NormStats::from_data(&x_train);

    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut since_best = 0usize;
    let mut history = Vec::new();

    // adaptive-moment state
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m_w: Vec<Array2<f64>> = model.weights.iter().map(|w| Array2::zeros(w.dim())).collect();
    let mut v_w: Vec<Array2<f64>> = model.weights.iter().map(|w| Array2::zeros(w.dim())).collect();
    let mut m_b: Vec<Array1<f64>> = model.biases.iter().map(|b| Array1::zeros(b.len())).collect();
    let mut v_b: Vec<Array1<f64>> = model.biases.iter().map(|b| Array1::zeros(b.len())).collect();
    let mut step = 0u64;

    let mut batch_order: Vec<usize> = (0..x_train.nrows()).collect();
    for epoch in 0..cfg.epochs {
        batch_order.shuffle(&mut rng);
        for chunk in batch_order.chunks(cfg.batch_size) {
            let xb = x_train.select(Axis(0), chunk);
            let yb = y_train.select(Axis(0), chunk);
            let grads = model.backward(&xb, &yb)?;
            step += 1;
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (w, dw) in model.weights.iter_mut().zip(&grads.d_weights) {
                        w.scaled_add(-cfg.learning_rate, dw);
                    }
                    for (b, db) in model.biases.iter_mut().zip(&grads.d_biases) {
                        b.scaled_add(-cfg.learning_rate, db);
                    }
                }
                Optimizer::Adam => {
                    let bc1 = 1.0 - beta1.powi(step as i32);
                    let bc2 = 1.0 - beta2.powi(step as i32);
                    for l in 0..model.weights.len() {
                        let dw = &grads.d_weights[l];
                        m_w[l].zip_mut_with(dw, |m, g| *m = beta1 * *m + (1.0 - beta1) * g);
                        v_w[l].zip_mut_with(dw, |v, g| *v = beta2 * *v + (1.0 - beta2) * g * g);
                        let lr = cfg.learning_rate;
                        ndarray::Zip::from(&mut model.weights[l])
                            .and(&m_w[l])
                            .and(&v_w[l])
                            .for_each(|w, m, v| {
                                *w -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
                            });
                        let db = &grads.d_biases[l];
                        m_b[l].zip_mut_with(db, |m, g| *m = beta1 * *m + (1.0 - beta1) * g);
                        v_b[l].zip_mut_with(db, |v, g| *v = beta2 * *v + (1.0 - beta2) * g * g);
                        ndarray::Zip::from(&mut model.biases[l])
                            .and(&m_b[l])
                            .and(&v_b[l])
                            .for_each(|b, m, v| {
                                *b -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
                            });
                    }
                }
            }
        }
        let train_loss = model.mse_loss(&x_train, &y_train)?;
        if !train_loss.is_finite() {
            return Err(Error::TrainingFailure { epoch, loss: train_loss });
        }
        let val_loss = if x_val.nrows() > 0 { Some(model.mse_loss(&x_val, &y_val)?) } else { None };
        history.push(EpochStats { epoch, train_loss, val_loss });
        let monitored = val_loss.unwrap_or(train_loss);
        if monitored < best_loss {
            best_loss = monitored;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                break;
            }
        }
    }
    if history.is_empty() {
        // zero-epochs config returns the initialized model unchanged
        // (aside from the frozen normalization statistics)
        best = model;
    }
    Ok((best, history))
}
