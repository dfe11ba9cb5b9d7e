//! Feed-forward network used for every node classifier and the flat baseline.
//!
//! ReLU hidden layers, softmax output, mean cross-entropy loss with an
//! optional L2 penalty on weights (biases are not penalized). Everything is
//! `f64`. Weight matrices are stored `(fan_in, fan_out)` so a batch forward
//! pass is `X · W + b` with samples as rows.

use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hidden layer widths of every classifier unless configured otherwise.
pub const DEFAULT_HIDDEN: [usize; 2] = [200, 100];

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("invalid layer sizes {0:?}: input >= 1, hidden >= 1, output >= 2")]
    InvalidDimension(Vec<usize>),
    #[error("expected input of width {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("{inputs} inputs but {labels} labels")]
    LengthMismatch { inputs: usize, labels: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite parameter after epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MlpError {
    pub fn code(&self) -> &'static str {
        match self {
            MlpError::InvalidDimension(_) => "E_MLP_INVALID_DIMENSION",
            MlpError::DimensionMismatch { .. } => "E_MLP_DIMENSION_MISMATCH",
            MlpError::LabelOutOfRange { .. } => "E_MLP_LABEL_OUT_OF_RANGE",
            MlpError::EmptyBatch => "E_MLP_EMPTY_BATCH",
            MlpError::LengthMismatch { .. } => "E_MLP_LENGTH_MISMATCH",
            MlpError::InvalidConfig(_) => "E_MLP_INVALID_CONFIG",
            MlpError::NonFinite { .. } => "E_MLP_NON_FINITE",
            MlpError::Format(_) => "E_MLP_FORMAT",
            MlpError::Io(_) => "E_IO",
            MlpError::Json(_) => "E_JSON",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    /// Adaptive moment estimation with bias correction.
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    /// Plain gradient descent.
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub l2: f64,
    pub hidden: Vec<usize>,
    /// Weight each sample's loss by `n / (k * n_class)`.
    pub class_weighting: bool,
    /// Standardize features per dimension using training-set statistics.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 50,
            seed: 0,
            optimizer: Optimizer::default(),
            l2: 1e-4,
            hidden: DEFAULT_HIDDEN.to_vec(),
            class_weighting: false,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |m: &str| Err(MlpError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if let Optimizer::Adam { beta1, beta2, epsilon } = self.optimizer {
            if !(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0) {
                return bad("beta1 and beta2 must lie in (0, 1)");
            }
            if epsilon.is_nan() || epsilon <= 0.0 {
                return bad("epsilon must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    /// Flattened in the same order as [`Mlp::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

/// `[input_dim, 200, 100, output_dim]` network with seeded He-scaled weights.
pub fn init_mlp(input_dim: usize, output_dim: usize, seed: u64) -> Result<Mlp, MlpError> {
    let mut sizes = vec![input_dim];
    sizes.extend(DEFAULT_HIDDEN);
    sizes.push(output_dim);
    Mlp::new(&sizes, seed)
}

/// Trains `model` and returns it along with the per-epoch mean loss.
pub fn train_mlp(
    mut model: Mlp,
    x: ArrayView2<f64>,
    y: &[usize],
    config: &TrainConfig,
) -> Result<(Mlp, Vec<f64>), MlpError> {
    let history = model.train(x, y, config)?;
    Ok((model, history))
}

fn check_sizes(sizes: &[usize]) -> Result<(), MlpError> {
    let ok = sizes.len() >= 2 && sizes.iter().all(|&s| s >= 1) && *sizes.last().unwrap() >= 2;
    if ok {
        Ok(())
    } else {
        Err(MlpError::InvalidDimension(sizes.to_vec()))
    }
}

impl Mlp {
    /// Random network with the given layer sizes (input first, output last).
    /// Hidden layers use He initialization, the output layer `1/fan_in`
    /// variance; biases start at zero.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self, MlpError> {
        check_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_layers = layer_sizes.len() - 1;
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let gain = if l + 1 == n_layers { 1.0 } else { 2.0 };
            let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).unwrap();
            weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| normal.sample(&mut rng)));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// All-zero network. Its output is the uniform distribution.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self, MlpError> {
        check_sizes(layer_sizes)?;
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            weights: layer_sizes
                .windows(2)
                .map(|p| Array2::zeros((p[0], p[1])))
                .collect(),
            biases: layer_sizes[1..].iter().map(|&n| Array1::zeros(n)).collect(),
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    /// Flattened parameters: each layer's weights (row-major) then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), MlpError> {
        if params.len() != self.param_count() {
            return Err(MlpError::DimensionMismatch {
                expected: self.param_count(),
                found: params.len(),
            });
        }
        let mut it = params.iter();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|p| *p = *it.next().unwrap());
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<(), MlpError> {
        if x.ncols() != self.input_dim() {
            return Err(MlpError::DimensionMismatch {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    /// Pre-activations of every layer; hidden ones are stored after ReLU.
    fn forward(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let n_layers = self.weights.len();
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let mut z = if l == 0 {
                x.dot(&self.weights[l])
            } else {
                acts[l - 1].dot(&self.weights[l])
            };
            z += &self.biases[l];
            if l + 1 < n_layers {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    /// Output logits for a batch of rows.
    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, MlpError> {
        self.check_input(&x)?;
        Ok(self.forward(x).pop().unwrap())
    }

    pub fn predict_proba_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, MlpError> {
        let mut z = self.logits(x)?;
        for mut row in z.rows_mut() {
            softmax_in_place(row.as_slice_mut().unwrap());
        }
        Ok(z)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        let view = ArrayView2::from_shape((1, x.len()), x).unwrap();
        Ok(self.predict_proba_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Mean (optionally class-weighted) cross-entropy plus `l2/2 * ||W||^2`,
    /// with its gradient by backpropagation.
    pub fn loss_and_gradient(
        &self,
        x: ArrayView2<f64>,
        y: &[usize],
        l2: f64,
        class_weights: Option<&[f64]>,
    ) -> Result<(f64, Gradients), MlpError> {
        self.check_input(&x)?;
        let n = x.nrows();
        if n == 0 {
            return Err(MlpError::EmptyBatch);
        }
        if y.len() != n {
            return Err(MlpError::LengthMismatch {
                inputs: n,
                labels: y.len(),
            });
        }
        let k = self.output_dim();
        if let Some(&label) = y.iter().find(|&&c| c >= k) {
            return Err(MlpError::LabelOutOfRange { label, classes: k });
        }
        if let Some(w) = class_weights {
            if w.len() != k {
                return Err(MlpError::DimensionMismatch {
                    expected: k,
                    found: w.len(),
                });
            }
        }
        let sample_w = |i: usize| class_weights.map_or(1.0, |w| w[y[i]]);
        let total_w: f64 = (0..n).map(sample_w).sum();

        let acts = self.forward(x);
        let logits = acts.last().unwrap();

        // delta = dLoss/dlogits
        let mut delta = Array2::<f64>::zeros((n, k));
        let mut data_loss = 0.0;
        for (i, (z, mut d)) in logits.rows().into_iter().zip(delta.rows_mut()).enumerate() {
            let z = z.as_slice().unwrap();
            let lse = log_sum_exp(z);
            let wi = sample_w(i) / total_w;
            data_loss += wi * (lse - z[y[i]]);
            for (dj, &zj) in d.iter_mut().zip(z) {
                *dj = wi * (zj - lse).exp();
            }
            d[y[i]] -= wi;
        }
        let penalty: f64 = self.weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum();
        let loss = data_loss + 0.5 * l2 * penalty;

        let n_layers = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); n_layers];
        let mut gb = vec![Array1::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            let mut dw = if l == 0 {
                x.t().dot(&delta)
            } else {
                acts[l - 1].t().dot(&delta)
            };
            if l2 > 0.0 {
                dw.scaled_add(l2, &self.weights[l]);
            }
            gw[l] = dw;
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut prev = delta.dot(&self.weights[l].t());
                Zip::from(&mut prev).and(&acts[l - 1]).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
        }
        Ok((loss, Gradients { weights: gw, biases: gb }))
    }

    /// Mini-batch training. Returns the mean loss of each epoch, measured on
    /// each batch before its update.
    pub fn train(
        &mut self,
        x: ArrayView2<f64>,
        y: &[usize],
        config: &TrainConfig,
    ) -> Result<Vec<f64>, MlpError> {
        self.train_weighted(x, y, config, None)
    }

    pub fn train_weighted(
        &mut self,
        x: ArrayView2<f64>,
        y: &[usize],
        config: &TrainConfig,
        class_weights: Option<&[f64]>,
    ) -> Result<Vec<f64>, MlpError> {
        config.validate()?;
        self.check_input(&x)?;
        let n = x.nrows();
        if y.len() != n {
            return Err(MlpError::LengthMismatch {
                inputs: n,
                labels: y.len(),
            });
        }
        if n == 0 {
            return Err(MlpError::EmptyBatch);
        }
        let k = self.output_dim();
        if let Some(&label) = y.iter().find(|&&c| c >= k) {
            return Err(MlpError::LabelOutOfRange { label, classes: k });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut opt = OptimizerState::new(self, config.optimizer);
        let mut order: Vec<usize> = (0..n).collect();
        let mut history = Vec::with_capacity(config.epochs);
        let bs = config.batch_size.min(n);
        let mut bx = Array2::<f64>::zeros((bs, x.ncols()));
        let mut by = vec![0usize; bs];

        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(bs) {
                let m = chunk.len();
                for (r, &i) in chunk.iter().enumerate() {
                    bx.row_mut(r).assign(&x.row(i));
                    by[r] = y[i];
                }
                let (loss, grads) =
                    self.loss_and_gradient(bx.slice(s![..m, ..]), &by[..m], config.l2, class_weights)?;
                epoch_loss += loss * m as f64;
                opt.step(self, &grads, config.learning_rate);
            }
            if !self.all_finite() {
                return Err(MlpError::NonFinite { epoch });
            }
            history.push(epoch_loss / n as f64);
        }
        Ok(history)
    }

    pub fn to_file(&self, labels: Vec<String>, config: Option<TrainConfig>) -> MlpFile {
        MlpFile {
            format: MLP_FORMAT.to_string(),
            version: MLP_VERSION,
            layer_sizes: self.layer_sizes.clone(),
            labels,
            config,
            weights: self
                .weights
                .iter()
                .map(|w| w.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: self.biases.iter().map(|b| b.to_vec()).collect(),
        }
    }

    pub fn from_file(file: &MlpFile) -> Result<Self, MlpError> {
        if file.format != MLP_FORMAT {
            return Err(MlpError::Format(format!("unexpected format tag {:?}", file.format)));
        }
        if file.version != MLP_VERSION {
            return Err(MlpError::Format(format!("unsupported version {}", file.version)));
        }
        check_sizes(&file.layer_sizes)?;
        let n_layers = file.layer_sizes.len() - 1;
        if file.weights.len() != n_layers || file.biases.len() != n_layers {
            return Err(MlpError::Format("layer count does not match layer_sizes".into()));
        }
        if file.labels.len() != *file.layer_sizes.last().unwrap() {
            return Err(MlpError::Format("label count does not match output width".into()));
        }
        let mut mlp = Mlp::zeros(&file.layer_sizes)?;
        for l in 0..n_layers {
            let (fi, fo) = (file.layer_sizes[l], file.layer_sizes[l + 1]);
            if file.weights[l].len() != fi
                || file.weights[l].iter().any(|r| r.len() != fo)
                || file.biases[l].len() != fo
            {
                return Err(MlpError::Format(format!("layer {l} has the wrong shape")));
            }
            for (i, row) in file.weights[l].iter().enumerate() {
                mlp.weights[l].row_mut(i).assign(&Array1::from(row.clone()));
            }
            mlp.biases[l] = Array1::from(file.biases[l].clone());
        }
        Ok(mlp)
    }
}

pub const MLP_FORMAT: &str = "reefhc-mlp";
pub const MLP_VERSION: u32 = 1;

/// Versioned, self-describing JSON container for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpFile {
    pub format: String,
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    /// Output label ordering.
    pub labels: Vec<String>,
    pub config: Option<TrainConfig>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MlpError> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MlpError> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

enum OptimizerState {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        t: i32,
        m: Gradients,
        v: Gradients,
    },
}

impl OptimizerState {
    fn new(model: &Mlp, opt: Optimizer) -> Self {
        match opt {
            Optimizer::Sgd => OptimizerState::Sgd,
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let zeros = Gradients {
                    weights: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
                    biases: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
                };
                OptimizerState::Adam {
                    beta1,
                    beta2,
                    epsilon,
                    t: 0,
                    m: zeros.clone(),
                    v: zeros,
                }
            }
        }
    }

    fn step(&mut self, model: &mut Mlp, g: &Gradients, lr: f64) {
        match self {
            OptimizerState::Sgd => {
                for (w, gw) in model.weights.iter_mut().zip(&g.weights) {
                    w.scaled_add(-lr, gw);
                }
                for (b, gb) in model.biases.iter_mut().zip(&g.biases) {
                    b.scaled_add(-lr, gb);
                }
            }
            OptimizerState::Adam { beta1, beta2, epsilon, t, m, v } => {
                *t += 1;
                let (b1, b2, eps) = (*beta1, *beta2, *epsilon);
                let c1 = 1.0 - b1.powi(*t);
                let c2 = 1.0 - b2.powi(*t);
                let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                };
                for l in 0..model.weights.len() {
                    Zip::from(&mut model.weights[l])
                        .and(&g.weights[l])
                        .and(&mut m.weights[l])
                        .and(&mut v.weights[l])
                        .for_each(|p, &g, m, v| update(p, g, m, v));
                    Zip::from(&mut model.biases[l])
                        .and(&g.biases[l])
                        .and(&mut m.biases[l])
                        .and(&mut v.biases[l])
                        .for_each(|p, &g, m, v| update(p, g, m, v));
                }
            }
        }
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Softmax with max subtraction.
pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `n / (k * n_c)` per class, zero for classes without samples.
pub fn inverse_frequency_weights(y: &[usize], classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; classes];
    for &c in y {
        counts[c] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count().max(1);
    counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { y.len() as f64 / (present * c) as f64 })
        .collect()
}

/// Per-dimension affine standardization fit on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per column; constant columns
    /// get scale 1.
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let mut var = Array1::<f64>::zeros(x.ncols());
        for row in x.rows() {
            Zip::from(&mut var).and(&row).and(&mean).for_each(|v, &a, &m| *v += (a - m) * (a - m));
        }
        let scale = var.mapv(|v| {
            let sd = (v / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        });
        Standardizer {
            mean: mean.to_vec(),
            scale: scale.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &mut Array2<f64>) {
        for mut row in x.rows_mut() {
            self.transform_row(row.as_slice_mut().unwrap());
        }
    }

    pub fn transform_row(&self, x: &mut [f64]) {
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = (*v - m) / s;
        }
    }
}
