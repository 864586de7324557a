use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batchnorm::{BatchNorm, BatchNormCache};
use super::conv::{conv2d_backward, conv2d_forward, maxpool2d_backward, maxpool2d_forward, ConvGeometry, PoolGeometry};
use super::dense::{dense_backward, dense_forward};
use super::loss::svm_hinge_loss;
use super::quantact::{quantact_backward, quantact_forward};
use super::tensor::Tensor;
use crate::data::{Batch, Dataset};
use crate::discrete::{DiscreteSpace, SurrogateSpec};
use crate::dst::{Adam, AdamConfig, DstHyper, DstLayer};
use crate::error::{Error, Result};

/// Serializable description of one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        weights: DiscreteSpace,
    },
    Conv2d {
        geometry: ConvGeometry,
        weights: DiscreteSpace,
    },
    MaxPool2d {
        geometry: PoolGeometry,
    },
    BatchNorm {
        features: usize,
        eps: f64,
        momentum: f64,
    },
    QuantAct {
        space: DiscreteSpace,
        surrogate: SurrogateSpec,
    },
    SvmHead {
        classes: usize,
    },
}

/// A layer with its parameters, accumulated gradients and forward cache.
#[derive(Clone, Debug)]
pub enum Layer {
    Dense {
        space: DiscreteSpace,
        weights: Tensor,
        grad: Option<Tensor>,
        input: Option<Tensor>,
    },
    Conv2d {
        geometry: ConvGeometry,
        space: DiscreteSpace,
        kernels: Tensor,
        grad: Option<Tensor>,
        input: Option<Tensor>,
    },
    MaxPool2d {
        geometry: PoolGeometry,
        cache: Option<(Vec<usize>, Vec<usize>)>,
    },
    BatchNorm {
        bn: BatchNorm,
        cache: Option<BatchNormCache>,
        grad: Option<(Vec<f64>, Vec<f64>)>,
    },
    QuantAct {
        space: DiscreteSpace,
        surrogate: SurrogateSpec,
        input: Option<Tensor>,
    },
    SvmHead {
        classes: usize,
    },
}

impl Layer {
    fn from_spec(spec: &LayerSpec) -> Self {
        match spec {
            LayerSpec::Dense { inputs, outputs, weights } => Layer::Dense {
                space: *weights,
                weights: Tensor::zeros(vec![*outputs, *inputs]),
                grad: None,
                input: None,
            },
            LayerSpec::Conv2d { geometry, weights } => Layer::Conv2d {
                geometry: *geometry,
                space: *weights,
                kernels: Tensor::zeros(vec![geometry.out_channels, geometry.in_channels, geometry.kernel, geometry.kernel]),
                grad: None,
                input: None,
            },
            LayerSpec::MaxPool2d { geometry } => Layer::MaxPool2d {
                geometry: *geometry,
                cache: None,
            },
            LayerSpec::BatchNorm { features, eps, momentum } => Layer::BatchNorm {
                bn: BatchNorm::new(*features, *eps, *momentum),
                cache: None,
                grad: None,
            },
            LayerSpec::QuantAct { space, surrogate } => Layer::QuantAct {
                space: *space,
                surrogate: *surrogate,
                input: None,
            },
            LayerSpec::SvmHead { classes } => Layer::SvmHead { classes: *classes },
        }
    }

    /// Grid-valued parameters, if any.
    pub fn grid_weights(&self) -> Option<(&Tensor, &DiscreteSpace)> {
        match self {
            Layer::Dense { weights, space, .. } => Some((weights, space)),
            Layer::Conv2d { kernels, space, .. } => Some((kernels, space)),
            _ => None,
        }
    }

    pub fn grid_weights_mut(&mut self) -> Option<(&mut Tensor, &DiscreteSpace)> {
        match self {
            Layer::Dense { weights, space, .. } => Some((weights, space)),
            Layer::Conv2d { kernels, space, .. } => Some((kernels, space)),
            _ => None,
        }
    }

    /// Gradient of the loss with respect to the grid weights from the last
    /// backward pass.
    pub fn weight_grad(&self) -> Option<&Tensor> {
        match self {
            Layer::Dense { grad, .. } | Layer::Conv2d { grad, .. } => grad.as_ref(),
            _ => None,
        }
    }

    /// Inference step; `stats` collects zero counts of quantized activations.
    pub fn infer(&self, x: &Tensor, stats: &mut ActivationStats) -> Result<Tensor> {
        match self {
            Layer::Dense { weights, .. } => dense_forward(x, weights),
            Layer::Conv2d { geometry, kernels, .. } => conv2d_forward(x, kernels, geometry),
            Layer::MaxPool2d { geometry, .. } => Ok(maxpool2d_forward(x, geometry)?.0),
            Layer::BatchNorm { bn, .. } => bn.infer(x),
            Layer::QuantAct { space, surrogate, .. } => {
                let y = quantact_forward(x, space, surrogate);
                stats.record(&y);
                Ok(y)
            }
            Layer::SvmHead { .. } => Ok(x.clone()),
        }
    }

    fn forward_train(&mut self, x: Tensor, stats: &mut ActivationStats) -> Result<Tensor> {
        match self {
            Layer::Dense { weights, input, .. } => {
                let y = dense_forward(&x, weights)?;
                *input = Some(x);
                Ok(y)
            }
            Layer::Conv2d { geometry, kernels, input, .. } => {
                let y = conv2d_forward(&x, kernels, geometry)?;
                *input = Some(x);
                Ok(y)
            }
            Layer::MaxPool2d { geometry, cache } => {
                let (y, arg) = maxpool2d_forward(&x, geometry)?;
                *cache = Some((x.shape().to_vec(), arg));
                Ok(y)
            }
            Layer::BatchNorm { bn, cache, .. } => {
                let (y, c) = bn.forward_train(&x)?;
                *cache = Some(c);
                Ok(y)
            }
            Layer::QuantAct { space, surrogate, input } => {
                let y = quantact_forward(&x, space, surrogate);
                stats.record(&y);
                *input = Some(x);
                Ok(y)
            }
            Layer::SvmHead { .. } => Ok(x),
        }
    }

    fn backward(&mut self, g: Tensor) -> Result<Tensor> {
        let missing = || Error::Input("backward called without a training forward pass".into());
        match self {
            Layer::Dense { weights, grad, input, .. } => {
                let x = input.as_ref().ok_or_else(missing)?;
                let (gin, gw) = dense_backward(x, weights, &g)?;
                *grad = Some(gw);
                Ok(gin)
            }
            Layer::Conv2d { geometry, kernels, grad, input, .. } => {
                let x = input.as_ref().ok_or_else(missing)?;
                let (gin, gk) = conv2d_backward(x, kernels, geometry, &g)?;
                *grad = Some(gk);
                Ok(gin)
            }
            Layer::MaxPool2d { cache, .. } => {
                let (shape, arg) = cache.as_ref().ok_or_else(missing)?;
                maxpool2d_backward(shape, arg, &g)
            }
            Layer::BatchNorm { bn, cache, grad } => {
                let c = cache.as_ref().ok_or_else(missing)?;
                let (gin, dg, db) = bn.backward(c, &g)?;
                *grad = Some((dg, db));
                Ok(gin)
            }
            Layer::QuantAct { space, surrogate, input } => {
                let x = input.as_ref().ok_or_else(missing)?;
                quantact_backward(&g, x, space, surrogate)
            }
            Layer::SvmHead { .. } => Ok(g),
        }
    }

    fn clear_cache(&mut self) {
        match self {
            Layer::Dense { input, .. } | Layer::Conv2d { input, .. } | Layer::QuantAct { input, .. } => *input = None,
            Layer::MaxPool2d { cache, .. } => *cache = None,
            Layer::BatchNorm { cache, .. } => *cache = None,
            Layer::SvmHead { .. } => {}
        }
    }
}

/// Zero counts over quantized activation outputs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ActivationStats {
    pub zeros: u64,
    pub total: u64,
}

impl ActivationStats {
    fn record(&mut self, y: &Tensor) {
        self.zeros += y.data().iter().filter(|&&v| v == 0.0).count() as u64;
        self.total += y.len() as u64;
    }

    pub fn merge(&mut self, other: &ActivationStats) {
        self.zeros += other.zeros;
        self.total += other.total;
    }

    /// Fraction of zero activations; 0 when no quantized layer ran.
    pub fn sparsity(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.zeros as f64 / self.total as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub sparsity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    pub loss: f64,
    pub correct: usize,
    pub samples: usize,
    pub sparsity: f64,
    pub weight_changes: usize,
}

/// Optimizer hyperparameters shared by every layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHyper {
    pub m: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// DST state for grid layers and plain Adam for batch-norm parameters.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub hyper: ModelHyper,
    seed: u64,
    iteration: u64,
    dst: Vec<Option<DstLayer>>,
    bn: Vec<Option<Adam>>,
}

impl Optimizer {
    pub fn new(model: &Model, hyper: ModelHyper, seed: u64) -> Self {
        let dst = model
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| l.grid_weights().map(|(w, _)| DstLayer::new(i as u64, w.len())))
            .collect();
        let bn = model
            .layers
            .iter()
            .map(|l| match l {
                Layer::BatchNorm { bn, .. } => Some(Adam::new(2 * bn.features())),
                _ => None,
            })
            .collect();
        Self {
            hyper,
            seed,
            iteration: 0,
            dst,
            bn,
        }
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.hyper.lr = lr;
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.hyper.lr,
            beta1: self.hyper.beta1,
            beta2: self.hyper.beta2,
            eps: self.hyper.eps,
        }
    }

    /// Apply the gradients stored in `model` by the last backward pass.
    pub fn apply(&mut self, model: &mut Model) -> Result<usize> {
        let adam = self.adam();
        let mut changes = 0;
        for (i, layer) in model.layers.iter_mut().enumerate() {
            match layer {
                Layer::Dense { space, weights, grad, .. } | Layer::Conv2d { space, kernels: weights, grad, .. } => {
                    let g = grad.as_ref().ok_or_else(|| Error::Input("missing weight gradient".into()))?;
                    let hyper = DstHyper {
                        m: self.hyper.m,
                        lr: self.hyper.lr,
                        beta1: self.hyper.beta1,
                        beta2: self.hyper.beta2,
                        eps: self.hyper.eps,
                        space: *space,
                    };
                    let dst = self.dst[i].as_mut().expect("optimizer built for this model");
                    changes += dst.step(weights.data_mut(), g.data(), &hyper, self.seed, self.iteration).changed;
                }
                Layer::BatchNorm { bn, grad, .. } => {
                    let (dg, db) = grad.as_ref().ok_or_else(|| Error::Input("missing batch-norm gradient".into()))?;
                    let f = bn.features();
                    let mut params: Vec<f64> = bn.gamma.iter().chain(&bn.beta).copied().collect();
                    let grads: Vec<f64> = dg.iter().chain(db).copied().collect();
                    self.bn[i].as_mut().expect("optimizer built for this model").step(&mut params, &grads, &adam);
                    bn.gamma.copy_from_slice(&params[..f]);
                    bn.beta.copy_from_slice(&params[f..]);
                }
                _ => {}
            }
        }
        self.iteration += 1;
        Ok(changes)
    }
}

/// A fixed sequence of layers ending in an SVM head.
#[derive(Clone, Debug)]
pub struct Model {
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    input_shape: Vec<usize>,
}

impl Model {
    /// `input_shape` is the per-sample shape, e.g. `[1, 28, 28]`.
    pub fn new(specs: Vec<LayerSpec>, input_shape: &[usize]) -> Result<Self> {
        let classes = match specs.last() {
            Some(LayerSpec::SvmHead { classes }) => *classes,
            _ => return Err(Error::Config("model must end with an SVM head".into())),
        };
        if specs[..specs.len() - 1].iter().any(|s| matches!(s, LayerSpec::SvmHead { .. })) {
            return Err(Error::Config("SVM head must be the last layer".into()));
        }
        if classes < 2 {
            return Err(Error::Config("SVM head needs at least 2 classes".into()));
        }
        let model = Self {
            layers: specs.iter().map(Layer::from_spec).collect(),
            specs,
            input_shape: input_shape.to_vec(),
        };
        // trace a single sample to validate every shape
        let mut probe = vec![1];
        probe.extend_from_slice(input_shape);
        let out = model.forward(&Tensor::zeros(probe))?;
        if out.shape() != [1, classes] {
            return Err(Error::dim(format!(
                "network produces {:?} but the SVM head expects [1, {classes}]",
                out.shape()
            )));
        }
        Ok(model)
    }

    /// `inputs → hidden… → classes`, each hidden block being
    /// dense → batch norm → quantized activation.
    pub fn mlp(
        inputs: usize,
        hidden: &[usize],
        classes: usize,
        weights: DiscreteSpace,
        activations: DiscreteSpace,
        surrogate: SurrogateSpec,
        bn: (f64, f64),
    ) -> Result<Self> {
        let mut specs = Vec::new();
        let mut fan_in = inputs;
        for &h in hidden {
            specs.push(LayerSpec::Dense { inputs: fan_in, outputs: h, weights });
            specs.push(LayerSpec::BatchNorm { features: h, eps: bn.0, momentum: bn.1 });
            specs.push(LayerSpec::QuantAct { space: activations, surrogate });
            fan_in = h;
        }
        specs.push(LayerSpec::Dense { inputs: fan_in, outputs: classes, weights });
        specs.push(LayerSpec::BatchNorm { features: classes, eps: bn.0, momentum: bn.1 });
        specs.push(LayerSpec::SvmHead { classes });
        Self::new(specs, &[inputs])
    }

    /// `16C5-MP2-32C5-MP2-128FC-SVM` for `1×28×28` inputs.
    pub fn conv_small(
        classes: usize,
        weights: DiscreteSpace,
        activations: DiscreteSpace,
        surrogate: SurrogateSpec,
        bn: (f64, f64),
    ) -> Result<Self> {
        let conv = |i, o| ConvGeometry { in_channels: i, out_channels: o, kernel: 5, stride: 1, padding: 0 };
        let pool = PoolGeometry { window: 2, stride: 2 };
        let (eps, momentum) = bn;
        let specs = vec![
            LayerSpec::Conv2d { geometry: conv(1, 16), weights },
            LayerSpec::MaxPool2d { geometry: pool },
            LayerSpec::BatchNorm { features: 16, eps, momentum },
            LayerSpec::QuantAct { space: activations, surrogate },
            LayerSpec::Conv2d { geometry: conv(16, 32), weights },
            LayerSpec::MaxPool2d { geometry: pool },
            LayerSpec::BatchNorm { features: 32, eps, momentum },
            LayerSpec::QuantAct { space: activations, surrogate },
            LayerSpec::Dense { inputs: 512, outputs: 128, weights },
            LayerSpec::BatchNorm { features: 128, eps, momentum },
            LayerSpec::QuantAct { space: activations, surrogate },
            LayerSpec::Dense { inputs: 128, outputs: classes, weights },
            LayerSpec::BatchNorm { features: classes, eps, momentum },
            LayerSpec::SvmHead { classes },
        ];
        Self::new(specs, &[1, 28, 28])
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn classes(&self) -> usize {
        match self.specs.last() {
            Some(LayerSpec::SvmHead { classes }) => *classes,
            _ => unreachable!("validated in Model::new"),
        }
    }

    /// Draw every grid weight uniformly from the states of its space.
    pub fn init_weights(&mut self, seed: u64) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            if let Some((w, space)) = layer.grid_weights_mut() {
                let states = space.states();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                for v in w.data_mut() {
                    *v = *states.choose(&mut rng).expect("non-empty space");
                }
            }
        }
    }

    /// True when every grid weight is a state of its space.
    pub fn weights_on_grid(&self) -> bool {
        self.layers.iter().filter_map(Layer::grid_weights).all(|(w, s)| w.data().iter().all(|&v| s.contains(v)))
    }

    /// Inference-mode scores: running batch-norm statistics, no caching.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_with_stats(x, &mut ActivationStats::default())
    }

    pub fn forward_with_stats(&self, x: &Tensor, stats: &mut ActivationStats) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.infer(&h, stats)?;
        }
        Ok(h)
    }

    /// Training-mode forward pass that caches what backward needs.
    pub fn forward_train(&mut self, x: &Tensor, stats: &mut ActivationStats) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward_train(h, stats)?;
        }
        Ok(h)
    }

    /// Propagate `dscores` back through the network, storing parameter
    /// gradients in each layer. Returns the gradient with respect to the input.
    pub fn backward(&mut self, dscores: &Tensor) -> Result<Tensor> {
        let mut g = dscores.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(g)?;
        }
        Ok(g)
    }

    /// Forward, squared hinge loss, backward and one optimizer update.
    pub fn train_step(&mut self, batch: &Batch, opt: &mut Optimizer) -> Result<StepMetrics> {
        let mut stats = ActivationStats::default();
        let scores = self.forward_train(&batch.images, &mut stats)?;
        let lg = svm_hinge_loss(&scores, &batch.labels)?;
        self.backward(&lg.dscores)?;
        let weight_changes = opt.apply(self)?;
        for layer in &mut self.layers {
            layer.clear_cache();
        }
        Ok(StepMetrics {
            loss: lg.loss,
            correct: count_correct(&scores, &batch.labels),
            samples: batch.labels.len(),
            sparsity: stats.sparsity(),
            weight_changes,
        })
    }

    /// Accuracy and activation sparsity over `dataset`, deterministic.
    pub fn evaluate(&self, dataset: &Dataset) -> Result<EvalReport> {
        self.evaluate_with(dataset, |x, stats| self.forward_with_stats(x, stats))
    }

    /// Evaluation driver shared with alternative inference paths.
    pub fn evaluate_with<F>(&self, dataset: &Dataset, mut infer: F) -> Result<EvalReport>
    where
        F: FnMut(&Tensor, &mut ActivationStats) -> Result<Tensor>,
    {
        const CHUNK: usize = 500;
        let n = dataset.len();
        let mut stats = ActivationStats::default();
        let mut correct = 0;
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let x = dataset.images.slice_rows(start, end);
            let scores = infer(&x, &mut stats)?;
            correct += count_correct(&scores, &dataset.labels[start..end]);
            start = end;
        }
        Ok(EvalReport {
            correct,
            total: n,
            accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
            sparsity: stats.sparsity(),
        })
    }
}

/// Index of the largest score per row; ties go to the lowest class index.
pub(crate) fn predict(scores: &Tensor) -> Vec<usize> {
    let c = scores.row_len();
    (0..scores.rows())
        .map(|b| {
            let row = scores.row(b);
            let mut best = 0;
            for k in 1..c {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

fn count_correct(scores: &Tensor, labels: &[usize]) -> usize {
    predict(scores).iter().zip(labels).filter(|(p, l)| p == l).count()
}
