use std::path::{Path, PathBuf};
use std::time::Instant;

use super::checkpoint;
use super::config::{DatasetId, NetworkId, RunConfig, SweepParam};
use super::metrics::{render_metrics, write_atomic, MetricsRecord};
use crate::data::{batches, load_mnist, synthetic_blobs, BlobsSpec, Dataset};
use crate::error::{Error, Result};
use crate::gxnor::{count_ops, Architecture, CostEstimate, OpReport, PackedInference, StateDistribution};
use crate::net::{ActivationStats, EvalReport, Layer, Model, Optimizer};

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const CHECKPOINT_FILE: &str = "model.gxnr";

/// Train and test splits for one run.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Dataset,
    pub test: Dataset,
}

/// Load the dataset a config asks for. `mnist_dir` is used when the config
/// does not name a directory itself.
pub fn load_data(config: &RunConfig, mnist_dir: Option<&Path>) -> Result<Splits> {
    let (train, test) = match config.dataset {
        DatasetId::Mnist => {
            let dir = config
                .data_dir
                .as_deref()
                .or(mnist_dir)
                .ok_or_else(|| Error::Data("no MNIST directory configured".into()))?;
            let files = load_mnist(dir)?;
            (files.train, files.test)
        }
        DatasetId::Blobs => {
            let spec = |n, seed| BlobsSpec {
                n,
                classes: config.blobs_classes,
                dim: config.blobs_dim,
                separation: config.blobs_separation,
                sigma: config.blobs_sigma,
                seed,
            };
            let train = synthetic_blobs(&spec(config.blobs_train, config.seed))?;
            let test = synthetic_blobs(&spec(config.blobs_test, config.seed ^ 0x5eed_7e57))?;
            (train, test)
        }
    };
    Ok(Splits {
        train: config.train_limit.map_or(train.clone(), |n| train.head(n)),
        test: config.test_limit.map_or(test.clone(), |n| test.head(n)),
    })
}

/// Network described by `config` for samples shaped like `sample_shape`.
pub fn build_model(config: &RunConfig, sample_shape: &[usize], classes: usize) -> Result<Model> {
    let w = config.weight_space()?;
    let act = config.activation_space()?;
    let s = config.surrogate_spec()?;
    let bn = (config.bn_eps, config.bn_momentum);
    match config.network {
        NetworkId::Mlp => Model::mlp(sample_shape.iter().product(), &config.hidden, classes, w, act, s, bn),
        NetworkId::ConvSmall => Model::conv_small(classes, w, act, s, bn),
    }
}

fn epoch_seed(seed: u64, epoch: u32) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(epoch as u64)
}

/// Outcome of [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub records: Vec<MetricsRecord>,
    pub seconds: Vec<f64>,
}

impl TrainOutcome {
    pub fn last(&self) -> &MetricsRecord {
        self.records.last().expect("at least one epoch")
    }
}

/// Train on `data`. When `out_dir` is given, `metrics.csv` and `timing.csv`
/// are rewritten atomically after every epoch and the final model goes to
/// `model.gxnr`.
pub fn train(config: &RunConfig, data: &Splits, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    for w in config.validate()? {
        log::warn!("{w}");
    }
    let samples = match data.train.sample_shape() {
        s if s.iter().product::<usize>() == 0 => return Err(Error::Data("empty samples".into())),
        s => s.to_vec(),
    };
    let flat = [samples.iter().product()];
    let mut model = build_model(config, if config.network == NetworkId::Mlp { &flat } else { &samples }, data.train.classes)?;
    model.init_weights(config.seed);
    let mut opt = Optimizer::new(&model, config.hyper(), config.seed);
    let alpha = config.lr_decay()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut lr = config.lr_start;
    let mut records = Vec::with_capacity(config.epochs as usize);
    let mut seconds = Vec::with_capacity(config.epochs as usize);
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        opt.set_lr(lr);
        let (mut loss, mut correct, mut seen, mut changes) = (0.0, 0usize, 0usize, 0u64);
        for batch in batches(&data.train, config.batch_size, epoch_seed(config.seed, epoch))? {
            if batch.labels.len() < 2 {
                // batch norm needs two samples; a lone straggler is dropped
                continue;
            }
            let step = model.train_step(&batch, &mut opt)?;
            loss += step.loss * step.samples as f64;
            correct += step.correct;
            seen += step.samples;
            changes += step.weight_changes as u64;
        }
        let eval = model.evaluate(&data.test)?;
        let record = MetricsRecord {
            epoch,
            lr,
            train_loss: if seen == 0 { 0.0 } else { loss / seen as f64 },
            train_accuracy: if seen == 0 { 0.0 } else { correct as f64 / seen as f64 },
            test_accuracy: eval.accuracy,
            sparsity: eval.sparsity,
            weight_changes: changes,
        };
        seconds.push(started.elapsed().as_secs_f64());
        log::info!(
            "epoch {epoch}/{}: loss {:.4} train {:.4} test {:.4} sparsity {:.3} ({:.1}s)",
            config.epochs,
            record.train_loss,
            record.train_accuracy,
            record.test_accuracy,
            record.sparsity,
            seconds[seconds.len() - 1]
        );
        records.push(record);
        if let Some(dir) = out_dir {
            write_atomic(&dir.join(METRICS_FILE), render_metrics(config, &records).as_bytes())?;
            let mut timing = String::from("epoch,seconds\n");
            for (i, s) in seconds.iter().enumerate() {
                timing.push_str(&format!("{},{s:.3}\n", i + 1));
            }
            write_atomic(&dir.join(TIMING_FILE), timing.as_bytes())?;
        }
        lr *= alpha;
    }
    if let Some(dir) = out_dir {
        checkpoint::save(&model, &dir.join(CHECKPOINT_FILE))?;
    }
    Ok(TrainOutcome { model, records, seconds })
}

/// Accuracy of a model by both inference paths.
#[derive(Clone, Debug)]
pub struct EvalOutcome {
    /// Packed gated-XNOR path where layers allow it.
    pub packed: EvalReport,
    /// Plain floating-point path.
    pub reference: EvalReport,
    pub packed_layers: usize,
    /// Measured kernel work per layer index.
    pub reports: Vec<Option<OpReport>>,
}

pub fn evaluate(model: &Model, test: &Dataset) -> Result<EvalOutcome> {
    let mut packed = PackedInference::new(model)?;
    let report = model.evaluate_with(test, |x, stats| packed.forward(x, stats))?;
    Ok(EvalOutcome {
        packed: report,
        reference: model.evaluate(test)?,
        packed_layers: packed.packed_layers(),
        reports: packed.reports().to_vec(),
    })
}

/// One row of a sweep table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub test_accuracy: f64,
    pub sparsity: f64,
    pub train_loss: f64,
}

/// One training run per value on a shared dataset and seed. Each run writes
/// into `out_dir/<param>-<value>/`, and the table goes to
/// `out_dir/sweep-<param>.csv`, sorted by value.
pub fn sweep(base: &RunConfig, param: SweepParam, values: &[f64], data: &Splits, out_dir: Option<&Path>) -> Result<Vec<SweepRow>> {
    let configs = values
        .iter()
        .map(|&v| {
            let mut c = base.clone();
            c.set_param(param, v)?;
            c.validate()?;
            Ok((v, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(configs.len());
    for (v, cfg) in configs {
        let dir: Option<PathBuf> = out_dir.map(|d| d.join(format!("{param}-{v}")));
        let out = train(&cfg, data, dir.as_deref())?;
        let last = out.last();
        log::info!("{param}={v}: test accuracy {:.4}, sparsity {:.3}", last.test_accuracy, last.sparsity);
        rows.push(SweepRow {
            value: v,
            test_accuracy: last.test_accuracy,
            sparsity: last.sparsity,
            train_loss: last.train_loss,
        });
    }
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    if let Some(dir) = out_dir {
        write_atomic(&dir.join(format!("sweep-{param}.csv")), render_sweep(param, &rows).as_bytes())?;
    }
    Ok(rows)
}

pub fn render_sweep(param: SweepParam, rows: &[SweepRow]) -> String {
    let mut s = format!("{param},test_accuracy,sparsity,train_loss\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{:e}\n", r.value, r.test_accuracy, r.sparsity, r.train_loss));
    }
    s
}

/// Operand distributions behind each row of the uniform comparison: binary
/// operands are `±1` with equal odds, ternary ones uniform over `{-1, 0, 1}`,
/// and full-precision values are never exactly zero.
pub fn uniform_costs(fan_in: usize) -> Result<Vec<CostEstimate>> {
    let (fp, bin, ter) = (
        StateDistribution::nonzero(),
        StateDistribution::uniform_binary(),
        StateDistribution::uniform_ternary(),
    );
    Architecture::ALL
        .iter()
        .map(|&arch| {
            let (w, x) = match arch {
                Architecture::FullPrecision => (&fp, &fp),
                Architecture::Bwn => (&bin, &fp),
                Architecture::Twn => (&ter, &fp),
                Architecture::Bnn => (&bin, &bin),
                Architecture::Gxnor => (&ter, &ter),
            };
            count_ops(arch, fan_in, w, x)
        })
        .collect()
}

pub const COST_COLUMNS: &str = "architecture,multiplication,accumulation,xnor,bitcount,resting";

/// The five-architecture table with symbolic `M`/`0~M`/`0/1` cells.
pub fn render_uniform_costs(rows: &[CostEstimate]) -> String {
    let mut s = format!("{COST_COLUMNS}\n");
    for r in rows {
        let m = r.fan_in as f64;
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.architecture.label(),
            r.multiplications.symbolic(m),
            r.accumulations.symbolic(m),
            r.xnor.symbolic(m),
            r.bitcount.symbolic(m),
            r.resting_percent()
        ));
    }
    s
}

/// Expected costs of one weighted layer under the state frequencies observed
/// in a trained model.
#[derive(Clone, Debug)]
pub struct LayerCost {
    pub layer: usize,
    pub fan_in: usize,
    pub weight_nonzero: f64,
    pub input_nonzero: f64,
    pub estimates: Vec<CostEstimate>,
    /// Resting fraction counted by the packed kernel, if the layer ran packed.
    pub measured_resting: Option<f64>,
}

/// Per-layer cost table from a model's weights and the activations it
/// produces on `data`. Weight and input frequencies replace the uniform
/// assumption; every architecture is evaluated with the same frequencies.
pub fn empirical_costs(model: &Model, data: &Dataset) -> Result<Vec<LayerCost>> {
    let mut zeros = vec![(0u64, 0u64); model.layers().len()];
    let mut stats = ActivationStats::default();
    let mut start = 0;
    while start < data.len() {
        let end = (start + 500).min(data.len());
        let mut h = data.images.slice_rows(start, end);
        for (i, layer) in model.layers().iter().enumerate() {
            if layer.grid_weights().is_some() {
                zeros[i].0 += h.data().iter().filter(|&&v| v == 0.0).count() as u64;
                zeros[i].1 += h.len() as u64;
            }
            h = layer.infer(&h, &mut stats)?;
        }
        start = end;
    }
    let measured = evaluate(model, data)?.reports;
    let mut out = Vec::new();
    for (i, layer) in model.layers().iter().enumerate() {
        let Some((w, _)) = layer.grid_weights() else { continue };
        let fan_in = w.row_len();
        let wd = StateDistribution::empirical(w.data())?;
        let (z, n) = zeros[i];
        let p_in = if n == 0 { 1.0 } else { 1.0 - z as f64 / n as f64 };
        let xd = StateDistribution::new(vec![(0.0, 1.0 - p_in), (1.0, p_in)])?;
        let estimates = Architecture::ALL
            .iter()
            .map(|&a| count_ops(a, fan_in, &wd, &xd))
            .collect::<Result<Vec<_>>>()?;
        out.push(LayerCost {
            layer: i,
            fan_in,
            weight_nonzero: wd.p_nonzero(),
            input_nonzero: p_in,
            estimates,
            measured_resting: measured[i].map(|r| r.resting_fraction()),
        });
    }
    Ok(out)
}

pub fn render_empirical_costs(rows: &[LayerCost]) -> String {
    let mut s = String::from("layer,fan_in,p_weight_nonzero,p_input_nonzero,architecture,multiplication,accumulation,xnor,bitcount,resting,measured_resting\n");
    for row in rows {
        for e in &row.estimates {
            s.push_str(&format!(
                "{},{},{:.4},{:.4},{},{:.1},{:.1},{:.1},{:.3},{},{}\n",
                row.layer,
                row.fan_in,
                row.weight_nonzero,
                row.input_nonzero,
                e.architecture.label(),
                e.multiplications.expected,
                e.accumulations.expected,
                e.xnor.expected,
                e.bitcount.expected,
                e.resting_percent(),
                match (e.architecture, row.measured_resting) {
                    (Architecture::Gxnor, Some(m)) => format!("{:.1}%", 100.0 * m),
                    _ => String::new(),
                }
            ));
        }
    }
    s
}

/// Weighted layers in a model, for callers that want fan-ins without data.
pub fn fan_ins(model: &Model) -> Vec<(usize, usize)> {
    model
        .layers()
        .iter()
        .enumerate()
        .filter_map(|(i, l)| match l {
            Layer::Dense { weights, .. } => Some((i, weights.row_len())),
            Layer::Conv2d { kernels, .. } => Some((i, kernels.row_len())),
            _ => None,
        })
        .collect()
}
