use super::cost::Architecture;
use super::packed::{gated_xnor_dot, pack, OpReport, PackedTernary};
use crate::error::{Error, Result};
use crate::net::{im2col, ActivationStats, Layer, Model, Tensor};

/// Row-packed ternary weight matrix `[outputs, inputs]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedMatrix {
    inputs: usize,
    rows: Vec<PackedTernary>,
}

impl PackedMatrix {
    /// Pack a `[outputs, …]` tensor row by row; trailing dimensions are
    /// flattened into the input axis.
    pub fn from_tensor(w: &Tensor) -> Result<Self> {
        let rows = (0..w.rows()).map(|i| pack(w.row(i))).collect::<Result<Vec<_>>>()?;
        Ok(Self { inputs: w.row_len(), rows })
    }

    pub fn from_rows(inputs: usize, rows: Vec<PackedTernary>) -> Result<Self> {
        if rows.iter().any(|r| r.len() != inputs) {
            return Err(Error::dim(format!("every packed row must have {inputs} lanes")));
        }
        Ok(Self { inputs, rows })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[PackedTernary] {
        &self.rows
    }
}

/// Integer pre-activations `[batch, outputs]` with the work they cost.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedOutput {
    pub batch: usize,
    pub outputs: usize,
    pub values: Vec<i64>,
    pub report: OpReport,
}

impl PackedOutput {
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.batch, self.outputs], self.values.iter().map(|&v| v as f64).collect())
            .expect("batch·outputs values")
    }
}

/// One gated XNOR dot product per (sample, output neuron).
pub fn packed_dense_forward(inputs: &[PackedTernary], w: &PackedMatrix) -> Result<PackedOutput> {
    let mut values = Vec::with_capacity(inputs.len() * w.outputs());
    let mut report = OpReport::empty(Architecture::Gxnor);
    for x in inputs {
        if x.len() != w.inputs {
            return Err(Error::dim(format!("packed input has {} lanes, weights expect {}", x.len(), w.inputs)));
        }
        for row in &w.rows {
            let (v, r) = gated_xnor_dot(x, row)?;
            values.push(v);
            report.merge(&r);
        }
    }
    Ok(PackedOutput {
        batch: inputs.len(),
        outputs: w.outputs(),
        values,
        report,
    })
}

fn is_ternary(data: &[f64]) -> bool {
    data.iter().all(|&v| v == 0.0 || v == 1.0 || v == -1.0)
}

/// Inference that routes ternary-by-ternary layers through the packed kernel.
///
/// A dense or conv layer takes the packed path when its weights are ternary
/// with unit range and its incoming activations are all in `{-1, 0, 1}`;
/// everything else (e.g. the first layer, which sees raw pixels) runs the
/// floating-point layer. Both paths produce the same integers, so the scores
/// match [`Model::forward`] exactly.
pub struct PackedInference<'a> {
    model: &'a Model,
    packed: Vec<Option<PackedMatrix>>,
    reports: Vec<Option<OpReport>>,
}

impl<'a> PackedInference<'a> {
    pub fn new(model: &'a Model) -> Result<Self> {
        let mut packed = Vec::with_capacity(model.layers().len());
        for layer in model.layers() {
            let p = match layer.grid_weights() {
                Some((w, space)) if space.is_ternary() && space.half_range() == 1.0 => Some(PackedMatrix::from_tensor(w)?),
                _ => None,
            };
            packed.push(p);
        }
        Ok(Self {
            model,
            reports: vec![None; packed.len()],
            packed,
        })
    }

    /// Number of layers that can run packed.
    pub fn packed_layers(&self) -> usize {
        self.packed.iter().filter(|p| p.is_some()).count()
    }

    /// Accumulated kernel reports per layer index; `None` for layers that
    /// never ran packed.
    pub fn reports(&self) -> &[Option<OpReport>] {
        &self.reports
    }

    pub fn forward(&mut self, x: &Tensor, stats: &mut ActivationStats) -> Result<Tensor> {
        let mut h = x.clone();
        for (i, layer) in self.model.layers().iter().enumerate() {
            h = match (&self.packed[i], layer) {
                (Some(w), Layer::Dense { .. }) if is_ternary(h.data()) => {
                    let rows = (0..h.rows()).map(|b| pack(h.row(b))).collect::<Result<Vec<_>>>()?;
                    let out = packed_dense_forward(&rows, w)?;
                    self.record(i, &out.report);
                    out.to_tensor()
                }
                (Some(w), Layer::Conv2d { geometry, .. }) if is_ternary(h.data()) => {
                    let (out, report) = packed_conv(&h, w, geometry)?;
                    self.record(i, &report);
                    out
                }
                _ => layer.infer(&h, stats)?,
            };
        }
        Ok(h)
    }

    fn record(&mut self, layer: usize, r: &OpReport) {
        self.reports[layer].get_or_insert_with(|| OpReport::empty(Architecture::Gxnor)).merge(r);
    }
}

fn packed_conv(x: &Tensor, w: &PackedMatrix, g: &crate::net::ConvGeometry) -> Result<(Tensor, OpReport)> {
    let (b, h, wd) = match x.shape() {
        [b, c, h, wd] if *c == g.in_channels => (*b, *h, *wd),
        s => return Err(Error::dim(format!("conv input {s:?} does not match {} channels", g.in_channels))),
    };
    let (oh, ow) = g.output_hw(h, wd)?;
    let p = oh * ow;
    let kk = g.patch_len();
    let mut cols = vec![0.0; kk * p];
    let mut patch = vec![0.0; kk];
    let mut out = vec![0.0; b * w.outputs() * p];
    let mut report = OpReport::empty(Architecture::Gxnor);
    for s in 0..b {
        im2col(x.row(s), h, wd, g, oh, ow, &mut cols);
        let base = s * w.outputs() * p;
        for pos in 0..p {
            for (r, v) in patch.iter_mut().enumerate() {
                *v = cols[r * p + pos];
            }
            let packed = pack(&patch)?;
            for (o, row) in w.rows().iter().enumerate() {
                let (v, rep) = gated_xnor_dot(&packed, row)?;
                out[base + o * p + pos] = v as f64;
                report.merge(&rep);
            }
        }
    }
    Ok((Tensor::new(vec![b, w.outputs(), oh, ow], out)?, report))
}
