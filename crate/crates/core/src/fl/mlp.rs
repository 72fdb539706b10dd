//! Fully connected ReLU network with a softmax output, stored as one flat
//! parameter vector.
//!
//! Per layer the vector holds the weight matrix `[fan_in][fan_out]`
//! (row-major, one row per input unit) followed by the `fan_out` biases.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
}

impl MlpSpec {
    /// Two hidden ReLU layers of 25 units and a softmax output layer.
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Self { input_dim, hidden_dims: vec![25, 25], output_dim }
    }

    pub fn with_hidden(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Self {
        Self { input_dim, hidden_dims, output_dim }
    }

    pub fn layout(&self) -> Result<Layout> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        Layout::new(dims)
    }
}

/// Unit counts per layer, input first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    dims: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub w: usize,
    pub b: usize,
}

impl Layout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {dims:?}")));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub(crate) fn slots(&self) -> Vec<LayerSlot> {
        let mut off = 0;
        self.dims
            .windows(2)
            .map(|w| {
                let slot = LayerSlot { fan_in: w[0], fan_out: w[1], w: off, b: off + w[0] * w[1] };
                off += w[0] * w[1] + w[1];
                slot
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    layout: Layout,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn new(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.n_params() {
            return Err(Error::Shape(format!(
                "{} parameters for a layout needing {}",
                values.len(),
                layout.n_params()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("parameters must be finite"));
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(layout: Layout) -> Self {
        let n = layout.n_params();
        Self { layout, values: vec![0.0; n] }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_model(spec: &MlpSpec, seed: u64) -> Result<ModelParams> {
    let layout = spec.layout()?;
    let mut params = ModelParams::zeros(layout);
    let mut rng = rng::rng_from(seed, &[rng::TAG_INIT]);
    for slot in params.layout.slots() {
        let limit = (6.0 / (slot.fan_in + slot.fan_out) as f64).sqrt();
        for w in &mut params.values[slot.w..slot.b] {
            *w = rng.gen_range(-limit..=limit);
        }
    }
    Ok(params)
}

/// Row-wise softmax of `z` in place, with max subtraction.
pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Per-sample activation buffers, reused across calls.
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    slots: Vec<LayerSlot>,
    /// acts[0] is the input, acts[l + 1] the output of layer l.
    acts: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Scratch {
    pub fn new(layout: &Layout) -> Self {
        let acts = layout.dims().iter().map(|&d| vec![0.0; d]).collect::<Vec<_>>();
        let delta = acts.clone();
        Self { slots: layout.slots(), acts, delta }
    }

    /// Forward pass for one sample; returns the class probabilities.
    pub fn forward(&mut self, params: &[f64], x: &[f64]) -> &[f64] {
        self.acts[0].copy_from_slice(x);
        let last = self.slots.len() - 1;
        for (l, s) in self.slots.iter().enumerate() {
            let (head, tail) = self.acts.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            out.copy_from_slice(&params[s.b..s.b + s.fan_out]);
            for (i, &a) in input.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let row = &params[s.w + i * s.fan_out..s.w + (i + 1) * s.fan_out];
                for (o, &w) in out.iter_mut().zip(row) {
                    *o += a * w;
                }
            }
            if l == last {
                softmax_in_place(out);
            } else {
                for o in out.iter_mut() {
                    if *o < 0.0 {
                        *o = 0.0;
                    }
                }
            }
        }
        &self.acts[last + 1]
    }

    /// Cross-entropy of the last forward pass against `label`.
    pub fn loss(&self, label: usize) -> f64 {
        let p = self.acts[self.acts.len() - 1][label];
        -p.max(f64::MIN_POSITIVE).ln()
    }

    /// Accumulate `∂loss/∂params` of the last forward pass into `grad`.
    pub fn backward(&mut self, params: &[f64], label: usize, grad: &mut [f64]) {
        let n_layers = self.slots.len();
        {
            let out = &self.acts[n_layers];
            let d = &mut self.delta[n_layers];
            d.copy_from_slice(out);
            d[label] -= 1.0;
        }
        for l in (0..n_layers).rev() {
            let s = self.slots[l];
            let (dhead, dtail) = self.delta.split_at_mut(l + 1);
            let d_out = &dtail[0];
            let input = &self.acts[l];
            for (g, &d) in grad[s.b..s.b + s.fan_out].iter_mut().zip(d_out) {
                *g += d;
            }
            for (i, &a) in input.iter().enumerate() {
                if a != 0.0 {
                    let g = &mut grad[s.w + i * s.fan_out..s.w + (i + 1) * s.fan_out];
                    for (gv, &d) in g.iter_mut().zip(d_out) {
                        *gv += a * d;
                    }
                }
            }
            if l > 0 {
                let d_in = &mut dhead[l];
                for (i, di) in d_in.iter_mut().enumerate() {
                    // ReLU derivative: zero where the unit was inactive
                    if input[i] <= 0.0 {
                        *di = 0.0;
                        continue;
                    }
                    let row = &params[s.w + i * s.fan_out..s.w + (i + 1) * s.fan_out];
                    *di = row.iter().zip(d_out).map(|(w, d)| w * d).sum();
                }
            }
        }
    }
}

fn check_input(params: &ModelParams, cols: usize) -> Result<()> {
    if cols != params.layout.input_dim() {
        return Err(Error::Shape(format!(
            "batch has {cols} columns, model expects {}",
            params.layout.input_dim()
        )));
    }
    Ok(())
}

/// Class probabilities for every row of `batch`.
pub fn forward(params: &ModelParams, batch: &Matrix) -> Result<Matrix> {
    check_input(params, batch.cols())?;
    let out_dim = params.layout.output_dim();
    let mut scratch = Scratch::new(&params.layout);
    let mut out = Matrix::zeros(batch.rows(), out_dim);
    for i in 0..batch.rows() {
        let p = scratch.forward(&params.values, batch.row(i));
        out.row_mut(i).copy_from_slice(p);
    }
    Ok(out)
}

fn check_labels(params: &ModelParams, data: &Dataset) -> Result<()> {
    check_input(params, data.n_features())?;
    if data.n_classes() > params.layout.output_dim() {
        return Err(Error::Shape(format!(
            "label {} out of range for {} outputs",
            data.n_classes() - 1,
            params.layout.output_dim()
        )));
    }
    Ok(())
}

/// Mean cross-entropy over `data`.
pub fn loss(params: &ModelParams, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_labels(params, data)?;
    let mut scratch = Scratch::new(&params.layout);
    let mut total = 0.0;
    for i in 0..data.len() {
        scratch.forward(&params.values, data.features.row(i));
        total += scratch.loss(data.labels[i]);
    }
    Ok(total / data.len() as f64)
}

/// Gradient of [`loss`] by backpropagation.
pub fn gradient(params: &ModelParams, data: &Dataset) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_labels(params, data)?;
    let mut scratch = Scratch::new(&params.layout);
    let mut grad = vec![0.0; params.len()];
    for i in 0..data.len() {
        scratch.forward(&params.values, data.features.row(i));
        scratch.backward(&params.values, data.labels[i], &mut grad);
    }
    let inv = 1.0 / data.len() as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok(grad)
}

pub(crate) fn check_dataset(params: &ModelParams, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_labels(params, data)
}
