//! Dense encoder/classifier models with analytic gradients and plain SGD.

mod matrix;
mod model;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use matrix::Matrix2D;
pub use model::{
    model_distance, param_distance, Activation, Dense, LayerShape, ShapeSpec, SplitModel,
};

use crate::{Error, Result};

/// Gradient of a scalar loss with respect to every parameter of a
/// [`SplitModel`]; shape-congruent with it.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet(SplitModel);

impl GradientSet {
    pub fn zeros_like(model: &SplitModel) -> GradientSet {
        GradientSet(SplitModel::zeros(&model.shape()).expect("shape of a valid model"))
    }

    pub fn as_model(&self) -> &SplitModel {
        &self.0
    }

    pub fn params(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.0.params()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.0.flatten()
    }

    pub fn from_flat(values: &[f64], shape: &ShapeSpec) -> Result<GradientSet> {
        SplitModel::unflatten(values, shape).map(GradientSet)
    }

    pub fn norm(&self) -> f64 {
        let sq: f64 = self.params().flat_map(|s| s.iter()).map(|g| g * g).sum();
        libm::sqrt(sq)
    }

    pub fn all_finite(&self) -> bool {
        self.0.all_finite()
    }
}

/// Proximal term `λ‖W − anchor‖²` added to the cross-entropy loss.
#[derive(Debug, Clone, Copy)]
pub struct Proximal<'a> {
    pub lambda: f64,
    pub anchor: &'a SplitModel,
}

/// Runs the encoder and classifier on `batch`.
///
/// Returns `(features, logits)`; features have the classifier's input width
/// and logits have `K_total` columns.
pub fn forward(model: &SplitModel, batch: &Matrix2D) -> Result<(Matrix2D, Matrix2D)> {
    let features = encode(model, batch)?;
    let logits = model.classifier.forward(&features);
    Ok((features, logits))
}

/// Runs only the encoder.
pub fn encode(model: &SplitModel, batch: &Matrix2D) -> Result<Matrix2D> {
    let mut h = check_input(model, batch)?;
    for layer in &model.encoder {
        h = layer.forward(&h);
    }
    Ok(h)
}

fn check_input(model: &SplitModel, batch: &Matrix2D) -> Result<Matrix2D> {
    let expected = model.input_dim();
    if batch.cols() != expected {
        let layer = if model.encoder.is_empty() {
            "classifier"
        } else {
            "encoder layer 0"
        };
        return Err(Error::dim(
            format!("input of {layer}"),
            expected,
            batch.cols(),
        ));
    }
    Ok(batch.clone())
}

/// Row-wise softmax, computed with the max-shift for stability.
pub fn softmax(logits: &Matrix2D) -> Matrix2D {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Index of the largest logit per row; ties resolve to the lowest index.
pub fn predict(model: &SplitModel, batch: &Matrix2D) -> Result<Vec<usize>> {
    let (_, logits) = forward(model, batch)?;
    Ok((0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect())
}

fn check_labels(model: &SplitModel, batch: &Matrix2D, labels: &[usize]) -> Result<()> {
    if labels.len() != batch.rows() {
        return Err(Error::dim("label vector", batch.rows(), labels.len()));
    }
    let k = model.k_total();
    if let Some((i, &bad)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
        return Err(Error::Input(format!(
            "label {bad} at row {i} is outside [0, {k})"
        )));
    }
    Ok(())
}

fn cross_entropy(logits: &Matrix2D, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + libm::log(row.iter().map(|v| libm::exp(v - max)).sum::<f64>());
        total += lse - row[y];
    }
    total / labels.len() as f64
}

/// Mean softmax cross-entropy, plus `λ‖W − anchor‖²` when `reg` is given.
pub fn loss(
    model: &SplitModel,
    batch: &Matrix2D,
    labels: &[usize],
    reg: Option<Proximal<'_>>,
) -> Result<f64> {
    check_labels(model, batch, labels)?;
    if batch.rows() == 0 {
        return Err(Error::Input("empty batch".into()));
    }
    let (_, logits) = forward(model, batch)?;
    let mut l = cross_entropy(&logits, labels);
    if let Some(p) = reg {
        model.check_congruent(p.anchor, "proximal anchor")?;
        let d = model_distance(model, p.anchor);
        l += p.lambda * d * d;
    }
    Ok(l)
}

/// Loss as in [`loss`] together with its analytic gradient.
pub fn loss_and_grad(
    model: &SplitModel,
    batch: &Matrix2D,
    labels: &[usize],
    reg: Option<Proximal<'_>>,
) -> Result<(f64, GradientSet)> {
    check_labels(model, batch, labels)?;
    if batch.rows() == 0 {
        return Err(Error::Input("empty batch".into()));
    }
    if let Some(p) = &reg {
        model.check_congruent(p.anchor, "proximal anchor")?;
    }

    // Keep every layer's output for the backward pass.
    let mut activations = Vec::with_capacity(model.encoder.len() + 1);
    activations.push(check_input(model, batch)?);
    for layer in &model.encoder {
        let next = layer.forward(activations.last().expect("non-empty"));
        activations.push(next);
    }
    let features = activations.last().expect("non-empty");
    let logits = model.classifier.forward(features);
    let mut loss = cross_entropy(&logits, labels);

    let n = batch.rows() as f64;
    let mut delta = softmax(&logits);
    for (r, &y) in labels.iter().enumerate() {
        let row = delta.row_mut(r);
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v /= n;
        }
    }

    let mut grads = GradientSet::zeros_like(model);
    let mut upstream = backprop_layer(&model.classifier, features, &delta, &mut grads.0.classifier);
    for (i, layer) in model.encoder.iter().enumerate().rev() {
        let out = &activations[i + 1];
        for (d, &a) in upstream.data_mut().iter_mut().zip(out.data()) {
            *d *= layer.activation.derivative_from_output(a);
        }
        upstream = backprop_layer(layer, &activations[i], &upstream, &mut grads.0.encoder[i]);
    }

    if let Some(p) = reg {
        let mut sq = 0.0;
        for ((g, w), a) in grads
            .0
            .params_mut()
            .zip(model.params())
            .zip(p.anchor.params())
        {
            for ((gi, wi), ai) in g.iter_mut().zip(w).zip(a) {
                let d = wi - ai;
                sq += d * d;
                *gi += 2.0 * p.lambda * d;
            }
        }
        loss += p.lambda * sq;
    }
    Ok((loss, grads))
}

/// Accumulates the layer gradient for `dz = ∂L/∂z` (`z` = pre-activation)
/// into `grad` and returns `∂L/∂input`.
fn backprop_layer(layer: &Dense, input: &Matrix2D, dz: &Matrix2D, grad: &mut Dense) -> Matrix2D {
    let inputs = layer.inputs();
    let mut dinput = Matrix2D::zeros(input.rows(), inputs);
    for r in 0..input.rows() {
        let x = input.row(r);
        let d = dz.row(r);
        for (j, &dj) in d.iter().enumerate() {
            if dj == 0.0 {
                continue;
            }
            grad.bias[j] += dj;
            let gw = grad.weight.row_mut(j);
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += dj * xi;
            }
        }
        let di = dinput.row_mut(r);
        for (j, &dj) in d.iter().enumerate() {
            if dj == 0.0 {
                continue;
            }
            for (o, w) in di.iter_mut().zip(layer.weight.row(j)) {
                *o += dj * w;
            }
        }
    }
    dinput
}

/// One gradient-descent update `p ← p − η·g`.
pub fn sgd_step(model: &SplitModel, grads: &GradientSet, eta: f64) -> Result<SplitModel> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!(
            "learning rate must be positive, got {eta}"
        )));
    }
    model.check_congruent(&grads.0, "gradient")?;
    if !grads.all_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    let mut next = model.clone();
    for (p, g) in next.params_mut().zip(grads.params()) {
        for (pi, gi) in p.iter_mut().zip(g) {
            *pi -= eta * gi;
        }
    }
    if !next.all_finite() {
        return Err(Error::Numeric("parameter overflow after SGD step".into()));
    }
    Ok(next)
}

/// Weighted sum `Σ wᵢ·layersᵢ` of congruent layers, accumulated in the
/// given order.
pub(crate) fn weighted_layer_sum(layers: &[&Dense], weights: &[f64]) -> Dense {
    let mut out = Dense::zeros(layers[0].shape());
    for (layer, &w) in layers.iter().zip(weights) {
        for (o, v) in out.weight.data_mut().iter_mut().zip(layer.weight.data()) {
            *o += w * v;
        }
        for (o, v) in out.bias.iter_mut().zip(&layer.bias) {
            *o += w * v;
        }
    }
    out
}

/// Weighted sum of encoders, layer by layer.
pub(crate) fn weighted_encoder_sum(models: &[&SplitModel], weights: &[f64]) -> Vec<Dense> {
    let depth = models[0].encoder.len();
    let mut out = Vec::with_capacity(depth);
    let mut layers = vec![];
    for l in 0..depth {
        layers.clear();
        layers.extend(models.iter().map(|m| &m.encoder[l]));
        out.push(weighted_layer_sum(&layers, weights));
    }
    out
}
