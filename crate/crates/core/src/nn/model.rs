use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Matrix2D;
use crate::rng::{self, StreamRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
}

impl Activation {
    pub(crate) fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    pub(crate) fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

/// Shape of a [`SplitModel`]; the header of every checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub encoder: Vec<LayerShape>,
    pub classifier: LayerShape,
}

impl ShapeSpec {
    /// ReLU encoder with the given widths (the last is the feature dimension)
    /// followed by a linear classifier with `k_total` outputs. Empty `hidden`
    /// gives a plain softmax-regression model.
    pub fn mlp(input_dim: usize, hidden: &[usize], k_total: usize) -> ShapeSpec {
        let mut encoder = Vec::with_capacity(hidden.len());
        let mut inputs = input_dim;
        for &outputs in hidden {
            encoder.push(LayerShape {
                inputs,
                outputs,
                activation: Activation::Relu,
            });
            inputs = outputs;
        }
        ShapeSpec {
            encoder,
            classifier: LayerShape {
                inputs,
                outputs: k_total,
                activation: Activation::Linear,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut expected = None;
        for (i, l) in self
            .encoder
            .iter()
            .chain(core::iter::once(&self.classifier))
            .enumerate()
        {
            if l.inputs == 0 || l.outputs == 0 {
                return Err(Error::Config(format!("layer {i} has a zero dimension")));
            }
            if let Some(e) = expected {
                if l.inputs != e {
                    return Err(Error::dim(format!("input of layer {i}"), e, l.inputs));
                }
            }
            expected = Some(l.outputs);
        }
        if self.classifier.activation != Activation::Linear {
            return Err(Error::Config("classifier must be linear".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.encoder
            .first()
            .map_or(self.classifier.inputs, |l| l.inputs)
    }

    pub fn feature_dim(&self) -> usize {
        self.classifier.inputs
    }

    pub fn k_total(&self) -> usize {
        self.classifier.outputs
    }

    pub fn encoder_param_count(&self) -> usize {
        self.encoder
            .iter()
            .map(|l| l.outputs * (l.inputs + 1))
            .sum()
    }

    pub fn param_count(&self) -> usize {
        self.encoder_param_count() + self.classifier.outputs * (self.classifier.inputs + 1)
    }
}

/// A fully connected layer with `weight` stored as `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix2D,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(shape: LayerShape) -> Dense {
        Dense {
            weight: Matrix2D::zeros(shape.outputs, shape.inputs),
            bias: vec![0.0; shape.outputs],
            activation: shape.activation,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(shape: LayerShape, rng: &mut StreamRng) -> Dense {
        let limit = libm::sqrt(6.0 / (shape.inputs + shape.outputs) as f64);
        let mut layer = Dense::zeros(shape);
        for w in layer.weight.data_mut() {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    pub fn shape(&self) -> LayerShape {
        LayerShape {
            inputs: self.weight.cols(),
            outputs: self.weight.rows(),
            activation: self.activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub(crate) fn forward(&self, input: &Matrix2D) -> Matrix2D {
        let mut out = Matrix2D::zeros(input.rows(), self.outputs());
        for r in 0..input.rows() {
            let x = input.row(r);
            let o = out.row_mut(r);
            for (j, oj) in o.iter_mut().enumerate() {
                let z = super::matrix::dot(self.weight.row(j), x) + self.bias[j];
                *oj = self.activation.apply(z);
            }
        }
        out
    }

    fn param_slices(&self) -> [&[f64]; 2] {
        [self.weight.data(), &self.bias]
    }

    fn param_slices_mut(&mut self) -> [&mut [f64]; 2] {
        [self.weight.data_mut(), &mut self.bias]
    }

    /// Channel `k` of an output layer: its weight row followed by its bias.
    pub fn channel(&self, k: usize) -> (&[f64], f64) {
        (self.weight.row(k), self.bias[k])
    }

    pub fn set_channel(&mut self, k: usize, row: &[f64], bias: f64) {
        self.weight.row_mut(k).copy_from_slice(row);
        self.bias[k] = bias;
    }
}

/// Encoder layer stack plus a final linear classifier: the unit of
/// federation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitModel {
    pub encoder: Vec<Dense>,
    pub classifier: Dense,
}

impl SplitModel {
    pub fn zeros(shape: &ShapeSpec) -> Result<SplitModel> {
        shape.validate()?;
        Ok(SplitModel {
            encoder: shape.encoder.iter().map(|&s| Dense::zeros(s)).collect(),
            classifier: Dense::zeros(shape.classifier),
        })
    }

    /// Glorot-initialised model drawn from the `"init"` stream of `seed`.
    pub fn init(shape: &ShapeSpec, seed: u64) -> Result<SplitModel> {
        shape.validate()?;
        let mut rng = rng::stream(seed, "init", 0);
        Ok(SplitModel {
            encoder: shape
                .encoder
                .iter()
                .map(|&s| Dense::glorot(s, &mut rng))
                .collect(),
            classifier: Dense::glorot(shape.classifier, &mut rng),
        })
    }

    pub fn shape(&self) -> ShapeSpec {
        ShapeSpec {
            encoder: self.encoder.iter().map(Dense::shape).collect(),
            classifier: self.classifier.shape(),
        }
    }

    pub fn k_total(&self) -> usize {
        self.classifier.outputs()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder
            .first()
            .map_or(self.classifier.inputs(), Dense::inputs)
    }

    pub fn param_count(&self) -> usize {
        self.params().map(<[f64]>::len).sum()
    }

    /// Parameter slices in canonical order: encoder layers in order (weight
    /// row-major, then bias), classifier last.
    pub fn params(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.encoder_params().chain(self.classifier_params())
    }

    pub fn encoder_params(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.encoder.iter().flat_map(Dense::param_slices)
    }

    pub fn classifier_params(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.classifier.param_slices().into_iter()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut [f64]> + '_ {
        self.encoder
            .iter_mut()
            .flat_map(Dense::param_slices_mut)
            .chain(self.classifier.param_slices_mut())
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for s in self.params() {
            out.extend_from_slice(s);
        }
        out
    }

    pub fn unflatten(values: &[f64], shape: &ShapeSpec) -> Result<SplitModel> {
        let mut model = SplitModel::zeros(shape)?;
        if values.len() != shape.param_count() {
            return Err(Error::dim(
                "flat parameter vector",
                shape.param_count(),
                values.len(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        let mut offset = 0;
        for s in model.params_mut() {
            s.copy_from_slice(&values[offset..offset + s.len()]);
            offset += s.len();
        }
        Ok(model)
    }

    pub fn is_congruent(&self, other: &SplitModel) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_congruent(&self, other: &SplitModel, context: &str) -> Result<()> {
        if self.is_congruent(other) {
            Ok(())
        } else {
            Err(Error::dim(
                format!("{context}: model shapes differ"),
                self.param_count(),
                other.param_count(),
            ))
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Hex SHA-256 over the little-endian bytes of the flat parameters.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for s in self.params() {
            for v in s {
                h.update(v.to_le_bytes());
            }
        }
        let bytes = h.finalize();
        let mut out = String::with_capacity(64);
        for b in bytes.iter() {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

/// Euclidean distance between two equally long parameter streams.
pub fn param_distance<'a>(
    a: impl Iterator<Item = &'a [f64]>,
    b: impl Iterator<Item = &'a [f64]>,
) -> f64 {
    let mut sum = 0.0;
    for (x, y) in a.zip(b) {
        for (p, q) in x.iter().zip(y) {
            let d = p - q;
            sum += d * d;
        }
    }
    libm::sqrt(sum)
}

/// `‖a − b‖₂` over all parameters.
pub fn model_distance(a: &SplitModel, b: &SplitModel) -> f64 {
    param_distance(a.params(), b.params())
}
