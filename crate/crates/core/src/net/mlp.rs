use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::rng::seeded;
use crate::{Error, Result};

/// Affine map `x -> x W + b` with `W` stored `in_dim x out_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Self {
        Self {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }
}

/// Rectifier network: two equal-width hidden layers and a linear readout
/// `z = W f(x) + b` on the shared embedding `f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Parameter count of a `p -> width -> width -> q` network.
pub fn param_count(p: usize, width: usize, q: usize) -> usize {
    p * width + width + width * width + width + width * q + q
}

/// Glorot-uniform weights, zero biases.
pub fn mlp_init(p: usize, width: usize, q: usize, seed: u64) -> Result<MlpParams> {
    if p == 0 || width == 0 || q == 0 {
        return Err(Error::InvalidConfig(format!(
            "network dimensions must be positive (p={p}, width={width}, q={q})"
        )));
    }
    let mut rng = seeded(seed);
    let dims = [(p, width), (width, width), (width, q)];
    let layers = dims
        .iter()
        .map(|&(fan_in, fan_out)| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            Layer {
                weight: Array2::from_shape_fn((fan_in, fan_out), |_| dist.sample(&mut rng)),
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(MlpParams { layers })
}

/// Network outputs and the penultimate embedding.
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Array2<f64>,
    pub embedding: Array2<f64>,
}

/// Activations kept for the backward pass.
pub(crate) struct Tape {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Array2<f64>>,
    pub(crate) logits: Array2<f64>,
}

impl MlpParams {
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn width(&self) -> usize {
        self.layers[0].out_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty network").out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn readout(&self) -> &Layer {
        self.layers.last().expect("nonempty network")
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(Layer::zeros_like).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// All parameters in layer order, weights (row-major) before biases.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Forward> {
        let tape = self.record(x)?;
        let embedding = tape.inputs.last().expect("readout input").clone();
        Ok(Forward {
            logits: tape.logits,
            embedding,
        })
    }

    pub(crate) fn record(&self, x: ArrayView2<'_, f64>) -> Result<Tape> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "network expects {} covariates, batch has {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut a = h.dot(&layer.weight);
            a += &layer.bias;
            inputs.push(h);
            if k < last {
                a.mapv_inplace(|v| if v < 0.0 { 0.0 } else { v });
            }
            h = a;
        }
        Ok(Tape { inputs, logits: h })
    }

    /// Gradient of a scalar objective given its gradient w.r.t. the logits.
    pub(crate) fn backward(&self, tape: &Tape, grad_logits: &Array2<f64>) -> MlpParams {
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut delta = grad_logits.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = &tape.inputs[k];
            let weight = input.t().dot(&delta);
            let bias = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut back = delta.dot(&layer.weight.t());
                // rectifier: input to layer k is relu of the previous preactivation
                Zip::from(&mut back).and(input).for_each(|d, &h| {
                    if h <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(Layer { weight, bias });
        }
        grads.reverse();
        MlpParams { layers: grads }
    }
}
