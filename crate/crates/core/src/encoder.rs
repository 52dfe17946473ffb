//! Feed-forward encoder with rectified hidden layers and a parameter-free
//! row-normalization output stage, plus its reverse pass and the SGD optimizer.

use crate::error::{IdfdError, Result};
use crate::linalg::{l2_normalize_rows, l2_normalize_rows_backward, Matrix};
use crate::rng::SeededRng;

/// Affine layer `y = x·W + b` with `W` stored as `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Matrix::zeros(input, output),
            bias: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// Encoder weights. Every layer but the last is followed by a ReLU; the last
/// layer's output is L2-normalized per row.
///
/// The same type doubles as the container for gradients and optimizer
/// velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    layers: Vec<Layer>,
}

impl EncoderParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(IdfdError::EmptyInput("encoder needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(IdfdError::ShapeMismatch(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(IdfdError::ShapeMismatch(format!(
                    "layer {i} bias has {} entries for {} outputs",
                    l.bias.len(),
                    l.output_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// He-initialized weights and zero biases for the layer widths `dims`
    /// (input first, output last).
    pub fn init(dims: &[usize], rng: &mut SeededRng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(IdfdError::ShapeMismatch(
                "encoder needs an input and an output width".into(),
            ));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let std = (2.0 / w[0] as f64).sqrt();
                Layer {
                    weight: Matrix::from_fn(w[0], w[1], |_, _| std * rng.normal()),
                    bias: vec![0.0; w[1]],
                }
            })
            .collect();
        Self::new(layers)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.input_dim(), l.output_dim()))
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Layer widths, input first.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::output_dim))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Every parameter, layer by layer (weights row-major, then bias).
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Mutable view of parameter `idx` in [`flat`](Self::flat) order.
    pub fn param_mut(&mut self, mut idx: usize) -> &mut f64 {
        for l in &mut self.layers {
            let w = l.weight.as_slice().len();
            if idx < w {
                return &mut l.weight.as_mut_slice()[idx];
            }
            idx -= w;
            if idx < l.bias.len() {
                return &mut l.bias[idx];
            }
            idx -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.dims() != other.dims() || self.layers.len() != other.layers.len() {
            return Err(IdfdError::ShapeMismatch(format!(
                "{what} has widths {:?}, parameters have {:?}",
                other.dims(),
                self.dims()
            )));
        }
        Ok(())
    }
}

/// Activations kept by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Affine output of each layer, before the ReLU or the normalization.
    pre: Vec<Matrix>,
}

impl ForwardCache {
    /// Output of the last affine layer, before normalization.
    pub fn unnormalized(&self) -> &Matrix {
        &self.pre[self.pre.len() - 1]
    }
}

fn affine(x: &Matrix, layer: &Layer) -> Result<Matrix> {
    let mut y = x.matmul(&layer.weight)?;
    for r in 0..y.rows() {
        for (o, b) in y.row_mut(r).iter_mut().zip(&layer.bias) {
            *o += b;
        }
    }
    Ok(y)
}

/// Encodes a batch (one sample per row) into unit-norm representations.
pub fn forward(params: &EncoderParams, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
    if x.cols() != params.input_dim() {
        return Err(IdfdError::ShapeMismatch(format!(
            "input has {} features, encoder expects {}",
            x.cols(),
            params.input_dim()
        )));
    }
    let last = params.layers.len() - 1;
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut current = x.clone();
    for (i, layer) in params.layers.iter().enumerate() {
        let z = affine(&current, layer)?;
        inputs.push(current);
        current = if i == last {
            z.clone()
        } else {
            let mut a = z.clone();
            a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            a
        };
        pre.push(z);
    }
    let v = l2_normalize_rows(&current)?;
    Ok((v, ForwardCache { inputs, pre }))
}

/// Encodes without keeping a cache.
pub fn encode(params: &EncoderParams, x: &Matrix) -> Result<Matrix> {
    forward(params, x).map(|(v, _)| v)
}

/// Parameter gradients for the cotangent `grad_v` of the normalized output.
pub fn backward(params: &EncoderParams, cache: &ForwardCache, grad_v: &Matrix) -> Result<EncoderParams> {
    if cache.pre.len() != params.layers.len() {
        return Err(IdfdError::ShapeMismatch(
            "cache does not belong to these parameters".into(),
        ));
    }
    let mut grad = l2_normalize_rows_backward(cache.unnormalized(), grad_v)?;
    let mut grads = params.zeros_like();
    for i in (0..params.layers.len()).rev() {
        if i + 1 < params.layers.len() {
            // Through the ReLU that followed layer i.
            for (g, &z) in grad.as_mut_slice().iter_mut().zip(cache.pre[i].as_slice()) {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        let input = &cache.inputs[i];
        let out = &mut grads.layers[i];
        out.weight = input.t_matmul(&grad)?;
        for r in 0..grad.rows() {
            for (b, g) in out.bias.iter_mut().zip(grad.row(r)) {
                *b += g;
            }
        }
        if i > 0 {
            grad = grad.matmul_t(&params.layers[i].weight)?;
        }
    }
    Ok(grads)
}

/// Heavy-ball SGD: `velocity ← β·velocity + grad`, `params ← params − lr·velocity`.
pub fn sgd_momentum_step(
    params: &mut EncoderParams,
    grads: &EncoderParams,
    velocity: &mut EncoderParams,
    lr: f64,
    beta: f64,
) -> Result<()> {
    params.check_same_shape(grads, "gradient")?;
    params.check_same_shape(velocity, "velocity")?;
    for ((p, g), v) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut velocity.layers)
    {
        let pairs = p
            .weight
            .as_mut_slice()
            .iter_mut()
            .zip(g.weight.as_slice())
            .zip(v.weight.as_mut_slice())
            .chain(p.bias.iter_mut().zip(&g.bias).zip(v.bias.iter_mut()));
        for ((pi, gi), vi) in pairs {
            *vi = beta * *vi + gi;
            *pi -= lr * *vi;
        }
    }
    Ok(())
}
