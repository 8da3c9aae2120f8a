use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::ParamVector;
use crate::error::{ensure_len, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(format!("unknown activation `{other}` (allowed: tanh, relu)")),
        }
    }
}

/// Shape of a dense network. Hidden layers use `activation`; the output layer
/// is affine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    activation: Activation,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(invalid("an MLP needs at least an input and an output size"));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(invalid(format!("layer sizes must be positive: {layer_sizes:?}")));
        }
        Ok(MlpSpec {
            layer_sizes,
            activation,
        })
    }

    /// `input → hidden… → output`.
    pub fn with_hidden(input: usize, hidden: &[usize], output: usize, activation: Activation) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes, activation)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut values = Vec::with_capacity(self.param_count());
        for w in self.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                values.push(rng.random_range(-bound..bound));
            }
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        ParamVector::new(values)
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        ensure_len("mlp params", params.len(), self.param_count())
    }

    /// Weight (out × in, row-major) and bias views for every layer.
    fn layers<'a>(&self, params: &'a [f64]) -> Vec<(ArrayView2<'a, f64>, ArrayView1<'a, f64>)> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let weight = ArrayView2::from_shape((n_out, n_in), &params[offset..offset + n_in * n_out])
                    .expect("layer shape");
                offset += n_in * n_out;
                let bias = ArrayView1::from(&params[offset..offset + n_out]);
                offset += n_out;
                (weight, bias)
            })
            .collect()
    }
}

/// Layer inputs recorded by a cached forward pass; `inputs[0]` is the network
/// input and `inputs[i]` the activated output of hidden layer `i`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
}

/// Batched forward pass, one sample per row.
pub fn forward_batch(spec: &MlpSpec, params: &[f64], input: ArrayView2<f64>) -> Result<Array2<f64>> {
    spec.check_params(params)?;
    ensure_len("mlp input width", input.ncols(), spec.input_dim())?;
    let layers = spec.layers(params);
    let last = layers.len() - 1;
    let mut h = input.to_owned();
    for (i, (weight, bias)) in layers.iter().enumerate() {
        let mut z = h.dot(&weight.t());
        z += bias;
        if i < last {
            z.mapv_inplace(|v| spec.activation.apply(v));
        }
        h = z;
    }
    Ok(h)
}

/// Forward pass that keeps what `backward_batch` needs.
pub fn forward_batch_cached(
    spec: &MlpSpec,
    params: &[f64],
    input: ArrayView2<f64>,
) -> Result<(Array2<f64>, ForwardCache)> {
    spec.check_params(params)?;
    ensure_len("mlp input width", input.ncols(), spec.input_dim())?;
    let layers = spec.layers(params);
    let last = layers.len() - 1;
    let mut inputs = Vec::with_capacity(layers.len());
    let mut h = input.to_owned();
    for (i, (weight, bias)) in layers.iter().enumerate() {
        let mut z = h.dot(&weight.t());
        z += bias;
        if i < last {
            z.mapv_inplace(|v| spec.activation.apply(v));
        }
        inputs.push(std::mem::replace(&mut h, z));
    }
    Ok((h, ForwardCache { inputs }))
}

/// Gradients of `Σ_rows ⟨upstream_row, output_row⟩` with respect to the
/// parameters (summed over the batch) and to each input row.
pub fn backward_batch(
    spec: &MlpSpec,
    params: &[f64],
    cache: &ForwardCache,
    upstream: ArrayView2<f64>,
) -> Result<(ParamVector, Array2<f64>)> {
    spec.check_params(params)?;
    ensure_len("upstream gradient width", upstream.ncols(), spec.output_dim())?;
    let batch = cache.inputs[0].nrows();
    ensure_len("upstream gradient rows", upstream.nrows(), batch)?;

    let layers = spec.layers(params);
    let mut grad = vec![0.0; spec.param_count()];
    let mut offsets = Vec::with_capacity(layers.len());
    let mut offset = 0;
    for w in spec.layer_sizes.windows(2) {
        offsets.push(offset);
        offset += w[0] * w[1] + w[1];
    }

    let mut delta = upstream.to_owned();
    for i in (0..layers.len()).rev() {
        let (weight, _) = &layers[i];
        let x = &cache.inputs[i];
        let (n_out, n_in) = weight.dim();
        let dw = delta.t().dot(x);
        let db = delta.sum_axis(Axis(0));
        let start = offsets[i];
        // row-major order regardless of the product's memory layout
        for (g, v) in grad[start..start + n_in * n_out].iter_mut().zip(dw.iter()) {
            *g = *v;
        }
        for (g, v) in grad[start + n_in * n_out..start + n_in * n_out + n_out].iter_mut().zip(db.iter()) {
            *g = *v;
        }
        let mut dx = delta.dot(weight);
        if i > 0 {
            // x is the activated output of layer i-1
            dx.zip_mut_with(x, |g, &h| *g *= spec.activation.derivative_from_output(h));
        }
        delta = dx;
    }
    Ok((ParamVector::new(grad), delta))
}

pub fn mlp_forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    ensure_len("mlp input", input.len(), spec.input_dim())?;
    let row = ArrayView2::from_shape((1, input.len()), input).expect("row shape");
    Ok(forward_batch(spec, params, row)?.into_raw_vec_and_offset().0)
}

/// Returns `(∂/∂params, ∂/∂input)` of `⟨upstream, mlp_forward(input)⟩`.
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    upstream: &[f64],
) -> Result<(ParamVector, Vec<f64>)> {
    ensure_len("mlp input", input.len(), spec.input_dim())?;
    ensure_len("upstream gradient", upstream.len(), spec.output_dim())?;
    let row = ArrayView2::from_shape((1, input.len()), input).expect("row shape");
    let (_, cache) = forward_batch_cached(spec, params, row)?;
    let up = ArrayView2::from_shape((1, upstream.len()), upstream).expect("row shape");
    let (pg, ig) = backward_batch(spec, params, &cache, up)?;
    Ok((pg, ig.into_raw_vec_and_offset().0))
}

/// Convenience: stack equal-length rows into a matrix.
pub fn rows_to_array(rows: &[Vec<f64>], width: usize) -> Result<Array2<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * width);
    for r in rows {
        ensure_len("row", r.len(), width)?;
        flat.extend_from_slice(r);
    }
    Ok(Array2::from_shape_vec((rows.len(), width), flat).expect("shape checked"))
}
