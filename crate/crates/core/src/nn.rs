//! Dense multilayer perceptrons with exact reverse-mode gradients and ADAM.
//!
//! Everything works on row batches: an input of shape `(rows, in_dim)` is
//! pushed through every layer at once so the heavy lifting happens in a few
//! matrix products.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{gemm, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    x
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => T::one() / (T::one() + (-x).exp()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    ///
    /// ReLU uses 0 at a zero pre-activation.
    #[inline]
    fn derivative_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => y * (T::one() - y),
            Activation::Identity => T::one(),
        }
    }
}

/// `y = act(W x + b)` with `W` of shape `(out_dim, in_dim)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
            activation,
        }
    }

    /// He-uniform weights, zero bias.
    pub fn kaiming(in_dim: usize, out_dim: usize, activation: Activation, seed: u64) -> Self {
        Self {
            weight: init_kaiming_uniform((out_dim, in_dim), in_dim, seed),
            bias: Array1::zeros(out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    fn forward(&self, x: &ArrayView2<'_, T>) -> Array2<T> {
        let out = self.out_dim();
        let mut y = x.dot(&self.weight.t());
        let bias = self.bias.as_slice().expect("contiguous bias");
        let act = self.activation;
        for row in y.as_slice_mut().expect("fresh array").chunks_exact_mut(out) {
            for (v, &b) in row.iter_mut().zip(bias) {
                *v = act.apply(*v + b);
            }
        }
        y
    }
}

/// Samples `Uniform(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
pub fn init_kaiming_uniform<T: Scalar>(shape: (usize, usize), fan_in: usize, seed: u64) -> Array2<T> {
    assert!(fan_in >= 1, "fan_in must be positive");
    let bound = (6.0 / fan_in as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn(shape, || T::from_f64_lossy(rng.random_range(-bound..=bound)))
}

/// Gradients for one dense layer, same shapes as the layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<DenseLayer<T>>,
}

/// Layer inputs and outputs retained from a forward pass.
#[derive(Clone, Debug)]
pub struct MlpTrace<T> {
    /// `activations[0]` is the input, `activations[l + 1]` the output of layer `l`.
    activations: Vec<Array2<T>>,
}

impl<T: Scalar> MlpTrace<T> {
    pub fn output(&self) -> &Array2<T> {
        self.activations.last().expect("trace holds the input at least")
    }

    pub fn input(&self) -> &Array2<T> {
        &self.activations[0]
    }

    pub fn rows(&self) -> usize {
        self.activations[0].nrows()
    }

    /// Input followed by every layer output.
    pub fn activations(&self) -> &[Array2<T>] {
        &self.activations
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads<T> {
    pub layers: Vec<LayerGrad<T>>,
}

impl<T: Scalar> MlpGrads<T> {
    pub fn zeros_like(mlp: &Mlp<T>) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn flatten_into(&self, out: &mut Vec<T>) {
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
    }
}

impl<T: Scalar> Mlp<T> {
    /// Layer widths `dims[0] -> dims[1] -> ...`; hidden layers use `hidden`,
    /// the last layer uses `output`.
    pub fn kaiming(dims: &[usize], hidden: Activation, output: Activation, seed: u64) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least one layer");
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { output } else { hidden };
                DenseLayer::kaiming(
                    w[0],
                    w[1],
                    act,
                    seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                )
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(dims: &[usize], hidden: Activation, output: Activation) -> Self {
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| DenseLayer::zeros(w[0], w[1], if i == last { output } else { hidden }))
            .collect();
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    /// `[in, hidden..., out]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.in_dim())
            .chain(self.layers.iter().map(|l| l.out_dim()))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn flatten_into(&self, out: &mut Vec<T>) {
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
    }

    /// Overwrite parameters from the front of `src`, advancing it.
    pub fn assign_from(&mut self, src: &mut &[T]) {
        for l in &mut self.layers {
            for dst in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *dst = src[0];
                *src = &src[1..];
            }
        }
    }

    pub fn forward_batch(&self, input: Array2<T>) -> Result<MlpTrace<T>> {
        if input.ncols() != self.in_dim() {
            return Err(Error::Dimension {
                context: "mlp input",
                expected: self.in_dim(),
                got: input.ncols(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input);
        for layer in &self.layers {
            let next = layer.forward(&activations.last().expect("non-empty").view());
            activations.push(next);
        }
        Ok(MlpTrace { activations })
    }

    pub fn forward(&self, input: &[T]) -> Result<(Vec<T>, MlpTrace<T>)> {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row vector");
        let trace = self.forward_batch(x)?;
        Ok((trace.output().row(0).to_vec(), trace))
    }

    fn check_trace(&self, trace: &MlpTrace<T>) -> Result<()> {
        let ok = trace.activations.len() == self.layers.len() + 1
            && trace
                .activations
                .iter()
                .zip(self.dims())
                .all(|(a, d)| a.ncols() == d && a.nrows() == trace.rows());
        if ok {
            Ok(())
        } else {
            Err(Error::StaleTrace("mlp trace shapes differ from the network"))
        }
    }

    /// Accumulate the gradient of `sum(output * upstream)` into `grads` and
    /// return the gradient with respect to the input rows.
    pub fn backward_into(
        &self,
        trace: &MlpTrace<T>,
        upstream: ArrayView2<'_, T>,
        grads: &mut MlpGrads<T>,
    ) -> Result<Array2<T>> {
        self.check_trace(trace)?;
        if upstream.dim() != trace.output().dim() {
            return Err(Error::Dimension {
                context: "mlp upstream gradient",
                expected: trace.output().len(),
                got: upstream.len(),
            });
        }
        let mut delta = upstream.as_standard_layout().into_owned();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let out = &trace.activations[l + 1];
            let act = layer.activation;
            if act != Activation::Identity {
                delta.zip_mut_with(out, |d, &y| *d *= act.derivative_from_output(y));
            }
            let x = &trace.activations[l];
            let g = &mut grads.layers[l];
            gemm(T::one(), &delta.t(), &x.view(), T::one(), &mut g.weight.view_mut());
            let gb = g.bias.as_slice_mut().expect("contiguous bias");
            let width = gb.len();
            for row in delta.as_slice().expect("standard layout").chunks_exact(width) {
                for (b, &d) in gb.iter_mut().zip(row) {
                    *b += d;
                }
            }
            delta = delta.dot(&layer.weight);
        }
        Ok(delta)
    }

    pub fn backward(&self, trace: &MlpTrace<T>, upstream: ArrayView2<'_, T>) -> Result<(MlpGrads<T>, Array2<T>)> {
        let mut grads = MlpGrads::zeros_like(self);
        let dx = self.backward_into(trace, upstream, &mut grads)?;
        Ok((grads, dx))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// ADAM moments over a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self {
            config,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
        }
    }

    /// One bias-corrected ADAM update. Non-finite gradients abort without touching state.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension {
                context: "adam parameters",
                expected: self.m.len(),
                got: params.len().min(grads.len()),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient entry {i} = {} at adam step {}",
                grads[i],
                self.t + 1
            )));
        }
        self.t += 1;
        let c = self.config;
        let b1 = T::from_f64_lossy(c.beta1);
        let b2 = T::from_f64_lossy(c.beta2);
        let one = T::one();
        let corr1 = T::from_f64_lossy(1.0 - c.beta1.powi(self.t as i32));
        let corr2 = T::from_f64_lossy(1.0 - c.beta2.powi(self.t as i32));
        let lr = T::from_f64_lossy(c.lr);
        let eps = T::from_f64_lossy(c.eps);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / corr1;
            let v_hat = *v / corr2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
