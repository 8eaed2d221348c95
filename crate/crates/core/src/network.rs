//! Dense feed-forward network shared by both Siamese branches.
//!
//! Weights are stored row-major with shape `(out_width, in_width)`. Forward and
//! backward passes accumulate in `f64` regardless of the parameter type.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Linear => z,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Linear => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_width: usize,
    pub out_width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_width: usize, out_width: usize, activation: Activation) -> Self {
        Self {
            in_width,
            out_width,
            activation,
        }
    }

    /// Builds a chain from a width list; every layer uses `activation`.
    pub fn chain(widths: &[usize], activation: Activation) -> Vec<LayerSpec> {
        widths
            .windows(2)
            .map(|w| LayerSpec::new(w[0], w[1], activation))
            .collect()
    }
}

/// Checks widths are positive and consecutive layers connect.
pub fn validate_chain(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Config("network needs at least one layer".into()));
    }
    for (k, s) in specs.iter().enumerate() {
        if s.in_width == 0 || s.out_width == 0 {
            return Err(Error::Config(format!(
                "layer {k} has a zero width ({}→{})",
                s.in_width, s.out_width
            )));
        }
    }
    for (k, pair) in specs.windows(2).enumerate() {
        if pair[0].out_width != pair[1].in_width {
            return Err(Error::Config(format!(
                "layers {}/{} do not chain: out_width {} != in_width {}",
                k,
                k + 1,
                pair[0].out_width,
                pair[1].in_width
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    in_width: usize,
    out_width: usize,
    activation: Activation,
    weights: Vec<T>,
    biases: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn new(
        in_width: usize,
        out_width: usize,
        activation: Activation,
        weights: Vec<T>,
        biases: Vec<T>,
    ) -> Result<Self> {
        if in_width == 0 || out_width == 0 {
            return Err(Error::Config(format!(
                "layer widths must be positive ({in_width}→{out_width})"
            )));
        }
        if weights.len() != in_width * out_width {
            return Err(Error::dim(in_width * out_width, weights.len(), "weight count"));
        }
        if biases.len() != out_width {
            return Err(Error::dim(out_width, biases.len(), "bias count"));
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Input("layer parameters must be finite".into()));
        }
        Ok(Self {
            in_width,
            out_width,
            activation,
            weights,
            biases,
        })
    }

    pub fn in_width(&self) -> usize {
        self.in_width
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec::new(self.in_width, self.out_width, self.activation)
    }

    /// Row-major `(out_width, in_width)` weights.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn biases(&self) -> &[T] {
        &self.biases
    }

    pub fn weight(&self, row: usize, col: usize) -> T {
        self.weights[row * self.in_width + col]
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.weights
            .chunks_exact(self.in_width)
            .zip(&self.biases)
            .map(|(row, &b)| {
                let z = row
                    .iter()
                    .zip(x)
                    .fold(b.widen(), |acc, (&w, &xi)| acc + w.widen() * xi.widen());
                T::narrow(self.activation.apply(z))
            })
            .collect()
    }
}

/// Post-activation values recorded by one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    input: Vec<T>,
    activations: Vec<Vec<T>>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn input(&self) -> &[T] {
        &self.input
    }

    /// One vector per layer, in layer order.
    pub fn activations(&self) -> &[Vec<T>] {
        &self.activations
    }

    pub fn layer_count(&self) -> usize {
        self.activations.len()
    }

    pub fn descriptor(&self) -> &[T] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn into_descriptor(mut self) -> Vec<T> {
        self.activations.pop().unwrap_or_default()
    }

    fn layer_input(&self, k: usize) -> &[T] {
        if k == 0 {
            &self.input
        } else {
            &self.activations[k - 1]
        }
    }
}

/// Parameter gradients, laid out like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like<T: Scalar>(net: &Network<T>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    /// Flat view in the same order as [`Network::parameters`].
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Network<T> {
    /// He-scaled normal weights (variance `2 / in_width`) and zero biases.
    pub fn init(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        validate_chain(specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|s| {
                let std = (2.0 / s.in_width as f64).sqrt();
                let dist = Normal::new(0.0, std).expect("positive std");
                let weights = (0..s.in_width * s.out_width)
                    .map(|_| T::narrow(dist.sample(&mut rng)))
                    .collect();
                Layer {
                    in_width: s.in_width,
                    out_width: s.out_width,
                    activation: s.activation,
                    weights,
                    biases: vec![T::zero(); s.out_width],
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        let specs: Vec<_> = layers.iter().map(Layer::spec).collect();
        validate_chain(&specs)?;
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].in_width
    }

    pub fn descriptor_width(&self) -> usize {
        self.layers[self.layers.len() - 1].out_width
    }

    /// Total neurons across all layers (hidden plus descriptor).
    pub fn neuron_count(&self) -> usize {
        self.layers.iter().map(|l| l.out_width).sum()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn parameters(&self) -> impl Iterator<Item = T> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().all(|v| v.is_finite())
    }

    pub fn forward(&self, input: &[T]) -> Result<ForwardTrace<T>> {
        if input.len() != self.input_width() {
            return Err(Error::dim(self.input_width(), input.len(), "network input"));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("network input contains non-finite values".into()));
        }
        let mut activations: Vec<Vec<T>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = activations.last().map(Vec::as_slice).unwrap_or(input);
            let y = layer.apply(x);
            activations.push(y);
        }
        Ok(ForwardTrace {
            input: input.to_vec(),
            activations,
        })
    }

    pub fn describe(&self, input: &[T]) -> Result<Vec<T>> {
        self.forward(input).map(ForwardTrace::into_descriptor)
    }

    /// Adds one branch's contribution to `grads`, given `∂E/∂descriptor`.
    pub fn accumulate_gradients(
        &self,
        grads: &mut Gradients,
        trace: &ForwardTrace<T>,
        loss_grad: &[f64],
    ) -> Result<()> {
        if trace.layer_count() != self.layers.len() || grads.layers.len() != self.layers.len() {
            return Err(Error::Structural(format!(
                "trace has {} layers, gradients {}, network {}",
                trace.layer_count(),
                grads.layers.len(),
                self.layers.len()
            )));
        }
        if loss_grad.len() != self.descriptor_width() {
            return Err(Error::dim(self.descriptor_width(), loss_grad.len(), "loss gradient"));
        }
        if loss_grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("loss gradient contains non-finite values".into()));
        }
        let mut delta = loss_grad.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let out = &trace.activations[k];
            if out.len() != layer.out_width {
                return Err(Error::Structural(format!(
                    "trace layer {k} has width {}, network has {}",
                    out.len(),
                    layer.out_width
                )));
            }
            if layer.activation == Activation::Relu {
                for (d, &a) in delta.iter_mut().zip(out) {
                    if a <= T::zero() {
                        *d = 0.0;
                    }
                }
            }
            let x = trace.layer_input(k);
            let g = &mut grads.layers[k];
            for (j, &dj) in delta.iter().enumerate() {
                if dj == 0.0 {
                    continue;
                }
                g.biases[j] += dj;
                let row = &mut g.weights[j * layer.in_width..(j + 1) * layer.in_width];
                for (gw, &xi) in row.iter_mut().zip(x) {
                    *gw += dj * xi.widen();
                }
            }
            if k > 0 {
                let mut next = vec![0.0; layer.in_width];
                for (j, &dj) in delta.iter().enumerate() {
                    if dj == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[j * layer.in_width..(j + 1) * layer.in_width];
                    for (n, &w) in next.iter_mut().zip(row) {
                        *n += w.widen() * dj;
                    }
                }
                delta = next;
            }
        }
        Ok(())
    }

    /// Gradient of the loss with respect to every parameter, summed over both
    /// Siamese branches.
    pub fn backward(
        &self,
        traces: [&ForwardTrace<T>; 2],
        loss_grads: [&[f64]; 2],
    ) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        for (trace, g) in traces.into_iter().zip(loss_grads) {
            self.accumulate_gradients(&mut grads, trace, g)?;
        }
        Ok(grads)
    }

    /// `θ ← θ − scale · step` for every parameter, computed in `f64`.
    pub fn apply_step(&mut self, step: &Gradients, scale: f64) {
        for (p, s) in self.parameters_mut().zip(step.iter()) {
            *p = T::narrow(p.widen() - scale * s);
        }
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    in_width: l.in_width,
                    out_width: l.out_width,
                    activation: l.activation,
                    weights: crate::scalar::cast_slice(&l.weights),
                    biases: crate::scalar::cast_slice(&l.biases),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: Vec<f64>, b: Vec<f64>, in_w: usize, act: Activation) -> Network<f64> {
        let out_w = b.len();
        Network::from_layers(vec![Layer::new(in_w, out_w, act, w, b).unwrap()]).unwrap()
    }

    // Independent matrix-vector product used as an oracle.
    fn matvec(w: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = b.to_vec();
        for (i, row) in w.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out[i] += v * x[j];
            }
        }
        out
    }

    #[test]
    fn init_shapes_and_zero_bias() {
        let specs = [
            LayerSpec::new(4, 3, Activation::Relu),
            LayerSpec::new(3, 2, Activation::Linear),
        ];
        let net = Network::<f64>::init(&specs, 7).unwrap();
        assert_eq!(net.layers()[0].weights().len(), 12);
        assert_eq!(net.layers()[1].weights().len(), 6);
        assert_eq!(net.layers()[0].biases(), &[0.0, 0.0, 0.0]);
        assert_eq!(net.layers()[1].biases(), &[0.0, 0.0]);
        assert_eq!(net.descriptor_width(), 2);
        assert_eq!(net, Network::<f64>::init(&specs, 7).unwrap());
        assert_ne!(net, Network::<f64>::init(&specs, 8).unwrap());
    }

    #[test]
    fn init_rejects_broken_chain() {
        let specs = [
            LayerSpec::new(4, 3, Activation::Relu),
            LayerSpec::new(5, 2, Activation::Linear),
        ];
        let err = Network::<f32>::init(&specs, 7).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("layers 0/1"), "{err}");
    }

    #[test]
    fn init_variance_is_he_scaled() {
        let net = Network::<f64>::init(&[LayerSpec::new(200, 300, Activation::Relu)], 3).unwrap();
        let w = net.layers()[0].weights();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.005, "{mean}");
        assert!((var - 0.01).abs() < 0.0005, "{var}");
    }

    #[test]
    fn forward_identity_and_clamp() {
        let eye3 = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let net = single(eye3, vec![0.0; 3], 3, Activation::Relu);
        assert_eq!(net.describe(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);

        let net = single(vec![1.0, 0.0, 0.0, 1.0], vec![-5.0, -5.0], 2, Activation::Relu);
        assert_eq!(net.describe(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn forward_matches_matvec_oracle() {
        let net = single(vec![1.0, -1.0, 2.0, 0.0], vec![0.0, 1.0], 2, Activation::Relu);
        let expected = matvec(&[vec![1.0, -1.0], vec![2.0, 0.0]], &[0.0, 1.0], &[3.0, 1.0]);
        assert_eq!(expected, vec![2.0, 7.0]);
        assert_eq!(net.describe(&[3.0, 1.0]).unwrap(), expected);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], 2, Activation::Linear);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
        assert!(matches!(net.forward(&[1.0, f64::NAN]), Err(Error::Input(_))));
    }

    #[test]
    fn zero_loss_grad_gives_zero_gradients() {
        let net = Network::<f64>::init(&LayerSpec::chain(&[4, 3, 2], Activation::Relu), 1).unwrap();
        let t = net.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let z = [0.0, 0.0];
        let g = net.backward([&t, &t], [&z, &z]).unwrap();
        assert!(g.iter().all(|v| v == 0.0));
    }

    #[test]
    fn linear_layer_gradient_is_outer_product() {
        let net = single(vec![0.5, -0.2, 0.1, 0.3, 0.7, -0.4], vec![0.0, 0.0], 3, Activation::Linear);
        let x1 = [1.0, 2.0, 3.0];
        let x2 = [-1.0, 0.5, 0.0];
        let g1 = [0.2, -0.3];
        let g2 = [1.0, 0.5];
        let t1 = net.forward(&x1).unwrap();
        let t2 = net.forward(&x2).unwrap();
        let grads = net.backward([&t1, &t2], [&g1, &g2]).unwrap();
        let lg = &grads.layers[0];
        for r in 0..2 {
            for c in 0..3 {
                let expected = g1[r] * x1[c] + g2[r] * x2[c];
                assert!((lg.weights[r * 3 + c] - expected).abs() < 1e-15);
            }
            assert!((lg.biases[r] - (g1[r] + g2[r])).abs() < 1e-15);
        }
    }

    #[test]
    fn backward_rejects_mismatched_trace() {
        let a = Network::<f64>::init(&LayerSpec::chain(&[2, 2, 2], Activation::Relu), 1).unwrap();
        let b = Network::<f64>::init(&LayerSpec::chain(&[2, 2], Activation::Relu), 1).unwrap();
        let t = b.forward(&[1.0, 1.0]).unwrap();
        let g = [1.0, 1.0];
        assert!(matches!(a.backward([&t, &t], [&g, &g]), Err(Error::Structural(_))));
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        // pre-activation exactly 0 on both units
        let net = single(vec![1.0, -1.0, 0.0, 0.0], vec![0.0, 0.0], 2, Activation::Relu);
        let t = net.forward(&[1.0, 1.0]).unwrap();
        assert_eq!(t.descriptor(), &[0.0, 0.0]);
        let g = [1.0, 1.0];
        let grads = net.backward([&t, &t], [&g, &g]).unwrap();
        assert!(grads.iter().all(|v| v == 0.0));
    }
}
