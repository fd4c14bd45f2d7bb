//! Multilayer perceptron with He initialisation, an optional topology gain,
//! softmax cross-entropy and hand-written backpropagation.
//!
//! All parameters of a model live in one flat vector (per layer: the
//! `fan_in × fan_out` weight matrix stored input-major, then the bias), which
//! keeps aggregation, optimisers and parameter deltas simple slice operations.
//! Models are generic over the float type: `f32` for simulation, `f64` where
//! finite-difference checks need the precision.

mod optim;
mod serialize;

use std::fmt;
use std::str::FromStr;

use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

pub use optim::{OptimiserKind, OptimiserState};
pub use serialize::{read_model, write_model};

use crate::data::Dataset;
use crate::rng;

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("unknown activation {0:?}")]
    UnknownActivation(String),
    #[error("fan-in must be at least 1")]
    InvalidFanIn,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid architecture: {0}")]
    InvalidSpec(String),
    #[error("label {label} out of range for {classes} outputs")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Float types a model can be instantiated with.
pub trait Scalar: Float + Default + Send + Sync + fmt::Debug + std::iter::Sum + 'static {
    fn of(x: f64) -> Self;
    fn of_f32(x: f32) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn of_f32(x: f32) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn of_f32(x: f32) -> Self {
        x as f64
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Linear,
}

impl Activation {
    /// `g²` in the He variance rule `σ² = g² / fan_in`.
    pub fn gain_squared(&self) -> f64 {
        match *self {
            Activation::Relu => 2.0,
            Activation::LeakyRelu { slope } => 2.0 / (1.0 + slope * slope),
            Activation::Tanh | Activation::Linear => 1.0,
        }
    }

    fn apply<T: Scalar>(&self, z: T) -> T {
        match *self {
            Activation::Relu => z.max(T::zero()),
            Activation::LeakyRelu { slope } => {
                if z > T::zero() {
                    z
                } else {
                    z * T::of(slope)
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative given the pre-activation `z` and the output `a`.
    fn derivative<T: Scalar>(&self, z: T, a: T) -> T {
        match *self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::of(slope)
                }
            }
            Activation::Tanh => T::one() - a * a,
            Activation::Linear => T::one(),
        }
    }

    fn code(&self) -> (u32, f32) {
        match *self {
            Activation::Linear => (0, 0.0),
            Activation::Relu => (1, 0.0),
            Activation::Tanh => (2, 0.0),
            Activation::LeakyRelu { slope } => (3, slope as f32),
        }
    }

    fn from_code(code: u32, param: f32) -> Option<Self> {
        Some(match code {
            0 => Activation::Linear,
            1 => Activation::Relu,
            2 => Activation::Tanh,
            3 => Activation::LeakyRelu { slope: param as f64 },
            _ => return None,
        })
    }
}

impl FromStr for Activation {
    type Err = NeuralError;

    /// `relu`, `tanh`, `linear`, `leaky_relu` (slope 0.01) or `leaky_relu:<slope>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "linear" => Ok(Activation::Linear),
            "leaky_relu" => Ok(Activation::LeakyRelu { slope: 0.01 }),
            _ => s
                .strip_prefix("leaky_relu:")
                .and_then(|v| v.parse::<f64>().ok())
                .map(|slope| Activation::LeakyRelu { slope })
                .ok_or_else(|| NeuralError::UnknownActivation(s.to_string())),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => f.write_str("relu"),
            Activation::Tanh => f.write_str("tanh"),
            Activation::Linear => f.write_str("linear"),
            Activation::LeakyRelu { slope } => write!(f, "leaky_relu:{slope}"),
        }
    }
}

impl serde::Serialize for Activation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Activation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// He standard deviation `√(g² / fan_in)`.
pub fn he_sigma(fan_in: usize, activation: Activation) -> Result<f64, NeuralError> {
    if fan_in == 0 {
        return Err(NeuralError::InvalidFanIn);
    }
    Ok((activation.gain_squared() / fan_in as f64).sqrt())
}

/// Layer widths from input to logits, with one activation per hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    hidden_activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, hidden_activations: Vec<Activation>) -> Result<Self, NeuralError> {
        if layer_sizes.len() < 2 {
            return Err(NeuralError::InvalidSpec(
                "need at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(NeuralError::InvalidSpec("layer sizes must be positive".into()));
        }
        if hidden_activations.len() != layer_sizes.len() - 2 {
            return Err(NeuralError::InvalidSpec(format!(
                "{} hidden layers but {} activations",
                layer_sizes.len() - 2,
                hidden_activations.len()
            )));
        }
        Ok(MlpSpec {
            layer_sizes,
            hidden_activations,
        })
    }

    /// Same activation on every hidden layer.
    pub fn uniform(layer_sizes: &[usize], activation: Activation) -> Result<Self, NeuralError> {
        let hidden = layer_sizes.len().saturating_sub(2);
        Self::new(layer_sizes.to_vec(), vec![activation; hidden])
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_activations(&self) -> &[Activation] {
        &self.hidden_activations
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().expect("non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Activation following weight layer `l`; logits are linear.
    pub fn activation(&self, l: usize) -> Activation {
        self.hidden_activations.get(l).copied().unwrap_or(Activation::Linear)
    }

    pub fn num_params(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Offset of the weight matrix in the flat parameter vector.
    pub weights: usize,
    /// Offset of the bias vector.
    pub bias: usize,
}

impl LayerShape {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weights..self.weights + self.fan_in * self.fan_out
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias..self.bias + self.fan_out
    }
}

fn layout(spec: &MlpSpec) -> Vec<LayerShape> {
    let mut off = 0;
    spec.layer_sizes
        .windows(2)
        .map(|w| {
            let s = LayerShape {
                fan_in: w[0],
                fan_out: w[1],
                weights: off,
                bias: off + w[0] * w[1],
            };
            off += w[0] * w[1] + w[1];
            s
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    spec: MlpSpec,
    shapes: Vec<LayerShape>,
    params: Vec<T>,
}

/// He-initialised weights scaled by `gain`, zero biases. Each layer draws
/// from its own stream, so layers do not depend on each other's draw counts.
/// The stored weight is `(σ·z) · gain` rounded in that order, so a model with
/// gain `g` equals `g` times the gain-1 model under the same seed.
pub fn init_model<T: Scalar>(spec: &MlpSpec, gain: f64, seed: u64) -> Mlp<T> {
    let mut model = Mlp::zeros(spec);
    let g = T::of(gain);
    for (l, shape) in model.shapes.clone().iter().enumerate() {
        let sigma = he_sigma(shape.fan_in, spec.activation(l)).expect("fan-in ≥ 1 by construction");
        let mut r = rng::stream(seed, &[rng::tag::INIT, l as u64]);
        for w in &mut model.params[shape.weight_range()] {
            let z: f64 = StandardNormal.sample(&mut r);
            *w = T::of(sigma * z) * g;
        }
    }
    model
}

struct Tape<T> {
    /// `acts[0]` is the input; `acts[l + 1]` is the output of layer `l`.
    acts: Vec<Vec<T>>,
    /// Pre-activations per layer.
    pre: Vec<Vec<T>>,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let tail: T = ca.remainder().iter().zip(cb.remainder()).map(|(&x, &y)| x * y).sum();
    acc.iter().copied().sum::<T>() + tail
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Mlp {
            spec: spec.clone(),
            shapes: layout(spec),
            params: vec![T::zero(); spec.num_params()],
        }
    }

    pub fn from_params(spec: &MlpSpec, params: Vec<T>) -> Result<Self, NeuralError> {
        if params.len() != spec.num_params() {
            return Err(NeuralError::ShapeMismatch(format!(
                "{} parameters for an architecture with {}",
                params.len(),
                spec.num_params()
            )));
        }
        Ok(Mlp {
            spec: spec.clone(),
            shapes: layout(spec),
            params,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<T> {
        self.params
    }

    pub fn weights(&self, layer: usize) -> &[T] {
        &self.params[self.shapes[layer].weight_range()]
    }

    pub fn bias(&self, layer: usize) -> &[T] {
        &self.params[self.shapes[layer].bias_range()]
    }

    fn run(&self, input: &[T], batch: usize) -> Tape<T> {
        let mut tape = Tape {
            acts: Vec::with_capacity(self.shapes.len() + 1),
            pre: Vec::with_capacity(self.shapes.len()),
        };
        tape.acts.push(input.to_vec());
        for (l, s) in self.shapes.iter().enumerate() {
            let w = &self.params[s.weight_range()];
            let b = &self.params[s.bias_range()];
            let a = &tape.acts[l];
            let mut z = Vec::with_capacity(batch * s.fan_out);
            for r in 0..batch {
                z.extend_from_slice(b);
                let zr = &mut z[r * s.fan_out..];
                for (i, &x) in a[r * s.fan_in..(r + 1) * s.fan_in].iter().enumerate() {
                    if x == T::zero() {
                        continue;
                    }
                    let wi = &w[i * s.fan_out..(i + 1) * s.fan_out];
                    zr.iter_mut().zip(wi).for_each(|(o, &wv)| *o = *o + x * wv);
                }
            }
            let act = self.spec.activation(l);
            let out = z.iter().map(|&v| act.apply(v)).collect();
            tape.pre.push(z);
            tape.acts.push(out);
        }
        tape
    }

    fn check_input(&self, input: &[T], labels: Option<&[u8]>) -> Result<usize, NeuralError> {
        let width = self.spec.inputs();
        if !input.len().is_multiple_of(width) {
            return Err(NeuralError::ShapeMismatch(format!(
                "input length {} is not a multiple of width {width}",
                input.len()
            )));
        }
        let batch = input.len() / width;
        if let Some(labels) = labels {
            if labels.len() != batch {
                return Err(NeuralError::ShapeMismatch(format!(
                    "{batch} inputs but {} labels",
                    labels.len()
                )));
            }
            let classes = self.spec.outputs();
            if let Some(&l) = labels.iter().find(|&&l| l as usize >= classes) {
                return Err(NeuralError::LabelOutOfRange {
                    label: l as usize,
                    classes,
                });
            }
        }
        Ok(batch)
    }

    /// Logits for a row-major batch.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>, NeuralError> {
        let batch = self.check_input(input, None)?;
        Ok(self.run(input, batch).acts.pop().expect("output layer"))
    }

    /// Mean softmax cross-entropy and its gradient in the flat layout.
    pub fn loss_and_grads(&self, input: &[T], labels: &[u8]) -> Result<(f64, Vec<T>), NeuralError> {
        let batch = self.check_input(input, Some(labels))?;
        let mut tape = self.run(input, batch);
        let classes = self.spec.outputs();
        let logits = tape.acts.pop().expect("output layer");
        let mut delta = vec![T::zero(); batch * classes];
        let mut loss = 0.0;
        for r in 0..batch {
            let row = &logits[r * classes..(r + 1) * classes];
            let (lse, probs) = log_softmax(row);
            let y = labels[r] as usize;
            loss += lse - row[y].as_f64();
            for (c, p) in probs.into_iter().enumerate() {
                let target = if c == y { 1.0 } else { 0.0 };
                delta[r * classes + c] = T::of((p - target) / batch as f64);
            }
        }
        loss /= batch as f64;

        let mut grads = vec![T::zero(); self.params.len()];
        for l in (0..self.shapes.len()).rev() {
            let s = self.shapes[l];
            let a = &tape.acts[l];
            {
                let (gw, gb) = grads[s.weights..s.bias + s.fan_out].split_at_mut(s.fan_in * s.fan_out);
                for r in 0..batch {
                    let dr = &delta[r * s.fan_out..(r + 1) * s.fan_out];
                    gb.iter_mut().zip(dr).for_each(|(g, &d)| *g = *g + d);
                    for (i, &x) in a[r * s.fan_in..(r + 1) * s.fan_in].iter().enumerate() {
                        if x == T::zero() {
                            continue;
                        }
                        gw[i * s.fan_out..(i + 1) * s.fan_out]
                            .iter_mut()
                            .zip(dr)
                            .for_each(|(g, &d)| *g = *g + x * d);
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[s.weight_range()];
            let act = self.spec.activation(l - 1);
            let (z_prev, a_prev) = (&tape.pre[l - 1], &tape.acts[l]);
            let mut next = vec![T::zero(); batch * s.fan_in];
            for r in 0..batch {
                let dr = &delta[r * s.fan_out..(r + 1) * s.fan_out];
                for i in 0..s.fan_in {
                    let k = r * s.fan_in + i;
                    let dz = act.derivative(z_prev[k], a_prev[k]);
                    if dz != T::zero() {
                        next[k] = dot(dr, &w[i * s.fan_out..(i + 1) * s.fan_out]) * dz;
                    }
                }
            }
            delta = next;
            tape.acts.truncate(l + 1);
        }
        Ok((loss, grads))
    }

    /// Mean cross-entropy and accuracy over a dataset, in chunks of `batch`.
    pub fn evaluate(&self, data: &Dataset, batch: usize) -> Result<(f64, f64), NeuralError> {
        if data.width != self.spec.inputs() {
            return Err(NeuralError::ShapeMismatch(format!(
                "dataset width {} vs model input {}",
                data.width,
                self.spec.inputs()
            )));
        }
        let classes = self.spec.outputs();
        let (mut loss, mut correct) = (0.0, 0usize);
        let mut buf = Vec::new();
        for start in (0..data.len()).step_by(batch.max(1)) {
            let end = (start + batch.max(1)).min(data.len());
            buf.clear();
            buf.extend(
                data.inputs[start * data.width..end * data.width]
                    .iter()
                    .map(|&x| T::of_f32(x)),
            );
            let logits = self.run(&buf, end - start).acts.pop().expect("output layer");
            for (r, row) in logits.chunks_exact(classes).enumerate() {
                let y = data.labels[start + r] as usize;
                let (lse, _) = log_softmax(row);
                loss += lse - row[y].as_f64();
                let argmax = row
                    .iter()
                    .enumerate()
                    .fold(
                        (0, T::neg_infinity()),
                        |best, (c, &v)| if v > best.1 { (c, v) } else { best },
                    )
                    .0;
                correct += (argmax == y) as usize;
            }
        }
        let n = data.len().max(1) as f64;
        Ok((loss / n, correct as f64 / n))
    }
}

/// `(logsumexp, softmax)` computed in f64 with max subtraction.
fn log_softmax<T: Scalar>(row: &[T]) -> (f64, Vec<f64>) {
    let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v.as_f64() - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    (max + sum.ln(), exps.into_iter().map(|e| e / sum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn he_sigma_examples() {
        assert_eq!(he_sigma(512, Activation::Relu).unwrap(), 0.0625);
        assert_eq!(he_sigma(1, Activation::Linear).unwrap(), 1.0);
        assert!((he_sigma(100, Activation::LeakyRelu { slope: 1.0 }).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(he_sigma(0, Activation::Relu), Err(NeuralError::InvalidFanIn)));
    }

    #[test]
    fn activation_parsing() {
        assert_eq!("relu".parse::<Activation>().unwrap(), Activation::Relu);
        assert_eq!(
            "leaky_relu:0.2".parse::<Activation>().unwrap(),
            Activation::LeakyRelu { slope: 0.2 }
        );
        assert!(matches!(
            "gelu".parse::<Activation>(),
            Err(NeuralError::UnknownActivation(_))
        ));
        for a in [
            Activation::Relu,
            Activation::Tanh,
            Activation::Linear,
            Activation::LeakyRelu { slope: 0.3 },
        ] {
            assert_eq!(a.to_string().parse::<Activation>().unwrap(), a);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(MlpSpec::uniform(&[3], Activation::Relu).is_err());
        assert!(MlpSpec::uniform(&[3, 0, 2], Activation::Relu).is_err());
        assert!(MlpSpec::new(vec![3, 4, 2], vec![]).is_err());
        let s = MlpSpec::uniform(&[784, 512, 256, 128, 10], Activation::Relu).unwrap();
        assert_eq!(
            s.num_params(),
            784 * 512 + 512 + 512 * 256 + 256 + 256 * 128 + 128 + 128 * 10 + 10
        );
        assert_eq!(s.activation(3), Activation::Linear);
    }

    fn sample_std(xs: &[f32]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
        (xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n).sqrt()
    }

    #[test]
    fn init_statistics() {
        let spec = MlpSpec::uniform(&[784, 512, 256, 10], Activation::Relu).unwrap();
        let m: Mlp<f32> = init_model(&spec, 1.0, 3);
        for (l, s) in m.shapes().iter().enumerate() {
            let expect = he_sigma(s.fan_in, spec.activation(l)).unwrap();
            let got = sample_std(m.weights(l));
            assert!((got / expect - 1.0).abs() < 0.03, "layer {l}: {got} vs {expect}");
            assert!(m.bias(l).iter().all(|&b| b == 0.0));
        }
        let g8: Mlp<f32> = init_model(&spec, 8.0, 3);
        let got = sample_std(g8.weights(0));
        assert!((got / (8.0 * he_sigma(784, Activation::Relu).unwrap()) - 1.0).abs() < 0.03);
    }

    #[test]
    fn gain_scales_exactly() {
        let spec = MlpSpec::uniform(&[20, 16, 8, 3], Activation::Relu).unwrap();
        let base: Mlp<f32> = init_model(&spec, 1.0, 11);
        for gain in [0.5f64, 3.0, 1.0 / 0.28f64.sqrt(), 1000.0] {
            let scaled: Mlp<f32> = init_model(&spec, gain, 11);
            let g = gain as f32;
            for (a, b) in scaled.params().iter().zip(base.params()) {
                assert_eq!(a.to_bits(), (b * g).to_bits());
            }
        }
    }

    #[test]
    fn zero_model_loss_is_log_classes() {
        let spec = MlpSpec::uniform(&[5, 7, 10], Activation::Relu).unwrap();
        let m: Mlp<f64> = Mlp::zeros(&spec);
        let x = vec![0.3; 5 * 4];
        let (loss, _) = m.loss_and_grads(&x, &[0, 3, 9, 2]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn duplicate_batch_same_loss() {
        let spec = MlpSpec::uniform(&[4, 6, 3], Activation::Tanh).unwrap();
        let m: Mlp<f64> = init_model(&spec, 1.0, 5);
        let x: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        let (l1, g1) = m.loss_and_grads(&x, &[0, 2]).unwrap();
        let xx = [x.clone(), x].concat();
        let (l2, g2) = m.loss_and_grads(&xx, &[0, 2, 0, 2]).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn shape_errors() {
        let spec = MlpSpec::uniform(&[4, 3], Activation::Relu).unwrap();
        let m: Mlp<f64> = Mlp::zeros(&spec);
        assert!(matches!(m.forward(&[1.0; 5]), Err(NeuralError::ShapeMismatch(_))));
        assert!(matches!(
            m.loss_and_grads(&[1.0; 8], &[0]),
            Err(NeuralError::ShapeMismatch(_))
        ));
        assert!(matches!(
            m.loss_and_grads(&[1.0; 4], &[3]),
            Err(NeuralError::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }

    /// Central differences in f64, step 1e-5.
    fn finite_difference(m: &Mlp<f64>, x: &[f64], y: &[u8], idx: usize) -> f64 {
        let h = 1e-5;
        let mut plus = m.clone();
        plus.params_mut()[idx] += h;
        let mut minus = m.clone();
        minus.params_mut()[idx] -= h;
        let lp = plus.loss_and_grads(x, y).unwrap().0;
        let lm = minus.loss_and_grads(x, y).unwrap().0;
        (lp - lm) / (2.0 * h)
    }

    #[test]
    fn gradient_matches_finite_differences_single_example() {
        let spec = MlpSpec::uniform(&[6, 5, 4], Activation::Tanh).unwrap();
        let m: Mlp<f64> = init_model(&spec, 1.0, 21);
        let x: Vec<f64> = (0..6).map(|i| 0.5 - 0.2 * i as f64).collect();
        let (_, g) = m.loss_and_grads(&x, &[2]).unwrap();
        for (idx, &gi) in g.iter().enumerate() {
            let fd = finite_difference(&m, &x, &[2], idx);
            let rel = (gi - fd).abs() / gi.abs().max(fd.abs()).max(1e-8);
            assert!(rel < 1e-6 || (gi - fd).abs() < 1e-10, "param {idx}: {gi} vs {fd}");
        }
    }

    #[test]
    fn gradient_check_deep_relu() {
        let spec = MlpSpec::uniform(&[5, 8, 6, 3], Activation::LeakyRelu { slope: 0.1 }).unwrap();
        let m: Mlp<f64> = init_model(&spec, 1.0, 2);
        let mut r = rng::stream(4, &[]);
        let x: Vec<f64> = (0..15).map(|_| r.random::<f64>() - 0.5).collect();
        let y = [0u8, 1, 2];
        let (_, g) = m.loss_and_grads(&x, &y).unwrap();
        for (idx, &gi) in g.iter().enumerate() {
            let fd = finite_difference(&m, &x, &y, idx);
            assert!((gi - fd).abs() < 1e-7 * (1.0 + fd.abs()), "param {idx}");
        }
    }

    #[test]
    fn evaluate_matches_loss() {
        let data = crate::data::gaussian_blobs(10, 3, 5, 2.0, 1);
        let spec = MlpSpec::uniform(&[5, 8, 3], Activation::Relu).unwrap();
        let m: Mlp<f32> = init_model(&spec, 1.0, 9);
        let (loss, acc) = m.evaluate(&data, 7).unwrap();
        let (direct, _) = m.loss_and_grads(&data.inputs, &data.labels).unwrap();
        assert!((loss - direct).abs() < 1e-5);
        assert!((0.0..=1.0).contains(&acc));
    }

    #[test]
    fn huge_gain_loss_stays_finite() {
        let spec = MlpSpec::uniform(&[784, 512, 256, 128, 10], Activation::Relu).unwrap();
        let m: Mlp<f32> = init_model(&spec, 1000.0, 1);
        let data = crate::data::gaussian_blobs(2, 10, 784, 1.0, 3);
        let (loss, _) = m.evaluate(&data, 20).unwrap();
        assert!(loss.is_finite());
    }

    #[test]
    fn separable_blobs_are_learned() {
        let data = crate::data::gaussian_blobs(100, 2, 8, 3.0, 11);
        let spec = MlpSpec::uniform(&[8, 16, 2], Activation::Relu).unwrap();
        let mut m: Mlp<f32> = init_model(&spec, 1.0, 4);
        let mut opt = optim::OptimiserState::new(
            optim::OptimiserKind::SgdMomentum {
                lr: 0.05,
                momentum: 0.9,
            },
            spec.num_params(),
        );
        let all: Vec<usize> = (0..data.len()).collect();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        data.gather(&all, &mut x, &mut y);
        let mut steps = 0;
        while m.evaluate(&data, 200).unwrap().1 < 0.99 {
            assert!(steps < 500, "accuracy below 99% after 500 steps");
            let (_, g) = m.loss_and_grads(&x, &y).unwrap();
            opt.step(m.params_mut(), &g).unwrap();
            steps += 1;
        }
    }
}
