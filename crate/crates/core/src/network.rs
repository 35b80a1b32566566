//! Sequential networks with a recorded forward tape and reverse-mode backward.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::activations::ActivationSpec;
use crate::error::{Error, Result};
use crate::layers::{ActivationLayer, Cache, Conv2d, Layer, Linear, MaxPool2d, ParamMut};
use crate::tensor::Tensor;

/// Built-in architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Three conv blocks, one hidden FC layer and the classifier.
    Conv3,
    /// `Conv3` with a two-unit linear bottleneck before the classifier.
    Conv3Fc2,
    /// Two-layer perceptron on flat inputs, used for toy problems.
    Mlp,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Conv3 => "conv3",
            Preset::Conv3Fc2 => "conv3_fc2",
            Preset::Mlp => "mlp",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "conv3" => Ok(Preset::Conv3),
            "conv3_fc2" | "fc2" => Ok(Preset::Conv3Fc2),
            "mlp" => Ok(Preset::Mlp),
            _ => Err(Error::Unknown {
                what: "network",
                name: s.to_string(),
            }),
        }
    }
}

/// Channel widths of the convolutional presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Widths {
    pub conv: [usize; 3],
    pub hidden: usize,
}

impl Default for Widths {
    fn default() -> Self {
        Self {
            conv: [16, 32, 64],
            hidden: 64,
        }
    }
}

#[derive(Debug)]
struct Tape {
    caches: Vec<Cache>,
    output_shape: Vec<usize>,
}

/// Scalar loss together with its gradient with respect to the network output.
#[derive(Debug, Clone)]
pub struct Loss {
    pub value: f64,
    pub grad: Tensor,
}

#[derive(Debug)]
pub struct Network {
    layers: Vec<Layer>,
    input_shape: Vec<usize>,
    tape: Option<Tape>,
}

// A clone never carries the pending tape.
impl Clone for Network {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            input_shape: self.input_shape.clone(),
            tape: None,
        }
    }
}

impl Network {
    /// Builds a network from layers; `input_shape` excludes the batch axis.
    pub fn new(layers: Vec<Layer>, input_shape: impl Into<Vec<usize>>) -> Result<Self> {
        let input_shape = input_shape.into();
        let mut shape = vec![1];
        shape.extend_from_slice(&input_shape);
        for (i, layer) in layers.iter().enumerate() {
            shape = layer.output_shape(i, &shape)?;
        }
        Ok(Self {
            layers,
            input_shape,
            tape: None,
        })
    }

    /// Builds a preset for `[channels, size, size]` inputs with He-initialised
    /// weights drawn from `seed`.
    pub fn preset(
        preset: Preset,
        act: ActivationSpec,
        input_shape: [usize; 3],
        classes: usize,
        widths: Widths,
        seed: u64,
    ) -> Result<Self> {
        act.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [c, h, w] = input_shape;
        let act_layer = || Layer::Activation(ActivationLayer::new(act));
        let layers = match preset {
            Preset::Mlp => vec![
                Layer::Flatten,
                Layer::Linear(Linear::new(&mut rng, c * h * w, widths.hidden)),
                act_layer(),
                Layer::Linear(Linear::new(&mut rng, widths.hidden, classes)),
            ],
            Preset::Conv3 | Preset::Conv3Fc2 => {
                let [c1, c2, c3] = widths.conv;
                let mut layers = vec![
                    Layer::Conv2d(Conv2d::new(&mut rng, c, c1, 3, 1, 0)),
                    act_layer(),
                    Layer::MaxPool2d(MaxPool2d { size: 2, stride: 2 }),
                    Layer::Conv2d(Conv2d::new(&mut rng, c1, c2, 3, 1, 0)),
                    act_layer(),
                    Layer::MaxPool2d(MaxPool2d { size: 2, stride: 2 }),
                    Layer::Conv2d(Conv2d::new(&mut rng, c2, c3, 3, 1, 0)),
                    act_layer(),
                    Layer::Flatten,
                ];
                let mut shape = vec![1, c, h, w];
                for (i, l) in layers.iter().enumerate() {
                    shape = l.output_shape(i, &shape)?;
                }
                let flat = shape[1];
                layers.push(Layer::Linear(Linear::new(&mut rng, flat, widths.hidden)));
                layers.push(act_layer());
                if preset == Preset::Conv3Fc2 {
                    layers.push(Layer::Linear(Linear::new(&mut rng, widths.hidden, 2)));
                    layers.push(Layer::Linear(Linear::new(&mut rng, 2, classes)));
                } else {
                    layers.push(Layer::Linear(Linear::new(&mut rng, widths.hidden, classes)));
                }
                layers
            }
        };
        Self::new(layers, input_shape.to_vec())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_len(&self) -> usize {
        let mut shape = vec![1];
        shape.extend_from_slice(&self.input_shape);
        for (i, l) in self.layers.iter().enumerate() {
            shape = l.output_shape(i, &shape).expect("validated at construction");
        }
        shape[1..].iter().product()
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        let s = input.shape();
        if s.len() != self.input_shape.len() + 1 || s[1..] != self.input_shape[..] {
            let mut expected = vec![s.first().copied().unwrap_or(0)];
            expected.extend_from_slice(&self.input_shape);
            return Err(Error::LayerShape {
                layer: 0,
                expected,
                actual: s.to_vec(),
            });
        }
        Ok(())
    }

    /// Taped forward pass: records what `backward` needs and returns the logits.
    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (y, cache) = layer.forward(&x, true);
            caches.push(cache.expect("taped forward keeps caches"));
            x = y;
        }
        let tape = Tape {
            caches,
            output_shape: x.shape().to_vec(),
        };
        self.tape = Some(tape);
        Ok(x)
    }

    /// Forward pass without recording a tape.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        Ok(self.run_range(input.clone(), 0..self.layers.len()))
    }

    /// Runs `input` through `layers[range]` with no shape checks.
    pub(crate) fn run_range(&self, mut x: Tensor, range: std::ops::Range<usize>) -> Tensor {
        for layer in &self.layers[range] {
            x = layer.forward(&x, false).0;
        }
        x
    }

    /// Output of every activation layer, in depth order.
    pub fn activations(&self, input: &Tensor) -> Result<Vec<Tensor>> {
        self.check_input(input)?;
        let mut out = Vec::new();
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.forward(&x, false).0;
            if matches!(layer, Layer::Activation(_)) {
                out.push(x.clone());
            }
        }
        Ok(out)
    }

    /// Output after `layers[..=index]`.
    pub fn output_at(&self, input: &Tensor, index: usize) -> Result<Tensor> {
        self.check_input(input)?;
        if index >= self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "layer {index} out of range ({} layers)",
                self.layers.len()
            )));
        }
        Ok(self.run_range(input.clone(), 0..index + 1))
    }

    /// Reverse pass from the loss gradient through the recorded tape,
    /// accumulating parameter gradients. Consumes the tape.
    pub fn backward(&mut self, loss: &Loss) -> Result<()> {
        let tape = self.tape.take().ok_or(Error::NoTape)?;
        if loss.grad.shape() != tape.output_shape.as_slice() {
            return Err(Error::Shape(format!(
                "loss gradient {:?} does not match network output {:?}",
                loss.grad.shape(),
                tape.output_shape
            )));
        }
        let mut grad = loss.grad.clone();
        for (layer, cache) in self.layers.iter_mut().zip(&tape.caches).rev() {
            grad = layer.backward(cache, grad);
        }
        Ok(())
    }

    /// Visits trainable parameters in a fixed order.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamMut<'_>)) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let prefix = format!("{i}.{}", layer.kind_name());
            layer.visit_params(&prefix, f);
        }
    }

    pub fn clear_grads(&mut self) {
        self.layers.iter_mut().for_each(Layer::clear_grads);
    }

    /// Re-projects every activation's learnable parameters into its feasible set.
    pub fn project_constraints(&mut self) {
        self.layers.iter_mut().for_each(Layer::project_constraints);
    }

    pub fn activation_specs(&self) -> Vec<ActivationSpec> {
        self.layers.iter().filter_map(|l| l.activation().copied()).collect()
    }

    /// Replaces every activation with `spec`.
    pub fn set_activation(&mut self, spec: ActivationSpec) {
        for layer in &mut self.layers {
            if let Layer::Activation(a) = layer {
                *a = ActivationLayer::new(spec);
            }
        }
    }

    /// Index of the last linear layer with two outputs that is followed by
    /// further layers.
    pub fn bottleneck_index(&self) -> Option<usize> {
        let last = self.layers.len().checked_sub(1)?;
        self.layers
            .iter()
            .enumerate()
            .filter(|(i, l)| *i < last && matches!(l, Layer::Linear(lin) if lin.out_features() == 2))
            .map(|(i, _)| i)
            .last()
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.value.len());
        n
    }
}

/// Mean softmax cross-entropy over the batch and its gradient `(p - onehot)/N`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<Loss> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(Error::Shape(format!(
            "logits {shape:?} vs {} labels",
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let (n, k) = (shape[0], shape[1]);
    let mut grad = vec![0.0; n * k];
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(Error::InvalidArgument(format!("label {label} >= {k} classes")));
        }
        let row = logits.item(i);
        let probs = softmax(row);
        total -= probs[label].max(f64::MIN_POSITIVE).ln();
        let g = &mut grad[i * k..(i + 1) * k];
        for (j, p) in probs.iter().enumerate() {
            g[j] = (p - if j == label { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    Ok(Loss {
        value: total / n as f64,
        grad: Tensor::new([n, k], grad)?,
    })
}

/// Sum of all outputs; gradient of ones.
pub fn sum_loss(output: &Tensor) -> Loss {
    Loss {
        value: output.sum(),
        grad: output.map(|_| 1.0),
    }
}

/// Numerically stable softmax of one row.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}
