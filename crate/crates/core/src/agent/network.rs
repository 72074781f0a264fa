//! Fully connected Q-network with explicit forward and backward passes.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// Shape `(inputs, outputs)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Rectifier on hidden layers, identity on the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Dense>,
}

/// Gradient of the loss with respect to every layer's weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weights.iter().chain(l.bias.iter()).map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights *= factor;
            l.bias *= factor;
        }
    }
}

impl QNetwork {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "network needs input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..=limit)),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        QNetwork { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Dense { weights: Array2::zeros((w[0], w[1])), bias: Array1::zeros(w[1]) })
            .collect();
        QNetwork { layers }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Usage("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.ncols() {
                return Err(Error::Usage(format!("layer {i}: bias length does not match outputs")));
            }
            if i > 0 && layers[i - 1].weights.ncols() != l.weights.nrows() {
                return Err(Error::Usage(format!("layer {i}: input size does not match previous layer")));
            }
        }
        Ok(QNetwork { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].weights.nrows()).chain(self.layers.iter().map(|l| l.weights.ncols())).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.weights.ncols()).unwrap_or(0)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row vector");
        self.forward_batch(&x).into_raw_vec_and_offset().0
    }

    /// Rows of `inputs` are independent samples.
    pub fn forward_batch(&self, inputs: &Array2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut a = inputs.clone();
        for (i, l) in self.layers.iter().enumerate() {
            a = a.dot(&l.weights) + &l.bias;
            if i != last {
                a.mapv_inplace(relu);
            }
        }
        a
    }

    /// Layer outputs after activation, starting with the input itself.
    fn activations(&self, inputs: &Array2<f64>) -> Vec<Array2<f64>> {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(inputs.clone());
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&l.weights) + &l.bias;
            if i != last {
                z.mapv_inplace(relu);
            }
            acts.push(z);
        }
        acts
    }

    /// Mean squared error between `Q(s_k, a_k)` and `targets[k]` over the
    /// batch, plus its gradient. Only the taken action's output contributes.
    pub fn td_loss_gradients(&self, inputs: &Array2<f64>, actions: &[usize], targets: &[f64]) -> (f64, Gradients) {
        let batch = inputs.nrows();
        assert_eq!(actions.len(), batch);
        assert_eq!(targets.len(), batch);
        let acts = self.activations(inputs);
        let out = acts.last().expect("output layer");
        let mut delta = Array2::<f64>::zeros(out.raw_dim());
        let mut loss = 0.0;
        for (k, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            let err = out[[k, a]] - y;
            loss += err * err;
            delta[[k, a]] = 2.0 * err / batch as f64;
        }
        loss /= batch as f64;

        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = &acts[i];
            let weights = input.t().dot(&delta);
            let bias = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights.t());
                // relu'(z) from the post-activation value
                back.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        (loss, Gradients { layers: grads })
    }

    pub fn copy_from(&mut self, other: &QNetwork) {
        self.layers.clone_from(&other.layers);
    }

    const MAGIC: &'static [u8; 8] = b"OPHQNET\0";
    const VERSION: u32 = 1;

    /// Binary snapshot: magic, version, layer count, sizes, then per layer the
    /// row-major weights followed by the biases, all little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        let sizes = self.sizes();
        w.write_all(&(sizes.len() as u32).to_le_bytes())?;
        for s in &sizes {
            w.write_all(&(*s as u32).to_le_bytes())?;
        }
        for l in &self.layers {
            for v in l.weights.iter().chain(l.bias.iter()) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Format("not a Q-network snapshot".into()));
        }
        let version = read_u32(&mut r)?;
        if version != Self::VERSION {
            return Err(Error::Format(format!("unsupported snapshot version {version}")));
        }
        let count = read_u32(&mut r)? as usize;
        if !(2..=64).contains(&count) {
            return Err(Error::Format(format!("implausible layer count {count}")));
        }
        let sizes = (0..count).map(|_| read_u32(&mut r).map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        let mut layers = Vec::with_capacity(count - 1);
        for w in sizes.windows(2) {
            let weights = (0..w[0] * w[1]).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            let bias = (0..w[1]).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((w[0], w[1]), weights).expect("sized above"),
                bias: Array1::from(bias),
            });
        }
        QNetwork::from_layers(layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(file)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Gradient-descent update with global gradient-norm clipping.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    clip_norm: f64,
    moments: Option<(Vec<Dense>, Vec<Dense>)>,
    steps: u64,
}

impl Optimizer {
    pub const ADAM_BETA1: f64 = 0.9;
    pub const ADAM_BETA2: f64 = 0.999;
    pub const ADAM_EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, lr: f64, clip_norm: f64) -> Self {
        Optimizer { kind, lr, clip_norm, moments: None, steps: 0 }
    }

    pub fn apply(&mut self, net: &mut QNetwork, mut grads: Gradients) {
        let norm = grads.norm();
        if self.clip_norm > 0.0 && norm > self.clip_norm {
            grads.scale(self.clip_norm / norm);
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (l, g) in net.layers.iter_mut().zip(&grads.layers) {
                    l.weights.scaled_add(-self.lr, &g.weights);
                    l.bias.scaled_add(-self.lr, &g.bias);
                }
            }
            OptimizerKind::Adam => {
                let (m, v) = self.moments.get_or_insert_with(|| {
                    let zero = || grads.layers.iter().map(|g| Dense { weights: Array2::zeros(g.weights.raw_dim()), bias: Array1::zeros(g.bias.len()) }).collect::<Vec<_>>();
                    (zero(), zero())
                });
                let t = self.steps as i32;
                let c1 = 1.0 - Self::ADAM_BETA1.powi(t);
                let c2 = 1.0 - Self::ADAM_BETA2.powi(t);
                let lr = self.lr;
                for (((l, g), m), v) in net.layers.iter_mut().zip(&grads.layers).zip(m.iter_mut()).zip(v.iter_mut()) {
                    adam_update(l.weights.as_slice_mut().unwrap(), g.weights.as_slice().unwrap(), m.weights.as_slice_mut().unwrap(), v.weights.as_slice_mut().unwrap(), lr, c1, c2);
                    adam_update(l.bias.as_slice_mut().unwrap(), g.bias.as_slice().unwrap(), m.bias.as_slice_mut().unwrap(), v.bias.as_slice_mut().unwrap(), lr, c1, c2);
                }
            }
        }
    }
}

fn adam_update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, c1: f64, c2: f64) {
    for i in 0..p.len() {
        m[i] = Optimizer::ADAM_BETA1 * m[i] + (1.0 - Optimizer::ADAM_BETA1) * g[i];
        v[i] = Optimizer::ADAM_BETA2 * v[i] + (1.0 - Optimizer::ADAM_BETA2) * g[i] * g[i];
        p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Optimizer::ADAM_EPS);
    }
}
