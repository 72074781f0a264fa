use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Optimizer, OptimizerKind, QNetwork};
use super::replay::{ReplayBuffer, Transition};
use super::state::{ActionIndex, StateVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub lr: f64,
    pub gamma: f64,
    /// Exploration rate once any decay has finished.
    pub epsilon: f64,
    /// Exploration rate at the first step; decays linearly to `epsilon`.
    pub epsilon_start: Option<f64>,
    /// Training-mode action selections over which `epsilon_start` decays.
    pub epsilon_decay_steps: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Transitions required before the first sample.
    pub min_buffer: usize,
    /// Train steps between target synchronizations.
    pub target_update: u64,
    pub epochs: usize,
    pub hidden: Vec<usize>,
    pub grad_clip: f64,
    pub optimizer: OptimizerKind,
    /// Multiplies rewards before they enter the TD regression.
    pub reward_scale: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lr: 0.001,
            gamma: 0.9,
            epsilon: 0.1,
            epsilon_start: None,
            epsilon_decay_steps: 0,
            batch_size: 128,
            buffer_capacity: 10_000,
            min_buffer: 200,
            target_update: 200,
            epochs: 20,
            hidden: vec![128, 128, 128],
            grad_clip: 10.0,
            optimizer: OptimizerKind::Sgd,
            reward_scale: 1.0,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..=1.0).contains(&self.gamma)
            && (0.0..=1.0).contains(&self.epsilon)
            && self.epsilon_start.is_none_or(|e| (0.0..=1.0).contains(&e))
            && self.batch_size > 0
            && self.buffer_capacity > 0
            && self.min_buffer <= self.buffer_capacity
            && self.target_update > 0
            && self.reward_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid hyperparameters: {self:?}")))
        }
    }

    /// Exploration rate after `explored` training-mode selections.
    pub fn epsilon_at(&self, explored: u64) -> f64 {
        match self.epsilon_start {
            Some(start) if explored < self.epsilon_decay_steps => {
                start + (self.epsilon - start) * explored as f64 / self.epsilon_decay_steps as f64
            }
            _ => self.epsilon,
        }
    }

    pub fn layer_sizes(&self, state_dim: usize, action_dim: usize) -> Vec<usize> {
        std::iter::once(state_dim).chain(self.hidden.iter().copied()).chain(std::iter::once(action_dim)).collect()
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice over `q`.
pub fn select_action<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> ActionIndex {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        ActionIndex(rng.random_range(0..q.len()))
    } else {
        ActionIndex(argmax(q))
    }
}

/// `r + gamma * max_a' Q_target(s', a')`; the task is continuing, so no
/// terminal cut-off.
pub fn td_target(reward: f64, next_state: &StateVector, target: &QNetwork, gamma: f64) -> f64 {
    let q = target.forward(next_state.as_slice());
    reward + gamma * q[argmax(&q)]
}

fn stack(rows: impl ExactSizeIterator<Item = impl AsRef<[f64]>>, width: usize) -> Array2<f64> {
    let n = rows.len();
    let mut data = Vec::with_capacity(n * width);
    for r in rows {
        data.extend_from_slice(r.as_ref());
    }
    Array2::from_shape_vec((n, width), data).expect("uniform state width")
}

/// One gradient update of `net` on the mean squared TD error of `batch`.
/// `target` is only read.
pub fn train_step(
    net: &mut QNetwork,
    target: &QNetwork,
    batch: &[&Transition],
    hyper: &Hyperparams,
    optimizer: &mut Optimizer,
    step: u64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Usage("train_step needs a non-empty batch".into()));
    }
    let width = net.input_dim();
    let next = stack(batch.iter().map(|t| t.next_state.as_slice()), width);
    let q_next = target.forward_batch(&next);
    let targets: Vec<f64> = batch
        .iter()
        .zip(q_next.outer_iter())
        .map(|(t, row)| {
            let row = row.as_slice().expect("contiguous row");
            hyper.reward_scale * t.reward + hyper.gamma * row[argmax(row)]
        })
        .collect();
    let inputs = stack(batch.iter().map(|t| t.state.as_slice()), width);
    let actions: Vec<usize> = batch.iter().map(|t| t.action.0).collect();
    let (loss, grads) = net.td_loss_gradients(&inputs, &actions, &targets);
    if !loss.is_finite() {
        return Err(Error::TrainingDivergence { step });
    }
    if loss > 0.0 {
        optimizer.apply(net, grads);
    }
    Ok(loss)
}

pub fn sync_target(net: &QNetwork, target: &mut QNetwork) {
    target.copy_from(net);
}

/// Online and target networks, replay memory, optimizer and RNG for one run.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    online: QNetwork,
    target: QNetwork,
    buffer: ReplayBuffer,
    optimizer: Optimizer,
    hyper: Hyperparams,
    rng: ChaCha8Rng,
    train_steps: u64,
    explored: u64,
    last_loss: Option<f64>,
}

impl DqnAgent {
    pub fn new(state_dim: usize, action_dim: usize, hyper: Hyperparams) -> Result<Self> {
        hyper.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let online = QNetwork::new(&hyper.layer_sizes(state_dim, action_dim), &mut rng);
        let target = online.clone();
        Ok(DqnAgent {
            buffer: ReplayBuffer::new(hyper.buffer_capacity, hyper.min_buffer),
            optimizer: Optimizer::new(hyper.optimizer, hyper.lr, hyper.grad_clip),
            online,
            target,
            hyper,
            rng,
            train_steps: 0,
            explored: 0,
            last_loss: None,
        })
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    pub fn act(&mut self, state: &StateVector, explore: bool) -> ActionIndex {
        let q = self.online.forward(state.as_slice());
        if !explore {
            return select_action(&q, 0.0, &mut self.rng);
        }
        let eps = self.hyper.epsilon_at(self.explored);
        self.explored += 1;
        select_action(&q, eps, &mut self.rng)
    }

    /// Store a transition and, once the buffer is warm, run one train step;
    /// the target network follows the online one every `target_update` steps.
    pub fn observe(&mut self, transition: Transition) -> Result<Option<f64>> {
        self.buffer.push(transition);
        if !self.buffer.ready() {
            return Ok(None);
        }
        let batch = self.buffer.sample(&mut self.rng, self.hyper.batch_size)?;
        let loss = train_step(&mut self.online, &self.target, &batch, &self.hyper, &mut self.optimizer, self.train_steps)?;
        self.train_steps += 1;
        if self.train_steps % self.hyper.target_update == 0 {
            sync_target(&self.online, &mut self.target);
        }
        self.last_loss = Some(loss);
        Ok(Some(loss))
    }
}
