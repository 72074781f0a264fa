//! Deep Q-network controller: state encoding, the MLP, replay memory and the
//! epsilon-greedy / TD-learning loop pieces.

pub mod dqn;
pub mod network;
pub mod replay;
pub mod state;

pub use dqn::{argmax, select_action, sync_target, td_target, train_step, DqnAgent, Hyperparams};
pub use network::{Dense, Gradients, Optimizer, OptimizerKind, QNetwork};
pub use replay::{ReplayBuffer, Transition};
pub use state::{action_count, decode_action, encode_action, encode_state, state_dim, ActionIndex, StateVector};
