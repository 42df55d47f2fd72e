//! Neural TD learning with a two-layer ReLU network on finite Markov reward
//! processes.
//!
//! The crate provides the learner (projection-free and max-norm regularized
//! variants with iterate averaging) together with exact oracles: closed-form
//! value functions, NTK kernel identities, realizable targets with known
//! norm bounds, and the hyperparameter calculators for both variants.
//!
//! | module | contents |
//! |--------|----------|
//! | [`mrp`] | processes, stationary distribution, value function, Bellman operator, sampling |
//! | [`network`] | symmetric-init ReLU network, gradients, linearization, kernels |
//! | [`targets`] | realizable targets and the attraction point `W̄` |
//! | [`learner`] | semi-gradient steps, projection, runs and traces |
//! | [`bounds`] | width / step-size / horizon calculators |
//! | [`harness`] | experiment configs, sweeps and the self-check battery |

pub mod bounds;
pub mod error;
pub mod harness;
pub mod learner;
pub mod mrp;
pub mod network;
pub mod targets;

pub use error::{Error, Result};
pub use learner::{LearnerConfig, RunOutput, RunTrace, Variant};
pub use mrp::{MarkovRewardProcess, SamplePair};
pub use network::NetworkState;
pub use targets::{make_target, TargetSpec, TargetValueFn};
