//! Gradient descent on the logistic loss for finite-width two-layer networks
//! with Huberized-ReLU activations, together with the analytic oracles and
//! concentration monitors that check the training dynamics against their
//! quantitative guarantees at desk scale.
//!
//! The crate is organized around one training loop and the machinery to
//! interrogate it:
//!
//! - [`activation`]: the Huberized ReLU, its derivative, and the weak
//!   derivative of the derivative.
//! - [`model`]: the network, the stable logistic loss, the analytic gradient,
//!   and the weak Hessian-vector product.
//! - [`data`]: clustered spherical data, the XOR/"shoulders" mixtures, the
//!   bias-lifting reduction, and assumption validators.
//! - [`schedule`]: loss-dependent step-size policies and their admissible
//!   constants.
//! - [`trainer`]: the full-batch descent driver with per-iteration telemetry.
//! - [`oracles`]: finite-difference and dense-matrix ground truth.
//! - [`verify`]: lemma-level monitors, capture-set statistics, power
//!   iteration, and trajectory judges.
//! - [`presets`]: the ready-made experiment setups driven by the CLI and the
//!   acceptance suite.
//!
//! A quick end-to-end taste:
//!
//! ```
//! use hubergd::activation::ActivationKind;
//! use hubergd::presets::{simulation_run, MixtureKind};
//! use hubergd::trainer::train;
//!
//! let kind = ActivationKind::huberized(0.01).unwrap();
//! let (mut config, data) = simulation_run(MixtureKind::Xor, kind, 10, 7).unwrap();
//! config.iters = 10;
//! let run = train(&config, &data).unwrap();
//! assert!(run.records.last().unwrap().loss < run.records[1].loss);
//! ```

pub mod activation;
pub mod data;
pub mod io;
pub mod model;
pub mod oracles;
pub mod presets;
pub mod rng;
pub mod schedule;
pub mod svg;
pub mod trainer;
pub mod verify;

#[cfg(test)]
pub(crate) mod test_support;

pub use activation::ActivationKind;
pub use data::{ClusterSpec, Dataset, MixtureSpec};
pub use model::{LossReport, ParamMatrix};
pub use schedule::{ScheduleState, StepPolicy, Strictness};
pub use trainer::{IterationRecord, TrainConfig, TrainRun};

// The guide chapters under book/src are compiled as doctests so their code
// blocks stay in lockstep with the crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/ch01-huberized-relu.md")]
    pub struct Ch01HuberizedRelu;
    #[doc = include_str!("../../../book/src/ch02-network-and-loss.md")]
    pub struct Ch02NetworkAndLoss;
    #[doc = include_str!("../../../book/src/ch03-data-and-lifting.md")]
    pub struct Ch03DataAndLifting;
    #[doc = include_str!("../../../book/src/ch04-schedules.md")]
    pub struct Ch04Schedules;
    #[doc = include_str!("../../../book/src/ch05-training-runs.md")]
    pub struct Ch05TrainingRuns;
    #[doc = include_str!("../../../book/src/ch06-verifying-the-theory.md")]
    pub struct Ch06VerifyingTheTheory;
}
