//! Experiment orchestration behind the `emslab` CLI.

pub mod compare;
pub mod config;
pub mod eval;
pub mod train;
pub mod transfer;

pub use compare::{compare_plotdata, LoadedTrace};
pub use config::{load_experiment, resolve_cycle, resolve_vehicle, Experiment, ExperimentConfig, TrainingParams};
pub use eval::{evaluate, evaluate_agent, evaluate_rule_based, load_policy, EvalSummary, Evaluation, GreedyPolicy, LoadedPolicy};
pub use train::{cmd_train, train_loop, EpisodeLog, TrainOutcome, TrainSetup};
pub use transfer::{transfer, ResultRow, ResultTable};
