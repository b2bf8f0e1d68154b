//! Experiment harness: configs, budgeted runs, aggregation, CSV artifacts.

pub mod compare;
pub mod config;
pub mod evaluator;
pub mod experiment;
pub mod selftest;

pub use compare::{compare, match_aggregates, write_compare_csv, CompareRow};
pub use config::{Backend, DivergenceKind, ExperimentConfig, OptimizerKind};
pub use evaluator::{BudgetedSampler, DivergenceEvaluator, EstimateArtifacts, NnMixtureDivergence};
pub use experiment::{
    aggregate_runs, run_experiment, AggregateRow, ConvergenceCurve, EvalRow, ExperimentOutput,
};
pub use selftest::run_selftest;
