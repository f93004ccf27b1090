//! Experiment orchestration and reporting.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod output;

pub use config::{ExperimentConfig, OccupantSpec};
pub use experiment::{
    derive_seed, evaluate, pretrain_occupants, run_experiment_a, run_experiment_b,
    run_seed_logged, summarize, train, training_schedule, Condition, ConditionSummary,
    EpisodeRow, Phase, RunReport, Series, TrainedAgent, Trajectory, CONVERGENCE_BELIEF,
};
pub use metrics::{mean_std, paired_t_less, score, ConfusionMatrix, MeanStd, Scores};
