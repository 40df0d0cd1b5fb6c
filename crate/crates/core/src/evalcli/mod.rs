//! Metrics, policy evaluation over the simulator, ablation sweeps and the
//! command-line entry point.
//!
//! Reference bounds come from the same When2com checkpoint: the upper
//! bound evaluates on clean inputs ([`Inputs::Clean`]), the lower bound
//! under [`Policy::NoCom`](crate::Policy::NoCom) on degraded inputs.

mod cli;
mod evaluate;
mod metrics;

pub use cli::cli_main;
pub use evaluate::{
    evaluate, evaluate_episodes, sweep, sweep_key_size, sweep_query_size, write_csv, Evaluation, Experiment, Inputs,
    MetricsReport, SweepParam, CSV_COLUMNS,
};
pub use metrics::{
    decisions_from_rows, grouping_accuracy, grouping_set_accuracy, top_supporter, when2com_accuracy,
};
