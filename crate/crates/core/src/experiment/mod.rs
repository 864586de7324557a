//! Run configuration, metrics files, checkpoints and the training, sweep,
//! evaluation and cost-model drivers behind the `gxnor` binary.

pub mod checkpoint;
mod config;
mod metrics;
mod run;

pub use config::{DatasetId, NetworkId, RunConfig, SweepParam, CONFIG_VERSION};
pub use metrics::{parse_metrics, render_metrics, write_atomic, MetricsRecord, METRICS_COLUMNS, METRICS_VERSION};
pub use run::{
    build_model, empirical_costs, evaluate, fan_ins, load_data, render_empirical_costs, render_sweep, render_uniform_costs,
    sweep, train, uniform_costs, EvalOutcome, LayerCost, Splits, SweepRow, TrainOutcome, CHECKPOINT_FILE, COST_COLUMNS,
    METRICS_FILE, TIMING_FILE,
};
