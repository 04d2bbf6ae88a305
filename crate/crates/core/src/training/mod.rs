//! Optimization, training loops, early stopping and grid search.

mod config;
mod grid;
mod optim;
mod trainer;

pub use config::{parse_key_values, EarlyStopMetric, ModelKind, TrainConfig, Weighting, XavierVariant};
pub use grid::{grid_search, log_grid, Grid, GridResult, GridRow};
pub use optim::{adagrad_rows, adagrad_step, xavier_bound, xavier_fill, xavier_init, OptimizerState};
pub use trainer::{
    train, train_biser, train_single, train_with_propensity, EpochRecord, TrainOutcome, TrainReport, REPORT_CSV_HEADER,
};
