//! Training, model selection, grids and reports.

mod config;
mod data;
mod optim;
mod report;
mod select;
mod train;

pub use config::{Dataset, OptimizerKind, RunConfig, Selection};
pub use data::{data_dir, load_data, DataSplit, DATA_DIR_VAR, MNIST_IMAGES, MNIST_LABELS};
pub use optim::Optimizer;
pub use report::{csv_rows, emit_report, format_mean_sd, mean_sd, read_reports, render_csv, render_json, Format, CSV_HEADER};
pub use select::{grid_point, grid_run, model_select, selection_metric, GridFailure, GridResult};
pub use train::{
    build_model, scheduled_objective, train, train_full, train_on, training_representation, EpochMetrics, TrainOutcome,
    TrainReport,
};
