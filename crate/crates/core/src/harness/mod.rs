//! Experiment orchestration: JSON configs, seeded trials, per-trial CSV
//! rows, median/IQR summaries, tidy plot data and the acceptance battery.

pub mod check;
pub mod config;
pub mod experiments;
pub mod plot;
pub mod run;
pub mod train_job;

pub use config::{Assertion, ExperimentConfig, ExperimentKind, ExperimentParams, SweepAxis, SweepParam};
pub use plot::emit_plot_data;
pub use run::{run_experiment, ExperimentOutput, PointSummary, Summary};
pub use train_job::{DataSource, TrainJob, TrainJobOutput};
