//! Evaluation protocols and full experiments.

pub mod analyst;
pub mod bootstrap;
pub mod dataset;
pub mod experiment;
pub mod roc;

pub use analyst::{calibrate_alice, fit_line_on, probe_all, Analyst, Examination};
pub use bootstrap::{
    bootstrap_setup_a, fit_h0_models, h0_model_from_values, h0_reference_pool, BootstrapReport, H0Model, H0Pool,
    PoolGroup, SetupAParams,
};
pub use dataset::{synthesize, Dataset, SynthConfig};
pub use experiment::{
    eve_subset, one_tail_separation, prepare_analyst, run_experiment, Experiment, ExperimentConfig, ExperimentReport,
    Failure, ImageStatistics, OneTailSummary, SweepPoint, SweepRow, TestParams,
};
pub use roc::{auc, pd_at, roc_curve, roc_report, roc_setup_b, RocPoint, RocReport};
