//! The class-incremental paradigm: paired training, decoder learning and
//! evaluation over the learned classes, with reports and checkpoints.

mod config;
mod protocol;
mod report;
mod seeds;

pub use config::{DataConfig, NetworkConfig, NoscConfig, RunConfig, SimulationConfig, Timing};
pub use protocol::{
    collect_patterns, evaluate, resume_continual_learning, run_continual_learning, run_first_steps, score_patterns, Checkpoint,
    Experiment, RunOutcome, CHECKPOINT_FILE,
};
pub use report::{
    overall_accuracy, representation_stability, stability_csv, write_report, Evaluation, RunReport, WallClock,
};
pub use seeds::{derive_seed, Purpose};
