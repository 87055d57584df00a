//! Experiment configuration and the commands built on it.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_compare, cmd_freq, cmd_lemma, cmd_run, cmd_stream, cmd_sweep, random_inits,
    simulate_experiment, simulated_freq_response, write_trajectory, FreqRow, LemmaOptions,
    LemmaReport, LemmaRow, LemmaSystem, RunOutput, StreamSummary, SweepOutput, SweepRow,
};
pub use config::{ConfigDraft, ExperimentConfig, Preset, Realization};
