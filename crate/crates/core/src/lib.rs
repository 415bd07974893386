//! Monte Carlo model of RNA replication as a noisy data channel.
//!
//! - [`codec`]: bytes to nucleotides and back.
//! - [`kinetics`]: replication-time statistics and sampling.
//! - [`mutation`]: insertion, deletion and substitution errors.
//! - [`simulator`]: the branching replication process.
//! - [`analysis`]: redundancy bound, fits, trial statistics.
//! - [`config`]: experiment files, figure presets and output formats.
//! - [`cli`]: the `rna-channel` command.

pub mod analysis;
pub mod cli;
pub mod codec;
pub mod config;
pub mod kinetics;
pub mod mutation;
pub mod simulator;

pub use analysis::{corrupt_message_demo, erasure_bound, fit_linear, LinearFit, MeanStderr};
pub use codec::{decode_bytes, encode_bytes, CodecError, Nucleotide, NucleotideString};
pub use config::{ExperimentConfig, OutputFormat, Preset};
pub use kinetics::{replication_time_stats, sample_replication_time, Composition, KineticParams, TimeMode, TimeStats};
pub use mutation::{mutate_counts, mutate_sequence, sample_error_counts, ErrorCounts, ErrorRates};
pub use simulator::{
    run_experiment, run_trial, CheckpointSample, Representation, RootSpec, SimConfig, SimError, Strand, Trajectory,
};
