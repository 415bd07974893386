//! Command-line driver.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{erasure_bound, AnalysisError};
use crate::codec::{decode_bytes, encode_bytes, CodecError, NucleotideString};
use crate::config::{preset_runs, render, ConfigError, ExperimentConfig, OutputFormat, Preset};
use crate::simulator::{run_experiment, SimError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

fn io_err(path: impl AsRef<Path>) -> impl FnOnce(io::Error) -> CliError {
    let path = path.as_ref().display().to_string();
    move |source| CliError::Io { path, source }
}

#[derive(Debug, Parser)]
#[command(name = "rna-channel", version, about = "RNA replication as a noisy data channel")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode bytes as A/C/G/U text.
    Encode {
        /// Input file; stdin when absent.
        input: Option<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Decode A/C/G/U text back to bytes.
    Decode {
        input: Option<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run the experiment described by a configuration file.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        format: Option<OutputFormat>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Reproduce one of the figure experiments.
    Figure {
        preset: Preset,
        /// Divide root lengths and times by this factor and multiply error rates by it.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        /// Output directory.
        #[arg(long, short, default_value = ".")]
        output: PathBuf,
    },
    /// Print the erasure-channel redundancy bound p / (1 - p).
    Bound { p_d: f64 },
}

fn read_input(input: Option<&Path>) -> Result<Vec<u8>, CliError> {
    match input {
        Some(p) => fs::read(p).map_err(io_err(p)),
        None => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf).map_err(io_err("<stdin>"))?;
            Ok(buf)
        }
    }
}

fn write_output(output: Option<&Path>, data: &[u8], stdout: &mut dyn Write) -> Result<(), CliError> {
    match output {
        Some(p) => fs::write(p, data).map_err(io_err(p)),
        None => stdout.write_all(data).map_err(io_err("<stdout>")),
    }
}

/// Runs one command, writing primary output to `stdout` unless a file is named.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Encode { input, output } => {
            let data = read_input(input.as_deref())?;
            let text = encode_bytes(&data).to_string();
            write_output(output.as_deref(), text.as_bytes(), stdout)
        }
        Command::Decode { input, output } => {
            let data = read_input(input.as_deref())?;
            let text = String::from_utf8_lossy(&data);
            let seq: NucleotideString = text.trim().parse()?;
            let bytes = decode_bytes(&seq)?;
            write_output(output.as_deref(), &bytes, stdout)
        }
        Command::Simulate { config, seed, threads, format, output } => {
            let text = fs::read_to_string(&config).map_err(io_err(&config))?;
            let mut cfg = ExperimentConfig::parse(&text)?;
            if let Some(s) = seed {
                cfg.sim.master_seed = s;
            }
            if let Some(f) = format {
                cfg.format = f;
            }
            if output.is_some() {
                cfg.output = output;
            }
            let exp = run_experiment(&cfg.sim, threads)?;
            let rendered = render(&cfg, &exp.aggregate);
            write_output(cfg.output.as_deref(), rendered.as_bytes(), stdout)
        }
        Command::Figure { preset, scale, seed, threads, trials, format, output } => {
            fs::create_dir_all(&output).map_err(io_err(&output))?;
            for mut run in preset_runs(preset, scale)? {
                if let Some(s) = seed {
                    run.config.sim.master_seed = s;
                }
                if let Some(t) = trials {
                    run.config.sim.trials = t;
                    run.config.sim.validate()?;
                }
                run.config.format = format;
                let path = output.join(format!("{}.{}", run.name, format.extension()));
                let exp = run_experiment(&run.config.sim, threads)?;
                let rendered = render(&run.config, &exp.aggregate);
                fs::write(&path, rendered).map_err(io_err(&path))?;
                writeln!(stdout, "{}", path.display()).map_err(io_err("<stdout>"))?;
            }
            Ok(())
        }
        Command::Bound { p_d } => {
            let b = erasure_bound(p_d)?;
            writeln!(stdout, "{b:e}").map_err(io_err("<stdout>"))
        }
    }
}
