//! Experiment configuration files, figure presets and trajectory output.
//!
//! A configuration is a flat text file of `key = value` lines. `#` starts a
//! comment, blank lines are ignored and every key is optional:
//!
//! ```text
//! n0 = 20000                  # root length
//! root = random               # random | sequence:<ACGU...> | composition:<a>,<c>,<g>,<u>
//! root_seed = 0               # seed for the random root
//! p_ins = 2.3e-7
//! p_del = 2.3e-7
//! p_sub = 0
//! mean_time = 0.046           # seconds; one value or four (A,C,G,U)
//! var_time = 0.002116         # seconds^2; defaults to mean_time squared
//! time_mode = gaussian        # gaussian | exact_sum
//! representation = counts     # counts | sequence
//! t_max = 29440
//! checkpoints = 0,1840,3680   # defaults to 17 evenly spaced times over [0, t_max]
//! pop_cap = 1048576
//! trials = 100
//! seed = 0
//! format = csv                # csv | json
//! output = run.csv            # stdout when absent
//! ```
//!
//! Output files carry the full configuration as a metadata block (`# `
//! prefixed lines in CSV, a `metadata` object in JSON) that parses back to
//! the same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::codec::NucleotideString;
use crate::kinetics::{Composition, KineticParams, TimeMode};
use crate::mutation::ErrorRates;
use crate::simulator::{AggregatedSample, Representation, RootSpec, SimConfig, SimError, DEFAULT_POP_CAP};

/// Default checkpoint count when none are listed.
pub const DEFAULT_CHECKPOINT_COUNT: usize = 17;

pub const INDEL_RATE: f64 = 2.3e-7;
pub const SUBSTITUTION_RATE: f64 = 9.1e-6;
pub const FIG2_DELETION_RATE: f64 = 1.7e-5;
/// Seconds per nucleotide for `k = 22 /s`, rounded.
pub const UNIFORM_MEAN_TIME: f64 = 0.046;
pub const FAST_ADENINE_MEAN_TIME: f64 = 0.001;
/// Population cap used by the figure presets.
pub const PRESET_POP_CAP: usize = 1 << 14;
/// Replication rounds of the slowest strand covered by a figure preset.
pub const PRESET_ROUNDS: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {key}: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("{}{field}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { line: Option<usize>, field: String, message: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }

    pub fn extension(self) -> &'static str {
        self.as_str()
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

const KEYS: &[&str] = &[
    "n0",
    "root",
    "root_seed",
    "p_ins",
    "p_del",
    "p_sub",
    "mean_time",
    "var_time",
    "time_mode",
    "representation",
    "t_max",
    "checkpoints",
    "pop_cap",
    "trials",
    "seed",
    "format",
    "output",
];

impl Default for ExperimentConfig {
    /// The uniform-kinetics deletion experiment at full scale.
    fn default() -> Self {
        let n0 = 20_000;
        let t_max = PRESET_ROUNDS * 40_000.0 * UNIFORM_MEAN_TIME;
        Self {
            sim: SimConfig {
                n0,
                root: RootSpec::Random { seed: 0 },
                rates: ErrorRates::new(INDEL_RATE, INDEL_RATE, 0.0).expect("valid rates"),
                kinetics: KineticParams::from_means([UNIFORM_MEAN_TIME; 4]).expect("valid kinetics"),
                time_mode: TimeMode::Gaussian,
                representation: Representation::Counts,
                t_max,
                checkpoints: SimConfig::even_checkpoints(t_max, DEFAULT_CHECKPOINT_COUNT),
                pop_cap: DEFAULT_POP_CAP,
                trials: 100,
                master_seed: 0,
            },
            output: None,
            format: OutputFormat::Csv,
        }
    }
}

fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    value.split(',').map(|s| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"))).collect()
}

fn parse_per_letter(value: &str) -> Result<[f64; 4], String> {
    let v = parse_list(value)?;
    match v.as_slice() {
        [x] => Ok([*x; 4]),
        [a, c, g, u] => Ok([*a, *c, *g, *u]),
        _ => Err(format!("expected 1 or 4 values (A,C,G,U), got {}", v.len())),
    }
}

fn parse_root(value: &str, root_seed: u64) -> Result<RootSpec, String> {
    if value == "random" {
        return Ok(RootSpec::Random { seed: root_seed });
    }
    if let Some(seq) = value.strip_prefix("sequence:") {
        return seq.trim().parse::<NucleotideString>().map(RootSpec::Sequence).map_err(|e| e.to_string());
    }
    if let Some(counts) = value.strip_prefix("composition:") {
        let v: Vec<u64> = counts
            .split(',')
            .map(|s| s.trim().parse::<u64>().map_err(|e| format!("{s:?}: {e}")))
            .collect::<Result<_, _>>()?;
        let [a, c, g, u] = v.as_slice() else {
            return Err(format!("composition needs 4 counts (A,C,G,U), got {}", v.len()));
        };
        return Ok(RootSpec::Composition(Composition::new(*a, *c, *g, *u)));
    }
    Err(format!("expected random, sequence:<ACGU...> or composition:<a>,<c>,<g>,<u>, got {value:?}"))
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { line, message: format!("expected `key = value`, got {content:?}") });
            };
            pairs.push((line, key.trim().to_string(), value.trim().to_string()));
        }
        Self::from_pairs(pairs)
    }

    /// Builds a configuration from a metadata map such as the one written
    /// into JSON output.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        Self::from_pairs(map.iter().map(|(k, v)| (0, k.clone(), v.clone())).collect())
    }

    /// `(line, key, value)` triples; line 0 means "not from a file".
    fn from_pairs(pairs: Vec<(usize, String, String)>) -> Result<Self, ConfigError> {
        let mut seen: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (line, key, value) in pairs {
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::Value { line, key, message: "unknown key".into() });
            }
            if let Some((first, _)) = seen.get(&key) {
                return Err(ConfigError::Value {
                    line,
                    key,
                    message: format!("duplicate key (first set on line {first})"),
                });
            }
            seen.insert(key, (line, value));
        }

        let value_err = |key: &str, message: String| {
            let line = seen.get(key).map(|(l, _)| *l).unwrap_or(0);
            ConfigError::Value { line, key: key.to_string(), message }
        };
        fn get<T: FromStr>(seen: &BTreeMap<String, (usize, String)>, key: &str) -> Option<Result<T, String>>
        where
            T::Err: std::fmt::Display,
        {
            seen.get(key).map(|(_, v)| v.parse::<T>().map_err(|e| e.to_string()))
        }
        macro_rules! field {
            ($key:literal, $ty:ty, $default:expr) => {
                match get::<$ty>(&seen, $key) {
                    Some(r) => r.map_err(|m| value_err($key, m))?,
                    None => $default,
                }
            };
        }

        let base = ExperimentConfig::default();
        let d = &base.sim;

        let root_seed = field!("root_seed", u64, 0);
        let root = match seen.get("root") {
            Some((_, v)) => parse_root(v, root_seed).map_err(|m| value_err("root", m))?,
            None => RootSpec::Random { seed: root_seed },
        };
        let n0 = match (&root, get::<u64>(&seen, "n0")) {
            (_, Some(r)) => r.map_err(|m| value_err("n0", m))?,
            (RootSpec::Sequence(s), None) => s.len() as u64,
            (RootSpec::Composition(c), None) => c.total(),
            (RootSpec::Random { .. }, None) => d.n0,
        };

        let p_ins = field!("p_ins", f64, d.rates.p_ins());
        let p_del = field!("p_del", f64, d.rates.p_del());
        let p_sub = field!("p_sub", f64, d.rates.p_sub());
        let rates = ErrorRates::new(p_ins, p_del, p_sub).map_err(|e| {
            let key = ["p_ins", "p_del", "p_sub"].into_iter().find(|k| e.to_string().starts_with(k)).unwrap_or("p_del");
            value_err(key, e.to_string())
        })?;

        let mean_time = match seen.get("mean_time") {
            Some((_, v)) => parse_per_letter(v).map_err(|m| value_err("mean_time", m))?,
            None => *d.kinetics.mean_time(),
        };
        let var_time = match seen.get("var_time") {
            Some((_, v)) => parse_per_letter(v).map_err(|m| value_err("var_time", m))?,
            None => mean_time.map(|m| m * m),
        };
        let kinetics = KineticParams::new(mean_time, var_time).map_err(|e| {
            let key = if e.to_string().starts_with("mean") { "mean_time" } else { "var_time" };
            value_err(key, e.to_string())
        })?;

        let t_max = field!("t_max", f64, d.t_max);
        let checkpoints = match seen.get("checkpoints") {
            Some((_, v)) => parse_list(v).map_err(|m| value_err("checkpoints", m))?,
            None => SimConfig::even_checkpoints(t_max, DEFAULT_CHECKPOINT_COUNT),
        };

        let sim = SimConfig {
            n0,
            root,
            rates,
            kinetics,
            time_mode: field!("time_mode", TimeMode, d.time_mode),
            representation: field!("representation", Representation, d.representation),
            t_max,
            checkpoints,
            pop_cap: field!("pop_cap", usize, d.pop_cap),
            trials: field!("trials", u64, d.trials),
            master_seed: field!("seed", u64, d.master_seed),
        };
        sim.validate().map_err(|e| match e {
            SimError::InvalidConfig { field, reason } => ConfigError::Invalid {
                line: seen.get(field).map(|(l, _)| *l).filter(|&l| l > 0),
                field: field.to_string(),
                message: reason,
            },
            other => ConfigError::Invalid { line: None, field: "config".into(), message: other.to_string() },
        })?;

        Ok(ExperimentConfig {
            sim,
            output: seen.get("output").map(|(_, v)| PathBuf::from(v)),
            format: field!("format", OutputFormat, OutputFormat::Csv),
        })
    }

    /// Every key with its effective value, in file order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let s = &self.sim;
        let (root, root_seed) = match &s.root {
            RootSpec::Random { seed } => ("random".to_string(), *seed),
            RootSpec::Sequence(seq) => (format!("sequence:{seq}"), 0),
            RootSpec::Composition(c) => {
                let [a, cc, g, u] = c.0;
                (format!("composition:{a},{cc},{g},{u}"), 0)
            }
        };
        let mut pairs = vec![
            ("n0", s.n0.to_string()),
            ("root", root),
            ("root_seed", root_seed.to_string()),
            ("p_ins", s.rates.p_ins().to_string()),
            ("p_del", s.rates.p_del().to_string()),
            ("p_sub", s.rates.p_sub().to_string()),
            ("mean_time", fmt_list(s.kinetics.mean_time())),
            ("var_time", fmt_list(s.kinetics.var_time())),
            ("time_mode", s.time_mode.as_str().to_string()),
            ("representation", s.representation.as_str().to_string()),
            ("t_max", s.t_max.to_string()),
            ("checkpoints", fmt_list(&s.checkpoints)),
            ("pop_cap", s.pop_cap.to_string()),
            ("trials", s.trials.to_string()),
            ("seed", s.master_seed.to_string()),
            ("format", self.format.as_str().to_string()),
        ];
        if let Some(out) = &self.output {
            pairs.push(("output", out.display().to_string()));
        }
        pairs
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            other => Err(format!("unknown preset {other:?} (expected fig1, fig2 or fig3)")),
        }
    }
}

/// One run of a figure preset.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetRun {
    /// File stem, e.g. `fig1_n2000`.
    pub name: String,
    pub config: ExperimentConfig,
}

/// Configurations for a figure preset. `scale` divides root lengths and
/// the time axis and multiplies error rates, so expected errors per
/// replication and the number of replication rounds stay the same.
pub fn preset_runs(preset: Preset, scale: f64) -> Result<Vec<PresetRun>, ConfigError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(ConfigError::Invalid {
            line: None,
            field: "scale".into(),
            message: format!("must be a positive number, got {scale}"),
        });
    }
    let scaled_len = |n: f64| ((n / scale).round() as u64).max(1);
    let rates = |p_ins: f64, p_del: f64, p_sub: f64| {
        ErrorRates::new(p_ins * scale, p_del * scale, p_sub * scale).map_err(|e| ConfigError::Invalid {
            line: None,
            field: "scale".into(),
            message: format!("scaled rates invalid: {e}"),
        })
    };
    let uniform = KineticParams::from_means([UNIFORM_MEAN_TIME; 4]).expect("valid kinetics");
    let build = |name: String, n0: u64, rates: ErrorRates, kinetics: KineticParams, full_t_max: f64| {
        let t_max = full_t_max / scale;
        PresetRun {
            name,
            config: ExperimentConfig {
                sim: SimConfig {
                    n0,
                    root: RootSpec::Random { seed: 1 },
                    rates,
                    kinetics,
                    time_mode: TimeMode::Gaussian,
                    representation: Representation::Counts,
                    t_max,
                    checkpoints: SimConfig::even_checkpoints(t_max, DEFAULT_CHECKPOINT_COUNT),
                    pop_cap: PRESET_POP_CAP,
                    trials: 100,
                    master_seed: 0,
                },
                output: None,
                format: OutputFormat::Csv,
            },
        }
    };

    let runs = match preset {
        Preset::Fig1 | Preset::Fig3 => {
            let p_sub = if preset == Preset::Fig3 { SUBSTITUTION_RATE } else { 0.0 };
            let r = rates(INDEL_RATE, INDEL_RATE, p_sub)?;
            let full_t_max = PRESET_ROUNDS * 40_000.0 * UNIFORM_MEAN_TIME;
            [20_000.0, 40_000.0]
                .into_iter()
                .map(|n| {
                    let n0 = scaled_len(n);
                    build(format!("{}_n{n0}", preset.as_str()), n0, r, uniform, full_t_max)
                })
                .collect()
        }
        Preset::Fig2 => {
            let r = rates(0.0, FIG2_DELETION_RATE, 0.0)?;
            let mut means = [UNIFORM_MEAN_TIME; 4];
            means[0] = FAST_ADENINE_MEAN_TIME;
            let kinetics = KineticParams::from_means(means).expect("valid kinetics");
            let full_t_max = PRESET_ROUNDS * 25_000.0 * (FAST_ADENINE_MEAN_TIME + 3.0 * UNIFORM_MEAN_TIME);
            let n0 = scaled_len(100_000.0);
            vec![build(format!("fig2_n{n0}"), n0, r, kinetics, full_t_max)]
        }
    };
    Ok(runs)
}

pub const CSV_COLUMNS: [&str; 19] = [
    "time_s",
    "population",
    "mean_generation",
    "del_rate",
    "ins_rate",
    "sub_rate",
    "del_rate_A",
    "del_rate_C",
    "del_rate_G",
    "del_rate_U",
    "population_stderr",
    "mean_generation_stderr",
    "del_rate_stderr",
    "ins_rate_stderr",
    "sub_rate_stderr",
    "del_rate_A_stderr",
    "del_rate_C_stderr",
    "del_rate_G_stderr",
    "del_rate_U_stderr",
];

/// One output row, columns as in [`CSV_COLUMNS`].
pub fn row_values(s: &AggregatedSample) -> [f64; 19] {
    let l = &s.del_rate_per_letter;
    [
        s.time,
        s.population.mean,
        s.mean_generation.mean,
        s.del_rate.mean,
        s.ins_rate.mean,
        s.sub_rate.mean,
        l[0].mean,
        l[1].mean,
        l[2].mean,
        l[3].mean,
        s.population.stderr,
        s.mean_generation.stderr,
        s.del_rate.stderr,
        s.ins_rate.stderr,
        s.sub_rate.stderr,
        l[0].stderr,
        l[1].stderr,
        l[2].stderr,
        l[3].stderr,
    ]
}

pub fn render_csv(config: &ExperimentConfig, rows: &[AggregatedSample]) -> String {
    let mut out = String::new();
    for (k, v) in config.to_pairs() {
        let _ = writeln!(out, "# {k} = {v}");
    }
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row_values(row).iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct JsonOutput<'a> {
    metadata: BTreeMap<&'a str, String>,
    columns: &'a [&'a str],
    rows: Vec<[f64; 19]>,
}

pub fn render_json(config: &ExperimentConfig, rows: &[AggregatedSample]) -> String {
    let doc = JsonOutput {
        metadata: config.to_pairs().into_iter().collect(),
        columns: &CSV_COLUMNS,
        rows: rows.iter().map(row_values).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

pub fn render(config: &ExperimentConfig, rows: &[AggregatedSample]) -> String {
    match config.format {
        OutputFormat::Csv => render_csv(config, rows),
        OutputFormat::Json => render_json(config, rows),
    }
}

/// Recovers the configuration from the `# key = value` block of a CSV file.
pub fn parse_csv_metadata(csv: &str) -> Result<ExperimentConfig, ConfigError> {
    let block: String = csv.lines().map_while(|l| l.strip_prefix("# ")).map(|l| format!("{l}\n")).collect();
    ExperimentConfig::parse(&block)
}

/// Recovers the configuration from the `metadata` object of a JSON file.
pub fn parse_json_metadata(json: &str) -> Result<ExperimentConfig, ConfigError> {
    #[derive(serde::Deserialize)]
    struct Doc {
        metadata: BTreeMap<String, String>,
    }
    let doc: Doc =
        serde_json::from_str(json).map_err(|e| ConfigError::Syntax { line: e.line(), message: e.to_string() })?;
    ExperimentConfig::from_map(&doc.metadata)
}
