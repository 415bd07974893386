//! Transcription-time model.
//!
//! Copying a strand takes `T = sum of t_i` seconds, one independent term per
//! template nucleotide, where `t_i` depends only on the letter. `T` is either
//! drawn from its Gaussian (central-limit) approximation or summed exactly
//! from per-letter exponential waiting times.

use std::ops::{Add, AddAssign};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Nucleotide, NucleotideString};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticsError {
    #[error("a zero-length strand cannot replicate")]
    EmptyStrand,
    #[error("mean time for {0} must be strictly positive and finite, got {1}")]
    InvalidMean(Nucleotide, f64),
    #[error("variance for {0} must be non-negative and finite, got {1}")]
    InvalidVariance(Nucleotide, f64),
    #[error("reaction rate must be strictly positive and finite, got {0}")]
    InvalidRate(f64),
}

/// Per-letter counts `[n_A, n_C, n_G, n_U]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Composition(pub [u64; 4]);

impl Composition {
    pub const EMPTY: Composition = Composition([0; 4]);

    pub fn new(a: u64, c: u64, g: u64, u: u64) -> Self {
        Self([a, c, g, u])
    }

    /// Same count of every letter.
    pub fn uniform(per_letter: u64) -> Self {
        Self([per_letter; 4])
    }

    pub fn of(seq: &NucleotideString) -> Self {
        Self(seq.letter_counts())
    }

    #[inline]
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    #[inline]
    pub fn count(&self, nt: Nucleotide) -> u64 {
        self.0[nt.index()]
    }

    #[inline]
    pub fn counts(&self) -> &[u64; 4] {
        &self.0
    }

    #[inline]
    pub fn counts_mut(&mut self) -> &mut [u64; 4] {
        &mut self.0
    }
}

impl Add for Composition {
    type Output = Composition;

    fn add(mut self, rhs: Composition) -> Composition {
        self += rhs;
        self
    }
}

impl AddAssign for Composition {
    fn add_assign(&mut self, rhs: Composition) {
        for (l, r) in self.0.iter_mut().zip(rhs.0) {
            *l += r;
        }
    }
}

/// Per-letter incorporation-time moments, in seconds and seconds squared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticParams {
    mean_time: [f64; 4],
    var_time: [f64; 4],
}

impl KineticParams {
    pub fn new(mean_time: [f64; 4], var_time: [f64; 4]) -> Result<Self, KineticsError> {
        for nt in Nucleotide::ALL {
            let m = mean_time[nt.index()];
            if !(m.is_finite() && m > 0.0) {
                return Err(KineticsError::InvalidMean(nt, m));
            }
            let v = var_time[nt.index()];
            if !(v.is_finite() && v >= 0.0) {
                return Err(KineticsError::InvalidVariance(nt, v));
            }
        }
        Ok(Self { mean_time, var_time })
    }

    /// Single-step reaction with rate `k` for every letter: mean `1/k`,
    /// variance `1/k^2`.
    pub fn from_rate(k: f64) -> Result<Self, KineticsError> {
        if !(k.is_finite() && k > 0.0) {
            return Err(KineticsError::InvalidRate(k));
        }
        Self::new([1.0 / k; 4], [1.0 / (k * k); 4])
    }

    /// Per-letter means with variances equal to the squared means.
    pub fn from_means(mean_time: [f64; 4]) -> Result<Self, KineticsError> {
        Self::new(mean_time, mean_time.map(|m| m * m))
    }

    pub fn mean_time(&self) -> &[f64; 4] {
        &self.mean_time
    }

    pub fn var_time(&self) -> &[f64; 4] {
        &self.var_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeStats {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    #[default]
    Gaussian,
    ExactSum,
}

impl TimeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeMode::Gaussian => "gaussian",
            TimeMode::ExactSum => "exact_sum",
        }
    }
}

impl std::str::FromStr for TimeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(TimeMode::Gaussian),
            "exact_sum" => Ok(TimeMode::ExactSum),
            other => Err(format!("unknown time mode {other:?} (expected gaussian or exact_sum)")),
        }
    }
}

pub fn replication_time_stats(c: &Composition, k: &KineticParams) -> TimeStats {
    let mut mean = 0.0;
    let mut variance = 0.0;
    for i in 0..4 {
        let n = c.0[i] as f64;
        mean += n * k.mean_time[i];
        variance += n * k.var_time[i];
    }
    TimeStats { mean, variance }
}

/// Draws one replication time. Gaussian draws below or at zero are
/// rejected and redrawn, so every returned time is strictly positive.
pub fn sample_replication_time<R: Rng + ?Sized>(
    c: &Composition,
    k: &KineticParams,
    mode: TimeMode,
    rng: &mut R,
) -> Result<f64, KineticsError> {
    if c.total() == 0 {
        return Err(KineticsError::EmptyStrand);
    }
    Ok(match mode {
        TimeMode::Gaussian => {
            let stats = replication_time_stats(c, k);
            if stats.variance == 0.0 {
                return Ok(stats.mean);
            }
            let normal =
                Normal::new(stats.mean, stats.variance.sqrt()).expect("finite mean and positive standard deviation");
            loop {
                let t = normal.sample(rng);
                if t > 0.0 {
                    break t;
                }
            }
        }
        TimeMode::ExactSum => {
            let mut total = 0.0;
            for (i, &n) in c.0.iter().enumerate() {
                let mut letter_sum = 0.0;
                for _ in 0..n {
                    let e: f64 = Exp1.sample(rng);
                    letter_sum += e;
                }
                total += letter_sum * k.mean_time[i];
            }
            // a sum of exponentials is zero with probability zero
            if total > 0.0 {
                total
            } else {
                f64::MIN_POSITIVE
            }
        }
    })
}
