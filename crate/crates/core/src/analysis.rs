//! Post-processing: redundancy bound, line fits, trial statistics, and the
//! end-to-end corrupted-message demonstration.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::codec::{decode_bytes, encode_bytes, CodecError, NucleotideString};
use crate::mutation::ErrorCounts;
use crate::simulator::{Representation, RootSpec, SimConfig, SimError, Trial};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("deletion probability {0} is outside [0, 1)")]
    InvalidProbability(f64),
    #[error("a line fit needs at least two distinct time points")]
    DegenerateSeries,
    #[error("the message demonstration needs the sequence representation")]
    NeedsSequenceRepresentation,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Minimum redundant nucleotides per information nucleotide when every
/// erased position is known: `p / (1 - p)`.
pub fn erasure_bound(p_d: f64) -> Result<f64, AnalysisError> {
    if !(0.0..1.0).contains(&p_d) {
        return Err(AnalysisError::InvalidProbability(p_d));
    }
    Ok(p_d / (1.0 - p_d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LinearFit {
    pub fn predict(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

/// Ordinary least squares over `(time, value)` points, all weighted equally.
pub fn fit_linear(series: &[(f64, f64)]) -> Result<LinearFit, AnalysisError> {
    let n = series.len() as f64;
    let Some(&(t0, _)) = series.first() else {
        return Err(AnalysisError::DegenerateSeries);
    };
    if series.iter().all(|&(t, _)| t == t0) {
        return Err(AnalysisError::DegenerateSeries);
    }
    let mean_t = series.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = series.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, y) in series {
        let dt = t - mean_t;
        let dy = y - mean_y;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = series.iter().map(|&(t, y)| (y - intercept - slope * t).powi(2)).sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(LinearFit { slope, intercept, r_squared })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    /// Standard error of the mean; zero for a single observation.
    pub stderr: f64,
}

pub fn mean_and_stderr<I: IntoIterator<Item = f64>>(values: I) -> MeanStderr {
    // Welford
    let (mut n, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
    for x in values {
        n += 1;
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
    }
    if n < 2 {
        return MeanStderr { mean, stderr: 0.0 };
    }
    let var = m2 / (n - 1) as f64;
    MeanStderr { mean, stderr: (var / n as f64).sqrt() }
}

/// Two-sided p-value of Welch's unequal-variance t test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> f64 {
    let sa = mean_and_stderr(a.iter().copied());
    let sb = mean_and_stderr(b.iter().copied());
    let va = sa.stderr.powi(2);
    let vb = sb.stderr.powi(2);
    let se = (va + vb).sqrt();
    if se == 0.0 {
        return if sa.mean == sb.mean { 1.0 } else { 0.0 };
    }
    let t = (sa.mean - sb.mean) / se;
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let df = (va + vb).powi(2) / (va.powi(2) / (na - 1.0) + vb.powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// p-value of a chi-square test that two samples of counts come from the
/// same distribution. Values are binned one per integer; sparse bins are
/// merged upward so each has an expected count of at least five.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> f64 {
    let max = a.iter().chain(b).copied().max().unwrap_or(0) as usize;
    let mut ha = vec![0f64; max + 1];
    let mut hb = vec![0f64; max + 1];
    for &x in a {
        ha[x as usize] += 1.0;
    }
    for &x in b {
        hb[x as usize] += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;
    let min_expected = 5.0 * total / na.min(nb);

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut acc_a, mut acc_b) = (0.0, 0.0);
    for (x, y) in ha.into_iter().zip(hb) {
        acc_a += x;
        acc_b += y;
        if acc_a + acc_b >= min_expected {
            bins.push((acc_a, acc_b));
            acc_a = 0.0;
            acc_b = 0.0;
        }
    }
    if acc_a + acc_b > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += acc_a;
                last.1 += acc_b;
            }
            None => bins.push((acc_a, acc_b)),
        }
    }
    if bins.len() < 2 {
        return 1.0;
    }
    let stat: f64 = bins
        .iter()
        .map(|&(x, y)| {
            let col = x + y;
            let ea = col * na / total;
            let eb = col * nb / total;
            (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
        })
        .sum();
    let dist = ChiSquared::new((bins.len() - 1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// What arrived at the receiver for one encoded message.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageReport {
    pub original: Vec<u8>,
    pub sent: NucleotideString,
    pub received: NucleotideString,
    pub generation: u32,
    pub errors: ErrorCounts,
    /// Decoded bytes, or the framing error when indels broke the length.
    pub decoded: Result<Vec<u8>, CodecError>,
    /// Nucleotide positions (over the common prefix) where received differs.
    pub mismatched_positions: Vec<usize>,
    /// Byte indices where the decoded message differs; empty on framing error.
    pub corrupted_bytes: Vec<usize>,
}

impl MessageReport {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.original).into_owned()
    }
}

/// Encodes `message`, replicates it under `cfg` until `t_max`, and decodes
/// one uniformly chosen strand from the final population. The root in
/// `cfg` is replaced by the encoded message.
pub fn corrupt_message_demo(message: &[u8], cfg: &SimConfig) -> Result<MessageReport, AnalysisError> {
    if cfg.representation != Representation::Sequence {
        return Err(AnalysisError::NeedsSequenceRepresentation);
    }
    let sent = encode_bytes(message);
    let mut run_cfg = cfg.clone();
    run_cfg.n0 = sent.len() as u64;
    run_cfg.root = RootSpec::Sequence(sent.clone());
    run_cfg.trials = 1;

    let outcome = Trial::new(&run_cfg, 0)?.run()?;
    let mut pick_rng = run_cfg.trial_rng(u64::MAX);
    let strand = &outcome.population[pick_rng.random_range(0..outcome.population.len())];
    let received = strand.sequence.clone().expect("sequence representation");

    let mismatched_positions =
        sent.iter().zip(received.iter()).enumerate().filter_map(|(i, (a, b))| (a != b).then_some(i)).collect();
    let decoded = decode_bytes(&received);
    let corrupted_bytes = match &decoded {
        Ok(bytes) => (0..message.len().max(bytes.len())).filter(|&i| message.get(i) != bytes.get(i)).collect(),
        Err(_) => Vec::new(),
    };

    Ok(MessageReport {
        original: message.to_vec(),
        sent,
        received,
        generation: strand.generation,
        errors: strand.cum_errors,
        decoded,
        mismatched_positions,
        corrupted_bytes,
    })
}
