//! Event-driven branching replication.
//!
//! A trial starts from one error-free root strand. Every strand with
//! non-zero length replicates back to back: when a copy completes, the
//! daughter (parent errors plus fresh ones, generation + 1) joins the
//! population and both strands start their next copy, each timed from its
//! own current composition. Live strands are summarised at checkpoint
//! times. When the population exceeds the cap it is halved by uniform
//! subsampling and a multiplier keeps the reported size unbiased.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{mean_and_stderr, MeanStderr};
use crate::codec::{Nucleotide, NucleotideString};
use crate::kinetics::{sample_replication_time, Composition, KineticParams, KineticsError, TimeMode};
use crate::mutation::{mutate_counts, mutate_sequence, ErrorCounts, ErrorRates};

/// Strands drawn (with replacement) per checkpoint.
pub const CHECKPOINT_SAMPLE_SIZE: usize = 1024;

pub const DEFAULT_POP_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("population extinct at t = {time} s: every strand has length zero")]
    PopulationExtinct { time: f64 },
    #[error("cannot sample an empty population")]
    EmptyPopulation,
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error("trial {index}: {source}")]
    Trial {
        index: u64,
        #[source]
        source: Box<SimError>,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidConfig { field, reason: reason.into() }
}

/// How the root strand is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum RootSpec {
    /// `n0` letters drawn uniformly from a stream seeded with `seed`.
    Random {
        seed: u64,
    },
    Sequence(NucleotideString),
    Composition(Composition),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    #[default]
    Counts,
    Sequence,
}

impl Representation {
    pub fn as_str(self) -> &'static str {
        match self {
            Representation::Counts => "counts",
            Representation::Sequence => "sequence",
        }
    }
}

impl std::str::FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "counts" => Ok(Representation::Counts),
            "sequence" => Ok(Representation::Sequence),
            other => Err(format!("unknown representation {other:?} (expected counts or sequence)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Root strand length.
    pub n0: u64,
    pub root: RootSpec,
    pub rates: ErrorRates,
    pub kinetics: KineticParams,
    pub time_mode: TimeMode,
    pub representation: Representation,
    pub t_max: f64,
    pub checkpoints: Vec<f64>,
    pub pop_cap: usize,
    pub trials: u64,
    pub master_seed: u64,
}

impl SimConfig {
    /// `count` evenly spaced checkpoints covering `[0, t_max]`.
    pub fn even_checkpoints(t_max: f64, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            1 => vec![t_max],
            _ => (0..count).map(|i| t_max * i as f64 / (count - 1) as f64).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n0 == 0 {
            return Err(invalid("n0", "root length must be at least 1"));
        }
        match &self.root {
            RootSpec::Random { .. } => {}
            RootSpec::Sequence(s) if s.len() as u64 != self.n0 => {
                return Err(invalid("root", format!("sequence length {} != n0 = {}", s.len(), self.n0)))
            }
            RootSpec::Composition(c) if c.total() != self.n0 => {
                return Err(invalid("root", format!("composition total {} != n0 = {}", c.total(), self.n0)))
            }
            RootSpec::Composition(_) if self.representation == Representation::Sequence => {
                return Err(invalid("root", "sequence representation needs a random or explicit sequence root"))
            }
            _ => {}
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(invalid("t_max", format!("must be finite and non-negative, got {}", self.t_max)));
        }
        if self.checkpoints.is_empty() {
            return Err(invalid("checkpoints", "at least one checkpoint is required"));
        }
        for w in self.checkpoints.windows(2) {
            // written so that NaN also fails
            if w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less) {
                return Err(invalid("checkpoints", "must be strictly ascending"));
            }
        }
        for &c in &self.checkpoints {
            if !(c.is_finite() && c >= 0.0 && c <= self.t_max) {
                return Err(invalid("checkpoints", format!("{c} is outside [0, t_max = {}]", self.t_max)));
            }
        }
        if self.pop_cap < 2 {
            return Err(invalid("pop_cap", "must be at least 2"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        Ok(())
    }

    pub fn root_sequence(&self) -> NucleotideString {
        match &self.root {
            RootSpec::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..self.n0).map(|_| Nucleotide::from_digit(rng.random_range(0..4u8)).expect("digit < 4")).collect()
            }
            RootSpec::Sequence(s) => s.clone(),
            RootSpec::Composition(_) => {
                panic!("an explicit composition root has no sequence")
            }
        }
    }

    pub fn root_composition(&self) -> Composition {
        match &self.root {
            RootSpec::Composition(c) => *c,
            _ => Composition::of(&self.root_sequence()),
        }
    }

    pub fn trial_rng(&self, trial_index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.master_seed.wrapping_add(trial_index))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Strand {
    pub composition: Composition,
    /// Present in sequence representation only.
    pub sequence: Option<NucleotideString>,
    pub generation: u32,
    /// Errors accumulated along the lineage since the root.
    pub cum_errors: ErrorCounts,
    pub birth_time: f64,
    next_completion: Option<f64>,
}

impl Strand {
    pub fn root(composition: Composition, sequence: Option<NucleotideString>) -> Self {
        Self {
            composition,
            sequence,
            generation: 0,
            cum_errors: ErrorCounts::default(),
            birth_time: 0.0,
            next_completion: None,
        }
    }

    pub fn len(&self) -> u64 {
        self.composition.total()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn next_completion(&self) -> Option<f64> {
        self.next_completion
    }
}

/// Root quantities that error rates are measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootReference {
    pub n0: u64,
    pub composition: Composition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSample {
    pub time: f64,
    /// Live strands times the cumulative culling multiplier.
    pub population: f64,
    pub mean_generation: f64,
    pub del_rate: f64,
    pub ins_rate: f64,
    pub sub_rate: f64,
    /// Deleted letters over the root count of that letter, `A, C, G, U`.
    pub del_rate_per_letter: [f64; 4],
}

pub type Trajectory = Vec<CheckpointSample>;

/// Summarises a population at time `t` from a with-replacement sample of at
/// most [`CHECKPOINT_SAMPLE_SIZE`] strands.
pub fn sample_checkpoint<R: Rng + ?Sized>(
    population: &[Strand],
    root: &RootReference,
    multiplier: f64,
    t: f64,
    rng: &mut R,
) -> Result<CheckpointSample, SimError> {
    if population.is_empty() {
        return Err(SimError::EmptyPopulation);
    }
    let m = population.len().min(CHECKPOINT_SAMPLE_SIZE);
    let mut gen = 0.0;
    let mut ins = 0.0;
    let mut del = 0.0;
    let mut sub = 0.0;
    let mut per_letter = [0.0f64; 4];
    for _ in 0..m {
        let s = &population[rng.random_range(0..population.len())];
        gen += f64::from(s.generation);
        ins += s.cum_errors.insertions as f64;
        del += s.cum_errors.deletions as f64;
        sub += s.cum_errors.substitutions as f64;
        for (acc, &d) in per_letter.iter_mut().zip(&s.cum_errors.per_letter_deletions) {
            *acc += d as f64;
        }
    }
    let m = m as f64;
    let n0 = root.n0 as f64;
    let mut del_rate_per_letter = [0.0; 4];
    for (i, rate) in del_rate_per_letter.iter_mut().enumerate() {
        let original = root.composition.0[i];
        if original > 0 {
            *rate = per_letter[i] / m / original as f64;
        }
    }
    Ok(CheckpointSample {
        time: t,
        population: population.len() as f64 * multiplier,
        mean_generation: gen / m,
        del_rate: del / m / n0,
        ins_rate: ins / m / n0,
        sub_rate: sub / m / n0,
        del_rate_per_letter,
    })
}

/// Keeps a uniform subsample of `cap / 2` strands once the population
/// exceeds `cap`. Returns the factor by which the population shrank
/// (1 when nothing was removed).
pub fn cull_population<R: Rng + ?Sized>(population: &mut Vec<Strand>, cap: usize, rng: &mut R) -> f64 {
    let before = population.len();
    if before <= cap {
        return 1.0;
    }
    let keep = (cap / 2).max(1);
    let mut chosen = index::sample(rng, before, keep).into_vec();
    chosen.sort_unstable();
    let mut kept = Vec::with_capacity(cap + 1);
    let mut next = chosen.into_iter().peekable();
    for (i, strand) in population.drain(..).enumerate() {
        if next.peek() == Some(&i) {
            kept.push(strand);
            next.next();
        }
    }
    *population = kept;
    before as f64 / keep as f64
}

/// Callback run after every replication, once the daughter exists and
/// before it joins the population.
pub trait ReplicationObserver {
    fn on_replication(&mut self, time: f64, parent: &Strand, child: &Strand);
}

impl ReplicationObserver for () {
    fn on_replication(&mut self, _: f64, _: &Strand, _: &Strand) {}
}

impl<F: FnMut(f64, &Strand, &Strand)> ReplicationObserver for F {
    fn on_replication(&mut self, time: f64, parent: &Strand, child: &Strand) {
        self(time, parent, child)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    strand: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.strand.cmp(&other.strand))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Final state of one trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trajectory: Trajectory,
    /// Live strands at `t_max`.
    pub population: Vec<Strand>,
    pub multiplier: f64,
    /// Number of replications performed.
    pub replications: u64,
}

/// One trial's state: live strands, the event queue and the random stream.
pub struct Trial<'a> {
    cfg: &'a SimConfig,
    root: RootReference,
    rng: ChaCha8Rng,
    strands: Vec<Strand>,
    queue: BinaryHeap<Reverse<Event>>,
    multiplier: f64,
    replications: u64,
}

impl<'a> Trial<'a> {
    pub fn new(cfg: &'a SimConfig, trial_index: u64) -> Result<Self, SimError> {
        cfg.validate()?;
        let (composition, sequence) = match cfg.representation {
            Representation::Counts => (cfg.root_composition(), None),
            Representation::Sequence => {
                let s = cfg.root_sequence();
                (Composition::of(&s), Some(s))
            }
        };
        Ok(Self {
            cfg,
            root: RootReference { n0: cfg.n0, composition },
            rng: cfg.trial_rng(trial_index),
            strands: vec![Strand::root(composition, sequence)],
            queue: BinaryHeap::new(),
            multiplier: 1.0,
            replications: 0,
        })
    }

    pub fn root(&self) -> &RootReference {
        &self.root
    }

    fn schedule(&mut self, idx: usize, now: f64) -> Result<(), SimError> {
        let strand = &mut self.strands[idx];
        if strand.is_empty() {
            strand.next_completion = None;
            return Ok(());
        }
        let dt = sample_replication_time(&strand.composition, &self.cfg.kinetics, self.cfg.time_mode, &mut self.rng)?;
        let at = now + dt;
        strand.next_completion = Some(at);
        self.queue.push(Reverse(Event { time: at, strand: idx }));
        Ok(())
    }

    fn rebuild_queue(&mut self) {
        let events: Vec<_> = self
            .strands
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.next_completion.map(|time| Reverse(Event { time, strand: i })))
            .collect();
        self.queue = BinaryHeap::from(events);
    }

    pub fn run(self) -> Result<TrialOutcome, SimError> {
        self.run_with(&mut ())
    }

    pub fn run_with<O: ReplicationObserver + ?Sized>(mut self, observer: &mut O) -> Result<TrialOutcome, SimError> {
        let cfg = self.cfg;
        let mut trajectory = Vec::with_capacity(cfg.checkpoints.len());
        let mut pending = cfg.checkpoints.iter().copied().peekable();

        self.schedule(0, 0.0)?;

        loop {
            let Some(&Reverse(event)) = self.queue.peek() else {
                return Err(SimError::PopulationExtinct {
                    time: self.strands.iter().map(|s| s.birth_time).fold(0.0, f64::max),
                });
            };
            // a checkpoint at t includes every completion at or before t
            while let Some(&cp) = pending.peek() {
                if cp < event.time {
                    trajectory.push(sample_checkpoint(&self.strands, &self.root, self.multiplier, cp, &mut self.rng)?);
                    pending.next();
                } else {
                    break;
                }
            }
            if event.time > cfg.t_max {
                break;
            }
            self.queue.pop();

            let now = event.time;
            let parent_idx = event.strand;
            let child = replicate(&cfg.rates, &self.strands[parent_idx], now, &mut self.rng);
            observer.on_replication(now, &self.strands[parent_idx], &child);
            self.replications += 1;

            self.strands.push(child);
            let child_idx = self.strands.len() - 1;
            self.schedule(parent_idx, now)?;
            self.schedule(child_idx, now)?;

            if self.strands.len() > cfg.pop_cap {
                self.multiplier *= cull_population(&mut self.strands, cfg.pop_cap, &mut self.rng);
                self.rebuild_queue();
            }
        }

        for cp in pending {
            trajectory.push(sample_checkpoint(&self.strands, &self.root, self.multiplier, cp, &mut self.rng)?);
        }

        Ok(TrialOutcome {
            trajectory,
            population: self.strands,
            multiplier: self.multiplier,
            replications: self.replications,
        })
    }
}

fn replicate<R: Rng + ?Sized>(rates: &ErrorRates, parent: &Strand, now: f64, rng: &mut R) -> Strand {
    let (composition, sequence, fresh) = match &parent.sequence {
        Some(seq) => {
            let (s, e) = mutate_sequence(seq, rates, rng);
            (Composition::of(&s), Some(s), e)
        }
        None => {
            let (c, e) = mutate_counts(&parent.composition, rates, rng);
            (c, None, e)
        }
    };
    Strand {
        composition,
        sequence,
        generation: parent.generation + 1,
        cum_errors: parent.cum_errors + fresh,
        birth_time: now,
        next_completion: None,
    }
}

/// Runs trial `trial_index`. The result depends only on the configuration
/// and the index.
pub fn run_trial(cfg: &SimConfig, trial_index: u64) -> Result<Trajectory, SimError> {
    Ok(Trial::new(cfg, trial_index)?.run()?.trajectory)
}

/// Across-trial mean and standard error of every checkpoint quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatedSample {
    pub time: f64,
    pub population: MeanStderr,
    pub mean_generation: MeanStderr,
    pub del_rate: MeanStderr,
    pub ins_rate: MeanStderr,
    pub sub_rate: MeanStderr,
    pub del_rate_per_letter: [MeanStderr; 4],
}

/// Averages per-trial trajectories checkpoint by checkpoint.
///
/// Panics if the trajectories disagree in checkpoint count.
pub fn aggregate(trials: &[Trajectory]) -> Vec<AggregatedSample> {
    let Some(first) = trials.first() else {
        return Vec::new();
    };
    assert!(trials.iter().all(|t| t.len() == first.len()), "ragged trajectories");
    (0..first.len())
        .map(|i| {
            let column = |f: &dyn Fn(&CheckpointSample) -> f64| -> MeanStderr {
                mean_and_stderr(trials.iter().map(|t| f(&t[i])))
            };
            AggregatedSample {
                time: first[i].time,
                population: column(&|s| s.population),
                mean_generation: column(&|s| s.mean_generation),
                del_rate: column(&|s| s.del_rate),
                ins_rate: column(&|s| s.ins_rate),
                sub_rate: column(&|s| s.sub_rate),
                del_rate_per_letter: std::array::from_fn(|l| column(&|s| s.del_rate_per_letter[l])),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Experiment {
    /// Per-trial trajectories, in trial-index order.
    pub trials: Vec<Trajectory>,
    pub aggregate: Vec<AggregatedSample>,
}

/// Runs every trial and aggregates. `threads` caps the worker pool
/// (`None` uses rayon's default); the result does not depend on it.
pub fn run_experiment(cfg: &SimConfig, threads: Option<usize>) -> Result<Experiment, SimError> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| SimError::ThreadPool(e.to_string()))?;
    let results: Vec<Result<Trajectory, SimError>> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| run_trial(cfg, i).map_err(|e| SimError::Trial { index: i, source: Box::new(e) }))
            .collect()
    });
    let trials = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let aggregate = aggregate(&trials);
    Ok(Experiment { trials, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> SimConfig {
        SimConfig {
            n0: 100,
            root: RootSpec::Random { seed: 5 },
            rates: ErrorRates::NONE,
            kinetics: KineticParams::from_rate(22.0).unwrap(),
            time_mode: TimeMode::Gaussian,
            representation: Representation::Counts,
            t_max: 40.0,
            checkpoints: SimConfig::even_checkpoints(40.0, 9),
            pop_cap: 512,
            trials: 4,
            master_seed: 17,
        }
    }

    fn strand_with(deletions: u64, generation: u32) -> Strand {
        let mut s = Strand::root(Composition::uniform(25), None);
        s.cum_errors.deletions = deletions;
        s.generation = generation;
        s
    }

    fn reference() -> RootReference {
        RootReference { n0: 100, composition: Composition::uniform(25) }
    }

    #[test]
    fn validation() {
        let ok = base_config();
        assert!(ok.validate().is_ok());

        let mut c = ok.clone();
        c.checkpoints = vec![10.0, 5.0];
        assert!(matches!(c.validate(), Err(SimError::InvalidConfig { field: "checkpoints", .. })));
        let mut c = ok.clone();
        c.checkpoints = vec![50.0];
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.pop_cap = 1;
        assert!(matches!(c.validate(), Err(SimError::InvalidConfig { field: "pop_cap", .. })));
        let mut c = ok.clone();
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.root = RootSpec::Composition(Composition::uniform(10));
        assert!(matches!(c.validate(), Err(SimError::InvalidConfig { field: "root", .. })));
    }

    #[test]
    fn root_checkpoint_is_zero() {
        let pop = vec![Strand::root(Composition::uniform(25), None)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_checkpoint(&pop, &reference(), 1.0, 0.0, &mut rng).unwrap();
        assert_eq!(s.del_rate, 0.0);
        assert_eq!(s.ins_rate, 0.0);
        assert_eq!(s.sub_rate, 0.0);
        assert_eq!(s.mean_generation, 0.0);
        assert_eq!(s.population, 1.0);
    }

    #[test]
    fn constant_population_rate() {
        let pop: Vec<_> = (0..50).map(|_| strand_with(3, 2)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_checkpoint(&pop, &reference(), 8.0, 1.0, &mut rng).unwrap();
        assert_eq!(s.del_rate, 0.03);
        assert_eq!(s.mean_generation, 2.0);
        assert_eq!(s.population, 400.0);
    }

    #[test]
    fn two_strand_sample_mean() {
        // rates 0 and 0.02; a two-strand population is sampled twice per checkpoint
        let pop = vec![strand_with(0, 0), strand_with(2, 0)];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let reps = 20_000;
        let mean =
            (0..reps).map(|_| sample_checkpoint(&pop, &reference(), 1.0, 0.0, &mut rng).unwrap().del_rate).sum::<f64>()
                / reps as f64;
        let se = 0.01 / ((2 * reps) as f64).sqrt();
        assert!((mean - 0.01).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn empty_population_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_checkpoint(&[], &reference(), 1.0, 0.0, &mut rng), Err(SimError::EmptyPopulation));
    }

    #[test]
    fn cull_identical() {
        let cap = 64;
        let mut pop: Vec<_> = (0..2 * cap).map(|_| strand_with(1, 3)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let factor = cull_population(&mut pop, cap, &mut rng);
        assert_eq!(pop.len(), cap / 2);
        assert_eq!(factor, 4.0);
        assert!(pop.iter().all(|s| *s == strand_with(1, 3)));
    }

    #[test]
    fn cull_below_cap_is_noop() {
        let mut pop: Vec<_> = (0..10).map(|g| strand_with(0, g)).collect();
        let orig = pop.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(cull_population(&mut pop, 10, &mut rng), 1.0);
        assert_eq!(pop, orig);
    }

    #[test]
    fn cull_preserves_mean_generation() {
        let cap = 100;
        let base: Vec<_> = (0..2 * cap as u32).map(|i| strand_with(0, i % 17)).collect();
        let pre = base.iter().map(|s| f64::from(s.generation)).sum::<f64>() / base.len() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reps = 1000;
        let posts: Vec<f64> = (0..reps)
            .map(|_| {
                let mut pop = base.clone();
                cull_population(&mut pop, cap, &mut rng);
                pop.iter().map(|s| f64::from(s.generation)).sum::<f64>() / pop.len() as f64
            })
            .collect();
        let m = mean_and_stderr(posts.iter().copied());
        assert!((m.mean - pre).abs() < 3.0 * m.stderr, "{} vs {pre} ± {}", m.mean, m.stderr);
    }

    #[test]
    fn noiseless_channel() {
        let cfg = base_config();
        for i in 0..cfg.trials {
            let traj = run_trial(&cfg, i).unwrap();
            assert_eq!(traj.len(), cfg.checkpoints.len());
            for s in &traj {
                assert_eq!(s.del_rate, 0.0);
                assert_eq!(s.ins_rate, 0.0);
                assert_eq!(s.sub_rate, 0.0);
                assert!(s.population >= 1.0);
            }
        }
    }

    #[test]
    fn deterministic_per_trial_index() {
        let mut cfg = base_config();
        cfg.rates = ErrorRates::new(0.01, 0.01, 0.02).unwrap();
        assert_eq!(run_trial(&cfg, 2).unwrap(), run_trial(&cfg, 2).unwrap());
        assert_ne!(run_trial(&cfg, 2).unwrap(), run_trial(&cfg, 3).unwrap());
    }

    #[test]
    fn extinction_is_reported() {
        // the root never changes, so extinction needs culling to drop every
        // strand that can still replicate
        let mut cfg = base_config();
        cfg.n0 = 3;
        cfg.pop_cap = 2;
        cfg.trials = 20;
        cfg.rates = ErrorRates::new(0.0, 1.0, 0.0).unwrap();
        let outcomes: Vec<_> = (0..cfg.trials).map(|i| run_trial(&cfg, i)).collect();
        let first = outcomes.iter().position(|r| r.is_err()).expect("some trial goes extinct");
        assert!(matches!(outcomes[first], Err(SimError::PopulationExtinct { .. })));
        let err = run_experiment(&cfg, Some(2)).unwrap_err();
        assert!(matches!(err, SimError::Trial { index, .. } if index == first as u64), "{err}");
    }

    #[test]
    fn single_trial_experiment_matches_run_trial() {
        let mut cfg = base_config();
        cfg.trials = 1;
        cfg.rates = ErrorRates::new(0.01, 0.02, 0.03).unwrap();
        let exp = run_experiment(&cfg, Some(1)).unwrap();
        let traj = run_trial(&cfg, 0).unwrap();
        for (a, s) in exp.aggregate.iter().zip(&traj) {
            assert_eq!(a.del_rate.mean, s.del_rate);
            assert_eq!(a.del_rate.stderr, 0.0);
            assert_eq!(a.sub_rate.mean, s.sub_rate);
            assert_eq!(a.mean_generation.stderr, 0.0);
        }
    }

    #[test]
    fn thread_count_does_not_matter() {
        let mut cfg = base_config();
        cfg.trials = 12;
        cfg.rates = ErrorRates::new(0.005, 0.005, 0.01).unwrap();
        let a = run_experiment(&cfg, Some(1)).unwrap();
        let b = run_experiment(&cfg, Some(4)).unwrap();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.aggregate, b.aggregate);
    }

    #[test]
    fn culling_keeps_population_bounded() {
        let mut cfg = base_config();
        cfg.pop_cap = 64;
        cfg.t_max = 60.0;
        cfg.checkpoints = SimConfig::even_checkpoints(60.0, 4);
        let out = Trial::new(&cfg, 0).unwrap().run().unwrap();
        assert!(out.population.len() <= 64);
        assert!(out.multiplier > 1.0);
        // population estimate grows roughly like 2^(t / E[T]) with E[T] ~ 4.5 s
        let last = out.trajectory.last().unwrap();
        assert!(last.population > 1000.0, "{}", last.population);
    }

    #[test]
    fn sequence_mode_strands_are_consistent() {
        let mut cfg = base_config();
        cfg.representation = Representation::Sequence;
        cfg.rates = ErrorRates::new(0.02, 0.02, 0.02).unwrap();
        let out = Trial::new(&cfg, 1).unwrap().run().unwrap();
        for s in &out.population {
            let seq = s.sequence.as_ref().unwrap();
            assert_eq!(Composition::of(seq), s.composition);
            assert_eq!(s.len() + s.cum_errors.deletions, cfg.n0 + s.cum_errors.insertions);
        }
    }

    #[test]
    fn deletions_shorten_replication() {
        // heavy deletions shrink strands, so later copies finish sooner and
        // the lineage gets more generations into the same time window
        let mut cfg = base_config();
        cfg.kinetics = KineticParams::new([0.01; 4], [0.0; 4]).unwrap();
        cfg.t_max = 10.5;
        cfg.checkpoints = vec![10.5];
        cfg.pop_cap = 4096;
        let slow = Trial::new(&cfg, 0).unwrap().run().unwrap();
        cfg.rates = ErrorRates::new(0.0, 0.2, 0.0).unwrap();
        let fast = Trial::new(&cfg, 0).unwrap().run().unwrap();
        // ten synchronous rounds, each strand either stays or becomes the daughter
        let mean_gen = |o: &TrialOutcome| {
            o.population.iter().map(|s| f64::from(s.generation)).sum::<f64>() / o.population.len() as f64
        };
        assert_eq!(slow.population.len(), 1024);
        assert_eq!(mean_gen(&slow), 5.0);
        assert!(mean_gen(&fast) > 6.0, "{}", mean_gen(&fast));
    }
}
