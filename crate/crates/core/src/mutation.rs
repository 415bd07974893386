//! Replication errors: insertions, deletions and substitutions.
//!
//! Each template position independently takes one outcome out of
//! delete / substitute / copy, so a position is never both deleted and
//! substituted. Insertions are counted per template position and land in
//! uniformly chosen gaps with a uniformly chosen letter. A substitution
//! always picks one of the three other letters.
//!
//! [`mutate_sequence`] applies this position by position. [`mutate_counts`]
//! draws the same channel directly on a [`Composition`], which is all the
//! simulator needs when sequences are not tracked.

use std::ops::{Add, AddAssign};

use rand::Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Nucleotide, NucleotideString};
use crate::kinetics::Composition;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RatesError {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("p_ins + p_del + p_sub = {0} exceeds 1")]
    SumExceedsOne(f64),
}

/// Per-nucleotide, per-replication error probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    p_ins: f64,
    p_del: f64,
    p_sub: f64,
}

impl ErrorRates {
    pub const NONE: ErrorRates = ErrorRates { p_ins: 0.0, p_del: 0.0, p_sub: 0.0 };

    pub fn new(p_ins: f64, p_del: f64, p_sub: f64) -> Result<Self, RatesError> {
        for (name, value) in [("p_ins", p_ins), ("p_del", p_del), ("p_sub", p_sub)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(RatesError::OutOfRange { name, value });
            }
        }
        let sum = p_ins + p_del + p_sub;
        if sum > 1.0 {
            return Err(RatesError::SumExceedsOne(sum));
        }
        Ok(Self { p_ins, p_del, p_sub })
    }

    pub fn p_ins(&self) -> f64 {
        self.p_ins
    }

    pub fn p_del(&self) -> f64 {
        self.p_del
    }

    pub fn p_sub(&self) -> f64 {
        self.p_sub
    }

    /// Probability that a position not deleted is substituted.
    fn p_sub_given_kept(&self) -> f64 {
        if self.p_del >= 1.0 {
            0.0
        } else {
            (self.p_sub / (1.0 - self.p_del)).min(1.0)
        }
    }
}

/// Error events from one or more replications.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub insertions: u64,
    pub deletions: u64,
    pub substitutions: u64,
    /// Deleted letters, indexed `A, C, G, U`. Sums to `deletions` once
    /// letters have been attributed.
    pub per_letter_deletions: [u64; 4],
}

impl ErrorCounts {
    pub fn is_zero(&self) -> bool {
        *self == ErrorCounts::default()
    }

    /// Component-wise `self >= earlier`.
    pub fn dominates(&self, earlier: &ErrorCounts) -> bool {
        self.insertions >= earlier.insertions
            && self.deletions >= earlier.deletions
            && self.substitutions >= earlier.substitutions
            && self.per_letter_deletions.iter().zip(&earlier.per_letter_deletions).all(|(a, b)| a >= b)
    }
}

impl AddAssign for ErrorCounts {
    fn add_assign(&mut self, rhs: ErrorCounts) {
        self.insertions += rhs.insertions;
        self.deletions += rhs.deletions;
        self.substitutions += rhs.substitutions;
        for (l, r) in self.per_letter_deletions.iter_mut().zip(rhs.per_letter_deletions) {
            *l += r;
        }
    }
}

impl Add for ErrorCounts {
    type Output = ErrorCounts;

    fn add(mut self, rhs: ErrorCounts) -> ErrorCounts {
        self += rhs;
        self
    }
}

#[inline]
fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    Binomial::new(n, p.min(1.0)).expect("p in [0, 1]").sample(rng)
}

/// Below this many draws the splitters sample item by item.
const DIRECT_DRAWS: u64 = 32;

/// Splits `draws` items taken without replacement from the classes in
/// `pool` (multivariate hypergeometric).
fn hypergeometric_split<R: Rng + ?Sized>(pool: &[u64; 4], draws: u64, rng: &mut R) -> [u64; 4] {
    let mut out = [0u64; 4];
    let mut remaining_pool: u64 = pool.iter().sum();
    let mut remaining_draws = draws;
    debug_assert!(draws <= remaining_pool);
    if draws <= DIRECT_DRAWS {
        // few draws: pick items one at a time, cheaper than building samplers
        let mut left = *pool;
        for _ in 0..draws {
            let mut u = rng.random_range(0..remaining_pool);
            let class = (0..4)
                .find(|&i| {
                    if u < left[i] {
                        true
                    } else {
                        u -= left[i];
                        false
                    }
                })
                .expect("u below pool total");
            left[class] -= 1;
            out[class] += 1;
            remaining_pool -= 1;
        }
        return out;
    }
    for i in 0..4 {
        if remaining_draws == 0 {
            break;
        }
        if i == 3 || remaining_draws == remaining_pool {
            out[i] = remaining_draws.min(pool[i]);
            remaining_draws -= out[i];
            remaining_pool -= pool[i];
            continue;
        }
        let x = if pool[i] == 0 {
            0
        } else {
            Hypergeometric::new(remaining_pool, pool[i], remaining_draws)
                .expect("valid hypergeometric parameters")
                .sample(rng)
        };
        out[i] = x;
        remaining_draws -= x;
        remaining_pool -= pool[i];
    }
    out
}

/// Splits `n` items uniformly over `k` classes (equal-probability multinomial).
fn uniform_split<R: Rng + ?Sized, const K: usize>(n: u64, rng: &mut R) -> [u64; K] {
    let mut out = [0u64; K];
    if n <= DIRECT_DRAWS {
        for _ in 0..n {
            out[rng.random_range(0..K)] += 1;
        }
        return out;
    }
    let mut left = n;
    for (i, slot) in out.iter_mut().enumerate() {
        if left == 0 {
            break;
        }
        let classes_left = (K - i) as f64;
        let x = if i == K - 1 { left } else { binomial(left, 1.0 / classes_left, rng) };
        *slot = x;
        left -= x;
    }
    out
}

/// Error-event totals for one copy of a `template_len` template. Letters
/// of deleted positions are not attributed here.
///
/// Insertions, deletions and substitutions are each marginally
/// `Binomial(template_len, p)`. Substitutions are drawn among the positions
/// that survived deletion.
pub fn sample_error_counts<R: Rng + ?Sized>(template_len: u64, rates: &ErrorRates, rng: &mut R) -> ErrorCounts {
    let insertions = binomial(template_len, rates.p_ins, rng);
    let deletions = binomial(template_len, rates.p_del, rng);
    let substitutions = binomial(template_len - deletions, rates.p_sub_given_kept(), rng);
    ErrorCounts { insertions, deletions, substitutions, per_letter_deletions: [0; 4] }
}

/// Copies `template` through the channel on the composition level.
pub fn mutate_counts<R: Rng + ?Sized>(
    template: &Composition,
    rates: &ErrorRates,
    rng: &mut R,
) -> (Composition, ErrorCounts) {
    let mut counts = sample_error_counts(template.total(), rates, rng);
    if counts.is_zero() {
        return (*template, counts);
    }

    let deleted = hypergeometric_split(template.counts(), counts.deletions, rng);
    counts.per_letter_deletions = deleted;
    let mut kept = *template.counts();
    for (k, d) in kept.iter_mut().zip(deleted) {
        *k -= d;
    }

    let mut out = kept;
    if counts.substitutions > 0 {
        let substituted = hypergeometric_split(&kept, counts.substitutions, rng);
        for (from, &moved) in substituted.iter().enumerate() {
            if moved == 0 {
                continue;
            }
            out[from] -= moved;
            let targets: [u64; 3] = uniform_split(moved, rng);
            for (j, t) in targets.into_iter().enumerate() {
                // the three letters other than `from`, in order
                let to = if j < from { j } else { j + 1 };
                out[to] += t;
            }
        }
    }

    if counts.insertions > 0 {
        let inserted: [u64; 4] = uniform_split(counts.insertions, rng);
        for (o, i) in out.iter_mut().zip(inserted) {
            *o += i;
        }
    }

    (Composition(out), counts)
}

/// Copies `template` through the channel position by position.
pub fn mutate_sequence<R: Rng + ?Sized>(
    template: &NucleotideString,
    rates: &ErrorRates,
    rng: &mut R,
) -> (NucleotideString, ErrorCounts) {
    let n = template.len();
    let mut counts = ErrorCounts::default();

    // gap g sits before template position g; gap n is the end
    let n_ins = binomial(n as u64, rates.p_ins, rng);
    let mut gaps: Vec<usize> = (0..n_ins).map(|_| rng.random_range(0..=n)).collect();
    gaps.sort_unstable();
    counts.insertions = n_ins;

    let mut out = Vec::with_capacity(n + n_ins as usize);
    let mut next_gap = 0;
    let sub_threshold = rates.p_del + rates.p_sub;
    let any_copy_errors = sub_threshold > 0.0;

    for (pos, &nt) in template.iter().enumerate() {
        while next_gap < gaps.len() && gaps[next_gap] == pos {
            out.push(random_letter(rng));
            next_gap += 1;
        }
        if !any_copy_errors {
            out.push(nt);
            continue;
        }
        let u: f64 = rng.random();
        if u < rates.p_del {
            counts.deletions += 1;
            counts.per_letter_deletions[nt.index()] += 1;
        } else if u < sub_threshold {
            counts.substitutions += 1;
            let offset = rng.random_range(1..4u8);
            out.push(Nucleotide::from_digit((nt.digit() + offset) % 4).expect("digit < 4"));
        } else {
            out.push(nt);
        }
    }
    for _ in next_gap..gaps.len() {
        out.push(random_letter(rng));
    }

    (NucleotideString::from(out), counts)
}

#[inline]
fn random_letter<R: Rng + ?Sized>(rng: &mut R) -> Nucleotide {
    Nucleotide::from_digit(rng.random_range(0..4u8)).expect("digit < 4")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_template(len: usize, r: &mut ChaCha8Rng) -> NucleotideString {
        (0..len).map(|_| random_letter(r)).collect()
    }

    #[test]
    fn rates_validation() {
        assert!(ErrorRates::new(0.1, 0.2, 0.3).is_ok());
        assert!(matches!(ErrorRates::new(-0.1, 0.0, 0.0), Err(RatesError::OutOfRange { .. })));
        assert!(matches!(ErrorRates::new(0.0, 1.5, 0.0), Err(RatesError::OutOfRange { .. })));
        assert!(matches!(ErrorRates::new(0.5, 0.5, 0.1), Err(RatesError::SumExceedsOne(_))));
        assert!(ErrorRates::new(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn zero_length_or_zero_rates() {
        let r = ErrorRates::new(0.3, 0.3, 0.3).unwrap();
        assert!(sample_error_counts(0, &r, &mut rng(1)).is_zero());
        assert!(sample_error_counts(20_000, &ErrorRates::NONE, &mut rng(1)).is_zero());
    }

    #[test]
    fn deletion_count_mean_matches_binomial() {
        let r = ErrorRates::new(0.0, 2.3e-7, 0.0).unwrap();
        let mut g = rng(11);
        let draws = 10_000_000u64;
        let total: u64 = (0..draws).map(|_| sample_error_counts(20_000, &r, &mut g).deletions).sum();
        let mean = total as f64 / draws as f64;
        let p = 2.3e-7;
        let expect = 20_000.0 * p;
        let se = (20_000.0 * p * (1.0 - p) / draws as f64).sqrt();
        assert!((expect - 4.6e-3).abs() < 1e-12);
        assert!((mean - expect).abs() < 3.0 * se, "mean {mean}, expected {expect} ± {se}");
    }

    #[test]
    fn sequence_without_errors_is_copied() {
        let mut g = rng(2);
        let t = random_template(500, &mut g);
        let (out, counts) = mutate_sequence(&t, &ErrorRates::NONE, &mut g);
        assert_eq!(out, t);
        assert!(counts.is_zero());
    }

    #[test]
    fn certain_deletion_empties_sequence() {
        let mut g = rng(3);
        let t = random_template(321, &mut g);
        let r = ErrorRates::new(0.0, 1.0, 0.0).unwrap();
        let (out, counts) = mutate_sequence(&t, &r, &mut g);
        assert!(out.is_empty());
        assert_eq!(counts.deletions, 321);
        assert_eq!(counts.per_letter_deletions, t.letter_counts());
    }

    #[test]
    fn certain_substitution_changes_every_position() {
        let t: NucleotideString = "CAGA".parse().unwrap();
        let r = ErrorRates::new(0.0, 0.0, 1.0).unwrap();
        let mut g = rng(4);
        let mut seen = [[false; 4]; 4];
        for _ in 0..10_000 {
            let (out, counts) = mutate_sequence(&t, &r, &mut g);
            assert_eq!(out.len(), 4);
            assert_eq!(counts.substitutions, 4);
            for (pos, (a, b)) in t.iter().zip(out.iter()).enumerate() {
                assert_ne!(a, b);
                seen[pos][b.index()] = true;
            }
        }
        // every replacement letter other than the template letter shows up
        for (pos, nt) in t.iter().enumerate() {
            for other in Nucleotide::ALL {
                assert_eq!(seen[pos][other.index()], other != *nt);
            }
        }
    }

    #[test]
    fn counts_trivial_cases() {
        let r = ErrorRates::new(0.2, 0.2, 0.2).unwrap();
        let (c, e) = mutate_counts(&Composition::EMPTY, &r, &mut rng(5));
        assert_eq!(c, Composition::EMPTY);
        assert!(e.is_zero());
        let comp = Composition::new(10, 20, 30, 40);
        let (c, e) = mutate_counts(&comp, &ErrorRates::NONE, &mut rng(5));
        assert_eq!(c, comp);
        assert!(e.is_zero());
    }

    #[test]
    fn per_letter_deletion_means() {
        let comp = Composition::uniform(1000);
        let r = ErrorRates::new(0.0, 0.1, 0.0).unwrap();
        let mut g = rng(6);
        let trials = 100_000;
        let mut sums = [0f64; 4];
        let mut sq = [0f64; 4];
        for _ in 0..trials {
            let (_, e) = mutate_counts(&comp, &r, &mut g);
            for i in 0..4 {
                let x = e.per_letter_deletions[i] as f64;
                sums[i] += x;
                sq[i] += x * x;
            }
        }
        for i in 0..4 {
            let mean = sums[i] / trials as f64;
            let var = sq[i] / trials as f64 - mean * mean;
            let se = (var / trials as f64).sqrt();
            assert!((mean - 100.0).abs() < 3.0 * se, "letter {i}: {mean} ± {se}");
        }
    }

    #[test]
    fn hypergeometric_split_exhaustive_small() {
        // drawing everything returns the pool itself
        let pool = [3, 0, 5, 2];
        assert_eq!(hypergeometric_split(&pool, 10, &mut rng(7)), pool);
        let mut g = rng(8);
        for draws in 0..=10 {
            let s = hypergeometric_split(&pool, draws, &mut g);
            assert_eq!(s.iter().sum::<u64>(), draws);
            for i in 0..4 {
                assert!(s[i] <= pool[i]);
            }
        }
    }

    #[test]
    fn splitter_moments_on_both_paths() {
        // draws of 20 take the item-by-item path, 40 the sampler path
        let pool = [100u64, 200, 300, 400];
        let total = 1000.0;
        let mut g = rng(9);
        for draws in [20u64, 40] {
            let reps = 40_000;
            let (mut s, mut sq, mut u) = (0.0, 0.0, 0.0);
            for _ in 0..reps {
                let x = hypergeometric_split(&pool, draws, &mut g)[1] as f64;
                s += x;
                sq += x * x;
                u += uniform_split::<_, 4>(draws, &mut g)[2] as f64;
            }
            let n = draws as f64;
            let (k, m) = (200.0, reps as f64);
            let mean = n * k / total;
            let var = n * (k / total) * (1.0 - k / total) * (total - n) / (total - 1.0);
            let got = s / m;
            assert!((got - mean).abs() < 4.0 * (var / m).sqrt(), "draws {draws}: mean {got}");
            let got_var = sq / m - got * got;
            assert!((got_var / var - 1.0).abs() < 0.05, "draws {draws}: var {got_var} vs {var}");
            let u_sd = (n * 0.25 * 0.75 / m).sqrt();
            assert!((u / m - n / 4.0).abs() < 4.0 * u_sd, "draws {draws}: uniform mean {}", u / m);
        }
    }

    proptest! {
        #[test]
        fn sequence_length_conservation(
            len in 0usize..400,
            p_ins in 0.0f64..0.3,
            p_del in 0.0f64..0.3,
            p_sub in 0.0f64..0.3,
            seed in any::<u64>(),
        ) {
            let r = ErrorRates::new(p_ins, p_del, p_sub).unwrap();
            let mut g = rng(seed);
            let t = random_template(len, &mut g);
            let (out, e) = mutate_sequence(&t, &r, &mut g);
            prop_assert_eq!(out.len() as u64, len as u64 + e.insertions - e.deletions);
            prop_assert_eq!(e.per_letter_deletions.iter().sum::<u64>(), e.deletions);
            prop_assert!(e.deletions <= len as u64);
            // deletions and substitutions only: the survivors line up with the template
            if e.insertions == 0 && e.deletions == 0 {
                let diffs = t.iter().zip(out.iter()).filter(|(a, b)| a != b).count() as u64;
                prop_assert_eq!(diffs, e.substitutions);
            }
        }

        #[test]
        fn counts_conservation(
            comp in proptest::array::uniform4(0u64..300),
            p_ins in 0.0f64..0.3,
            p_del in 0.0f64..0.3,
            p_sub in 0.0f64..0.3,
            seed in any::<u64>(),
        ) {
            let r = ErrorRates::new(p_ins, p_del, p_sub).unwrap();
            let comp = Composition(comp);
            let (out, e) = mutate_counts(&comp, &r, &mut rng(seed));
            prop_assert_eq!(out.total(), comp.total() + e.insertions - e.deletions);
            prop_assert_eq!(e.per_letter_deletions.iter().sum::<u64>(), e.deletions);
            prop_assert!(e.deletions + e.substitutions <= comp.total());
            for i in 0..4 {
                prop_assert!(e.per_letter_deletions[i] <= comp.0[i]);
            }
        }
    }
}
