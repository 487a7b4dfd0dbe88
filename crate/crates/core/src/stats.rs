//! Statistical kernel: percentile bootstrap, the significance rule, Cohen's
//! kappa and nominal Krippendorff's alpha.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stancemap::Stance;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("bootstrap needs at least one valid sample")]
    NoValidSamples,
    #[error("bootstrap needs at least one repetition")]
    NoReps,
    #[error("confidence level must lie in (0, 1), got {0}")]
    Level(f64),
    #[error("agreement needs at least one pair")]
    EmptyPairs,
    #[error("kappa is defined over positive/negative stances only")]
    InvalidStance,
    #[error("no unit has two or more ratings")]
    NoPairableUnit,
}

/// Counts of coded samples for one prompt: positive is 1, negative is 0,
/// invalid answers are excluded from the proportion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SampleSet {
    pub n_valid: u32,
    pub n_positive: u32,
    pub n_invalid: u32,
}

impl SampleSet {
    pub fn new(n_positive: u32, n_negative: u32, n_invalid: u32) -> Self {
        SampleSet {
            n_valid: n_positive + n_negative,
            n_positive,
            n_invalid,
        }
    }

    pub fn from_stances<I: IntoIterator<Item = Stance>>(stances: I) -> Self {
        let mut set = SampleSet::default();
        for s in stances {
            match s {
                Stance::Positive => {
                    set.n_valid += 1;
                    set.n_positive += 1;
                }
                Stance::Negative => set.n_valid += 1,
                Stance::Invalid => set.n_invalid += 1,
            }
        }
        set
    }

    pub fn n_negative(&self) -> u32 {
        self.n_valid - self.n_positive
    }

    pub fn proportion(&self) -> Option<f64> {
        (self.n_valid > 0).then(|| f64::from(self.n_positive) / f64::from(self.n_valid))
    }

    /// Same counts with positive and negative exchanged.
    pub fn flipped(&self) -> Self {
        SampleSet {
            n_positive: self.n_negative(),
            ..*self
        }
    }

    /// Strict majority over valid samples; `None` on a tie or with no valid samples.
    pub fn majority(&self) -> Option<Stance> {
        let neg = self.n_negative();
        match self.n_positive.cmp(&neg) {
            std::cmp::Ordering::Greater => Some(Stance::Positive),
            std::cmp::Ordering::Less => Some(Stance::Negative),
            std::cmp::Ordering::Equal => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub low: f64,
    pub high: f64,
    pub level: f64,
    pub reps: u32,
    pub point: f64,
}

/// Linear-interpolation quantile of sorted data (the "type 7" definition).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile bootstrap interval for the positive proportion of a sample set.
///
/// Resamples the `n_valid` coded values with replacement `reps` times and
/// returns the `(1 - level) / 2` and `1 - (1 - level) / 2` quantiles of the
/// resampled means. The interval is widened if needed to contain the observed
/// proportion. Deterministic for a fixed seed, and symmetric: the interval of
/// [`SampleSet::flipped`] is the mirror image `(1 - high, 1 - low)`.
pub fn bootstrap_ci(
    samples: &SampleSet,
    reps: u32,
    level: f64,
    seed: u64,
) -> Result<BootstrapCi, StatsError> {
    if samples.n_valid == 0 {
        return Err(StatsError::NoValidSamples);
    }
    if reps == 0 {
        return Err(StatsError::NoReps);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Level(level));
    }
    // Always resample the minority class and mirror, which makes the result
    // exactly symmetric under a positive/negative relabelling.
    if samples.n_positive * 2 > samples.n_valid {
        let m = bootstrap_ci(&samples.flipped(), reps, level, seed)?;
        return Ok(BootstrapCi {
            low: 1.0 - m.high,
            high: 1.0 - m.low,
            point: 1.0 - m.point,
            ..m
        });
    }

    let n = samples.n_valid;
    let k = samples.n_positive;
    let point = f64::from(k) / f64::from(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..reps)
        .map(|_| {
            // Coded values: slots [0, k) hold ones, [k, n) zeros.
            let hits = (0..n).filter(|_| rng.gen_range(0..n) < k).count();
            hits as f64 / f64::from(n)
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let low = quantile_sorted(&means, tail).min(point);
    let high = quantile_sorted(&means, 1.0 - tail).max(point);
    Ok(BootstrapCi {
        low,
        high,
        level,
        reps,
        point,
    })
}

/// Parameters of the significance rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    /// Lower and upper thresholds; a verdict needs the whole interval beyond one of them.
    pub thresholds: (f64, f64),
    pub min_valid: u32,
    pub reps: u32,
    pub level: f64,
    pub seed: u64,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        SignificanceConfig {
            thresholds: (0.45, 0.55),
            min_valid: 15,
            reps: 1000,
            level: 0.95,
            seed: 0,
        }
    }
}

/// Outcome of the significance rule for one prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Positive,
    Negative,
    /// The interval reaches into the band between the thresholds.
    Undecided,
    /// Fewer valid samples than `min_valid`.
    Insufficient,
}

impl Verdict {
    pub fn stance(self) -> Option<Stance> {
        match self {
            Verdict::Positive => Some(Stance::Positive),
            Verdict::Negative => Some(Stance::Negative),
            Verdict::Undecided | Verdict::Insufficient => None,
        }
    }
}

/// Positive when the whole interval lies above the upper threshold, negative
/// when it lies below the lower one, undecided otherwise.
pub fn significant_stance(samples: &SampleSet, config: &SignificanceConfig) -> Verdict {
    if samples.n_valid < config.min_valid.max(1) {
        return Verdict::Insufficient;
    }
    let ci = bootstrap_ci(samples, config.reps, config.level, config.seed)
        .expect("n_valid >= 1 and config validated");
    verdict_from_ci(&ci, config.thresholds)
}

pub fn verdict_from_ci(ci: &BootstrapCi, (lower, upper): (f64, f64)) -> Verdict {
    if ci.low > upper {
        Verdict::Positive
    } else if ci.high < lower {
        Verdict::Negative
    } else {
        Verdict::Undecided
    }
}

/// Cohen's kappa over paired positive/negative stances.
pub fn cohen_kappa(pairs: &[(Stance, Stance)]) -> Result<f64, StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::EmptyPairs);
    }
    // counts[a][b], index 0 = positive, 1 = negative
    let mut counts = [[0u64; 2]; 2];
    for &(a, b) in pairs {
        let idx = |s: Stance| match s {
            Stance::Positive => Ok(0),
            Stance::Negative => Ok(1),
            Stance::Invalid => Err(StatsError::InvalidStance),
        };
        counts[idx(a)?][idx(b)?] += 1;
    }
    let n = pairs.len() as f64;
    let p_o = (counts[0][0] + counts[1][1]) as f64 / n;
    let a_pos = (counts[0][0] + counts[0][1]) as f64 / n;
    let b_pos = (counts[0][0] + counts[1][0]) as f64 / n;
    let p_e = a_pos * b_pos + (1.0 - a_pos) * (1.0 - b_pos);
    if p_e >= 1.0 {
        return Ok(if p_o >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Nominal Krippendorff's alpha over a units × raters matrix with missing
/// entries, using the coincidence-matrix formulation. Units with fewer than
/// two ratings are ignored. Returns 1 when the data show no expected
/// disagreement at all.
pub fn krippendorff_alpha<T: Ord + Clone>(ratings: &[Vec<Option<T>>]) -> Result<f64, StatsError> {
    let mut coincidence: BTreeMap<(T, T), f64> = BTreeMap::new();
    for unit in ratings {
        let values: Vec<&T> = unit.iter().flatten().collect();
        let m = values.len();
        if m < 2 {
            continue;
        }
        let w = 1.0 / (m - 1) as f64;
        for (i, a) in values.iter().enumerate() {
            for (j, b) in values.iter().enumerate() {
                if i != j {
                    *coincidence.entry(((*a).clone(), (*b).clone())).or_default() += w;
                }
            }
        }
    }
    if coincidence.is_empty() {
        return Err(StatsError::NoPairableUnit);
    }
    let mut marginals: BTreeMap<&T, f64> = BTreeMap::new();
    for ((c, _), o) in &coincidence {
        *marginals.entry(c).or_default() += o;
    }
    let n: f64 = marginals.values().sum();
    let observed: f64 = coincidence
        .iter()
        .filter(|((c, k), _)| c != k)
        .map(|(_, o)| o)
        .sum::<f64>();
    let sum_sq: f64 = marginals.values().map(|v| v * v).sum();
    let expected = n * n - sum_sq; // sum over c != k of n_c * n_k
    if expected <= 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

/// Mean and sample standard deviation (n - 1 denominator; zero for fewer
/// than two values). `None` for an empty slice.
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}
