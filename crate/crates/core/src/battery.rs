//! The per-template reliability battery and dataset-level reliability metrics.
//!
//! For every (statement, template) pair five tests are run:
//!
//! * **sampling**: the original statement under canonical label order has a
//!   significant stance;
//! * **paraphrase**: every paraphrase has a significant stance equal to it;
//! * **negation** / **opposite**: the variant's significant stance is the flip;
//! * **inverted labels**: the original under inverted label order keeps the stance.
//!
//! A statement is reliable for a template when all five pass. Inverted-order
//! responses to the other variants are part of the job set but unused here.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, VariantKind};
use crate::modelio::{ResponseKey, ResponseStore};
use crate::promptkit::{LabelOrder, PromptKey, PromptTemplate};
use crate::seed::derive_seed;
use crate::stancemap::{map_response, MapperConfig, Stance};
use crate::stats::{
    cohen_kappa, krippendorff_alpha, mean_sd, significant_stance, SampleSet, SignificanceConfig,
    StatsError, Verdict,
};

#[derive(Debug, thiserror::Error)]
pub enum BatteryError {
    #[error("store incomplete for template {template}: {} responses missing (first: {})", missing.len(), missing.first().map(|k| k.to_string()).unwrap_or_default())]
    Incomplete {
        template: String,
        missing: Vec<ResponseKey>,
    },
    #[error("no pairable statements for {0}")]
    NoPairs(String),
    #[error("cross-template agreement needs at least two templates, got {0}")]
    TooFewTemplates(usize),
    #[error("summary invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryConfig {
    pub significance: SignificanceConfig,
    pub mapper: MapperConfig,
    /// Responses expected per prompt.
    pub samples: u32,
    /// Compute kappa over significant stances instead of raw majorities.
    pub significance_gated_kappa: bool,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            significance: SignificanceConfig::default(),
            mapper: MapperConfig::default(),
            samples: 30,
            significance_gated_kappa: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Sampling,
    Paraphrase,
    Negation,
    Opposite,
    InvertedLabels,
}

impl TestKind {
    pub const ALL: [TestKind; 5] = [
        TestKind::Sampling,
        TestKind::Paraphrase,
        TestKind::Negation,
        TestKind::Opposite,
        TestKind::InvertedLabels,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::Sampling => "sampling",
            TestKind::Paraphrase => "paraphrase",
            TestKind::Negation => "negation",
            TestKind::Opposite => "opposite",
            TestKind::InvertedLabels => "inverted_labels",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TestResults {
    pub sampling: bool,
    pub paraphrase: bool,
    pub negation: bool,
    pub opposite: bool,
    pub inverted_labels: bool,
}

impl TestResults {
    pub fn get(&self, test: TestKind) -> bool {
        match test {
            TestKind::Sampling => self.sampling,
            TestKind::Paraphrase => self.paraphrase,
            TestKind::Negation => self.negation,
            TestKind::Opposite => self.opposite,
            TestKind::InvertedLabels => self.inverted_labels,
        }
    }

    pub fn all(&self) -> bool {
        TestKind::ALL.iter().all(|&t| self.get(t))
    }
}

/// Sample counts and derived stances for one prompt of a statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub variant: VariantKind,
    pub label_order: LabelOrder,
    pub samples: SampleSet,
    pub verdict: Verdict,
    /// Strict majority over valid samples.
    pub majority: Option<Stance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityVerdict {
    pub statement_id: String,
    pub template_id: String,
    /// Significant stance of the original statement under canonical labels.
    pub resolved_stance: Option<Stance>,
    pub tests: TestResults,
    pub reliable: bool,
    pub outcomes: Vec<VariantOutcome>,
}

impl ReliabilityVerdict {
    pub fn outcome(&self, variant: VariantKind, order: LabelOrder) -> Option<&VariantOutcome> {
        self.outcomes
            .iter()
            .find(|o| o.variant == variant && o.label_order == order)
    }

    /// Stance used for agreement statistics: the majority, or the significant
    /// stance when `gated`.
    pub fn agreement_stance(&self, variant: VariantKind, order: LabelOrder, gated: bool) -> Option<Stance> {
        self.outcome(variant, order).and_then(|o| {
            if gated {
                o.verdict.stance()
            } else {
                o.majority
            }
        })
    }

    /// The stance of a reliable statement, `None` otherwise.
    pub fn reliable_stance(&self) -> Option<Stance> {
        self.reliable.then_some(self.resolved_stance).flatten()
    }
}

/// The prompts the battery reads for every statement.
pub const BATTERY_PROMPTS: [(VariantKind, LabelOrder); 7] = [
    (VariantKind::Original, LabelOrder::Canonical),
    (VariantKind::Paraphrase(1), LabelOrder::Canonical),
    (VariantKind::Paraphrase(2), LabelOrder::Canonical),
    (VariantKind::Paraphrase(3), LabelOrder::Canonical),
    (VariantKind::Negation, LabelOrder::Canonical),
    (VariantKind::Opposite, LabelOrder::Canonical),
    (VariantKind::Original, LabelOrder::Inverted),
];

/// Passes when the original has a significant stance, which is returned.
pub fn sampling_test(verdict: Verdict) -> (bool, Option<Stance>) {
    let stance = verdict.stance();
    (stance.is_some(), stance)
}

/// Passes when every paraphrase has a significant stance equal to the original's.
pub fn paraphrase_test(original: Option<Stance>, paraphrases: &[Verdict]) -> bool {
    match original {
        Some(s) => !paraphrases.is_empty() && paraphrases.iter().all(|v| v.stance() == Some(s)),
        None => false,
    }
}

/// Passes when the negated variant's significant stance is the flipped original.
pub fn negation_test(original: Option<Stance>, negation: Verdict) -> bool {
    flip_test(original, negation)
}

/// Passes when the semantic opposite's significant stance is the flipped original.
pub fn opposite_test(original: Option<Stance>, opposite: Verdict) -> bool {
    flip_test(original, opposite)
}

fn flip_test(original: Option<Stance>, variant: Verdict) -> bool {
    matches!(original, Some(s) if variant.stance() == Some(s.flip()))
}

/// Passes when the inverted-order stance equals the canonical one.
pub fn inverted_label_test(canonical: Option<Stance>, inverted: Verdict) -> bool {
    matches!(canonical, Some(s) if inverted.stance() == Some(s))
}

/// Significance rule memoised on the sample counts. All significance
/// decisions of a run share one bootstrap seed, so the verdict depends only
/// on (valid, positive) counts.
#[derive(Debug)]
pub struct SignificanceCache {
    config: SignificanceConfig,
    memo: Mutex<HashMap<(u32, u32), Verdict>>,
}

impl SignificanceCache {
    pub fn new(config: SignificanceConfig) -> Self {
        SignificanceCache {
            config,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn verdict(&self, samples: &SampleSet) -> Verdict {
        let key = (samples.n_valid, samples.n_positive);
        if let Some(&v) = self.memo.lock().expect("memo lock").get(&key) {
            return v;
        }
        let v = significant_stance(samples, &self.config);
        self.memo.lock().expect("memo lock").insert(key, v);
        v
    }
}

/// Run the five tests for one statement given its sample counts.
pub fn evaluate_statement(
    statement_id: &str,
    template_id: &str,
    mut samples_of: impl FnMut(VariantKind, LabelOrder) -> SampleSet,
    significance: &SignificanceCache,
) -> ReliabilityVerdict {
    let outcomes: Vec<VariantOutcome> = BATTERY_PROMPTS
        .iter()
        .map(|&(variant, label_order)| {
            let samples = samples_of(variant, label_order);
            VariantOutcome {
                variant,
                label_order,
                samples,
                verdict: significance.verdict(&samples),
                majority: samples.majority(),
            }
        })
        .collect();
    let verdict_of = |variant, order| {
        outcomes
            .iter()
            .find(|o| o.variant == variant && o.label_order == order)
            .map(|o| o.verdict)
            .expect("battery prompt present")
    };

    let (sampling, stance) = sampling_test(verdict_of(VariantKind::Original, LabelOrder::Canonical));
    let paraphrases: Vec<Verdict> = (1..=3)
        .map(|i| verdict_of(VariantKind::Paraphrase(i), LabelOrder::Canonical))
        .collect();
    let tests = TestResults {
        sampling,
        paraphrase: paraphrase_test(stance, &paraphrases),
        negation: negation_test(stance, verdict_of(VariantKind::Negation, LabelOrder::Canonical)),
        opposite: opposite_test(stance, verdict_of(VariantKind::Opposite, LabelOrder::Canonical)),
        inverted_labels: inverted_label_test(stance, verdict_of(VariantKind::Original, LabelOrder::Inverted)),
    };
    ReliabilityVerdict {
        statement_id: statement_id.to_string(),
        template_id: template_id.to_string(),
        resolved_stance: stance,
        reliable: tests.all(),
        tests,
        outcomes,
    }
}

/// Keys of the template's jobs that are missing from the store.
pub fn missing_keys(
    store: &ResponseStore,
    corpus: &Corpus,
    template: &PromptTemplate,
    samples: u32,
) -> Vec<ResponseKey> {
    let mut missing = Vec::new();
    for order in LabelOrder::BOTH {
        for bundle in corpus.statements() {
            for variant in VariantKind::ALL {
                let prompt = PromptKey {
                    template_id: template.id.clone(),
                    label_order: order,
                    statement_id: bundle.id.clone(),
                    variant,
                };
                for i in 0..samples {
                    let key = ResponseKey::new(prompt.clone(), i);
                    if !store.contains(&key) {
                        missing.push(key);
                    }
                }
            }
        }
    }
    missing
}

/// Map the first `samples` stored responses of a prompt to stances and count them.
pub fn sample_set(
    store: &ResponseStore,
    prompt: &PromptKey,
    template: &PromptTemplate,
    samples: u32,
    mapper: &MapperConfig,
) -> SampleSet {
    SampleSet::from_stances(
        store
            .samples_for(prompt)
            .filter(|r| r.key.sample_index < samples)
            .map(|r| map_response(&r.text, &template.labels, mapper)),
    )
}

/// Evaluate every statement of the corpus under one template.
pub fn run_battery(
    store: &ResponseStore,
    corpus: &Corpus,
    template: &PromptTemplate,
    config: &BatteryConfig,
    significance: &SignificanceCache,
) -> Result<Vec<ReliabilityVerdict>, BatteryError> {
    let missing = missing_keys(store, corpus, template, config.samples);
    if !missing.is_empty() {
        return Err(BatteryError::Incomplete {
            template: template.id.clone(),
            missing,
        });
    }
    Ok(corpus
        .statements()
        .iter()
        .map(|bundle| {
            evaluate_statement(
                &bundle.id,
                &template.id,
                |variant, order| {
                    let prompt = PromptKey {
                        template_id: template.id.clone(),
                        label_order: order,
                        statement_id: bundle.id.clone(),
                        variant,
                    };
                    sample_set(store, &prompt, template, config.samples, &config.mapper)
                },
                significance,
            )
        })
        .collect())
}

/// Kappa values for one template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappas {
    /// Pooled over all three (original, paraphrase) pairings.
    pub paraphrase: Option<f64>,
    pub negation: Option<f64>,
    pub opposite: Option<f64>,
    pub paraphrase_each: [Option<f64>; 3],
}

fn kappa_over(
    verdicts: &[ReliabilityVerdict],
    variants: &[VariantKind],
    gated: bool,
) -> Result<f64, BatteryError> {
    let pairs: Vec<(Stance, Stance)> = verdicts
        .iter()
        .flat_map(|v| {
            let base = v.agreement_stance(VariantKind::Original, LabelOrder::Canonical, gated);
            variants.iter().filter_map(move |&variant| {
                let other = v.agreement_stance(variant, LabelOrder::Canonical, gated);
                base.zip(other)
            })
        })
        .collect();
    if pairs.is_empty() {
        let name = variants.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("+");
        return Err(BatteryError::NoPairs(name));
    }
    Ok(cohen_kappa(&pairs)?)
}

/// Cohen's kappa between the original and its paraphrases, negation and
/// opposite, over one template's verdicts. Pairs where either side lacks a
/// stance are dropped.
pub fn dataset_kappas(verdicts: &[ReliabilityVerdict], gated: bool) -> Result<Kappas, BatteryError> {
    let paraphrases = [
        VariantKind::Paraphrase(1),
        VariantKind::Paraphrase(2),
        VariantKind::Paraphrase(3),
    ];
    let kappas = Kappas {
        paraphrase: kappa_over(verdicts, &paraphrases, gated).ok(),
        negation: kappa_over(verdicts, &[VariantKind::Negation], gated).ok(),
        opposite: kappa_over(verdicts, &[VariantKind::Opposite], gated).ok(),
        paraphrase_each: paraphrases.map(|p| kappa_over(verdicts, &[p], gated).ok()),
    };
    if kappas.paraphrase.is_none() && kappas.negation.is_none() && kappas.opposite.is_none() {
        return Err(BatteryError::NoPairs("all variants".into()));
    }
    Ok(kappas)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<MeanSd> {
        mean_sd(values).map(|(mean, sd)| MeanSd {
            mean,
            sd,
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaTable {
    pub per_template: BTreeMap<String, Kappas>,
    pub paraphrase: Option<MeanSd>,
    pub negation: Option<MeanSd>,
    pub opposite: Option<MeanSd>,
}

impl KappaTable {
    pub fn build(per_template: BTreeMap<String, Kappas>) -> Self {
        let collect = |f: fn(&Kappas) -> Option<f64>| {
            let values: Vec<f64> = per_template.values().filter_map(f).collect();
            MeanSd::of(&values)
        };
        KappaTable {
            paraphrase: collect(|k| k.paraphrase),
            negation: collect(|k| k.negation),
            opposite: collect(|k| k.opposite),
            per_template,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossTemplate {
    pub alpha: f64,
    /// Statements answered identically (and with a stance) under every template.
    pub same_response_count: usize,
    pub n_statements: usize,
    pub n_templates: usize,
}

/// Krippendorff's alpha over the statements × templates matrix of majority
/// stances for the original statement under canonical labels.
pub fn cross_template_report(
    by_template: &BTreeMap<String, Vec<ReliabilityVerdict>>,
) -> Result<CrossTemplate, BatteryError> {
    if by_template.len() < 2 {
        return Err(BatteryError::TooFewTemplates(by_template.len()));
    }
    let mut matrix: BTreeMap<&str, Vec<Option<Stance>>> = BTreeMap::new();
    for (t, verdicts) in by_template.values().enumerate() {
        for v in verdicts {
            let row = matrix
                .entry(v.statement_id.as_str())
                .or_insert_with(|| vec![None; by_template.len()]);
            row[t] = v.agreement_stance(VariantKind::Original, LabelOrder::Canonical, false);
        }
    }
    let rows: Vec<Vec<Option<Stance>>> = matrix.into_values().collect();
    let same_response_count = rows
        .iter()
        .filter(|row| row.iter().all(Option::is_some) && row.windows(2).all(|w| w[0] == w[1]))
        .count();
    Ok(CrossTemplate {
        alpha: krippendorff_alpha(&rows)?,
        same_response_count,
        n_statements: rows.len(),
        n_templates: by_template.len(),
    })
}

/// Pass proportions of one test (or of all five together) across templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub test: String,
    pub per_template: BTreeMap<String, f64>,
    pub mean: f64,
    pub sd: f64,
    pub random_baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatterySummary {
    pub tests: Vec<TestSummary>,
    pub all_tests: TestSummary,
}

impl BatterySummary {
    pub fn test(&self, test: TestKind) -> &TestSummary {
        self.tests
            .iter()
            .find(|t| t.test == test.as_str())
            .expect("summary holds every test")
    }
}

/// Per-test pass proportions and the pass-all proportion.
type PassProportions = (BTreeMap<TestKind, f64>, f64);

fn pass_proportions(verdicts: &[ReliabilityVerdict]) -> PassProportions {
    let n = verdicts.len().max(1) as f64;
    let per_test = TestKind::ALL
        .iter()
        .map(|&t| (t, verdicts.iter().filter(|v| v.tests.get(t)).count() as f64 / n))
        .collect();
    let all = verdicts.iter().filter(|v| v.reliable).count() as f64 / n;
    (per_test, all)
}

/// Pass proportions of a respondent answering every prompt with 30 (or
/// `config.samples`) fair coin flips.
pub fn random_baseline(
    corpus: &Corpus,
    config: &BatteryConfig,
    significance: &SignificanceCache,
    seed: u64,
) -> (BTreeMap<TestKind, f64>, f64) {
    let verdicts: Vec<ReliabilityVerdict> = corpus
        .statements()
        .iter()
        .map(|b| {
            evaluate_statement(
                &b.id,
                "random",
                |variant, order| {
                    let variant = variant.to_string();
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        seed,
                        &["baseline", &b.id, &variant, order.as_str()],
                    ));
                    let positive = (0..config.samples).filter(|_| rng.gen_bool(0.5)).count() as u32;
                    SampleSet::new(positive, config.samples - positive, 0)
                },
                significance,
            )
        })
        .collect();
    pass_proportions(&verdicts)
}

/// Summarise pass proportions per test across templates.
pub fn summarize(
    by_template: &BTreeMap<String, Vec<ReliabilityVerdict>>,
    baseline: &(BTreeMap<TestKind, f64>, f64),
) -> Result<BatterySummary, BatteryError> {
    let per_template: BTreeMap<&String, _> = by_template
        .iter()
        .map(|(t, v)| (t, pass_proportions(v)))
        .collect();
    let build = |name: &str, get: &dyn Fn(&PassProportions) -> f64, base: f64| {
        let values: BTreeMap<String, f64> = per_template
            .iter()
            .map(|(t, p)| ((*t).clone(), get(p)))
            .collect();
        let v: Vec<f64> = values.values().copied().collect();
        let (mean, sd) = mean_sd(&v).unwrap_or((0.0, 0.0));
        TestSummary {
            test: name.to_string(),
            per_template: values,
            mean,
            sd,
            random_baseline: base,
        }
    };
    let tests: Vec<TestSummary> = TestKind::ALL
        .iter()
        .map(|&k| build(k.as_str(), &|p| p.0[&k], baseline.0[&k]))
        .collect();
    let all_tests = build("all_tests", &|p| p.1, baseline.1);

    for (template, (per_test, all)) in &per_template {
        for (test, p) in per_test {
            if *all > *p {
                return Err(BatteryError::Invariant(format!(
                    "template {template}: pass-all {all} exceeds {test} {p}"
                )));
            }
        }
    }
    Ok(BatterySummary { tests, all_tests })
}

/// Everything the battery produces for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub verdicts: BTreeMap<String, Vec<ReliabilityVerdict>>,
    pub summary: BatterySummary,
    pub kappas: KappaTable,
    /// Absent with fewer than two templates.
    pub cross_template: Option<CrossTemplate>,
}

/// Run the battery for every template (in parallel) and derive all
/// dataset-level metrics.
pub fn evaluate_all(
    store: &ResponseStore,
    corpus: &Corpus,
    templates: &[PromptTemplate],
    config: &BatteryConfig,
) -> Result<Evaluation, BatteryError> {
    let significance = SignificanceCache::new(config.significance);
    let results: Vec<Result<(String, Vec<ReliabilityVerdict>), BatteryError>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = templates
                .iter()
                .map(|t| {
                    let significance = &significance;
                    scope.spawn(move || {
                        run_battery(store, corpus, t, config, significance).map(|v| (t.id.clone(), v))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("battery worker panicked"))
                .collect()
        });
    let mut verdicts = BTreeMap::new();
    for r in results {
        let (id, v) = r?;
        verdicts.insert(id, v);
    }

    let baseline = random_baseline(corpus, config, &significance, config.significance.seed);
    let summary = summarize(&verdicts, &baseline)?;
    let kappas = KappaTable::build(
        verdicts
            .iter()
            .filter_map(|(t, v)| {
                dataset_kappas(v, config.significance_gated_kappa)
                    .ok()
                    .map(|k| (t.clone(), k))
            })
            .collect(),
    );
    let cross_template = match cross_template_report(&verdicts) {
        Ok(c) => Some(c),
        Err(BatteryError::TooFewTemplates(_)) | Err(BatteryError::Stats(StatsError::NoPairableUnit)) => None,
        Err(e) => return Err(e),
    };
    Ok(Evaluation {
        verdicts,
        summary,
        kappas,
        cross_template,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Verdict::{Insufficient, Negative as VN, Positive as VP, Undecided};

    fn cache() -> SignificanceCache {
        SignificanceCache::new(SignificanceConfig::default())
    }

    #[test]
    fn sampling_examples() {
        let c = cache();
        assert_eq!(sampling_test(c.verdict(&SampleSet::new(30, 0, 0))), (true, Some(Stance::Positive)));
        assert!(!sampling_test(c.verdict(&SampleSet::new(16, 14, 0))).0);
        assert_eq!(c.verdict(&SampleSet::new(10, 0, 20)), Insufficient);
        assert!(!sampling_test(Insufficient).0);
    }

    #[test]
    fn paraphrase_examples() {
        let p = Some(Stance::Positive);
        assert!(paraphrase_test(p, &[VP, VP, VP]));
        assert!(!paraphrase_test(p, &[VP, Undecided, VP]));
        assert!(!paraphrase_test(p, &[VP, VN, VP]));
        assert!(!paraphrase_test(None, &[VP, VP, VP]));
    }

    #[test]
    fn flip_examples() {
        let p = Some(Stance::Positive);
        assert!(negation_test(p, VN));
        assert!(!negation_test(p, VP));
        assert!(!opposite_test(p, Undecided));
        assert!(opposite_test(Some(Stance::Negative), VP));
        assert!(!negation_test(None, VN));
    }

    #[test]
    fn inverted_examples() {
        let p = Some(Stance::Positive);
        assert!(inverted_label_test(p, VP));
        assert!(!inverted_label_test(p, VN));
        assert!(!inverted_label_test(p, Undecided));
    }

    fn verdict_from(counts: [(u32, u32); 7]) -> ReliabilityVerdict {
        let c = cache();
        evaluate_statement(
            "s",
            "t",
            |variant, order| {
                let i = BATTERY_PROMPTS.iter().position(|&p| p == (variant, order)).unwrap();
                SampleSet::new(counts[i].0, counts[i].1, 0)
            },
            &c,
        )
    }

    #[test]
    fn statement_reliable_only_when_all_pass() {
        let good = verdict_from([(30, 0), (29, 1), (30, 0), (28, 2), (1, 29), (0, 30), (30, 0)]);
        assert!(good.reliable);
        assert_eq!(good.resolved_stance, Some(Stance::Positive));
        assert_eq!(good.reliable_stance(), Some(Stance::Positive));

        let bad_inv = verdict_from([(30, 0), (29, 1), (30, 0), (28, 2), (1, 29), (0, 30), (0, 30)]);
        assert!(!bad_inv.reliable);
        assert!(!bad_inv.tests.inverted_labels);
        assert!(bad_inv.tests.negation && bad_inv.tests.paraphrase);
        assert_eq!(bad_inv.reliable_stance(), None);
    }

    #[test]
    fn flip_coherence() {
        let counts = [(30, 0), (20, 10), (30, 0), (28, 2), (1, 29), (15, 15), (30, 0)];
        let flipped = counts.map(|(p, n)| (n, p));
        let a = verdict_from(counts);
        let b = verdict_from(flipped);
        assert_eq!(a.tests, b.tests);
        assert_eq!(a.resolved_stance.map(Stance::flip), b.resolved_stance);
    }

    #[test]
    fn kappa_signs() {
        let mk = |s: [(u32, u32); 7]| verdict_from(s);
        let verdicts = vec![
            mk([(30, 0), (30, 0), (30, 0), (30, 0), (0, 30), (0, 30), (30, 0)]),
            mk([(0, 30), (0, 30), (0, 30), (0, 30), (30, 0), (30, 0), (0, 30)]),
        ];
        let k = dataset_kappas(&verdicts, false).unwrap();
        assert_eq!(k.paraphrase, Some(1.0));
        assert_eq!(k.negation, Some(-1.0));
        assert_eq!(k.opposite, Some(-1.0));
        assert_eq!(k.paraphrase_each, [Some(1.0); 3]);
    }

    #[test]
    fn cross_template_completeness() {
        let stanced = |id: &str, pos: bool| {
            let mut v = verdict_from(if pos {
                [(30, 0); 7]
            } else {
                [(0, 30); 7]
            });
            v.statement_id = id.into();
            v
        };
        let mut missing = stanced("b", true);
        for o in &mut missing.outcomes {
            o.samples = SampleSet::new(0, 0, 30);
            o.majority = None;
        }
        let mut by = BTreeMap::new();
        by.insert("t1".to_string(), vec![stanced("a", true), stanced("b", true), stanced("c", false)]);
        by.insert("t2".to_string(), vec![stanced("a", true), missing, stanced("c", false)]);
        let report = cross_template_report(&by).unwrap();
        assert_eq!(report.alpha, 1.0);
        assert_eq!(report.same_response_count, 2);
        assert_eq!(report.n_statements, 3);

        by.remove("t2");
        assert!(matches!(cross_template_report(&by), Err(BatteryError::TooFewTemplates(1))));
    }
}
