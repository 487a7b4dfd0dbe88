//! A parameterised stochastic respondent used as ground truth for the
//! reliability battery.
//!
//! For each sampled response the respondent
//!
//! 1. refuses with probability `refusal_rate`;
//! 2. draws a base stance that agrees with the statement with probability
//!    `p(s)`, where a (template, statement) pair may have `p(s)` replaced by
//!    `1 - p(s)` with probability `template_noise` (fixed for that pair);
//! 3. for a negated or opposite variant, answers the flipped stance with
//!    probability `negation_fidelity` and keeps the base stance otherwise;
//! 4. with probability `label_order_sensitivity`, ties its answer to the
//!    label's slot instead of its meaning: it emits whatever label occupies,
//!    in the rendered prompt, the slot its intended answer occupies in the
//!    canonical template. Under canonical order this changes nothing; under
//!    inverted order it emits the other label.
//!
//! All draws come from a stream seeded by the profile seed and the response
//! key, so outputs are identical regardless of call order or threading.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Backend, ClientError, DecodingParams, Source};
use crate::corpus::{Corpus, PartyAnswer};
use crate::promptkit::{LabelOrder, PromptInstance};
use crate::seed::derive_seed;

pub const REFUSAL_TEXT: &str = "As an AI, I don't have personal opinions on political questions.";

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("profile field {field} must lie in [0, 1], got {value}")]
    Probability { field: String, value: f64 },
    #[error("profile clones unknown party {0}")]
    UnknownParty(String),
    #[error("malformed profile: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read profile {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticProfile {
    /// Per-statement probability of agreeing with the original statement.
    pub agree_prob: BTreeMap<String, f64>,
    /// Used for statements absent from `agree_prob`.
    pub default_agree_prob: f64,
    pub negation_fidelity: f64,
    pub label_order_sensitivity: f64,
    pub template_noise: f64,
    pub refusal_rate: f64,
    pub seed: u64,
    /// Parties whose answer keys fill `agree_prob` when resolved against a corpus.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub clone_parties: Vec<String>,
    /// Agree probability assigned to a cloned "agree" answer (and its
    /// complement to "disagree").
    pub clone_confidence: f64,
}

impl Default for SyntheticProfile {
    fn default() -> Self {
        SyntheticProfile {
            agree_prob: BTreeMap::new(),
            default_agree_prob: 0.5,
            negation_fidelity: 1.0,
            label_order_sensitivity: 0.0,
            template_noise: 0.0,
            refusal_rate: 0.0,
            seed: 0,
            clone_parties: Vec::new(),
            clone_confidence: 0.95,
        }
    }
}

impl SyntheticProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let mut fields = vec![
            ("default_agree_prob".to_string(), self.default_agree_prob),
            ("negation_fidelity".to_string(), self.negation_fidelity),
            ("label_order_sensitivity".to_string(), self.label_order_sensitivity),
            ("template_noise".to_string(), self.template_noise),
            ("refusal_rate".to_string(), self.refusal_rate),
            ("clone_confidence".to_string(), self.clone_confidence),
        ];
        fields.extend(self.agree_prob.iter().map(|(k, &v)| (format!("agree_prob.{k}"), v)));
        for (field, value) in fields {
            if !(0.0..=1.0).contains(&value) {
                return Err(ProfileError::Probability { field, value });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        let profile: SyntheticProfile = serde_json::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ProfileError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Fill `agree_prob` from the answer keys of `clone_parties`. Explicit
    /// entries win; neutral answers map to 0.5.
    pub fn resolve(&self, corpus: &Corpus) -> Result<SyntheticProfile, ProfileError> {
        let mut resolved = self.clone();
        for id in &self.clone_parties {
            let party = corpus
                .party(id)
                .ok_or_else(|| ProfileError::UnknownParty(id.clone()))?;
            for (statement, answer) in &party.answers {
                let p = match answer {
                    PartyAnswer::Agree => self.clone_confidence,
                    PartyAnswer::Disagree => 1.0 - self.clone_confidence,
                    PartyAnswer::Neutral => 0.5,
                };
                resolved.agree_prob.entry(statement.clone()).or_insert(p);
            }
        }
        resolved.clone_parties.clear();
        resolved.validate()?;
        Ok(resolved)
    }

    pub fn agree_prob_of(&self, statement_id: &str) -> f64 {
        self.agree_prob
            .get(statement_id)
            .copied()
            .unwrap_or(self.default_agree_prob)
    }
}

const PHRASINGS: [&str; 5] = ["{}", "{}.", "{C}", "{C}.", "I would say {}."];

/// One synthetic answer for the given prompt and sample index.
pub fn synth_respond(profile: &SyntheticProfile, instance: &PromptInstance, sample_index: u32) -> String {
    let key = &instance.key;
    let variant = key.variant.to_string();
    let index = sample_index.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        profile.seed,
        &[
            "sample",
            &key.template_id,
            key.label_order.as_str(),
            &key.statement_id,
            &variant,
            &index,
        ],
    ));
    // Fixed draw order keeps every knob's stream independent of the others.
    let u_refuse: f64 = rng.gen();
    let u_base: f64 = rng.gen();
    let u_fidelity: f64 = rng.gen();
    let u_position: f64 = rng.gen();
    let phrasing = PHRASINGS[rng.gen_range(0..PHRASINGS.len())];

    if u_refuse < profile.refusal_rate {
        return REFUSAL_TEXT.to_string();
    }

    let mut p = profile.agree_prob_of(&key.statement_id);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(
        profile.seed,
        &["template_noise", &key.template_id, &key.statement_id],
    ));
    if noise_rng.gen::<f64>() < profile.template_noise {
        p = 1.0 - p;
    }

    let mut agrees = u_base < p;
    if key.variant.inverts_meaning() && u_fidelity < profile.negation_fidelity {
        agrees = !agrees;
    }
    if key.label_order == LabelOrder::Inverted && u_position < profile.label_order_sensitivity {
        agrees = !agrees;
    }
    let label = if agrees {
        &instance.labels.positive
    } else {
        &instance.labels.negative
    };
    phrase(phrasing, label)
}

fn phrase(pattern: &str, label: &str) -> String {
    let mut capitalized = label.to_string();
    if let Some(first) = capitalized.get_mut(..1) {
        first.make_ascii_uppercase();
    }
    pattern.replace("{C}", &capitalized).replace("{}", label)
}

/// [`Backend`] adapter around a resolved profile.
#[derive(Debug, Clone)]
pub struct SyntheticRespondent {
    profile: SyntheticProfile,
}

impl SyntheticRespondent {
    pub fn new(profile: SyntheticProfile) -> Result<Self, ProfileError> {
        profile.validate()?;
        Ok(SyntheticRespondent { profile })
    }

    pub fn profile(&self) -> &SyntheticProfile {
        &self.profile
    }
}

impl Backend for SyntheticRespondent {
    fn source(&self) -> Source {
        Source::Synthetic
    }

    fn generate(
        &self,
        instance: &PromptInstance,
        sample_index: u32,
        _params: &DecodingParams,
    ) -> Result<String, ClientError> {
        Ok(synth_respond(&self.profile, instance, sample_index))
    }
}
