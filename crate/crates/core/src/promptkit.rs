//! Prompt templates, label-order inversion, rendering and job enumeration.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, StatementBundle, VariantKind};
use crate::text::{find_word_spans, Span};

/// Marker replaced by the statement text when a template is rendered.
pub const PLACEHOLDER: &str = "{statement}";

const DEFAULT_TEMPLATES: &str = include_str!("../templates/default.json");

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("cannot read template registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed template registry: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("template {id}: body must contain exactly one {PLACEHOLDER} placeholder, found {found}")]
    Placeholder { id: String, found: usize },
    #[error("template {id}: labels must be non-empty and distinct ignoring case")]
    Labels { id: String },
    #[error("template {id}: label {label:?} must appear exactly once as a word in the body, found {found}")]
    LabelMention { id: String, label: String, found: usize },
    #[error("duplicate template id {0}")]
    DuplicateId(String),
    #[error("template registry is empty")]
    Empty,
    #[error("statement {statement} has no variant {variant}")]
    UnknownVariant {
        statement: String,
        variant: VariantKind,
    },
    #[error("no template statistics to screen")]
    EmptyStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateStyle {
    Personal,
    Impersonal,
}

/// The two answer options of a template. `positive` is the option that
/// expresses support for the statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelPair {
    pub positive: String,
    pub negative: String,
}

impl LabelPair {
    pub fn new(positive: impl Into<String>, negative: impl Into<String>) -> Self {
        LabelPair {
            positive: positive.into(),
            negative: negative.into(),
        }
    }

    pub fn swapped(&self) -> Self {
        LabelPair::new(self.negative.clone(), self.positive.clone())
    }

    /// Synonym pairs supported out of the box.
    pub fn builtin() -> [LabelPair; 4] {
        [
            LabelPair::new("agree", "disagree"),
            LabelPair::new("beneficial", "harmful"),
            LabelPair::new("favorable", "detrimental"),
            LabelPair::new("support", "oppose"),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub style: TemplateStyle,
    pub body: String,
    pub labels: LabelPair,
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<(), TemplateError> {
        let found = self.body.matches(PLACEHOLDER).count();
        if found != 1 {
            return Err(TemplateError::Placeholder {
                id: self.id.clone(),
                found,
            });
        }
        let (p, n) = (self.labels.positive.trim(), self.labels.negative.trim());
        if p.is_empty() || n.is_empty() || p.eq_ignore_ascii_case(n) {
            return Err(TemplateError::Labels { id: self.id.clone() });
        }
        for label in [&self.labels.positive, &self.labels.negative] {
            let found = find_word_spans(&self.body, label).len();
            if found != 1 {
                return Err(TemplateError::LabelMention {
                    id: self.id.clone(),
                    label: label.clone(),
                    found,
                });
            }
        }
        Ok(())
    }

    fn label_spans(&self) -> Result<(Span, Span), TemplateError> {
        self.validate()?;
        let pos = find_word_spans(&self.body, &self.labels.positive)[0];
        let neg = find_word_spans(&self.body, &self.labels.negative)[0];
        Ok((pos, neg))
    }

    /// Which label is mentioned first in the body.
    pub fn first_label(&self) -> Result<&str, TemplateError> {
        let (pos, neg) = self.label_spans()?;
        Ok(if pos.start < neg.start {
            &self.labels.positive
        } else {
            &self.labels.negative
        })
    }

    /// The instruction part of the body with the placeholder removed.
    pub fn instruction(&self) -> String {
        self.body.replacen(PLACEHOLDER, "", 1).trim().to_string()
    }
}

/// Swap the positions of the two label mentions in the body. The label pair
/// itself (which option is positive) is unchanged, and applying the
/// operation twice restores the original body.
pub fn invert_label_order(template: &PromptTemplate) -> Result<PromptTemplate, TemplateError> {
    let (pos, neg) = template.label_spans()?;
    let (first, second) = if pos.start < neg.start { (pos, neg) } else { (neg, pos) };
    let body = &template.body;
    let mut out = String::with_capacity(body.len());
    out.push_str(&body[..first.start]);
    out.push_str(&body[second.start..second.end]);
    out.push_str(&body[first.end..second.start]);
    out.push_str(&body[first.start..first.end]);
    out.push_str(&body[second.end..]);
    Ok(PromptTemplate {
        body: out,
        ..template.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelOrder {
    Canonical,
    Inverted,
}

impl LabelOrder {
    pub const BOTH: [LabelOrder; 2] = [LabelOrder::Canonical, LabelOrder::Inverted];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelOrder::Canonical => "canonical",
            LabelOrder::Inverted => "inverted",
        }
    }
}

impl fmt::Display for LabelOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity of one rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PromptKey {
    pub template_id: String,
    pub label_order: LabelOrder,
    pub statement_id: String,
    pub variant: VariantKind,
}

impl fmt::Display for PromptKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}",
            self.template_id, self.label_order, self.statement_id, self.variant
        )
    }
}

/// A fully rendered model input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub key: PromptKey,
    pub labels: LabelPair,
    /// The template body (in the requested label order) with the statement substituted.
    pub rendered_text: String,
    /// The instruction alone, sent as the system message.
    pub instruction: String,
    /// The statement alone, sent as the user message.
    pub statement: String,
}

impl PromptInstance {
    /// The label mentioned first in the rendered prompt.
    pub fn first_label(&self) -> &str {
        let p = find_word_spans(&self.instruction, &self.labels.positive);
        let n = find_word_spans(&self.instruction, &self.labels.negative);
        match (p.first(), n.first()) {
            (Some(p), Some(n)) if n.start < p.start => &self.labels.negative,
            _ => &self.labels.positive,
        }
    }
}

/// Render one variant of a bundle into a template in the given label order.
pub fn render_prompt(
    template: &PromptTemplate,
    order: LabelOrder,
    bundle: &StatementBundle,
    variant: VariantKind,
) -> Result<PromptInstance, TemplateError> {
    let text = bundle
        .variant_text(variant)
        .ok_or_else(|| TemplateError::UnknownVariant {
            statement: bundle.id.clone(),
            variant,
        })?;
    let ordered = match order {
        LabelOrder::Canonical => {
            template.validate()?;
            template.clone()
        }
        LabelOrder::Inverted => invert_label_order(template)?,
    };
    Ok(PromptInstance {
        key: PromptKey {
            template_id: template.id.clone(),
            label_order: order,
            statement_id: bundle.id.clone(),
            variant,
        },
        labels: template.labels.clone(),
        rendered_text: ordered.body.replacen(PLACEHOLDER, text, 1),
        instruction: ordered.instruction(),
        statement: text.to_string(),
    })
}

#[derive(Debug, Deserialize)]
struct RegistryDocument {
    templates: Vec<PromptTemplate>,
}

/// Parse and validate a template registry document.
pub fn parse_templates(text: &str) -> Result<Vec<PromptTemplate>, TemplateError> {
    let doc: RegistryDocument = serde_json::from_str(text)?;
    if doc.templates.is_empty() {
        return Err(TemplateError::Empty);
    }
    let mut ids = BTreeSet::new();
    for t in &doc.templates {
        t.validate()?;
        if !ids.insert(t.id.as_str()) {
            return Err(TemplateError::DuplicateId(t.id.clone()));
        }
    }
    Ok(doc.templates)
}

pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<PromptTemplate>, TemplateError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_templates(&text)
}

/// The six shipped templates: three personal, three impersonal.
pub fn default_templates() -> Vec<PromptTemplate> {
    parse_templates(DEFAULT_TEMPLATES).expect("shipped template registry is valid")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub instance: PromptInstance,
    pub samples_required: u32,
}

/// Every prompt instance of an evaluation run.
#[derive(Debug, Clone, Default)]
pub struct JobSet {
    jobs: Vec<Job>,
}

impl JobSet {
    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Job> {
        self.jobs.iter()
    }

    /// Total number of responses needed to complete the set.
    pub fn total_samples(&self) -> u64 {
        self.jobs.iter().map(|j| u64::from(j.samples_required)).sum()
    }
}

impl<'a> IntoIterator for &'a JobSet {
    type Item = &'a Job;
    type IntoIter = std::slice::Iter<'a, Job>;

    fn into_iter(self) -> Self::IntoIter {
        self.jobs.iter()
    }
}

/// Cross every statement variant with every template in both label orders.
/// Ordered by template, label order, statement, variant.
pub fn enumerate_jobs(
    corpus: &Corpus,
    templates: &[PromptTemplate],
    samples: u32,
) -> Result<JobSet, TemplateError> {
    let mut jobs = Vec::with_capacity(corpus.len() * 6 * templates.len() * 2);
    for template in templates {
        for order in LabelOrder::BOTH {
            for bundle in corpus.statements() {
                for variant in VariantKind::ALL {
                    jobs.push(Job {
                        instance: render_prompt(template, order, bundle, variant)?,
                        samples_required: samples,
                    });
                }
            }
        }
    }
    Ok(JobSet { jobs })
}

/// Per-template count of responses that could be mapped to a stance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateStats {
    pub template_id: String,
    pub style: TemplateStyle,
    pub mappable: u64,
    pub total: u64,
}

/// Rank templates by mappable-response count, descending; ties by id.
pub fn screen_templates(stats: &[TemplateStats]) -> Result<Vec<TemplateStats>, TemplateError> {
    if stats.is_empty() {
        return Err(TemplateError::EmptyStats);
    }
    let mut ranked = stats.to_vec();
    ranked.sort_by(|a, b| {
        b.mappable
            .cmp(&a.mappable)
            .then_with(|| a.template_id.cmp(&b.template_id))
    });
    Ok(ranked)
}

/// Keep the `per_style` best-ranked templates of each style, preserving rank order.
pub fn select_per_style(ranked: &[TemplateStats], per_style: usize) -> Vec<String> {
    let mut taken = std::collections::BTreeMap::<TemplateStyle, usize>::new();
    ranked
        .iter()
        .filter(|s| {
            let n = taken.entry(s.style).or_default();
            *n += 1;
            *n <= per_style
        })
        .map(|s| s.template_id.clone())
        .collect()
}
