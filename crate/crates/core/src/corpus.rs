//! Evaluation corpus: policy statements with their variants, policy-domain
//! annotations, and the party answer keys the model is compared against.
//!
//! A corpus is loaded from a single JSON document with two top-level arrays,
//! `statements` and `parties`. Loading validates every structural invariant
//! and resolves every cross-reference, so the rest of the crate can treat a
//! [`Corpus`] as trusted and immutable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Errors produced while loading or validating a corpus.
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed corpus document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("statement {id}: paraphrase count must be 3, found {found}")]
    ParaphraseCount { id: String, found: usize },
    #[error("statement {id}: empty text in {variant}")]
    EmptyText { id: String, variant: VariantKind },
    #[error("statement {id}: duplicate text shared by {first} and {second}")]
    DuplicateText {
        id: String,
        first: VariantKind,
        second: VariantKind,
    },
    #[error("statement {id}: domain {domain} annotated more than once")]
    DuplicateDomain { id: String, domain: PolicyDomain },
    #[error("statement {id}: polarity must be -1 or +1, found {found}")]
    Polarity { id: String, found: i64 },
    #[error("duplicate statement id {0}")]
    DuplicateStatement(String),
    #[error("duplicate party id {0}")]
    DuplicateParty(String),
    #[error("party {id}: ideology score {score} outside [0, 10]")]
    IdeologyRange { id: String, score: f64 },
    #[error("party {party}: dangling reference to unknown statement {statement}")]
    DanglingReference { party: String, statement: String },
    #[error("party {party} ({party_country}): statement {statement} belongs to {statement_country}")]
    CountryMismatch {
        party: String,
        party_country: String,
        statement: String,
        statement_country: String,
    },
    #[error("country {country}: declared count {declared} but corpus holds {actual} statements")]
    CountMismatch {
        country: String,
        declared: usize,
        actual: usize,
    },
    #[error("ideology score {0} outside [0, 10]")]
    ScoreOutOfRange(f64),
}

/// One of the eight policy domains a statement can be annotated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyDomain {
    OpenForeignPolicy,
    LiberalEconomicPolicy,
    RestrictiveFinancialPolicy,
    LawAndOrder,
    RestrictiveMigrationPolicy,
    ExpandedEnvironmentProtection,
    ExpandedSocialWelfareState,
    LiberalSociety,
}

impl PolicyDomain {
    pub const ALL: [PolicyDomain; 8] = [
        PolicyDomain::OpenForeignPolicy,
        PolicyDomain::LiberalEconomicPolicy,
        PolicyDomain::RestrictiveFinancialPolicy,
        PolicyDomain::LawAndOrder,
        PolicyDomain::RestrictiveMigrationPolicy,
        PolicyDomain::ExpandedEnvironmentProtection,
        PolicyDomain::ExpandedSocialWelfareState,
        PolicyDomain::LiberalSociety,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyDomain::OpenForeignPolicy => "open_foreign_policy",
            PolicyDomain::LiberalEconomicPolicy => "liberal_economic_policy",
            PolicyDomain::RestrictiveFinancialPolicy => "restrictive_financial_policy",
            PolicyDomain::LawAndOrder => "law_and_order",
            PolicyDomain::RestrictiveMigrationPolicy => "restrictive_migration_policy",
            PolicyDomain::ExpandedEnvironmentProtection => "expanded_environment_protection",
            PolicyDomain::ExpandedSocialWelfareState => "expanded_social_welfare_state",
            PolicyDomain::LiberalSociety => "liberal_society",
        }
    }

    /// Human-readable axis label used in charts.
    pub fn title(self) -> &'static str {
        match self {
            PolicyDomain::OpenForeignPolicy => "Open foreign policy",
            PolicyDomain::LiberalEconomicPolicy => "Liberal economic policy",
            PolicyDomain::RestrictiveFinancialPolicy => "Restrictive financial policy",
            PolicyDomain::LawAndOrder => "Law and order",
            PolicyDomain::RestrictiveMigrationPolicy => "Restrictive migration policy",
            PolicyDomain::ExpandedEnvironmentProtection => "Expanded environment protection",
            PolicyDomain::ExpandedSocialWelfareState => "Expanded social welfare state",
            PolicyDomain::LiberalSociety => "Liberal society",
        }
    }
}

impl fmt::Display for PolicyDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A domain annotation. `polarity` is the value credited to the domain when
/// the respondent agrees with the statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainAnnotation {
    pub domain: PolicyDomain,
    pub polarity: i64,
}

/// Which of the six texts of a bundle a prompt embeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VariantKind {
    Original,
    /// Paraphrase number 1, 2 or 3.
    Paraphrase(u8),
    Negation,
    Opposite,
}

impl VariantKind {
    /// All six variants in their fixed expansion order.
    pub const ALL: [VariantKind; 6] = [
        VariantKind::Original,
        VariantKind::Paraphrase(1),
        VariantKind::Paraphrase(2),
        VariantKind::Paraphrase(3),
        VariantKind::Negation,
        VariantKind::Opposite,
    ];

    /// True for the two variants whose expected stance is the flip of the original's.
    pub fn inverts_meaning(self) -> bool {
        matches!(self, VariantKind::Negation | VariantKind::Opposite)
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariantKind::Original => f.write_str("original"),
            VariantKind::Paraphrase(i) => write!(f, "para{i}"),
            VariantKind::Negation => f.write_str("negation"),
            VariantKind::Opposite => f.write_str("opposite"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown variant kind {0:?}")]
pub struct UnknownVariant(pub String);

impl FromStr for VariantKind {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(VariantKind::Original),
            "para1" => Ok(VariantKind::Paraphrase(1)),
            "para2" => Ok(VariantKind::Paraphrase(2)),
            "para3" => Ok(VariantKind::Paraphrase(3)),
            "negation" => Ok(VariantKind::Negation),
            "opposite" => Ok(VariantKind::Opposite),
            other => Err(UnknownVariant(other.to_string())),
        }
    }
}

impl Serialize for VariantKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VariantKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One policy statement together with its three paraphrases, its negation and
/// its semantic opposite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementBundle {
    pub id: String,
    pub country: String,
    pub text: String,
    pub paraphrases: Vec<String>,
    pub negation: String,
    pub opposite: String,
    #[serde(default)]
    pub domain_annotations: Vec<DomainAnnotation>,
}

impl StatementBundle {
    /// The text of one variant, or `None` for a paraphrase index outside 1..=3.
    pub fn variant_text(&self, variant: VariantKind) -> Option<&str> {
        match variant {
            VariantKind::Original => Some(&self.text),
            VariantKind::Paraphrase(i) if (1..=3).contains(&i) => {
                self.paraphrases.get(usize::from(i) - 1).map(String::as_str)
            }
            VariantKind::Paraphrase(_) => None,
            VariantKind::Negation => Some(&self.negation),
            VariantKind::Opposite => Some(&self.opposite),
        }
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.paraphrases.len() != 3 {
            return Err(CorpusError::ParaphraseCount {
                id: self.id.clone(),
                found: self.paraphrases.len(),
            });
        }
        let texts = expand_variants(self);
        for (variant, text) in &texts {
            if text.trim().is_empty() {
                return Err(CorpusError::EmptyText {
                    id: self.id.clone(),
                    variant: *variant,
                });
            }
        }
        for (i, (first, a)) in texts.iter().enumerate() {
            if let Some((second, _)) = texts[i + 1..].iter().find(|(_, b)| b == a) {
                return Err(CorpusError::DuplicateText {
                    id: self.id.clone(),
                    first: *first,
                    second: *second,
                });
            }
        }
        let mut seen = BTreeSet::new();
        for ann in &self.domain_annotations {
            if ann.polarity != 1 && ann.polarity != -1 {
                return Err(CorpusError::Polarity {
                    id: self.id.clone(),
                    found: ann.polarity,
                });
            }
            if !seen.insert(ann.domain) {
                return Err(CorpusError::DuplicateDomain {
                    id: self.id.clone(),
                    domain: ann.domain,
                });
            }
        }
        Ok(())
    }
}

/// Expand a bundle into its six texts, in the fixed order original,
/// paraphrases 1 to 3, negation, opposite.
pub fn expand_variants(bundle: &StatementBundle) -> Vec<(VariantKind, String)> {
    VariantKind::ALL
        .iter()
        .filter_map(|&v| bundle.variant_text(v).map(|t| (v, t.to_string())))
        .collect()
}

/// A party's simplified answer to one statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartyAnswer {
    Agree,
    Disagree,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Leaning {
    Left,
    Center,
    Right,
}

impl Leaning {
    pub const ALL: [Leaning; 3] = [Leaning::Left, Leaning::Center, Leaning::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Leaning::Left => "left",
            Leaning::Center => "center",
            Leaning::Right => "right",
        }
    }
}

impl fmt::Display for Leaning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classify a left–right ideology score: below 4 is left, 4 to 6 inclusive is
/// center, above 6 is right.
pub fn leaning_of(score: f64) -> Result<Leaning, CorpusError> {
    if !(0.0..=10.0).contains(&score) {
        return Err(CorpusError::ScoreOutOfRange(score));
    }
    Ok(if score < 4.0 {
        Leaning::Left
    } else if score <= 6.0 {
        Leaning::Center
    } else {
        Leaning::Right
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyRecord {
    pub id: String,
    pub name: String,
    pub country: String,
    pub ideology_score: f64,
    #[serde(default)]
    pub answers: BTreeMap<String, PartyAnswer>,
}

impl PartyRecord {
    /// Leaning group of this party. Valid after corpus validation.
    pub fn leaning(&self) -> Leaning {
        leaning_of(self.ideology_score).expect("ideology score validated at load")
    }
}

#[derive(Debug, Deserialize)]
struct CorpusDocument {
    statements: Vec<StatementBundle>,
    #[serde(default)]
    parties: Vec<PartyRecord>,
    /// Optional declared per-country statement counts, checked against the bundles.
    #[serde(default)]
    country_counts: Option<BTreeMap<String, usize>>,
}

/// A validated corpus. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corpus {
    statements: Vec<StatementBundle>,
    parties: Vec<PartyRecord>,
    country_counts: BTreeMap<String, usize>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl Corpus {
    /// Validate and index statements and parties.
    pub fn new(
        statements: Vec<StatementBundle>,
        parties: Vec<PartyRecord>,
    ) -> Result<Self, CorpusError> {
        Self::build(statements, parties, None)
    }

    fn build(
        statements: Vec<StatementBundle>,
        parties: Vec<PartyRecord>,
        declared: Option<BTreeMap<String, usize>>,
    ) -> Result<Self, CorpusError> {
        let mut index = BTreeMap::new();
        let mut country_counts: BTreeMap<String, usize> = BTreeMap::new();
        for (i, bundle) in statements.iter().enumerate() {
            bundle.validate()?;
            if index.insert(bundle.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateStatement(bundle.id.clone()));
            }
            *country_counts.entry(bundle.country.clone()).or_default() += 1;
        }
        if let Some(declared) = declared {
            for (country, &n) in &declared {
                let actual = country_counts.get(country).copied().unwrap_or(0);
                if actual != n {
                    return Err(CorpusError::CountMismatch {
                        country: country.clone(),
                        declared: n,
                        actual,
                    });
                }
            }
            for (country, &actual) in &country_counts {
                if !declared.contains_key(country) {
                    return Err(CorpusError::CountMismatch {
                        country: country.clone(),
                        declared: 0,
                        actual,
                    });
                }
            }
        }

        let mut party_ids = BTreeSet::new();
        for party in &parties {
            if !party_ids.insert(party.id.as_str()) {
                return Err(CorpusError::DuplicateParty(party.id.clone()));
            }
            if !(0.0..=10.0).contains(&party.ideology_score) {
                return Err(CorpusError::IdeologyRange {
                    id: party.id.clone(),
                    score: party.ideology_score,
                });
            }
            for statement in party.answers.keys() {
                let Some(&i) = index.get(statement) else {
                    return Err(CorpusError::DanglingReference {
                        party: party.id.clone(),
                        statement: statement.clone(),
                    });
                };
                if statements[i].country != party.country {
                    return Err(CorpusError::CountryMismatch {
                        party: party.id.clone(),
                        party_country: party.country.clone(),
                        statement: statement.clone(),
                        statement_country: statements[i].country.clone(),
                    });
                }
            }
        }

        Ok(Corpus {
            statements,
            parties,
            country_counts,
            index,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let doc: CorpusDocument = serde_json::from_str(text)?;
        Self::build(doc.statements, doc.parties, doc.country_counts)
    }

    pub fn statements(&self) -> &[StatementBundle] {
        &self.statements
    }

    pub fn parties(&self) -> &[PartyRecord] {
        &self.parties
    }

    pub fn statement(&self, id: &str) -> Option<&StatementBundle> {
        self.index.get(id).map(|&i| &self.statements[i])
    }

    pub fn party(&self, id: &str) -> Option<&PartyRecord> {
        self.parties.iter().find(|p| p.id == id)
    }

    pub fn country_counts(&self) -> &BTreeMap<String, usize> {
        &self.country_counts
    }

    /// Number of statements for a country; zero for unknown countries.
    pub fn country_count(&self, country: &str) -> usize {
        self.country_counts.get(country).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }
}

/// Read and validate a corpus file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Corpus::from_json(&text)
}
