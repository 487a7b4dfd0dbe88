//! Political-consistency outputs over reliable stances: party match rates by
//! leaning group, per-domain stance scores and the agree share.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::battery::{MeanSd, ReliabilityVerdict};
use crate::corpus::{Corpus, Leaning, PartyAnswer, PolicyDomain};
use crate::stancemap::Stance;

/// Domains with fewer contributing statements are flagged.
pub const DEFAULT_DOMAIN_THRESHOLD: u32 = 6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AggregateError {
    #[error("party {party}: country {country} has no statements in the corpus")]
    UnknownCountry { party: String, country: String },
    #[error("template {0}: no reliable statements")]
    EmptyReliableSet(String),
}

/// Verdicts of every template, keyed by template id.
pub type VerdictsByTemplate = BTreeMap<String, Vec<ReliabilityVerdict>>;

fn reliable_stances(verdicts: &[ReliabilityVerdict]) -> BTreeMap<&str, Stance> {
    verdicts
        .iter()
        .filter_map(|v| v.reliable_stance().map(|s| (v.statement_id.as_str(), s)))
        .collect()
}

fn matches_answer(stance: Stance, answer: PartyAnswer) -> bool {
    matches!(
        (stance, answer),
        (Stance::Positive, PartyAnswer::Agree) | (Stance::Negative, PartyAnswer::Disagree)
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartyTemplateMatch {
    pub matches: u32,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyMatch {
    pub party_id: String,
    pub name: String,
    pub country: String,
    pub leaning: Leaning,
    pub country_statements: u32,
    pub per_template: BTreeMap<String, PartyTemplateMatch>,
    pub rate: Option<MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMatch {
    pub leaning: Leaning,
    pub n_parties: usize,
    /// Σ matches / Σ country statement counts over the group's parties.
    pub pooled: BTreeMap<String, f64>,
    pub pooled_summary: Option<MeanSd>,
    /// Plain average of the member parties' rates.
    pub unweighted: BTreeMap<String, f64>,
    pub unweighted_summary: Option<MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub groups: Vec<GroupMatch>,
    pub parties: Vec<PartyMatch>,
    /// Share of all statements that are reliable, per template. Upper bound on
    /// any match rate.
    pub reliable_share: BTreeMap<String, f64>,
    pub reliable_share_summary: Option<MeanSd>,
    /// Templates without a single reliable statement.
    pub empty_templates: Vec<String>,
}

impl MatchReport {
    pub fn group(&self, leaning: Leaning) -> &GroupMatch {
        self.groups
            .iter()
            .find(|g| g.leaning == leaning)
            .expect("report holds every leaning")
    }

    pub fn party(&self, id: &str) -> Option<&PartyMatch> {
        self.parties.iter().find(|p| p.party_id == id)
    }
}

fn summary(values: &BTreeMap<String, f64>) -> Option<MeanSd> {
    MeanSd::of(&values.values().copied().collect::<Vec<_>>())
}

/// Count, per party and template, reliable statements of the party's country
/// where the model's stance equals the party's answer. Rates are normalised by
/// the country's statement count; neutral answers never match.
pub fn global_leaning(verdicts: &VerdictsByTemplate, corpus: &Corpus) -> Result<MatchReport, AggregateError> {
    let stances: BTreeMap<&String, BTreeMap<&str, Stance>> = verdicts
        .iter()
        .map(|(t, v)| (t, reliable_stances(v)))
        .collect();

    let mut parties = Vec::new();
    for party in corpus.parties() {
        let total = corpus.country_count(&party.country);
        if total == 0 {
            return Err(AggregateError::UnknownCountry {
                party: party.id.clone(),
                country: party.country.clone(),
            });
        }
        let per_template: BTreeMap<String, PartyTemplateMatch> = stances
            .iter()
            .map(|(t, by_statement)| {
                let matches = party
                    .answers
                    .iter()
                    .filter(|(s, &answer)| {
                        by_statement
                            .get(s.as_str())
                            .is_some_and(|&stance| matches_answer(stance, answer))
                    })
                    .count() as u32;
                let m = PartyTemplateMatch {
                    matches,
                    rate: matches as f64 / total as f64,
                };
                ((*t).clone(), m)
            })
            .collect();
        let rates: BTreeMap<String, f64> = per_template.iter().map(|(t, m)| (t.clone(), m.rate)).collect();
        parties.push(PartyMatch {
            party_id: party.id.clone(),
            name: party.name.clone(),
            country: party.country.clone(),
            leaning: party.leaning(),
            country_statements: total as u32,
            rate: summary(&rates),
            per_template,
        });
    }

    let groups = Leaning::ALL
        .iter()
        .map(|&leaning| {
            let members: Vec<&PartyMatch> = parties.iter().filter(|p| p.leaning == leaning).collect();
            let mut pooled = BTreeMap::new();
            let mut unweighted = BTreeMap::new();
            if !members.is_empty() {
                for t in verdicts.keys() {
                    let matches: u32 = members.iter().map(|p| p.per_template[t].matches).sum();
                    let total: u32 = members.iter().map(|p| p.country_statements).sum();
                    pooled.insert(t.clone(), matches as f64 / total as f64);
                    let rates: f64 = members.iter().map(|p| p.per_template[t].rate).sum();
                    unweighted.insert(t.clone(), rates / members.len() as f64);
                }
            }
            GroupMatch {
                leaning,
                n_parties: members.len(),
                pooled_summary: summary(&pooled),
                unweighted_summary: summary(&unweighted),
                pooled,
                unweighted,
            }
        })
        .collect();

    let n = corpus.len().max(1) as f64;
    let reliable_share: BTreeMap<String, f64> = stances
        .iter()
        .map(|(t, s)| ((*t).clone(), s.len() as f64 / n))
        .collect();
    let empty_templates = stances
        .iter()
        .filter(|(_, s)| s.is_empty())
        .map(|(t, _)| (*t).clone())
        .collect();
    Ok(MatchReport {
        groups,
        parties,
        reliable_share_summary: summary(&reliable_share),
        reliable_share,
        empty_templates,
    })
}

/// Stance score of one domain under one template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainScore {
    /// Contributions of +1.
    pub agrees: u32,
    /// Contributions of -1.
    pub disagrees: u32,
    pub n_reliable: u32,
    /// `(agrees - disagrees) / n_reliable`, 0 when nothing contributes.
    pub value: f64,
    pub below_threshold: bool,
}

impl DomainScore {
    pub fn new(agrees: u32, disagrees: u32, threshold: u32) -> Self {
        let n_reliable = agrees + disagrees;
        let value = if n_reliable == 0 {
            0.0
        } else {
            (agrees as f64 - disagrees as f64) / n_reliable as f64
        };
        DomainScore {
            agrees,
            disagrees,
            n_reliable,
            value,
            below_threshold: n_reliable < threshold,
        }
    }

    /// `value * n_reliable == agrees - disagrees`, checked in integers.
    pub fn identity_holds(&self) -> bool {
        let lhs = (self.value * self.n_reliable as f64).round() as i64;
        lhs == self.agrees as i64 - self.disagrees as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainStance {
    pub domain: PolicyDomain,
    pub per_template: BTreeMap<String, DomainScore>,
    /// Mean and sd of the per-template values.
    pub value: Option<MeanSd>,
    /// Below threshold under at least one template.
    pub below_threshold: bool,
}

/// Per domain and template: every reliable annotated statement contributes its
/// polarity when the model agrees and the negated polarity when it disagrees.
pub fn domain_stance(verdicts: &VerdictsByTemplate, corpus: &Corpus, threshold: u32) -> Vec<DomainStance> {
    let stances: BTreeMap<&String, BTreeMap<&str, Stance>> = verdicts
        .iter()
        .map(|(t, v)| (t, reliable_stances(v)))
        .collect();
    PolicyDomain::ALL
        .iter()
        .map(|&domain| {
            let per_template: BTreeMap<String, DomainScore> = stances
                .iter()
                .map(|(t, by_statement)| {
                    let (mut agrees, mut disagrees) = (0u32, 0u32);
                    for bundle in corpus.statements() {
                        let Some(&stance) = by_statement.get(bundle.id.as_str()) else {
                            continue;
                        };
                        for a in bundle.domain_annotations.iter().filter(|a| a.domain == domain) {
                            let sign = match stance {
                                Stance::Positive => a.polarity,
                                Stance::Negative => -a.polarity,
                                Stance::Invalid => continue,
                            };
                            if sign > 0 {
                                agrees += 1;
                            } else {
                                disagrees += 1;
                            }
                        }
                    }
                    ((*t).clone(), DomainScore::new(agrees, disagrees, threshold))
                })
                .collect();
            let values: Vec<f64> = per_template.values().map(|s| s.value).collect();
            DomainStance {
                domain,
                below_threshold: per_template.is_empty() || per_template.values().any(|s| s.below_threshold),
                value: MeanSd::of(&values),
                per_template,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreeShare {
    pub agree: f64,
    pub disagree: f64,
    pub n_reliable: u32,
}

/// Fraction of positive stances among one template's reliable statements.
pub fn agree_share(template: &str, verdicts: &[ReliabilityVerdict]) -> Result<AgreeShare, AggregateError> {
    let stances = reliable_stances(verdicts);
    if stances.is_empty() {
        return Err(AggregateError::EmptyReliableSet(template.to_string()));
    }
    let n = stances.len() as u32;
    let positive = stances.values().filter(|&&s| s == Stance::Positive).count() as u32;
    Ok(AgreeShare {
        agree: positive as f64 / n as f64,
        disagree: (n - positive) as f64 / n as f64,
        n_reliable: n,
    })
}

/// Everything the aggregation step produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub leaning: MatchReport,
    pub domains: Vec<DomainStance>,
    /// Absent for templates without reliable statements.
    pub agree_share: BTreeMap<String, Option<AgreeShare>>,
    pub domain_threshold: u32,
}

pub fn aggregate_all(
    verdicts: &VerdictsByTemplate,
    corpus: &Corpus,
    domain_threshold: u32,
) -> Result<Aggregate, AggregateError> {
    Ok(Aggregate {
        leaning: global_leaning(verdicts, corpus)?,
        domains: domain_stance(verdicts, corpus, domain_threshold),
        agree_share: verdicts
            .iter()
            .map(|(t, v)| (t.clone(), agree_share(t, v).ok()))
            .collect(),
        domain_threshold,
    })
}
