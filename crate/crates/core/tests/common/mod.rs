#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;

use serde_json::json;
use stancebench::battery::{evaluate_all, BatteryConfig, Evaluation};
use stancebench::corpus::{Corpus, StatementBundle};
use stancebench::modelio::{
    run_jobs, Client, DecodingParams, ResponseStore, RunOptions, SyntheticProfile, SyntheticRespondent,
};
use stancebench::promptkit::{default_templates, enumerate_jobs, PromptTemplate};
use stancebench::stancemap::Stance;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_stancebench"))
}

pub fn bundle(id: &str, country: &str) -> StatementBundle {
    StatementBundle {
        id: id.to_string(),
        country: country.to_string(),
        text: format!("Policy {id} should be adopted."),
        paraphrases: vec![
            format!("Policy {id} ought to be adopted."),
            format!("Adopting policy {id} is the right course."),
            format!("The state should put policy {id} into effect."),
        ],
        negation: format!("Policy {id} should not be adopted."),
        opposite: format!("Policy {id} should be rejected."),
        domain_annotations: vec![],
    }
}

/// Statement ids `<country>-<nnn>` for the given per-country counts.
pub fn generated_statements(counts: &[(&str, usize)]) -> Vec<StatementBundle> {
    counts
        .iter()
        .flat_map(|&(c, n)| (0..n).map(move |i| bundle(&format!("{c}-{i:03}"), c)))
        .collect()
}

pub fn generated_corpus(counts: &[(&str, usize)]) -> Corpus {
    Corpus::new(generated_statements(counts), vec![]).unwrap()
}

pub fn corpus_json(counts: &[(&str, usize)]) -> String {
    let statements = generated_statements(counts);
    let declared: BTreeMap<&str, usize> = counts.iter().copied().collect();
    serde_json::to_string_pretty(&json!({
        "country_counts": declared,
        "statements": statements,
    }))
    .unwrap()
}

/// Generate every response in memory with a synthetic respondent and run the battery.
pub fn simulate(
    corpus: &Corpus,
    templates: &[PromptTemplate],
    profile: SyntheticProfile,
    config: &BatteryConfig,
) -> Evaluation {
    let jobs = enumerate_jobs(corpus, templates, config.samples).unwrap();
    let client = Client::new(Box::new(SyntheticRespondent::new(profile).unwrap()));
    let store = Mutex::new(ResponseStore::in_memory());
    run_jobs(&jobs, &DecodingParams::default(), &client, &store, RunOptions::default()).unwrap();
    evaluate_all(&store.into_inner().unwrap(), corpus, templates, config).unwrap()
}

pub fn template(id: &str) -> PromptTemplate {
    default_templates().into_iter().find(|t| t.id == id).unwrap()
}

/// Cohen's kappa from first principles: observed agreement over the pairs and
/// chance agreement as the share of matching (a_i, b_j) over all n² cross pairs.
pub fn kappa_oracle(pairs: &[(Stance, Stance)]) -> f64 {
    let n = pairs.len() as f64;
    let p_o = pairs.iter().filter(|(a, b)| a == b).count() as f64 / n;
    let mut cross = 0usize;
    for (a, _) in pairs {
        for (_, b) in pairs {
            if a == b {
                cross += 1;
            }
        }
    }
    let p_e = cross as f64 / (n * n);
    if p_e == 1.0 {
        return if p_o == 1.0 { 1.0 } else { 0.0 };
    }
    (p_o - p_e) / (1.0 - p_e)
}

/// Nominal alpha from pairwise disagreements: within-unit pairs for the
/// observed disagreement, all pairs of pairable values for the expected one.
/// `None` when no unit has two ratings.
pub fn alpha_oracle(units: &[Vec<Option<u8>>]) -> Option<f64> {
    let pairable: Vec<Vec<u8>> = units
        .iter()
        .map(|u| u.iter().flatten().copied().collect::<Vec<_>>())
        .filter(|v| v.len() >= 2)
        .collect();
    if pairable.is_empty() {
        return None;
    }
    let pooled: Vec<u8> = pairable.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let mut d_o = 0.0;
    for values in &pairable {
        let m = values.len() as f64;
        let mut diff = 0usize;
        for i in 0..values.len() {
            for j in 0..values.len() {
                if i != j && values[i] != values[j] {
                    diff += 1;
                }
            }
        }
        d_o += diff as f64 / (m - 1.0);
    }
    d_o /= n;
    let mut diff = 0usize;
    for i in 0..pooled.len() {
        for j in 0..pooled.len() {
            if i != j && pooled[i] != pooled[j] {
                diff += 1;
            }
        }
    }
    let d_e = diff as f64 / (n * (n - 1.0));
    if d_e == 0.0 {
        return Some(1.0);
    }
    Some(1.0 - d_o / d_e)
}

/// Exact binomial CDF of `Bin(n, p)` at `k`.
pub fn binom_cdf(k: u32, n: u32, p: f64) -> f64 {
    let mut total = 0.0;
    let mut coef = 1.0f64;
    for i in 0..=n {
        if i > 0 {
            coef *= f64::from(n - i + 1) / f64::from(i);
        }
        if i <= k {
            total += coef * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32);
        }
    }
    total
}

/// Smallest k with `P(Bin(n, p) <= k) >= q`.
pub fn binom_quantile(q: f64, n: u32, p: f64) -> u32 {
    (0..=n).find(|&k| binom_cdf(k, n, p) >= q).unwrap_or(n)
}

pub fn hand_labelled() -> Vec<(String, String, String, Stance)> {
    let text = std::fs::read_to_string(fixture("mapping_validation.json")).unwrap();
    let items: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    items
        .into_iter()
        .map(|v| {
            let s = |k: &str| v[k].as_str().unwrap().to_string();
            let expected = match v["expected"].as_str().unwrap() {
                "positive" => Stance::Positive,
                "negative" => Stance::Negative,
                _ => Stance::Invalid,
            };
            (s("text"), s("positive"), s("negative"), expected)
        })
        .collect()
}
