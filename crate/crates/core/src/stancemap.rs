//! Mapping free-text model answers onto a binary stance.
//!
//! The earliest mention of either option label decides the stance. A label
//! preceded (within the same clause) by a negation marker counts as the
//! opposite option, so "not favorable" reads as the negative answer. Answers
//! that mention neither label, or that match a refusal pattern, are invalid.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::promptkit::LabelPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Positive,
    Negative,
    Invalid,
}

impl Stance {
    pub fn flip(self) -> Stance {
        match self {
            Stance::Positive => Stance::Negative,
            Stance::Negative => Stance::Positive,
            Stance::Invalid => Stance::Invalid,
        }
    }

    pub fn is_valid(self) -> bool {
        self != Stance::Invalid
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stance::Positive => "positive",
            Stance::Negative => "negative",
            Stance::Invalid => "invalid",
        })
    }
}

/// Tunables of the mapping heuristic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapperConfig {
    /// Tokens that negate a following label. A marker starting with `n'`
    /// also matches as a suffix, so `n't` covers "don't" and "isn't".
    pub negation_markers: Vec<String>,
    /// How many preceding tokens are searched for a negation marker.
    pub negation_window: usize,
    /// Phrases that mark the whole answer as a refusal.
    pub refusal_patterns: Vec<String>,
}

impl Default for MapperConfig {
    fn default() -> Self {
        MapperConfig {
            negation_markers: ["not", "n't", "never", "no"].map(String::from).to_vec(),
            negation_window: 3,
            refusal_patterns: ["i cannot", "i don't have", "as an ai", "unable to"]
                .map(String::from)
                .to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Word(String),
    /// Clause punctuation; negation does not reach across it.
    Break,
}

fn normalize(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            '\u{2019}' | '\u{2018}' | '`' | '\u{00b4}' => '\'',
            c => c,
        })
        .collect::<String>()
        .to_lowercase()
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, tokens: &mut Vec<Token>| {
        let w = word.trim_matches('\'');
        if !w.is_empty() {
            tokens.push(Token::Word(w.to_string()));
        }
        word.clear();
    };
    for c in normalize(text).chars() {
        if c.is_alphanumeric() || c == '\'' {
            word.push(c);
        } else {
            flush(&mut word, &mut tokens);
            if matches!(c, '.' | ',' | ';' | ':' | '!' | '?' | '\n') {
                tokens.push(Token::Break);
            }
        }
    }
    flush(&mut word, &mut tokens);
    tokens
}

fn words(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter_map(|t| match t {
            Token::Word(w) => Some(w),
            Token::Break => None,
        })
        .collect()
}

const INFLECTIONS: [&str; 6] = ["", "s", "d", "ed", "ing", "ly"];

fn token_matches_label_end(token: &str, label_word: &str) -> bool {
    let normalized = token.replace("our", "or");
    let label = label_word.replace("our", "or");
    INFLECTIONS
        .iter()
        .any(|suffix| normalized.strip_prefix(label.as_str()) == Some(suffix))
}

struct LabelPattern {
    words: Vec<String>,
    stance: Stance,
}

impl LabelPattern {
    /// Length in tokens if the label starts at `tokens[i]`, and whether the
    /// match is the "un"-prefixed (negated) form.
    fn match_at(&self, tokens: &[Token], i: usize) -> Option<(usize, bool)> {
        let n = self.words.len();
        if i + n > tokens.len() {
            return None;
        }
        let mut negated = false;
        for (k, expected) in self.words.iter().enumerate() {
            let Token::Word(actual) = &tokens[i + k] else {
                return None;
            };
            let last = k + 1 == n;
            let exact = if last {
                token_matches_label_end(actual, expected)
            } else {
                actual == expected
            };
            if exact {
                continue;
            }
            let un = k == 0 && last && actual.strip_prefix("un").is_some_and(|rest| {
                token_matches_label_end(rest, expected)
            });
            if !un {
                return None;
            }
            negated = true;
        }
        Some((n, negated))
    }
}

fn is_negation_marker(token: &str, markers: &[String]) -> bool {
    markers.iter().any(|m| {
        let m = normalize(m);
        token == m || (m.starts_with("n'") && token.ends_with(&m))
    })
}

fn is_refusal(text: &str, patterns: &[String]) -> bool {
    let flat = words(text).join(" ");
    let padded = format!(" {flat} ");
    patterns.iter().any(|p| {
        let p = words(p).join(" ");
        !p.is_empty() && padded.contains(&format!(" {p} "))
    })
}

/// Map one answer to a stance under the given label pair.
pub fn map_response(text: &str, labels: &LabelPair, config: &MapperConfig) -> Stance {
    if is_refusal(text, &config.refusal_patterns) {
        return Stance::Invalid;
    }
    let mut patterns = vec![
        LabelPattern {
            words: words(&labels.positive),
            stance: Stance::Positive,
        },
        LabelPattern {
            words: words(&labels.negative),
            stance: Stance::Negative,
        },
    ];
    patterns.retain(|p| !p.words.is_empty());
    // Longest label first, so that a label containing the other never loses to it.
    patterns.sort_by_key(|p| std::cmp::Reverse((p.words.len(), p.words.concat().len())));

    let tokens = tokenize(text);
    for i in 0..tokens.len() {
        for pattern in &patterns {
            let Some((_, un_prefixed)) = pattern.match_at(&tokens, i) else {
                continue;
            };
            let mut stance = pattern.stance;
            if un_prefixed {
                stance = stance.flip();
            }
            if negated_before(&tokens, i, config) {
                stance = stance.flip();
            }
            return stance;
        }
    }
    Stance::Invalid
}

fn negated_before(tokens: &[Token], i: usize, config: &MapperConfig) -> bool {
    tokens[..i]
        .iter()
        .rev()
        .take(config.negation_window)
        .take_while(|t| **t != Token::Break)
        .any(|t| matches!(t, Token::Word(w) if is_negation_marker(w, &config.negation_markers)))
}
