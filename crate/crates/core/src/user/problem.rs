use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::warehouse::{canonical_attribute, Warehouse};

/// What the organisation stands to gain or lose.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stake {
    /// Environment object detected by the decision maker.
    pub object: String,
    /// Meaning the decision maker gives to the object.
    pub signal: String,
    /// Possible outcomes associated with the signal.
    pub hypotheses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndividualCharacteristics {
    pub cognitive_style: String,
    pub personality_traits: Vec<String>,
    pub identity: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentalParameters {
    pub global: String,
    pub immediate: String,
}

/// A decisional problem before it has been stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDefinition {
    pub stake: Stake,
    pub individual: IndividualCharacteristics,
    pub environment: EnvironmentalParameters,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionalProblem {
    pub problem_id: String,
    #[serde(flatten)]
    pub definition: ProblemDefinition,
}

impl DecisionalProblem {
    pub fn identity(&self) -> &str {
        &self.definition.individual.identity
    }
}

/// Information attributes a problem points at, plus the words the watcher
/// still has to resolve.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Translation {
    pub attributes_to_collect: Vec<String>,
    pub unmatched_terms: Vec<String>,
}

fn clean_token(raw: &str) -> String {
    raw.trim_matches(|c: char| c.is_ascii_punctuation() && c != '_' && c != '-')
        .to_lowercase()
}

/// Token-by-token match of the object and signal against schema attribute
/// names and known topic values.
pub fn translate(definition: &ProblemDefinition, warehouse: &Warehouse) -> Translation {
    let schema: BTreeSet<String> = warehouse.schema().into_iter().map(|d| d.name).collect();
    let topics: BTreeSet<&str> = warehouse
        .documents()
        .iter()
        .flat_map(|d| d.topics.iter().map(String::as_str))
        .collect();

    let mut out = Translation::default();
    let text = [&definition.stake.object, &definition.stake.signal];
    for token in text.iter().flat_map(|s| s.split_whitespace()).map(clean_token) {
        if token.is_empty() {
            continue;
        }
        let as_attribute = canonical_attribute(&token);
        let matched = if schema.contains(&as_attribute) {
            Some(as_attribute)
        } else if topics.contains(token.as_str()) {
            Some("topics".to_string())
        } else {
            None
        };
        match matched {
            Some(attr) => {
                if !out.attributes_to_collect.contains(&attr) {
                    out.attributes_to_collect.push(attr);
                }
            }
            None => {
                if !out.unmatched_terms.contains(&token) {
                    out.unmatched_terms.push(token);
                }
            }
        }
    }
    out
}
