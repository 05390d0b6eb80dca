use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::query::ResultSet;
use crate::warehouse::{Document, Warehouse};

/// Scores are compared after dividing by the profile's total weight and
/// rounding to this many steps, so rescaling every weight by the same
/// positive factor cannot reorder documents through floating-point noise.
const SCORE_RESOLUTION: f64 = (1u64 << 24) as f64;

/// Aggregated preferences of one identity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub identity: String,
    pub topic_weights: BTreeMap<String, f64>,
    pub attribute_usage: BTreeMap<String, u64>,
    pub recommended_history: BTreeSet<String>,
    /// Free-form tags from the identity's decisional problems; not used for
    /// scoring.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub cognitive_styles: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub personality_traits: BTreeSet<String>,
}

impl Profile {
    pub fn empty(identity: impl Into<String>) -> Self {
        Self {
            identity: identity.into(),
            ..Default::default()
        }
    }

    /// Sum of topic weights over the document's topics.
    pub fn score(&self, doc: &Document) -> f64 {
        doc.topics
            .iter()
            .filter_map(|t| self.topic_weights.get(t))
            .sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.topic_weights.values().sum()
    }

    /// Every topic weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Profile {
        let mut out = self.clone();
        out.topic_weights.values_mut().for_each(|w| *w *= factor);
        out
    }

    /// Integer ranking key: higher ranks first, equal keys are ties.
    pub fn rank_key(&self, doc: &Document) -> i64 {
        rank_key(self.score(doc), self.total_weight())
    }
}

pub(crate) fn rank_key(score: f64, total: f64) -> i64 {
    if total <= 0.0 || !total.is_finite() {
        return 0;
    }
    (score / total * SCORE_RESOLUTION).round() as i64
}

/// Stable reordering of `results` by descending profile score. Unknown doc ids
/// score zero. The output is always a permutation of the input.
pub fn personalize(results: &ResultSet, profile: &Profile, warehouse: &Warehouse) -> ResultSet {
    let total = profile.total_weight();
    let mut keyed: Vec<(i64, &String)> = results
        .doc_ids
        .iter()
        .map(|id| {
            let key = warehouse
                .get(id)
                .map_or(0, |doc| rank_key(profile.score(doc), total));
            (key, id)
        })
        .collect();
    keyed.sort_by_key(|(key, _)| Reverse(*key));
    ResultSet {
        doc_ids: keyed.into_iter().map(|(_, id)| id.clone()).collect(),
        total: results.total,
        origin_query: results.origin_query.clone(),
    }
}
