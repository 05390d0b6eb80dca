use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::document::{canonical_attribute, is_core_field, is_legal_attribute_name};
use super::{Warehouse, WarehouseError};

/// An external lookup table (staff directory, HR export, ...) used to fill a
/// missing attribute by joining on a document field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichmentSource {
    pub name: String,
    pub join_attr: String,
    pub target_attr: String,
    /// Keys are lowercased and trimmed.
    pub records: BTreeMap<String, String>,
}

fn normalize_key(key: &str) -> String {
    key.trim().to_lowercase()
}

impl EnrichmentSource {
    pub fn new(
        name: impl Into<String>,
        join_attr: &str,
        target_attr: &str,
        records: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, WarehouseError> {
        let join_attr = canonical_attribute(join_attr);
        let target_attr = canonical_attribute(target_attr);
        if !is_legal_attribute_name(&join_attr) {
            return Err(WarehouseError::InvalidSource(format!("illegal join attribute {join_attr:?}")));
        }
        if !is_legal_attribute_name(&target_attr) {
            return Err(WarehouseError::InvalidSource(format!(
                "illegal target attribute {target_attr:?}"
            )));
        }
        if is_core_field(&target_attr) {
            return Err(WarehouseError::InvalidSource(format!(
                "target attribute {target_attr} is a core field"
            )));
        }
        let mut normalized = BTreeMap::new();
        for (key, value) in records {
            let key = normalize_key(&key);
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                continue;
            }
            normalized.entry(key).or_insert(value);
        }
        Ok(Self {
            name: name.into(),
            join_attr,
            target_attr,
            records: normalized,
        })
    }

    /// Two-column `join_key,value` CSV with a one-line header.
    pub fn from_csv<R: Read>(
        name: impl Into<String>,
        join_attr: &str,
        target_attr: &str,
        reader: R,
    ) -> Result<Self, WarehouseError> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = Vec::new();
        for (i, row) in csv.records().enumerate() {
            let row = row.map_err(|e| WarehouseError::InvalidSource(format!("csv: {e}")))?;
            if row.len() != 2 {
                return Err(WarehouseError::InvalidSource(format!(
                    "csv row {} has {} columns, expected 2",
                    i + 2,
                    row.len()
                )));
            }
            records.push((row[0].to_string(), row[1].to_string()));
        }
        Self::new(name, join_attr, target_attr, records)
    }
}

/// A multi-author document whose authors map to different values; the first
/// matching author's value was used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamDisagreement {
    pub doc_id: String,
    pub chosen: String,
    pub others: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichReport {
    pub docs_updated: usize,
    /// Source values that contributed to updated documents; exceeds
    /// `docs_updated` when several authors of one document matched.
    pub values_written: usize,
    /// Source keys that matched no document, sorted.
    pub unmatched_keys: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disagreements: Vec<TeamDisagreement>,
}

impl Warehouse {
    /// Fills `target_attr` on documents that lack it. Existing values are
    /// never touched, so a second run reports no updates.
    pub fn enrich(&mut self, source: &EnrichmentSource) -> EnrichReport {
        let mut report = EnrichReport::default();
        if source.records.is_empty() {
            return report;
        }
        let mut matched_keys: BTreeSet<&str> = BTreeSet::new();
        for doc in self.docs_mut() {
            let matches: Vec<(&str, &String)> = doc
                .values(&source.join_attr)
                .iter()
                .filter_map(|v| source.records.get_key_value(&normalize_key(v)))
                .map(|(k, v)| (k.as_str(), v))
                .collect();
            matched_keys.extend(matches.iter().map(|(k, _)| *k));
            if matches.is_empty() || doc.attrs.contains_key(&source.target_attr) {
                continue;
            }
            let chosen = matches[0].1.clone();
            let others: Vec<String> = matches
                .iter()
                .map(|(_, v)| (*v).clone())
                .filter(|v| *v != chosen)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if !others.is_empty() {
                log::warn!(
                    "{}: authors disagree on {} ({} vs {:?}); using first author's",
                    doc.doc_id,
                    source.target_attr,
                    chosen,
                    others
                );
                report.disagreements.push(TeamDisagreement {
                    doc_id: doc.doc_id.clone(),
                    chosen: chosen.clone(),
                    others,
                });
            }
            doc.attrs.insert(source.target_attr.clone(), chosen);
            report.docs_updated += 1;
            report.values_written += matches.len();
        }
        report.unmatched_keys = source
            .records
            .keys()
            .filter(|k| !matched_keys.contains(k.as_str()))
            .cloned()
            .collect();
        if report.docs_updated > 0 {
            self.touch();
        }
        report
    }
}
