use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::document::canonical_attribute;
use super::Warehouse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributeKind {
    DocumentAttribute,
    UserAttribute,
}

impl AttributeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttributeKind::DocumentAttribute => "document-attribute",
            AttributeKind::UserAttribute => "user-attribute",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDescriptor {
    pub name: String,
    pub kind: AttributeKind,
    /// Fraction of documents with a value, `present / total`.
    pub coverage: f64,
    pub present: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapKind {
    /// Unknown to the warehouse: no document carries it and it is not declared.
    AttributeMissing,
    /// Known, but some documents lack a value.
    ValuesMissing,
    /// Declared in the catalogue, yet no document carries it at all.
    BothMissing,
}

impl GapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GapKind::AttributeMissing => "attribute-missing",
            GapKind::ValuesMissing => "values-missing",
            GapKind::BothMissing => "both-missing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapEntry {
    pub attribute: String,
    pub gap_kind: GapKind,
    pub affected_docs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub entries: Vec<GapEntry>,
}

impl Warehouse {
    /// One descriptor per attribute present in some document or declared,
    /// sorted by name.
    pub fn schema(&self) -> Vec<AttributeDescriptor> {
        let mut present: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in self.documents() {
            for name in doc.attribute_names() {
                *present.entry(name).or_default() += 1;
            }
        }
        for name in self.declared_attributes().keys() {
            present.entry(name.as_str()).or_default();
        }
        let total = self.len();
        present
            .into_iter()
            .map(|(name, count)| AttributeDescriptor {
                name: name.to_string(),
                kind: self
                    .declared_attributes()
                    .get(name)
                    .copied()
                    .unwrap_or(AttributeKind::DocumentAttribute),
                coverage: if total == 0 { 0.0 } else { count as f64 / total as f64 },
                present: count,
                total,
            })
            .collect()
    }

    pub fn descriptor(&self, name: &str) -> Option<AttributeDescriptor> {
        let name = canonical_attribute(name);
        self.schema().into_iter().find(|d| d.name == name)
    }

    /// Whether `name` (alias or canonical) is part of the schema.
    pub fn knows_attribute(&self, name: &str) -> bool {
        let name = canonical_attribute(name);
        self.declared_attributes().contains_key(&name)
            || self.documents().iter().any(|d| d.has_value(&name))
    }

    /// Entries come out in attribute-name order; fully covered attributes are
    /// omitted.
    pub fn detect_gaps<S: AsRef<str>>(&self, required: &[S]) -> GapReport {
        let required: BTreeSet<String> =
            required.iter().map(|r| canonical_attribute(r.as_ref())).collect();
        let schema: BTreeMap<String, AttributeDescriptor> = self
            .schema()
            .into_iter()
            .map(|d| (d.name.clone(), d))
            .collect();
        let total = self.len();
        let entries = required
            .into_iter()
            .filter_map(|name| {
                let (gap_kind, affected_docs) = match schema.get(&name) {
                    None => (GapKind::AttributeMissing, total),
                    Some(d) if d.present == 0 && total > 0 => (GapKind::BothMissing, total),
                    Some(d) if d.present < d.total => (GapKind::ValuesMissing, d.total - d.present),
                    Some(_) => return None,
                };
                Some(GapEntry { attribute: name, gap_kind, affected_docs })
            })
            .collect();
        GapReport { entries }
    }
}
