use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::document::{
    canonical_attribute, is_core_field, is_legal_attribute_name, Document, PubType,
};
use super::WarehouseError;

/// Conjunctive admission filter applied to every incoming record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionFilter {
    pub required_fields: BTreeSet<String>,
    /// Empty means every type is accepted.
    pub accepted_pub_types: BTreeSet<PubType>,
    pub year_range: Option<(i32, i32)>,
}

impl SelectionFilter {
    pub fn permissive() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), WarehouseError> {
        if let Some((min, max)) = self.year_range {
            if min > max {
                return Err(WarehouseError::InvalidFilter(format!(
                    "year range {min}..{max} has min > max"
                )));
            }
        }
        for field in &self.required_fields {
            if !is_legal_attribute_name(&canonical_attribute(field)) {
                return Err(WarehouseError::InvalidFilter(format!(
                    "illegal required field name: {field:?}"
                )));
            }
        }
        Ok(())
    }

    fn admit(&self, doc: &Document) -> Result<(), String> {
        if !self.accepted_pub_types.is_empty() && !self.accepted_pub_types.contains(&doc.pub_type) {
            return Err(format!("pub_type not accepted by filter: {}", doc.pub_type));
        }
        if let Some((min, max)) = self.year_range {
            if doc.year < min || doc.year > max {
                return Err(format!("year {} outside filter range {min}..{max}", doc.year));
            }
        }
        Ok(())
    }
}

/// Compact text form used on the command line:
/// `require=title,authors;types=report,thesis;years=2000..2005`.
impl FromStr for SelectionFilter {
    type Err = WarehouseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut filter = SelectionFilter::default();
        for clause in s.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let (key, value) = clause.split_once('=').ok_or_else(|| {
                WarehouseError::InvalidFilter(format!("expected key=value, got {clause:?}"))
            })?;
            let items = value.split(',').map(str::trim).filter(|v| !v.is_empty());
            match key.trim() {
                "require" | "required" => {
                    filter.required_fields.extend(items.map(canonical_attribute))
                }
                "types" | "pub_types" => {
                    for item in items {
                        let t = item
                            .parse::<PubType>()
                            .map_err(|e| WarehouseError::InvalidFilter(e.to_string()))?;
                        filter.accepted_pub_types.insert(t);
                    }
                }
                "years" => {
                    let (lo, hi) = value.split_once("..").ok_or_else(|| {
                        WarehouseError::InvalidFilter(format!("expected min..max, got {value:?}"))
                    })?;
                    let parse = |y: &str| {
                        y.trim().parse::<i32>().map_err(|_| {
                            WarehouseError::InvalidFilter(format!("invalid year bound {y:?}"))
                        })
                    };
                    filter.year_range = Some((parse(lo)?, parse(hi)?));
                }
                other => {
                    return Err(WarehouseError::InvalidFilter(format!(
                        "unknown filter clause {other:?}"
                    )))
                }
            }
        }
        filter.validate()?;
        Ok(filter)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line number in the source stream.
    pub line: usize,
    pub reason: String,
}

/// Attribute conflict met while merging a duplicate; the first-seen value is kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeConflict {
    pub doc_id: String,
    pub attribute: String,
    pub kept: String,
    pub discarded: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
    pub merged_duplicates: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflicts: Vec<MergeConflict>,
}

impl IngestReport {
    /// Every input record lands in exactly one bucket.
    pub fn total(&self) -> usize {
        self.accepted + self.rejected.len() + self.merged_duplicates
    }
}

/// A record that passed parsing and the filter's required-field check but has
/// not yet been checked against the document invariants.
pub(crate) fn parse_record(
    line: &str,
    filter: &SelectionFilter,
) -> Result<Document, String> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    let Value::Object(object) = value else {
        return Err("malformed record: expected a JSON object".into());
    };

    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    let mut lists: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (raw_key, raw_value) in object {
        let key = canonical_attribute(&raw_key);
        if !is_legal_attribute_name(&key) {
            return Err(format!("malformed record: illegal attribute name {raw_key:?}"));
        }
        if fields.contains_key(&key) || lists.contains_key(&key) {
            return Err(format!("malformed record: field {key} given twice"));
        }
        match raw_value {
            Value::Null => {}
            Value::String(s) => {
                let s = s.trim();
                if !s.is_empty() {
                    fields.insert(key, s.to_string());
                }
            }
            Value::Number(n) => {
                fields.insert(key, n.to_string());
            }
            Value::Bool(b) => {
                fields.insert(key, b.to_string());
            }
            Value::Array(items) if key == "authors" || key == "topics" => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::String(s) if s.contains(';') => {
                            return Err(format!("malformed record: {key} element contains ';'"));
                        }
                        Value::String(s) => out.push(s),
                        _ => {
                            return Err(format!("malformed record: {key} must hold strings"));
                        }
                    }
                }
                lists.insert(key, out);
            }
            _ => return Err(format!("malformed record: unsupported value for {key}")),
        }
    }

    let split = |key: &str, fields: &mut BTreeMap<String, String>, lists: &mut BTreeMap<String, Vec<String>>| {
        let raw = match (lists.remove(key), fields.remove(key)) {
            (Some(list), _) => list,
            (None, Some(joined)) => joined.split(';').map(str::to_string).collect(),
            (None, None) => Vec::new(),
        };
        raw.into_iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
    };
    let authors = split("authors", &mut fields, &mut lists);
    let topics: BTreeSet<String> = split("topics", &mut fields, &mut lists)
        .into_iter()
        .map(|t| t.to_lowercase())
        .collect();

    for required in &filter.required_fields {
        let required = canonical_attribute(required);
        let present = match required.as_str() {
            "authors" => !authors.is_empty(),
            "topics" => !topics.is_empty(),
            other => fields.contains_key(other),
        };
        if !present {
            return Err(format!("missing required field: {required}"));
        }
    }

    let doc_id = fields.remove("doc_id").ok_or("invalid record: missing doc_id")?;
    let title = fields.remove("title").ok_or("invalid record: missing title")?;
    let year_text = fields.remove("year").ok_or("invalid record: missing year")?;
    let year = year_text
        .parse::<i32>()
        .map_err(|_| format!("invalid record: year is not an integer: {year_text:?}"))?;
    let pub_type = match fields.remove("pub_type") {
        Some(raw) => raw.parse::<PubType>().map_err(|e| format!("invalid record: {e}"))?,
        None => PubType::Other,
    };
    debug_assert!(fields.keys().all(|k| !is_core_field(k)));

    let doc = Document {
        doc_id,
        title,
        authors,
        year,
        pub_type,
        topics,
        attrs: fields,
    };
    doc.check_invariants().map_err(|e| format!("invalid record: {e}"))?;
    filter.admit(&doc)?;
    Ok(doc)
}

/// Reads one line of the ingestion encoding back into a document, with no
/// filter applied.
pub fn from_record(line: &str) -> Result<Document, String> {
    parse_record(line, &SelectionFilter::permissive())
}

/// Flat record in the ingestion encoding, the inverse of `from_record`.
pub fn to_record(doc: &Document) -> serde_json::Map<String, Value> {
    let mut map = serde_json::Map::new();
    map.insert("doc_id".into(), Value::String(doc.doc_id.clone()));
    map.insert("title".into(), Value::String(doc.title.clone()));
    map.insert("authors".into(), Value::String(doc.authors.join(";")));
    map.insert("year".into(), Value::from(doc.year));
    map.insert("pub_type".into(), Value::String(doc.pub_type.as_str().into()));
    let topics: Vec<&str> = doc.topics.iter().map(String::as_str).collect();
    map.insert("topics".into(), Value::String(topics.join(";")));
    for (k, v) in &doc.attrs {
        map.insert(k.clone(), Value::String(v.clone()));
    }
    map
}
