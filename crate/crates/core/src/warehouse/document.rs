use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Core document fields, in schema order.
pub const CORE_FIELDS: [&str; 6] = ["doc_id", "title", "authors", "year", "pub_type", "topics"];

/// Fields that may carry several values per document.
pub const MULTI_VALUED_FIELDS: [&str; 2] = ["authors", "topics"];

/// Bucket label for documents without a value on a grouping attribute.
pub const MISSING_VALUE: &str = "(missing)";

pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2100;

/// Bibliographic nomenclature of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PubType {
    JournalArticle,
    ConferencePaper,
    BookChapter,
    Thesis,
    Report,
    Other,
}

impl PubType {
    pub const ALL: [PubType; 6] = [
        PubType::JournalArticle,
        PubType::ConferencePaper,
        PubType::BookChapter,
        PubType::Thesis,
        PubType::Report,
        PubType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PubType::JournalArticle => "journal-article",
            PubType::ConferencePaper => "conference-paper",
            PubType::BookChapter => "book-chapter",
            PubType::Thesis => "thesis",
            PubType::Report => "report",
            PubType::Other => "other",
        }
    }
}

impl fmt::Display for PubType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown pub_type: {0}")]
pub struct UnknownPubType(pub String);

impl FromStr for PubType {
    type Err = UnknownPubType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = s
            .trim()
            .chars()
            .map(|c| match c {
                '_' | ' ' => '-',
                c => c.to_ascii_lowercase(),
            })
            .collect();
        PubType::ALL
            .into_iter()
            .find(|t| t.as_str() == folded)
            .ok_or_else(|| UnknownPubType(s.to_string()))
    }
}

/// One bibliographic record stored in the warehouse.
///
/// `attrs` holds every non-core attribute. A missing value is an absent key,
/// never an empty string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub authors: Vec<String>,
    pub year: i32,
    pub pub_type: PubType,
    pub topics: BTreeSet<String>,
    pub attrs: BTreeMap<String, String>,
}

impl Document {
    /// All values the document carries for `attribute` (canonical or alias
    /// name). Empty when the value is missing.
    pub fn values(&self, attribute: &str) -> Vec<Cow<'_, str>> {
        match resolve_alias(attribute) {
            "doc_id" => vec![Cow::Borrowed(self.doc_id.as_str())],
            "title" => vec![Cow::Borrowed(self.title.as_str())],
            "authors" => self.authors.iter().map(|a| Cow::Borrowed(a.as_str())).collect(),
            "year" => vec![Cow::Owned(self.year.to_string())],
            "pub_type" => vec![Cow::Borrowed(self.pub_type.as_str())],
            "topics" => self.topics.iter().map(|t| Cow::Borrowed(t.as_str())).collect(),
            other => self
                .attrs
                .get(other)
                .map(|v| vec![Cow::Borrowed(v.as_str())])
                .unwrap_or_default(),
        }
    }

    pub fn has_value(&self, attribute: &str) -> bool {
        match resolve_alias(attribute) {
            "authors" => !self.authors.is_empty(),
            "topics" => !self.topics.is_empty(),
            a if is_core_field(a) => true,
            other => self.attrs.contains_key(other),
        }
    }

    /// Names of every attribute this document has a value for.
    pub fn attribute_names(&self) -> impl Iterator<Item = &str> + '_ {
        CORE_FIELDS
            .iter()
            .copied()
            .filter(|f| self.has_value(f))
            .chain(self.attrs.keys().map(String::as_str))
    }

    /// Distinct values used when grouping by `attribute`, or the single
    /// missing bucket when the document has none.
    pub fn group_values(&self, attribute: &str) -> Vec<String> {
        let mut values: Vec<String> = Vec::new();
        for v in self.values(attribute) {
            if !values.iter().any(|seen| *seen == v) {
                values.push(v.into_owned());
            }
        }
        if values.is_empty() {
            values.push(MISSING_VALUE.to_string());
        }
        values
    }

    /// Duplicate-detection key: lowercased, whitespace-collapsed title plus year.
    pub fn dedup_key(&self) -> (String, i32) {
        (dedup_title(&self.title), self.year)
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        if self.doc_id.trim().is_empty() {
            return Err("doc_id must be non-empty".into());
        }
        if self.title.trim().is_empty() {
            return Err("title must be non-empty".into());
        }
        if self.authors.is_empty() || self.authors.iter().any(|a| a.trim().is_empty()) {
            return Err("authors must be non-empty".into());
        }
        if !(MIN_YEAR..=MAX_YEAR).contains(&self.year) {
            return Err(format!("year out of range {MIN_YEAR}..{MAX_YEAR}: {}", self.year));
        }
        for name in self.attrs.keys() {
            if !is_legal_attribute_name(name) || is_core_field(name) {
                return Err(format!("illegal attribute name: {name:?}"));
            }
        }
        if self.attrs.values().any(|v| v.is_empty()) {
            return Err("attribute values must be non-empty".into());
        }
        Ok(())
    }
}

pub fn dedup_title(title: &str) -> String {
    title
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn is_core_field(name: &str) -> bool {
    CORE_FIELDS.contains(&name)
}

pub fn is_multi_valued(name: &str) -> bool {
    MULTI_VALUED_FIELDS.contains(&resolve_alias(name))
}

/// Maps the singular query spellings onto the stored field names.
pub fn resolve_alias(name: &str) -> &str {
    match name {
        "author" => "authors",
        "topic" => "topics",
        other => other,
    }
}

/// Lowercases, trims and ASCII-folds an attribute name ("EQUIPE", " Équipe "
/// and "equipe" are one attribute).
pub fn normalize_attribute_name(raw: &str) -> String {
    deunicode::deunicode(raw.trim()).trim().to_ascii_lowercase()
}

/// Normalized name with aliases resolved.
pub fn canonical_attribute(raw: &str) -> String {
    let normalized = normalize_attribute_name(raw);
    resolve_alias(&normalized).to_string()
}

/// `[a-z_][a-z0-9_.-]*` on an already normalized name.
pub fn is_legal_attribute_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '_' | '.' | '-'))
}
