use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::warehouse::is_legal_attribute_name;

/// Right-hand side of a term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TermValue {
    /// Unquoted value: equality match (substring on `title`).
    Exact(String),
    /// Quoted value: substring match on any attribute.
    Phrase(String),
}

impl TermValue {
    pub fn text(&self) -> &str {
        match self {
            TermValue::Exact(s) | TermValue::Phrase(s) => s,
        }
    }
}

/// Parsed Boolean request.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QueryExpr {
    Term { attribute: String, value: TermValue },
    And(Box<QueryExpr>, Box<QueryExpr>),
    Or(Box<QueryExpr>, Box<QueryExpr>),
    Not(Box<QueryExpr>),
}

pub(crate) fn is_bare_value_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '(' | ')' | '"')
}

impl QueryExpr {
    pub fn term(attribute: impl Into<String>, value: impl Into<String>) -> Self {
        QueryExpr::Term {
            attribute: attribute.into(),
            value: TermValue::Exact(value.into()),
        }
    }

    pub fn phrase(attribute: impl Into<String>, value: impl Into<String>) -> Self {
        QueryExpr::Term {
            attribute: attribute.into(),
            value: TermValue::Phrase(value.into()),
        }
    }

    pub fn and(self, other: QueryExpr) -> Self {
        QueryExpr::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: QueryExpr) -> Self {
        QueryExpr::Or(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        QueryExpr::Not(Box::new(self))
    }

    pub fn depth(&self) -> usize {
        match self {
            QueryExpr::Term { .. } => 1,
            QueryExpr::Not(c) => 1 + c.depth(),
            QueryExpr::And(l, r) | QueryExpr::Or(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Attribute names referenced by terms, as written.
    pub fn attributes(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_attributes(&mut out);
        out
    }

    fn collect_attributes<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            QueryExpr::Term { attribute, .. } => {
                out.insert(attribute.as_str());
            }
            QueryExpr::Not(c) => c.collect_attributes(out),
            QueryExpr::And(l, r) | QueryExpr::Or(l, r) => {
                l.collect_attributes(out);
                r.collect_attributes(out);
            }
        }
    }

    /// Checks what the parser guarantees, for trees built by hand.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            QueryExpr::Term { attribute, value } => {
                if !is_legal_attribute_name(attribute) {
                    return Err(format!("illegal attribute name {attribute:?}"));
                }
                if value.text().is_empty() {
                    return Err(format!("empty value for {attribute}"));
                }
                if let TermValue::Exact(v) = value {
                    if !v.chars().all(is_bare_value_char) {
                        return Err(format!("unquoted value {v:?} contains reserved characters"));
                    }
                }
                Ok(())
            }
            QueryExpr::Not(c) => c.validate(),
            QueryExpr::And(l, r) | QueryExpr::Or(l, r) => {
                l.validate()?;
                r.validate()
            }
        }
    }
}

/// Canonical, fully parenthesized form; parsing it yields the same tree.
impl fmt::Display for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryExpr::Term { attribute, value: TermValue::Exact(v) } => write!(f, "{attribute}:{v}"),
            QueryExpr::Term { attribute, value: TermValue::Phrase(v) } => {
                write!(f, "{attribute}:\"")?;
                for c in v.chars() {
                    if matches!(c, '"' | '\\') {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("\"")
            }
            QueryExpr::And(l, r) => write!(f, "({l} AND {r})"),
            QueryExpr::Or(l, r) => write!(f, "({l} OR {r})"),
            QueryExpr::Not(c) => write!(f, "NOT {c}"),
        }
    }
}

impl Serialize for QueryExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QueryExpr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        super::parse_query(&text).map_err(serde::de::Error::custom)
    }
}
