use serde::{Deserialize, Serialize};

use super::ast::{QueryExpr, TermValue};
use crate::warehouse::{resolve_alias, DocSet, Warehouse};

/// Documents returned by a request or an exploration step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultSet {
    pub doc_ids: Vec<String>,
    pub total: usize,
    pub origin_query: String,
}

impl ResultSet {
    pub fn new(doc_ids: Vec<String>, origin_query: impl Into<String>) -> Self {
        Self {
            total: doc_ids.len(),
            doc_ids,
            origin_query: origin_query.into(),
        }
    }
}

/// Set-algebra evaluation over the warehouse's inverted index.
pub fn matching_set(warehouse: &Warehouse, query: &QueryExpr) -> DocSet {
    let index = warehouse.index();
    match query {
        QueryExpr::Term { attribute, value } => {
            let attr = resolve_alias(attribute);
            match value {
                TermValue::Phrase(v) => index.containing(attr, v),
                TermValue::Exact(v) if attr == "title" => index.containing(attr, v),
                TermValue::Exact(v) => index.exact(attr, v),
            }
        }
        QueryExpr::And(l, r) => {
            let mut set = matching_set(warehouse, l);
            if !set.is_empty() {
                set.intersect_with(&matching_set(warehouse, r));
            }
            set
        }
        QueryExpr::Or(l, r) => {
            let mut set = matching_set(warehouse, l);
            set.union_with(&matching_set(warehouse, r));
            set
        }
        QueryExpr::Not(c) => {
            let mut set = matching_set(warehouse, c);
            set.complement();
            set
        }
    }
}

/// Doc ids of `set` in the default order (year descending, doc_id ascending).
pub fn ordered_ids(warehouse: &Warehouse, set: &DocSet) -> Vec<String> {
    warehouse
        .default_order()
        .iter()
        .filter(|&&pos| set.contains(pos))
        .map(|&pos| warehouse.documents()[pos].doc_id.clone())
        .collect()
}

pub fn evaluate_query(warehouse: &Warehouse, query: &QueryExpr) -> ResultSet {
    let set = matching_set(warehouse, query);
    ResultSet::new(ordered_ids(warehouse, &set), query.to_string())
}
