//! Boolean requests, faceted exploration and classification over a
//! warehouse snapshot.
//!
//! Evaluation is set-valued: a request yields the matching documents in the
//! default order (year descending, doc_id ascending) and nothing is scored.

mod ast;
mod eval;
mod explore;
mod parser;

pub use ast::{QueryExpr, TermValue};
pub use eval::{evaluate_query, matching_set, ordered_ids, ResultSet};
pub use explore::{classify, explore, path_query, ClassificationSpec, ExplorationView, FacetCount};
pub use parser::{parse_query, SyntaxError};

pub(crate) use explore::cartesian;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("invalid classification: {0}")]
    InvalidClassification(String),
}

/// Parses and evaluates in one step; the result remembers the text as given.
pub fn run_query(warehouse: &crate::warehouse::Warehouse, text: &str) -> Result<ResultSet, SyntaxError> {
    let query = parse_query(text)?;
    let mut result = evaluate_query(warehouse, &query);
    result.origin_query = text.to_string();
    Ok(result)
}
