//! The document warehouse: filtered ingestion, schema metadata, attribute-gap
//! detection and enrichment from external sources.
//!
//! Documents are kept in insertion order. Every mutation that changes stored
//! content bumps the snapshot id, which marts record to tie a build to the
//! warehouse state it was computed from.

mod document;
mod enrich;
mod gaps;
mod index;
mod ingest;

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

pub use document::{
    canonical_attribute, dedup_title, is_core_field, is_legal_attribute_name, is_multi_valued,
    normalize_attribute_name, resolve_alias, Document, PubType, UnknownPubType, CORE_FIELDS,
    MAX_YEAR, MIN_YEAR, MISSING_VALUE, MULTI_VALUED_FIELDS,
};
pub use enrich::{EnrichReport, EnrichmentSource, TeamDisagreement};
pub use gaps::{AttributeDescriptor, AttributeKind, GapEntry, GapKind, GapReport};
pub use index::{DocSet, ValueIndex};
pub use ingest::{from_record, to_record, IngestReport, MergeConflict, Rejection, SelectionFilter};

#[derive(Debug, thiserror::Error)]
pub enum WarehouseError {
    #[error("unreadable input: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid selection filter: {0}")]
    InvalidFilter(String),
    #[error("invalid enrichment source: {0}")]
    InvalidSource(String),
    #[error("invalid attribute declaration: {0}")]
    InvalidDeclaration(String),
    #[error("corrupt warehouse contents: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Default)]
pub struct Warehouse {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
    by_key: HashMap<(String, i32), usize>,
    declared: BTreeMap<String, AttributeKind>,
    snapshot_id: u64,
    index: ValueIndex,
    order: Vec<usize>,
}

impl Warehouse {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reassembles a warehouse from persisted parts, re-checking every
    /// invariant that ingestion would have enforced.
    pub fn from_parts(
        docs: Vec<Document>,
        declared: BTreeMap<String, AttributeKind>,
        snapshot_id: u64,
    ) -> Result<Self, WarehouseError> {
        let mut wh = Warehouse {
            declared,
            snapshot_id,
            ..Default::default()
        };
        for doc in docs {
            doc.check_invariants()
                .map_err(|e| WarehouseError::Corrupt(format!("{}: {e}", doc.doc_id)))?;
            if wh.by_id.contains_key(&doc.doc_id) {
                return Err(WarehouseError::Corrupt(format!("duplicate doc_id {}", doc.doc_id)));
            }
            if wh.by_key.contains_key(&doc.dedup_key()) {
                return Err(WarehouseError::Corrupt(format!(
                    "duplicate title/year for {}",
                    doc.doc_id
                )));
            }
            let pos = wh.docs.len();
            wh.by_id.insert(doc.doc_id.clone(), pos);
            wh.by_key.insert(doc.dedup_key(), pos);
            wh.docs.push(doc);
        }
        wh.reindex();
        Ok(wh)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn snapshot_id(&self) -> u64 {
        self.snapshot_id
    }

    /// Documents in insertion order.
    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&pos| &self.docs[pos])
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.by_id.contains_key(doc_id)
    }

    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.by_id.get(doc_id).copied()
    }

    pub fn declared_attributes(&self) -> &BTreeMap<String, AttributeKind> {
        &self.declared
    }

    pub fn index(&self) -> &ValueIndex {
        &self.index
    }

    /// Document positions in the default result order: year descending, then
    /// doc_id ascending.
    pub fn default_order(&self) -> &[usize] {
        &self.order
    }

    /// Registers an attribute name in the catalogue without giving any
    /// document a value for it.
    pub fn declare_attribute(&mut self, name: &str, kind: AttributeKind) -> Result<(), WarehouseError> {
        let name = canonical_attribute(name);
        if !is_legal_attribute_name(&name) {
            return Err(WarehouseError::InvalidDeclaration(format!("illegal attribute name {name:?}")));
        }
        if self.declared.get(&name) != Some(&kind) {
            self.declared.insert(name, kind);
            self.snapshot_id += 1;
        }
        Ok(())
    }

    /// Reads every line first: an unreadable stream aborts before anything is
    /// stored.
    pub fn ingest<R: BufRead>(
        &mut self,
        reader: R,
        filter: &SelectionFilter,
    ) -> Result<IngestReport, WarehouseError> {
        filter.validate()?;
        let lines = reader.lines().collect::<Result<Vec<_>, _>>()?;
        self.ingest_lines(lines.iter().map(String::as_str), filter)
    }

    /// Ingests already-decoded lines. Blank lines are not records and are
    /// skipped; line numbers in the report are 1-based physical positions.
    pub fn ingest_lines<'a>(
        &mut self,
        lines: impl IntoIterator<Item = &'a str>,
        filter: &SelectionFilter,
    ) -> Result<IngestReport, WarehouseError> {
        filter.validate()?;
        let mut report = IngestReport::default();
        let mut changed = false;
        for (i, line) in lines.into_iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let doc = match ingest::parse_record(line, filter) {
                Ok(doc) => doc,
                Err(reason) => {
                    report.rejected.push(Rejection { line: i + 1, reason });
                    continue;
                }
            };
            if let Some(&pos) = self.by_key.get(&doc.dedup_key()) {
                changed |= merge_into(&mut self.docs[pos], doc, &mut report.conflicts);
                report.merged_duplicates += 1;
            } else if self.by_id.contains_key(&doc.doc_id) {
                report.rejected.push(Rejection {
                    line: i + 1,
                    reason: format!("duplicate doc_id with a different title/year: {}", doc.doc_id),
                });
            } else {
                let pos = self.docs.len();
                self.by_id.insert(doc.doc_id.clone(), pos);
                self.by_key.insert(doc.dedup_key(), pos);
                self.docs.push(doc);
                report.accepted += 1;
                changed = true;
            }
        }
        if changed {
            self.touch();
        }
        Ok(report)
    }

    fn touch(&mut self) {
        self.snapshot_id += 1;
        self.reindex();
    }

    fn reindex(&mut self) {
        self.index = ValueIndex::build(&self.docs);
        let mut order: Vec<usize> = (0..self.docs.len()).collect();
        order.sort_by(|&a, &b| {
            let (da, db) = (&self.docs[a], &self.docs[b]);
            db.year.cmp(&da.year).then_with(|| da.doc_id.cmp(&db.doc_id))
        });
        self.order = order;
    }

    pub(crate) fn docs_mut(&mut self) -> &mut [Document] {
        &mut self.docs
    }
}

/// Union topics and attrs of `incoming` into `kept`; first-seen attribute
/// values win. Returns whether `kept` changed.
fn merge_into(kept: &mut Document, incoming: Document, conflicts: &mut Vec<MergeConflict>) -> bool {
    let before = (kept.topics.len(), kept.attrs.len());
    kept.topics.extend(incoming.topics);
    for (name, value) in incoming.attrs {
        match kept.attrs.get(&name) {
            None => {
                kept.attrs.insert(name, value);
            }
            Some(existing) if *existing != value => {
                log::warn!(
                    "merge conflict on {}.{}: keeping {:?}, discarding {:?}",
                    kept.doc_id,
                    name,
                    existing,
                    value
                );
                conflicts.push(MergeConflict {
                    doc_id: kept.doc_id.clone(),
                    attribute: name,
                    kept: existing.clone(),
                    discarded: value,
                });
            }
            Some(_) => {}
        }
    }
    before != (kept.topics.len(), kept.attrs.len())
}
