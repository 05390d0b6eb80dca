use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ast::QueryExpr;
use super::eval::{matching_set, ordered_ids};
use super::QueryError;
use crate::warehouse::{canonical_attribute, is_legal_attribute_name, DocSet, Warehouse};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetCount {
    pub value: String,
    pub count: usize,
}

/// One node of hypertext-style navigation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationView {
    pub path: Vec<(String, String)>,
    /// Per attribute, values sorted by descending count then value.
    pub facets: BTreeMap<String, Vec<FacetCount>>,
    pub documents: Vec<String>,
}

impl ExplorationView {
    pub fn facet(&self, attribute: &str) -> Option<&[FacetCount]> {
        self.facets.get(attribute).map(Vec::as_slice)
    }

    pub fn facet_count(&self, attribute: &str, value: &str) -> usize {
        self.facet(attribute)
            .and_then(|f| f.iter().find(|c| c.value == value))
            .map_or(0, |c| c.count)
    }
}

/// The conjunction of exact terms equivalent to an exploration path.
pub fn path_query(path: &[(String, String)]) -> Option<QueryExpr> {
    path.iter()
        .map(|(a, v)| QueryExpr::term(canonical_attribute(a), v.clone()))
        .reduce(QueryExpr::and)
}

fn path_set(warehouse: &Warehouse, path: &[(String, String)]) -> DocSet {
    match path_query(path) {
        Some(q) => matching_set(warehouse, &q),
        None => DocSet::full(warehouse.len()),
    }
}

pub fn explore(warehouse: &Warehouse, path: &[(String, String)]) -> ExplorationView {
    let set = path_set(warehouse, path);
    let fixed: BTreeSet<String> = path.iter().map(|(a, _)| canonical_attribute(a)).collect();

    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for pos in set.iter() {
        let doc = &warehouse.documents()[pos];
        for attr in doc.attribute_names() {
            if fixed.contains(attr) {
                continue;
            }
            let per_value = counts.entry(attr.to_string()).or_default();
            let mut seen = BTreeSet::new();
            for value in doc.values(attr) {
                if seen.insert(value.clone()) {
                    *per_value.entry(value.into_owned()).or_default() += 1;
                }
            }
        }
    }
    let facets = counts
        .into_iter()
        .map(|(attr, values)| {
            let mut list: Vec<FacetCount> = values
                .into_iter()
                .map(|(value, count)| FacetCount { value, count })
                .collect();
            list.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.value.cmp(&b.value)));
            (attr, list)
        })
        .collect();

    ExplorationView {
        path: path.to_vec(),
        facets,
        documents: ordered_ids(warehouse, &set),
    }
}

/// Attributes to classify by plus an optional constraint applied first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationSpec {
    pub axes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<QueryExpr>,
}

impl ClassificationSpec {
    pub fn new(axes: impl IntoIterator<Item = impl AsRef<str>>, constraints: Option<QueryExpr>) -> Self {
        Self {
            axes: axes.into_iter().map(|a| a.as_ref().to_string()).collect(),
            constraints,
        }
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if self.axes.is_empty() {
            return Err(QueryError::InvalidClassification("at least one axis is required".into()));
        }
        let mut seen = BTreeSet::new();
        for axis in &self.axes {
            let name = canonical_attribute(axis);
            if !is_legal_attribute_name(&name) {
                return Err(QueryError::InvalidClassification(format!("illegal axis {axis:?}")));
            }
            if !seen.insert(name) {
                return Err(QueryError::InvalidClassification(format!("axis repeated: {axis}")));
            }
        }
        if let Some(c) = &self.constraints {
            c.validate().map_err(QueryError::InvalidClassification)?;
        }
        Ok(())
    }

    /// Attribute names the classification touches (axes and constraint terms).
    pub fn attributes(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.axes.iter().cloned().collect();
        if let Some(c) = &self.constraints {
            out.extend(c.attributes().into_iter().map(str::to_string));
        }
        out
    }
}

/// Groups the constrained documents by axis values. A document lands in every
/// cell its (possibly multi-valued) attributes qualify it for; documents with
/// no value on an axis go to the missing bucket.
pub fn classify(
    warehouse: &Warehouse,
    spec: &ClassificationSpec,
) -> Result<BTreeMap<Vec<String>, Vec<String>>, QueryError> {
    spec.validate()?;
    let set = match &spec.constraints {
        Some(c) => matching_set(warehouse, c),
        None => DocSet::full(warehouse.len()),
    };
    let axes: Vec<String> = spec.axes.iter().map(|a| canonical_attribute(a)).collect();
    let mut cells: BTreeMap<Vec<String>, Vec<String>> = BTreeMap::new();
    for &pos in warehouse.default_order() {
        if !set.contains(pos) {
            continue;
        }
        let doc = &warehouse.documents()[pos];
        for key in cartesian(axes.iter().map(|a| doc.group_values(a)).collect()) {
            cells.entry(key).or_default().push(doc.doc_id.clone());
        }
    }
    Ok(cells)
}

/// Every combination picking one value per axis.
pub(crate) fn cartesian(per_axis: Vec<Vec<String>>) -> Vec<Vec<String>> {
    per_axis.into_iter().fold(vec![Vec::new()], |acc, values| {
        acc.iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut key = prefix.clone();
                    key.push(v.clone());
                    key
                })
            })
            .collect()
    })
}
