//! Read-only multidimensional marts built from a warehouse snapshot.
//!
//! A mart counts documents (or viewing events) per tuple of dimension values.
//! Documents lacking a value on a dimension are counted in the `(missing)`
//! bucket, so for single-valued dimensions the cells always add up to the
//! number of constrained documents. Multi-valued dimensions (`authors`,
//! `topics`) count once per (document, value) pair.
//!
//! Each cell remembers which documents (or events) it counts, so rolling up
//! a multi-valued dimension counts a document once rather than once per
//! value.

mod access;
mod indicator;
mod recommend;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use access::{AccessEvent, AccessKind, AccessLog};
pub use indicator::{year_over_year, Indicator};
pub use recommend::select_recommendations;

use crate::query::{cartesian, matching_set, QueryExpr};
use crate::warehouse::{canonical_attribute, is_legal_attribute_name, DocSet, Warehouse, MISSING_VALUE};

/// Event fields usable as dimensions of an access-count mart.
pub const ACCESS_DIMENSIONS: [&str; 2] = ["identity", "access-year"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MartError {
    #[error("invalid mart spec: {0}")]
    InvalidSpec(String),
    #[error("attribute not in warehouse schema: {0}")]
    UnknownAttribute(String),
    #[error("dimension not in mart: {0}")]
    UnknownDimension(String),
    #[error("mart not found: {0}")]
    NotFound(String),
    #[error("invalid access event: {0}")]
    InvalidEvent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    DocCount,
    /// Counts `viewed` events; recommendations are system pushes, not demand.
    AccessCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Audience {
    ResearchStudent,
    Librarian,
    Leadership,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MartSpec {
    pub name: String,
    pub dimensions: Vec<String>,
    pub measure: Measure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<QueryExpr>,
    pub audience: Audience,
}

impl MartSpec {
    pub fn new(name: impl Into<String>, dimensions: &[&str], measure: Measure, audience: Audience) -> Self {
        Self {
            name: name.into(),
            dimensions: dimensions.iter().map(|d| d.to_string()).collect(),
            measure,
            constraint: None,
            audience,
        }
    }

    pub fn with_constraint(mut self, constraint: QueryExpr) -> Self {
        self.constraint = Some(constraint);
        self
    }

    /// Research students: who published what, by topic over the years.
    pub fn topic_evolution() -> Self {
        Self::new("topic-evolution", &["topics", "year"], Measure::DocCount, Audience::ResearchStudent)
    }

    /// Librarians: how each user's demand for documents evolves.
    pub fn demand_evolution() -> Self {
        Self::new("demand-evolution", &["identity", "access-year"], Measure::AccessCount, Audience::Librarian)
    }

    /// Leadership: publications per research team over the years.
    pub fn team_evolution() -> Self {
        Self::new("team-evolution", &["team", "year"], Measure::DocCount, Audience::Leadership)
    }

    pub fn builtins() -> [MartSpec; 3] {
        [Self::topic_evolution(), Self::demand_evolution(), Self::team_evolution()]
    }

    pub fn canonical_dimensions(&self) -> Vec<String> {
        self.dimensions.iter().map(|d| canonical_attribute(d)).collect()
    }

    pub fn validate(&self) -> Result<(), MartError> {
        if self.name.trim().is_empty() {
            return Err(MartError::InvalidSpec("name must be non-empty".into()));
        }
        if self.dimensions.is_empty() {
            return Err(MartError::InvalidSpec("at least one dimension is required".into()));
        }
        let mut seen = BTreeSet::new();
        for dim in self.canonical_dimensions() {
            if !is_legal_attribute_name(&dim) {
                return Err(MartError::InvalidSpec(format!("illegal dimension name {dim:?}")));
            }
            if !seen.insert(dim.clone()) {
                return Err(MartError::InvalidSpec(format!("dimension repeated: {dim}")));
            }
        }
        if let Some(c) = &self.constraint {
            c.validate().map_err(MartError::InvalidSpec)?;
        }
        Ok(())
    }
}

mod cell_list {
    use std::collections::{BTreeMap, BTreeSet};

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Members;

    #[derive(Serialize, Deserialize)]
    struct Cell {
        key: Vec<String>,
        value: u64,
        members: BTreeSet<String>,
    }

    pub fn serialize<S: Serializer>(cells: &Members, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(cells.iter().map(|(key, members)| Cell {
            key: key.clone(),
            value: members.len() as u64,
            members: members.clone(),
        }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Members, D::Error> {
        let mut out = BTreeMap::new();
        for c in Vec::<Cell>::deserialize(d)? {
            if c.value != c.members.len() as u64 {
                return Err(serde::de::Error::custom(format!(
                    "cell {:?} has value {} but {} members",
                    c.key,
                    c.value,
                    c.members.len()
                )));
            }
            out.insert(c.key, c.members);
        }
        Ok(out)
    }
}

/// Contributors per cell key: doc ids, or `event:N` for the N-th access event.
type Members = BTreeMap<Vec<String>, BTreeSet<String>>;

/// A built mart. There is no way to change its cells; refreshing produces a
/// new value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "MartRepr", from = "MartRepr")]
pub struct DataMart {
    spec: MartSpec,
    members: Members,
    cells: BTreeMap<Vec<String>, u64>,
    built_at: DateTime<Utc>,
    snapshot_id: u64,
}

#[derive(Clone, Serialize, Deserialize)]
struct MartRepr {
    spec: MartSpec,
    #[serde(with = "cell_list")]
    cells: Members,
    built_at: DateTime<Utc>,
    snapshot_id: u64,
}

impl From<DataMart> for MartRepr {
    fn from(m: DataMart) -> Self {
        MartRepr {
            spec: m.spec,
            cells: m.members,
            built_at: m.built_at,
            snapshot_id: m.snapshot_id,
        }
    }
}

impl From<MartRepr> for DataMart {
    fn from(r: MartRepr) -> Self {
        DataMart::new(r.spec, r.cells, r.built_at, r.snapshot_id)
    }
}

impl DataMart {
    fn new(spec: MartSpec, members: Members, built_at: DateTime<Utc>, snapshot_id: u64) -> Self {
        let cells = members.iter().map(|(k, m)| (k.clone(), m.len() as u64)).collect();
        DataMart {
            spec,
            members,
            cells,
            built_at,
            snapshot_id,
        }
    }

    pub fn spec(&self) -> &MartSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn cells(&self) -> &BTreeMap<Vec<String>, u64> {
        &self.cells
    }

    pub fn cell(&self, key: &[&str]) -> u64 {
        let key: Vec<String> = key.iter().map(|k| k.to_string()).collect();
        self.cells.get(&key).copied().unwrap_or(0)
    }

    /// What the cell at `key` counts: doc ids, or `event:N` for access marts.
    pub fn members(&self, key: &[&str]) -> Vec<&str> {
        let key: Vec<String> = key.iter().map(|k| k.to_string()).collect();
        self.members
            .get(&key)
            .map(|m| m.iter().map(String::as_str).collect())
            .unwrap_or_default()
    }

    pub fn built_at(&self) -> DateTime<Utc> {
        self.built_at
    }

    pub fn snapshot_id(&self) -> u64 {
        self.snapshot_id
    }

    pub fn total(&self) -> u64 {
        self.cells.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// One row per cell: dimension columns in spec order, then `value`.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.spec.dimensions.iter().map(String::as_str).collect();
        header.push("value");
        writer.write_record(&header).expect("in-memory csv write");
        for (key, value) in &self.cells {
            let mut row: Vec<String> = key.clone();
            row.push(value.to_string());
            writer.write_record(&row).expect("in-memory csv write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
    }

    fn dimension_index(&self, dimension: &str) -> Result<usize, MartError> {
        let wanted = canonical_attribute(dimension);
        self.spec
            .canonical_dimensions()
            .iter()
            .position(|d| *d == wanted)
            .ok_or_else(|| MartError::UnknownDimension(dimension.to_string()))
    }

    fn derive(&self, drop: usize, members: Members) -> DataMart {
        let mut spec = self.spec.clone();
        spec.dimensions.remove(drop);
        DataMart::new(spec, members, self.built_at, self.snapshot_id)
    }

    /// Aggregates over `dimension`, removing it from the tuple. Something
    /// counted under several values of a multi-valued dimension is counted
    /// once in the result; for single-valued dimensions this is a plain sum.
    pub fn rollup(&self, dimension: &str) -> Result<DataMart, MartError> {
        let idx = self.dimension_index(dimension)?;
        let mut members = Members::new();
        for (key, m) in &self.members {
            let mut reduced = key.clone();
            reduced.remove(idx);
            members.entry(reduced).or_default().extend(m.iter().cloned());
        }
        Ok(self.derive(idx, members))
    }

    /// Keeps cells whose `dimension` equals `value`, removing the dimension.
    pub fn slice(&self, dimension: &str, value: &str) -> Result<DataMart, MartError> {
        let idx = self.dimension_index(dimension)?;
        let members = self
            .members
            .iter()
            .filter(|(key, _)| key[idx] == value)
            .map(|(key, m)| {
                let mut reduced = key.clone();
                reduced.remove(idx);
                (reduced, m.clone())
            })
            .collect();
        Ok(self.derive(idx, members))
    }
}

fn constrained(warehouse: &Warehouse, spec: &MartSpec) -> DocSet {
    match &spec.constraint {
        Some(c) => matching_set(warehouse, c),
        None => DocSet::full(warehouse.len()),
    }
}

/// Materializes `spec` against the current warehouse and access log.
pub fn build_mart(
    warehouse: &Warehouse,
    access: &AccessLog,
    spec: &MartSpec,
    built_at: DateTime<Utc>,
) -> Result<DataMart, MartError> {
    spec.validate()?;
    let dims = spec.canonical_dimensions();
    for dim in &dims {
        let event_field = spec.measure == Measure::AccessCount && ACCESS_DIMENSIONS.contains(&dim.as_str());
        if !event_field && !warehouse.knows_attribute(dim) {
            return Err(MartError::UnknownAttribute(dim.clone()));
        }
    }
    let set = constrained(warehouse, spec);
    let mut cells = Members::new();
    match spec.measure {
        Measure::DocCount => {
            for pos in set.iter() {
                let doc = &warehouse.documents()[pos];
                for key in cartesian(dims.iter().map(|d| doc.group_values(d)).collect()) {
                    cells.entry(key).or_default().insert(doc.doc_id.clone());
                }
            }
        }
        Measure::AccessCount => {
            for (n, event) in access.events().iter().enumerate().filter(|(_, e)| e.kind == AccessKind::Viewed) {
                let Some(pos) = warehouse.position(&event.doc_id) else { continue };
                if !set.contains(pos) {
                    continue;
                }
                let doc = &warehouse.documents()[pos];
                let per_dim = dims
                    .iter()
                    .map(|d| match d.as_str() {
                        "identity" => vec![event.identity.clone()],
                        "access-year" => vec![event.access_year().to_string()],
                        other => doc.group_values(other),
                    })
                    .collect();
                for key in cartesian(per_dim) {
                    cells.entry(key).or_default().insert(format!("event:{n}"));
                }
            }
        }
    }
    debug_assert!(cells.keys().all(|k| k.len() == dims.len()));
    debug_assert!(cells.keys().all(|k| k.iter().all(|v| !v.is_empty() || v == MISSING_VALUE)));
    Ok(DataMart::new(spec.clone(), cells, built_at, warehouse.snapshot_id()))
}

/// Registered specs and every version built from them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MartEngine {
    specs: BTreeMap<String, MartSpec>,
    versions: BTreeMap<String, Vec<DataMart>>,
}

impl Default for MartEngine {
    fn default() -> Self {
        Self {
            specs: MartSpec::builtins()
                .into_iter()
                .map(|s| (s.name.clone(), s))
                .collect(),
            versions: BTreeMap::new(),
        }
    }
}

impl MartEngine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, spec: MartSpec) -> Result<(), MartError> {
        spec.validate()?;
        self.specs.insert(spec.name.clone(), spec);
        Ok(())
    }

    pub fn spec(&self, name: &str) -> Option<&MartSpec> {
        self.specs.get(name)
    }

    pub fn specs(&self) -> impl Iterator<Item = &MartSpec> {
        self.specs.values()
    }

    pub fn build(
        &mut self,
        name: &str,
        warehouse: &Warehouse,
        access: &AccessLog,
        now: DateTime<Utc>,
    ) -> Result<&DataMart, MartError> {
        let spec = self
            .specs
            .get(name)
            .ok_or_else(|| MartError::NotFound(name.to_string()))?;
        let mart = build_mart(warehouse, access, spec, now)?;
        let versions = self.versions.entry(name.to_string()).or_default();
        versions.push(mart);
        Ok(versions.last().expect("just pushed"))
    }

    /// Rebuilds a previously built mart; earlier versions stay available.
    pub fn refresh(
        &mut self,
        name: &str,
        warehouse: &Warehouse,
        access: &AccessLog,
        now: DateTime<Utc>,
    ) -> Result<&DataMart, MartError> {
        if self.versions.get(name).is_none_or(Vec::is_empty) {
            return Err(MartError::NotFound(name.to_string()));
        }
        self.build(name, warehouse, access, now)
    }

    pub fn latest(&self, name: &str) -> Option<&DataMart> {
        self.versions.get(name).and_then(|v| v.last())
    }

    pub fn versions(&self, name: &str) -> &[DataMart] {
        self.versions.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn built_names(&self) -> impl Iterator<Item = &str> {
        self.versions.keys().map(String::as_str)
    }
}
