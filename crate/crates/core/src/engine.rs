//! One value holding the whole analytical state, with every operation the
//! command line and the HTTP API expose. Both front ends call into this type
//! and carry no rules of their own.

use std::collections::BTreeSet;
use std::io::BufRead;

use chrono::{DateTime, Utc};

use crate::error::Result;
use crate::mart::{
    select_recommendations, AccessEvent, AccessKind, AccessLog, DataMart, MartEngine, MartError, MartSpec,
};
use crate::query::{classify, explore, ordered_ids, run_query, ClassificationSpec, ExplorationView, ResultSet};
use crate::user::{
    personalize, Activity, DecisionalProblem, Evaluation, NewActivity, ProblemDefinition, Profile, Session,
    SessionModel, Translation, UserModel, UserModelError,
};
use crate::warehouse::{
    AttributeDescriptor, AttributeKind, DocSet, EnrichReport, EnrichmentSource, GapReport, IngestReport,
    SelectionFilter, Warehouse,
};

#[derive(Debug, Clone, Default)]
pub struct Engine {
    warehouse: Warehouse,
    users: UserModel,
    marts: MartEngine,
    access: AccessLog,
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(warehouse: Warehouse, users: UserModel, marts: MartEngine, access: AccessLog) -> Self {
        Self {
            warehouse,
            users,
            marts,
            access,
        }
    }

    pub fn warehouse(&self) -> &Warehouse {
        &self.warehouse
    }

    pub fn users(&self) -> &UserModel {
        &self.users
    }

    pub fn marts(&self) -> &MartEngine {
        &self.marts
    }

    pub fn access_log(&self) -> &AccessLog {
        &self.access
    }

    pub fn snapshot_id(&self) -> u64 {
        self.warehouse.snapshot_id()
    }

    // Warehouse

    pub fn ingest<R: BufRead>(&mut self, reader: R, filter: &SelectionFilter) -> Result<IngestReport> {
        Ok(self.warehouse.ingest(reader, filter)?)
    }

    pub fn ingest_lines<'a>(
        &mut self,
        lines: impl IntoIterator<Item = &'a str>,
        filter: &SelectionFilter,
    ) -> Result<IngestReport> {
        Ok(self.warehouse.ingest_lines(lines, filter)?)
    }

    pub fn schema(&self) -> Vec<AttributeDescriptor> {
        self.warehouse.schema()
    }

    pub fn detect_gaps<S: AsRef<str>>(&self, required: &[S]) -> GapReport {
        self.warehouse.detect_gaps(required)
    }

    pub fn declare_attribute(&mut self, name: &str, kind: AttributeKind) -> Result<()> {
        Ok(self.warehouse.declare_attribute(name, kind)?)
    }

    pub fn enrich(&mut self, source: &EnrichmentSource) -> EnrichReport {
        self.warehouse.enrich(source)
    }

    // Retrieval

    /// Evaluates `text`; with an identity the result is reordered by that
    /// identity's profile.
    pub fn query(&self, text: &str, identity: Option<&str>) -> Result<ResultSet> {
        let result = run_query(&self.warehouse, text)?;
        Ok(match identity {
            Some(id) => personalize(&result, &self.profile(id), &self.warehouse),
            None => result,
        })
    }

    pub fn explore(&self, path: &[(String, String)]) -> ExplorationView {
        explore(&self.warehouse, path)
    }

    pub fn classify(&self, spec: &ClassificationSpec) -> Result<std::collections::BTreeMap<Vec<String>, Vec<String>>> {
        Ok(classify(&self.warehouse, spec)?)
    }

    // Sessions and evaluations

    pub fn start_session(&mut self, identity: &str, objective: &str) -> Result<String> {
        Ok(self.users.start_session(identity, objective)?)
    }

    pub fn start_subsession(&mut self, parent: &str, objective: &str) -> Result<String> {
        Ok(self.users.start_subsession(parent, objective)?)
    }

    pub fn session(&self, id: &str) -> Result<&Session> {
        self.users
            .session(id)
            .ok_or_else(|| UserModelError::NotFound(format!("session {id}")).into())
    }

    pub fn session_tree(&self, id: &str) -> Result<SessionModel> {
        Ok(self.users.session_tree(id)?)
    }

    pub fn top_level_sessions(&self, identity: Option<&str>) -> Vec<&Session> {
        self.users.top_level_sessions(identity)
    }

    /// Stores an activity. When no solution is supplied, the system's own
    /// answer is recorded: the request's result, or the documents the
    /// classification places in some cell.
    pub fn record_activity(&mut self, session_id: &str, mut activity: NewActivity) -> Result<Activity> {
        if activity.solution.is_empty() {
            if let Some(text) = activity.request_text.as_deref().filter(|t| !t.trim().is_empty()) {
                activity.solution = run_query(&self.warehouse, text)?.doc_ids;
            } else if let Some(spec) = &activity.classification {
                let mut set = DocSet::empty(self.warehouse.len());
                for ids in classify(&self.warehouse, spec)?.values() {
                    for id in ids {
                        set.insert(self.warehouse.position(id).expect("classified doc exists"));
                    }
                }
                activity.solution = ordered_ids(&self.warehouse, &set);
            }
        }
        if let Some(unknown) = activity.solution.iter().find(|d| !self.warehouse.contains(d)) {
            return Err(UserModelError::Validation(format!("solution names unknown doc_id {unknown}")).into());
        }
        let id = self.users.record_activity(session_id, activity)?;
        Ok(self.session(session_id)?
            .activities
            .iter()
            .find(|a| a.activity_id == id)
            .expect("activity just recorded")
            .clone())
    }

    pub fn submit_evaluation(&mut self, session_id: &str, activity_id: &str, evaluation: Evaluation) -> Result<Profile> {
        Ok(self
            .users
            .submit_evaluation(session_id, activity_id, evaluation, &self.warehouse)?)
    }

    pub fn profile(&self, identity: &str) -> Profile {
        self.users.derive_profile(identity, &self.warehouse)
    }

    pub fn export_session(&self, id: &str) -> Result<String> {
        Ok(self.users.export_session(id)?)
    }

    // Decisional problems

    pub fn define_problem(&mut self, definition: ProblemDefinition) -> Result<DecisionalProblem> {
        let id = self.users.define_problem(definition)?;
        Ok(self.users.problem(&id)?.clone())
    }

    pub fn problem(&self, id: &str) -> Result<&DecisionalProblem> {
        Ok(self.users.problem(id)?)
    }

    pub fn problems_for(&self, identity: &str) -> Vec<&DecisionalProblem> {
        self.users.problems_for(identity)
    }

    pub fn translate_problem(&self, id: &str) -> Result<Translation> {
        Ok(self.users.translate_problem(id, &self.warehouse)?)
    }

    // Marts

    pub fn register_mart(&mut self, spec: MartSpec) -> Result<()> {
        Ok(self.marts.register(spec)?)
    }

    pub fn mart_specs(&self) -> impl Iterator<Item = &MartSpec> {
        self.marts.specs()
    }

    pub fn build_mart(&mut self, name: &str, now: DateTime<Utc>) -> Result<DataMart> {
        Ok(self.marts.build(name, &self.warehouse, &self.access, now)?.clone())
    }

    pub fn refresh_mart(&mut self, name: &str, now: DateTime<Utc>) -> Result<DataMart> {
        Ok(self.marts.refresh(name, &self.warehouse, &self.access, now)?.clone())
    }

    /// Refreshes every mart built so far. Marts whose spec no longer fits
    /// the warehouse keep their last version; their errors are returned.
    pub fn refresh_all(&mut self, now: DateTime<Utc>) -> Vec<(String, MartError)> {
        let names: Vec<String> = self.marts.built_names().map(str::to_string).collect();
        names
            .into_iter()
            .filter_map(|name| {
                self.marts
                    .refresh(&name, &self.warehouse, &self.access, now)
                    .err()
                    .map(|e| (name, e))
            })
            .collect()
    }

    /// Latest built version of `name`.
    pub fn mart(&self, name: &str) -> Result<&DataMart> {
        self.marts
            .latest(name)
            .ok_or_else(|| MartError::NotFound(name.to_string()).into())
    }

    pub fn export_mart(&self, name: &str) -> Result<String> {
        Ok(self.mart(name)?.to_csv())
    }

    pub fn record_access(&mut self, event: AccessEvent) -> Result<()> {
        Ok(self.access.record(event, &self.warehouse)?)
    }

    /// Best `n` documents never recommended to `identity` before. They join
    /// the identity's history and the access log.
    pub fn recommend(&mut self, identity: &str, n: usize, now: DateTime<Utc>) -> Result<Vec<String>> {
        if identity.trim().is_empty() {
            return Err(UserModelError::Validation("identity must be non-empty".into()).into());
        }
        let profile = self.profile(identity);
        let history: BTreeSet<String> = self.users.recommended_history(identity);
        let picked = select_recommendations(&self.warehouse, &profile, &history, n);
        self.users.extend_history(identity, &picked);
        for doc_id in &picked {
            self.access.record(
                AccessEvent {
                    identity: identity.to_string(),
                    doc_id: doc_id.clone(),
                    timestamp: now,
                    kind: AccessKind::Recommended,
                },
                &self.warehouse,
            )?;
        }
        Ok(picked)
    }
}
