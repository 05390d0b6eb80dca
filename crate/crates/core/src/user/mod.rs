//! Explicit user model: sessions with typed activities and pertinence
//! evaluations, decisional problems, and profiles derived from that history.
//!
//! Profiles are never stored; they are recomputed from the sessions of an
//! identity, so a profile is a deterministic function of the stored history
//! and the warehouse snapshot.

mod problem;
mod profile;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use problem::{
    translate, DecisionalProblem, EnvironmentalParameters, IndividualCharacteristics,
    ProblemDefinition, Stake, Translation,
};
pub use profile::{personalize, Profile};

use crate::query::{parse_query, ClassificationSpec, SyntaxError};
use crate::warehouse::Warehouse;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UserModelError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

type Result<T> = std::result::Result<T, UserModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivityType {
    Exploration,
    Request,
    Synthesis,
}

impl ActivityType {
    pub fn as_str(self) -> &'static str {
        match self {
            ActivityType::Exploration => "Exploration",
            ActivityType::Request => "Request",
            ActivityType::Synthesis => "Synthesis",
        }
    }
}

impl fmt::Display for ActivityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityType {
    type Err = UserModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exploration" => Ok(ActivityType::Exploration),
            "request" => Ok(ActivityType::Request),
            "synthesis" => Ok(ActivityType::Synthesis),
            _ => Err(UserModelError::Validation(format!(
                "activity_type must be Exploration, Request or Synthesis, got {s:?}"
            ))),
        }
    }
}

pub const MAX_PERTINENCE: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    /// 0 = not pertinent .. 3 = fully pertinent.
    pub degree_of_pertinence: u8,
    pub reasons: String,
    pub judged_docs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub activity_id: String,
    pub activity_type: ActivityType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub solution: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
}

impl Activity {
    /// Attributes named by the classification and the request terms.
    pub fn used_attributes(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        if let Some(c) = &self.classification {
            out.extend(c.attributes());
        }
        if let Some(q) = self.request_text.as_deref().and_then(|t| parse_query(t).ok()) {
            out.extend(q.attributes().into_iter().map(str::to_string));
        }
        out
    }
}

/// An activity as submitted, before it gets an id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewActivity {
    pub activity_type: ActivityType,
    #[serde(default)]
    pub classification: Option<ClassificationSpec>,
    #[serde(default)]
    pub request_text: Option<String>,
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub solution: Vec<String>,
}

impl NewActivity {
    pub fn request(text: impl Into<String>, solution: Vec<String>) -> Self {
        Self {
            activity_type: ActivityType::Request,
            classification: None,
            request_text: Some(text.into()),
            note: None,
            solution,
        }
    }

    pub fn exploration(classification: Option<ClassificationSpec>, solution: Vec<String>) -> Self {
        Self {
            activity_type: ActivityType::Exploration,
            classification,
            request_text: None,
            note: None,
            solution,
        }
    }
}

/// Stored session: activities inline, sub-sessions by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub identity: String,
    pub objective: String,
    /// The enclosing session whose objective this one serves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub activities: Vec<Activity>,
    pub sub_sessions: Vec<String>,
}

/// The full nested model of a session, for export and display.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionModel {
    pub session_id: String,
    pub identity: String,
    pub objective: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_objective: Option<String>,
    pub activities: Vec<Activity>,
    pub sub_sessions: Vec<SessionModel>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Counters {
    session: u64,
    problem: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserModel {
    sessions: BTreeMap<String, Session>,
    problems: BTreeMap<String, DecisionalProblem>,
    history: BTreeMap<String, BTreeSet<String>>,
    counters: Counters,
}

fn require_text(field: &str, value: &str) -> Result<()> {
    if value.trim().is_empty() {
        Err(UserModelError::Validation(format!("{field} must be non-empty")))
    } else {
        Ok(())
    }
}

impl UserModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn start_session(&mut self, identity: &str, objective: &str) -> Result<String> {
        require_text("identity", identity)?;
        require_text("objective", objective)?;
        Ok(self.insert_session(identity.trim().to_string(), objective.to_string(), None))
    }

    pub fn start_subsession(&mut self, parent: &str, objective: &str) -> Result<String> {
        let identity = self
            .sessions
            .get(parent)
            .ok_or_else(|| UserModelError::NotFound(format!("session {parent}")))?
            .identity
            .clone();
        require_text("objective", objective)?;
        let id = self.insert_session(identity, objective.to_string(), Some(parent.to_string()));
        self.sessions
            .get_mut(parent)
            .expect("parent checked above")
            .sub_sessions
            .push(id.clone());
        Ok(id)
    }

    fn insert_session(&mut self, identity: String, objective: String, parent: Option<String>) -> String {
        self.counters.session += 1;
        let id = format!("s{}", self.counters.session);
        self.sessions.insert(
            id.clone(),
            Session {
                session_id: id.clone(),
                identity,
                objective,
                parent,
                activities: Vec::new(),
                sub_sessions: Vec::new(),
            },
        );
        id
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.get(id)
    }

    /// Main sessions only, optionally restricted to one identity.
    pub fn top_level_sessions(&self, identity: Option<&str>) -> Vec<&Session> {
        self.sessions
            .values()
            .filter(|s| s.parent.is_none())
            .filter(|s| identity.is_none_or(|i| s.identity == i))
            .collect()
    }

    pub fn all_sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn is_known_identity(&self, identity: &str) -> bool {
        self.sessions.values().any(|s| s.identity == identity)
    }

    pub fn session_tree(&self, id: &str) -> Result<SessionModel> {
        let session = self
            .sessions
            .get(id)
            .ok_or_else(|| UserModelError::NotFound(format!("session {id}")))?;
        let parent_objective = session
            .parent
            .as_ref()
            .and_then(|p| self.sessions.get(p))
            .map(|p| p.objective.clone());
        Ok(SessionModel {
            session_id: session.session_id.clone(),
            identity: session.identity.clone(),
            objective: session.objective.clone(),
            parent: session.parent.clone(),
            parent_objective,
            activities: session.activities.clone(),
            sub_sessions: session
                .sub_sessions
                .iter()
                .map(|child| self.session_tree(child))
                .collect::<Result<_>>()?,
        })
    }

    /// One self-contained JSON line holding the whole session tree.
    pub fn export_session(&self, id: &str) -> Result<String> {
        let tree = self.session_tree(id)?;
        Ok(serde_json::to_string(&tree).expect("session model serializes"))
    }

    pub fn record_activity(&mut self, session_id: &str, activity: NewActivity) -> Result<String> {
        if activity.activity_type == ActivityType::Request {
            match activity.request_text.as_deref() {
                Some(t) if !t.trim().is_empty() => {
                    parse_query(t)?;
                }
                _ => {
                    return Err(UserModelError::Validation(
                        "a Request activity needs request_text".into(),
                    ))
                }
            }
        } else if let Some(t) = activity.request_text.as_deref() {
            parse_query(t)?;
        }
        if let Some(c) = &activity.classification {
            c.validate()
                .map_err(|e| UserModelError::Validation(e.to_string()))?;
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = activity.solution.iter().find(|d| !seen.insert(d.as_str())) {
            return Err(UserModelError::Validation(format!("solution lists {dup} twice")));
        }
        let session = self
            .sessions
            .get_mut(session_id)
            .ok_or_else(|| UserModelError::NotFound(format!("session {session_id}")))?;
        let activity_id = format!("a{}", session.activities.len() + 1);
        session.activities.push(Activity {
            activity_id: activity_id.clone(),
            activity_type: activity.activity_type,
            classification: activity.classification,
            request_text: activity.request_text,
            note: activity.note,
            solution: activity.solution,
            evaluation: None,
        });
        Ok(activity_id)
    }

    /// Attaches an evaluation and returns the owner's refreshed profile.
    pub fn submit_evaluation(
        &mut self,
        session_id: &str,
        activity_id: &str,
        evaluation: Evaluation,
        warehouse: &Warehouse,
    ) -> Result<Profile> {
        if evaluation.degree_of_pertinence > MAX_PERTINENCE {
            return Err(UserModelError::Validation(format!(
                "degree_of_pertinence must be 0..={MAX_PERTINENCE}, got {}",
                evaluation.degree_of_pertinence
            )));
        }
        let session = self
            .sessions
            .get_mut(session_id)
            .ok_or_else(|| UserModelError::NotFound(format!("session {session_id}")))?;
        let identity = session.identity.clone();
        let activity = session
            .activities
            .iter_mut()
            .find(|a| a.activity_id == activity_id)
            .ok_or_else(|| UserModelError::NotFound(format!("activity {activity_id} in {session_id}")))?;
        if activity.solution.is_empty() {
            return Err(UserModelError::Validation(format!(
                "activity {activity_id} has no solution to evaluate"
            )));
        }
        if activity.evaluation.is_some() {
            return Err(UserModelError::Conflict(format!(
                "activity {activity_id} is already evaluated"
            )));
        }
        if let Some(outside) = evaluation
            .judged_docs
            .iter()
            .find(|d| !activity.solution.contains(d))
        {
            return Err(UserModelError::Validation(format!(
                "judged doc {outside} is not part of the activity's solution"
            )));
        }
        let mut judged = evaluation.judged_docs;
        let mut seen = BTreeSet::new();
        judged.retain(|d| seen.insert(d.clone()));
        activity.evaluation = Some(Evaluation {
            judged_docs: judged,
            ..evaluation
        });
        Ok(self.derive_profile(&identity, warehouse))
    }

    /// Aggregates every session of `identity`, sub-sessions included. Each
    /// judged document adds the evaluation's degree to each of its topics.
    pub fn derive_profile(&self, identity: &str, warehouse: &Warehouse) -> Profile {
        let mut profile = Profile::empty(identity);
        for session in self.sessions.values().filter(|s| s.identity == identity) {
            for activity in &session.activities {
                for attr in activity.used_attributes() {
                    *profile.attribute_usage.entry(attr).or_default() += 1;
                }
                let Some(eval) = &activity.evaluation else { continue };
                if eval.degree_of_pertinence == 0 {
                    continue;
                }
                for doc in eval.judged_docs.iter().filter_map(|d| warehouse.get(d)) {
                    for topic in &doc.topics {
                        *profile.topic_weights.entry(topic.clone()).or_default() +=
                            f64::from(eval.degree_of_pertinence);
                    }
                }
            }
        }
        if let Some(history) = self.history.get(identity) {
            profile.recommended_history = history.clone();
        }
        for problem in self.problems.values().filter(|p| p.identity() == identity) {
            let individual = &problem.definition.individual;
            if !individual.cognitive_style.trim().is_empty() {
                profile.cognitive_styles.insert(individual.cognitive_style.clone());
            }
            profile
                .personality_traits
                .extend(individual.personality_traits.iter().cloned());
        }
        profile
    }

    pub fn recommended_history(&self, identity: &str) -> BTreeSet<String> {
        self.history.get(identity).cloned().unwrap_or_default()
    }

    pub fn extend_history(&mut self, identity: &str, doc_ids: &[String]) {
        if doc_ids.is_empty() {
            return;
        }
        self.history
            .entry(identity.to_string())
            .or_default()
            .extend(doc_ids.iter().cloned());
    }

    pub fn define_problem(&mut self, definition: ProblemDefinition) -> Result<String> {
        let identity = &definition.individual.identity;
        require_text("identity", identity)?;
        if !self.is_known_identity(identity) {
            return Err(UserModelError::Validation(format!(
                "identity {identity} has no sessions"
            )));
        }
        if definition.stake.hypotheses.iter().all(|h| h.trim().is_empty()) {
            return Err(UserModelError::Validation("hypotheses must be non-empty".into()));
        }
        self.counters.problem += 1;
        let problem_id = format!("p{}", self.counters.problem);
        self.problems.insert(
            problem_id.clone(),
            DecisionalProblem {
                problem_id: problem_id.clone(),
                definition,
            },
        );
        Ok(problem_id)
    }

    pub fn problem(&self, id: &str) -> Result<&DecisionalProblem> {
        self.problems
            .get(id)
            .ok_or_else(|| UserModelError::NotFound(format!("problem {id}")))
    }

    pub fn problems_for(&self, identity: &str) -> Vec<&DecisionalProblem> {
        self.problems.values().filter(|p| p.identity() == identity).collect()
    }

    pub fn translate_problem(&self, id: &str, warehouse: &Warehouse) -> Result<Translation> {
        Ok(translate(&self.problem(id)?.definition, warehouse))
    }
}
