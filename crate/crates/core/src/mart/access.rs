use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};

use super::MartError;
use crate::warehouse::Warehouse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessKind {
    Viewed,
    Recommended,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessEvent {
    pub identity: String,
    pub doc_id: String,
    pub timestamp: DateTime<Utc>,
    pub kind: AccessKind,
}

impl AccessEvent {
    pub fn viewed(identity: impl Into<String>, doc_id: impl Into<String>, timestamp: DateTime<Utc>) -> Self {
        Self {
            identity: identity.into(),
            doc_id: doc_id.into(),
            timestamp,
            kind: AccessKind::Viewed,
        }
    }

    pub fn access_year(&self) -> i32 {
        self.timestamp.year()
    }
}

/// Append-only record of document views and recommendations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessLog {
    events: Vec<AccessEvent>,
}

impl AccessLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<AccessEvent>) -> Self {
        Self { events }
    }

    pub fn record(&mut self, event: AccessEvent, warehouse: &Warehouse) -> Result<(), MartError> {
        if event.identity.trim().is_empty() {
            return Err(MartError::InvalidEvent("identity must be non-empty".into()));
        }
        if !warehouse.contains(&event.doc_id) {
            return Err(MartError::InvalidEvent(format!("unknown doc_id {}", event.doc_id)));
        }
        self.events.push(event);
        Ok(())
    }

    pub fn events(&self) -> &[AccessEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}
