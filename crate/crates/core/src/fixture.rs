//! The five-record demonstration corpus and its staff directory.
//!
//! D5 repeats D3's title and year under another doc_id, so ingestion keeps
//! four documents. No record carries a team.

pub const F5_JSONL: &str = include_str!("../fixtures/f5.jsonl");

/// `join_key,value` directory mapping authors to research teams.
pub const STAFF_DIRECTORY_CSV: &str = include_str!("../fixtures/staff-directory.csv");
