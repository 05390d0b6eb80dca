//! Random corpora, random queries and brute-force reference implementations
//! shared by the integration tests. Nothing here goes through the index or
//! the evaluator under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use docbi_core::mart::{Audience, MartSpec, Measure};
use docbi_core::query::{QueryExpr, TermValue};
use docbi_core::warehouse::{Document, SelectionFilter, Warehouse};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

pub const AUTHORS: [&str; 6] = ["martin", "dupont", "bernard", "Lefevre", "moreau", "Petit"];
pub const TOPICS: [&str; 6] = ["databases", "warehousing", "user-modeling", "intelligence", "olap", "retrieval"];
pub const PUB_TYPES: [&str; 6] = ["journal-article", "conference-paper", "book-chapter", "thesis", "report", "other"];
pub const TEAMS: [&str; 4] = ["SITE", "ORPAILLEUR", "Orpailleur", "MAIA"];
pub const LABS: [&str; 3] = ["loria", "inria", "cnrs"];
pub const TITLE_WORDS: [&str; 8] = ["query", "warehouse", "design", "user", "model", "watch", "stars", "mining"];
pub const YEARS: std::ops::RangeInclusive<i32> = 1999..=2005;

/// Attributes a random query or mart may refer to. `colour` never exists.
pub const QUERY_ATTRIBUTES: [&str; 10] =
    ["author", "authors", "topic", "topics", "year", "pub_type", "team", "lab", "title", "colour"];
pub const SINGLE_VALUED: [&str; 4] = ["year", "pub_type", "team", "lab"];
pub const MULTI_VALUED: [&str; 2] = ["authors", "topics"];

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn pick<'a>(rng: &mut StdRng, items: &[&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty vocabulary")
}

fn pick_some(rng: &mut StdRng, items: &[&str], max: usize) -> Vec<String> {
    let n = rng.random_range(1..=max);
    let mut out: Vec<String> = Vec::new();
    for _ in 0..n {
        let v = pick(rng, items).to_string();
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// One JSON line per document; titles are unique so nothing merges.
pub fn random_corpus_lines(rng: &mut StdRng, n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            let words: Vec<&str> = (0..rng.random_range(1..=3)).map(|_| pick(rng, &TITLE_WORDS)).collect();
            let mut rec = serde_json::Map::new();
            rec.insert("doc_id".into(), format!("R{i:03}").into());
            rec.insert("title".into(), format!("{} {i}", words.join(" ")).into());
            rec.insert("authors".into(), pick_some(rng, &AUTHORS, 3).join(";").into());
            rec.insert("year".into(), rng.random_range(YEARS).into());
            rec.insert("pub_type".into(), pick(rng, &PUB_TYPES).into());
            if rng.random_bool(0.85) {
                rec.insert("topics".into(), pick_some(rng, &TOPICS, 3).join(";").into());
            }
            if rng.random_bool(0.7) {
                rec.insert("team".into(), pick(rng, &TEAMS).into());
            }
            if rng.random_bool(0.4) {
                rec.insert("lab".into(), pick(rng, &LABS).into());
            }
            serde_json::Value::Object(rec).to_string()
        })
        .collect()
}

pub fn warehouse_from_lines(lines: &[String]) -> Warehouse {
    let mut wh = Warehouse::new();
    let report = wh
        .ingest_lines(lines.iter().map(String::as_str), &SelectionFilter::permissive())
        .expect("permissive filter is valid");
    assert!(report.rejected.is_empty(), "generator produced rejects: {:?}", report.rejected);
    wh
}

pub fn random_warehouse(rng: &mut StdRng, max_docs: usize) -> Warehouse {
    let n = rng.random_range(0..=max_docs);
    warehouse_from_lines(&random_corpus_lines(rng, n))
}

fn random_case(rng: &mut StdRng, s: &str) -> String {
    s.chars()
        .map(|c| if rng.random_bool(0.2) { c.to_ascii_uppercase() } else { c })
        .collect()
}

fn vocabulary(attribute: &str) -> Vec<String> {
    let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
    match attribute {
        "author" | "authors" => owned(&AUTHORS),
        "topic" | "topics" => owned(&TOPICS),
        "year" => YEARS.map(|y| y.to_string()).collect(),
        "pub_type" => owned(&PUB_TYPES),
        "team" => owned(&TEAMS),
        "lab" => owned(&LABS),
        "title" => owned(&TITLE_WORDS),
        _ => vec!["red".into(), "blue".into()],
    }
}

pub fn random_term(rng: &mut StdRng) -> QueryExpr {
    let attribute = pick(rng, &QUERY_ATTRIBUTES);
    let value = vocabulary(attribute).choose(rng).expect("vocabulary").clone();
    let value = random_case(rng, &value);
    if rng.random_bool(0.2) {
        // a quoted fragment matches by substring
        let chars: Vec<char> = value.chars().collect();
        let start = rng.random_range(0..chars.len());
        let end = rng.random_range(start + 1..=chars.len());
        QueryExpr::phrase(attribute, chars[start..end].iter().collect::<String>())
    } else {
        QueryExpr::term(attribute, value)
    }
}

/// Random tree of depth at most `depth`.
pub fn random_query(rng: &mut StdRng, depth: usize) -> QueryExpr {
    if depth <= 1 || rng.random_bool(0.25) {
        return random_term(rng);
    }
    match rng.random_range(0..3) {
        0 => random_query(rng, depth - 1).and(random_query(rng, depth - 1)),
        1 => random_query(rng, depth - 1).or(random_query(rng, depth - 1)),
        _ => random_query(rng, depth - 1).not(),
    }
}

/// Values of `attribute` read straight off the document fields.
pub fn oracle_values(doc: &Document, attribute: &str) -> Vec<String> {
    match attribute {
        "doc_id" => vec![doc.doc_id.clone()],
        "title" => vec![doc.title.clone()],
        "author" | "authors" => doc.authors.clone(),
        "year" => vec![doc.year.to_string()],
        "pub_type" => vec![doc.pub_type.as_str().to_string()],
        "topic" | "topics" => doc.topics.iter().cloned().collect(),
        other => doc.attrs.get(other).cloned().into_iter().collect(),
    }
}

pub fn oracle_matches(doc: &Document, q: &QueryExpr) -> bool {
    match q {
        QueryExpr::Term { attribute, value } => {
            let attribute = attribute.to_lowercase();
            let needle = value.text().to_lowercase();
            let substring = attribute == "title" || matches!(value, TermValue::Phrase(_));
            oracle_values(doc, &attribute).iter().any(|v| {
                let v = v.to_lowercase();
                v == needle || (substring && v.contains(&needle))
            })
        }
        QueryExpr::And(a, b) => oracle_matches(doc, a) && oracle_matches(doc, b),
        QueryExpr::Or(a, b) => oracle_matches(doc, a) || oracle_matches(doc, b),
        QueryExpr::Not(a) => !oracle_matches(doc, a),
    }
}

pub fn oracle_filter(wh: &Warehouse, q: &QueryExpr) -> BTreeSet<String> {
    wh.documents()
        .iter()
        .filter(|d| oracle_matches(d, q))
        .map(|d| d.doc_id.clone())
        .collect()
}

/// Default result order computed by sorting, independent of the warehouse's
/// precomputed order.
pub fn oracle_order(wh: &Warehouse, ids: &BTreeSet<String>) -> Vec<String> {
    let mut docs: Vec<&Document> = wh.documents().iter().filter(|d| ids.contains(&d.doc_id)).collect();
    docs.sort_by(|a, b| b.year.cmp(&a.year).then_with(|| a.doc_id.cmp(&b.doc_id)));
    docs.into_iter().map(|d| d.doc_id.clone()).collect()
}

/// Nested group-by counting one per (document, value tuple).
pub fn oracle_group_by(wh: &Warehouse, dims: &[String], constraint: Option<&QueryExpr>) -> BTreeMap<Vec<String>, u64> {
    let mut cells = BTreeMap::new();
    for doc in wh.documents() {
        if constraint.is_some_and(|c| !oracle_matches(doc, c)) {
            continue;
        }
        let mut keys: Vec<Vec<String>> = vec![Vec::new()];
        for dim in dims {
            let mut values: Vec<String> = Vec::new();
            for v in oracle_values(doc, dim) {
                if !values.contains(&v) {
                    values.push(v);
                }
            }
            if values.is_empty() {
                values.push("(missing)".to_string());
            }
            keys = keys
                .into_iter()
                .flat_map(|k| {
                    values.iter().map(move |v| {
                        let mut k = k.clone();
                        k.push(v.clone());
                        k
                    })
                })
                .collect();
        }
        for k in keys {
            *cells.entry(k).or_insert(0) += 1;
        }
    }
    cells
}

/// Random doc-count spec with 1..=3 distinct dimensions drawn from `pool`.
pub fn random_mart_spec(rng: &mut StdRng, pool: &[&str], name: &str) -> MartSpec {
    let mut dims: Vec<&str> = pool.to_vec();
    for i in (1..dims.len()).rev() {
        dims.swap(i, rng.random_range(0..=i));
    }
    dims.truncate(rng.random_range(1..=pool.len().min(3)));
    let mut spec = MartSpec::new(name, &dims, Measure::DocCount, Audience::ResearchStudent);
    if rng.random_bool(0.4) {
        spec = spec.with_constraint(random_query(rng, 3));
    }
    spec
}
