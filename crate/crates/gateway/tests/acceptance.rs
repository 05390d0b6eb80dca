//! Acceptance suite. Each test prints one `PASS` or `FAIL` line for its
//! criterion straight to stdout, so the lines show even without
//! `--nocapture`, and then asserts.

mod common;
#[path = "../../core/tests/common/mod.rs"]
mod gen;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::{Duration, Instant};

use axum::http::Method;
use chrono::{TimeZone, Utc};
use common::*;
use docbi_core::mart::{build_mart, AccessLog};
use docbi_core::query::{evaluate_query, ResultSet};
use docbi_core::user::{personalize, Evaluation, NewActivity};
use docbi_core::warehouse::Warehouse;
use docbi_core::Engine;
use docbi_gateway::store::{encode, Store};
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde_json::{json, Value};

fn report(criterion: &str, ok: bool, detail: &str) {
    let line = format!("{} {criterion}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn now() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap()
}

#[test]
fn query_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = gen::rng(0x5eed_0001);
    let (mut queries, mut mismatches, mut docs) = (0, 0, 0);
    for _ in 0..5 {
        let n = rng.random_range(100..=200);
        let wh = gen::warehouse_from_lines(&gen::random_corpus_lines(&mut rng, n));
        docs += wh.len();
        for _ in 0..100 {
            let q = gen::random_query(&mut rng, 5);
            let got = evaluate_query(&wh, &q);
            let expected = gen::oracle_order(&wh, &gen::oracle_filter(&wh, &q));
            queries += 1;
            if got.doc_ids != expected || got.total != expected.len() {
                mismatches += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    let ok = queries == 500 && mismatches == 0 && elapsed < Duration::from_secs(10);
    report(
        "query oracle equivalence",
        ok,
        &format!("{queries} queries over 5 corpora ({docs} docs), {mismatches} mismatches, {elapsed:.2?} (limit 10s)"),
    );
    assert!(ok);
}

fn knows_pool(wh: &Warehouse, pool: &[&str]) -> bool {
    pool.iter().all(|a| wh.knows_attribute(a))
}

#[test]
fn cube_oracle_and_rollup_consistency() {
    let mut rng = gen::rng(0x5eed_0002);
    let pool: Vec<&str> = gen::SINGLE_VALUED.iter().chain(&gen::MULTI_VALUED).copied().collect();
    let (mut specs, mut cube_bad, mut rollups, mut rollup_bad) = (0, 0, 0, 0);
    while specs < 100 {
        let wh = gen::random_warehouse(&mut rng, 150);
        if !knows_pool(&wh, &pool) {
            continue;
        }
        for _ in 0..5 {
            let spec = gen::random_mart_spec(&mut rng, &pool, "m");
            specs += 1;
            let mart = build_mart(&wh, &AccessLog::new(), &spec, now()).unwrap();
            if mart.cells() != &gen::oracle_group_by(&wh, &spec.dimensions, spec.constraint.as_ref()) {
                cube_bad += 1;
            }
            for (i, dropped) in spec.dimensions.iter().enumerate().filter(|_| spec.dimensions.len() >= 2) {
                let mut reduced = spec.clone();
                reduced.dimensions.remove(i);
                let rebuilt = build_mart(&wh, &AccessLog::new(), &reduced, now()).unwrap();
                rollups += 1;
                if mart.rollup(dropped).unwrap().cells() != rebuilt.cells() {
                    rollup_bad += 1;
                }
            }
        }
    }
    let ok = cube_bad == 0 && rollup_bad == 0;
    report(
        "cube oracle equivalence + rollup consistency",
        ok,
        &format!("{specs} specs, {cube_bad} cube mismatches, {rollups} rollups checked, {rollup_bad} rollup mismatches"),
    );
    assert!(ok);
}

/// Team per document by reading the fixture and the directory by hand: the
/// first author listed in the directory decides.
fn hand_join_cells() -> BTreeMap<Vec<String>, u64> {
    let directory: BTreeMap<String, String> = DIRECTORY
        .lines()
        .skip(1)
        .filter_map(|l| l.split_once(','))
        .map(|(k, v)| (k.trim().to_lowercase(), v.trim().to_string()))
        .collect();
    let mut seen = BTreeSet::new();
    let mut cells = BTreeMap::new();
    for line in F5.lines().filter(|l| !l.trim().is_empty()) {
        let rec: Value = serde_json::from_str(line).unwrap();
        let title = rec["title"].as_str().unwrap().to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
        let authors: Vec<String> = rec["authors"].as_str().unwrap().split(';').map(|a| a.trim().to_lowercase()).collect();
        let year = rec["year"].to_string();
        if !seen.insert((title, year.clone())) {
            continue;
        }
        let team = authors
            .iter()
            .find_map(|a| directory.get(a))
            .cloned()
            .unwrap_or_else(|| "(missing)".into());
        *cells.entry(vec![team, year]).or_insert(0) += 1;
    }
    cells
}

fn csv_cells(csv: &str) -> BTreeMap<Vec<String>, u64> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let mut fields: Vec<String> = l.split(',').map(str::to_string).collect();
            let value = fields.pop().unwrap().parse().unwrap();
            (fields, value)
        })
        .collect()
}

fn expected_equipe_cells() -> BTreeMap<Vec<String>, u64> {
    [(("SITE", "2002"), 1), (("SITE", "2003"), 2), (("ORPAILLEUR", "2004"), 1)]
        .into_iter()
        .map(|((t, y), n)| (vec![t.to_string(), y.to_string()], n))
        .collect()
}

/// What the EQUIPE walk-through observes, from either front end.
#[derive(Debug, PartialEq)]
struct EquipeOutcome {
    build_error: String,
    gaps: Vec<(String, String, u64)>,
    docs_updated: u64,
    values_written: u64,
    unmatched_keys: Vec<String>,
    cells: BTreeMap<Vec<String>, u64>,
    export: String,
}

fn equipe_via_cli(dir: &std::path::Path) -> Result<EquipeOutcome, String> {
    let f5 = fixture_path("f5.jsonl");
    let csv = fixture_path("staff-directory.csv");
    let run = |args: &[&str]| cli(dir, args);

    let (code, out, err) = run(&["ingest", f5.to_str().unwrap()]);
    if code != 0 || !out.starts_with("accepted 4\nmerged_duplicates 1\n") {
        return Err(format!("ingest: {code} {out} {err}"));
    }
    let (code, _, err) = run(&["mart", "build", "team-evolution"]);
    if code != 1 {
        return Err(format!("build before enrichment exited {code}"));
    }
    let build_error = err.trim().strip_prefix("error: ").unwrap_or(err.trim()).to_string();
    let (_, out, _) = run(&["gaps", "--require", "team"]);
    let gaps = out
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(' ').collect();
            (f[0].to_string(), f[1].to_string(), f[2].parse().unwrap())
        })
        .collect();
    let (code, out, err) = run(&["enrich", csv.to_str().unwrap(), "--join", "author", "--target", "team"]);
    if code != 0 {
        return Err(format!("enrich: {err}"));
    }
    let field = |name: &str| -> String {
        out.lines()
            .find_map(|l| l.strip_prefix(name).map(|v| v.trim().to_string()))
            .unwrap_or_default()
    };
    let docs_updated = field("docs_updated").parse().unwrap();
    let values_written = field("values_written").parse().unwrap();
    let unmatched_keys = field("unmatched_keys").split(',').filter(|s| !s.is_empty()).map(str::to_string).collect();
    let (code, built, err) = run(&["mart", "build", "team-evolution"]);
    if code != 0 {
        return Err(format!("rebuild: {err}"));
    }
    let (_, export, _) = run(&["mart", "export", "team-evolution"]);
    if export != built {
        return Err("export differs from build output".into());
    }
    Ok(EquipeOutcome {
        build_error,
        gaps,
        docs_updated,
        values_written,
        unmatched_keys,
        cells: csv_cells(&built),
        export,
    })
}

async fn equipe_via_http(dir: &std::path::Path) -> Result<EquipeOutcome, String> {
    let app = app(dir);
    let r = post_raw(&app, "/documents:ingest", F5).await;
    if r.json()["accepted"] != 4 {
        return Err(format!("ingest: {}", r.text()));
    }
    let r = call(&app, Method::POST, "/marts/team-evolution:build", "").await;
    if r.status != 400 {
        return Err(format!("build before enrichment answered {}", r.status));
    }
    let build_error = r.json()["message"].as_str().unwrap_or_default().to_string();
    let gaps = get(&app, "/gaps?require=team").await.json()["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            (
                e["attribute"].as_str().unwrap().to_string(),
                e["gap_kind"].as_str().unwrap().to_string(),
                e["affected_docs"].as_u64().unwrap(),
            )
        })
        .collect();
    let r = post(
        &app,
        "/enrich",
        json!({"name": "staff-directory", "join_attr": "author", "target_attr": "team", "csv": DIRECTORY}),
    )
    .await
    .json();
    let r_built = call(&app, Method::POST, "/marts/team-evolution:build", "").await;
    if r_built.status != 201 {
        return Err(format!("rebuild: {}", r_built.text()));
    }
    let cells = get(&app, "/marts/team-evolution/cells").await.json()["cells"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (serde_json::from_value(c["key"].clone()).unwrap(), c["value"].as_u64().unwrap()))
        .collect();
    Ok(EquipeOutcome {
        build_error,
        gaps,
        docs_updated: r["docs_updated"].as_u64().unwrap(),
        values_written: r["values_written"].as_u64().unwrap(),
        unmatched_keys: serde_json::from_value(r["unmatched_keys"].clone()).unwrap(),
        cells,
        export: get(&app, "/marts/team-evolution/export").await.text(),
    })
}

#[test]
fn equipe_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let outcome = equipe_via_cli(dir.path());
    let elapsed = started.elapsed();
    let oracle = hand_join_cells();
    let (ok, detail) = match &outcome {
        Ok(o) => {
            let ok = o.build_error == "attribute not in warehouse schema: team"
                && o.gaps == [("team".to_string(), "attribute-missing".to_string(), 4)]
                && o.cells == expected_equipe_cells()
                && o.cells == oracle
                && elapsed < Duration::from_secs(5);
            (ok, format!("error {:?}, gaps {:?}, cells {:?}, {elapsed:.2?} (limit 5s)", o.build_error, o.gaps, o.cells))
        }
        Err(e) => (false, e.clone()),
    };
    report("EQUIPE scenario", ok, &detail);
    assert!(ok);
}

fn non_repetition_run(rng: &mut StdRng, identity: &str, engine: &mut Engine, steps: usize) -> (usize, usize) {
    let sid = engine.start_session(identity, "watch").unwrap();
    let mut all = Vec::new();
    for _ in 0..steps {
        if rng.random_bool(0.5) {
            all.extend(engine.recommend(identity, rng.random_range(0..6), now()).unwrap());
        } else {
            let text = gen::random_query(rng, 3).to_string();
            let a = engine.record_activity(&sid, NewActivity::request(text, vec![])).unwrap();
            if a.solution.is_empty() {
                continue;
            }
            let k = rng.random_range(0..=a.solution.len().min(3));
            let judged = a.solution.choose_multiple(rng, k).cloned().collect();
            engine
                .submit_evaluation(
                    &sid,
                    &a.activity_id,
                    Evaluation {
                        degree_of_pertinence: rng.random_range(0..=3),
                        reasons: String::new(),
                        judged_docs: judged,
                    },
                )
                .unwrap();
        }
    }
    let distinct: BTreeSet<&String> = all.iter().collect();
    (all.len(), all.len() - distinct.len())
}

#[test]
fn non_repetition() {
    let mut rng = gen::rng(0x5eed_0004);
    let mut engine = Engine::new();
    let lines = gen::random_corpus_lines(&mut rng, 200);
    engine.ingest_lines(lines.iter().map(String::as_str), &Default::default()).unwrap();
    let (mut recommended, mut duplicates) = (0, 0);
    for user in ["u1", "u2", "u3", "u4", "u5"] {
        let (n, d) = non_repetition_run(&mut rng, user, &mut engine, 1000);
        recommended += n;
        duplicates += d;
    }
    let exhausted = ["u1", "u2", "u3", "u4", "u5"]
        .iter()
        .filter(|u| engine.users().recommended_history(u).len() == engine.warehouse().len())
        .count();
    let ok = duplicates == 0;
    report(
        "non-repetition",
        ok,
        &format!(
            "5 users x 1000 steps over {} docs, {recommended} recommendations, {duplicates} duplicates, \
             {exhausted} users ran out of unseen documents",
            engine.warehouse().len()
        ),
    );
    assert!(ok);
}

fn random_input(rng: &mut StdRng, wh: &Warehouse) -> ResultSet {
    let mut ids: Vec<String> = wh.documents().iter().map(|d| d.doc_id.clone()).filter(|_| rng.random_bool(0.7)).collect();
    ids.shuffle(rng);
    ResultSet::new(ids, "q")
}

fn rank(ids: &[String], id: &str) -> usize {
    ids.iter().position(|x| x == id).unwrap()
}

/// Topic-T documents whose rank got worse after one evaluation of `judged`.
fn demotions(engine: &mut Engine, sid: &str, judged: &str, degree: u8, input: &ResultSet) -> Vec<String> {
    let before = personalize(input, &engine.profile("u"), engine.warehouse()).doc_ids;
    let a = engine.record_activity(sid, NewActivity::exploration(None, vec![judged.to_string()])).unwrap();
    engine
        .submit_evaluation(
            sid,
            &a.activity_id,
            Evaluation {
                degree_of_pertinence: degree,
                reasons: String::new(),
                judged_docs: vec![judged.to_string()],
            },
        )
        .unwrap();
    let after = personalize(input, &engine.profile("u"), engine.warehouse()).doc_ids;
    let topics = engine.warehouse().get(judged).unwrap().topics.clone();
    before
        .iter()
        .filter(|id| {
            engine.warehouse().get(id).is_some_and(|d| !d.topics.is_disjoint(&topics)) && rank(&after, id) > rank(&before, id)
        })
        .map(|id| format!("{id} {}->{}", rank(&before, id) + 1, rank(&after, id) + 1))
        .collect()
}

/// J carries {databases, olap, retrieval}, Y only databases, X olap and
/// retrieval. With no prior weights Y leads X; judging J adds 1 to Y's score
/// and 2 to X's.
fn known_counterexample() -> Vec<String> {
    let mut engine = Engine::new();
    let lines = [
        r#"{"doc_id":"J","title":"j","authors":"a","year":2004,"topics":"databases;olap;retrieval"}"#,
        r#"{"doc_id":"Y","title":"y","authors":"a","year":2004,"topics":"databases"}"#,
        r#"{"doc_id":"X","title":"x","authors":"a","year":2004,"topics":"olap;retrieval"}"#,
    ];
    engine.ingest_lines(lines, &Default::default()).unwrap();
    let sid = engine.start_session("u", "o").unwrap();
    let input = ResultSet::new(vec!["Y".into(), "X".into()], "q");
    demotions(&mut engine, &sid, "J", 1, &input)
}

#[test]
fn personalization_properties() {
    let mut rng = gen::rng(0x5eed_0005);
    let trials = 300;
    let (mut not_permutation, mut not_stable, mut scale_changed) = (0, 0, 0);
    let (mut violating, mut single_topic_trials, mut single_topic_violating) = (0, 0, 0);
    let mut first_violation = None;
    for _ in 0..trials {
        let mut engine = Engine::new();
        let lines = gen::random_corpus_lines(&mut rng, 40);
        engine.ingest_lines(lines.iter().map(String::as_str), &Default::default()).unwrap();
        let ids: Vec<String> = engine.warehouse().documents().iter().map(|d| d.doc_id.clone()).collect();
        let sid = engine.start_session("u", "o").unwrap();
        for _ in 0..rng.random_range(0..4) {
            let a = engine.record_activity(&sid, NewActivity::exploration(None, ids.clone())).unwrap();
            let judged = ids.choose_multiple(&mut rng, 2).cloned().collect();
            let degree = rng.random_range(0..=3);
            let e = Evaluation {
                degree_of_pertinence: degree,
                reasons: String::new(),
                judged_docs: judged,
            };
            engine.submit_evaluation(&sid, &a.activity_id, e).unwrap();
        }
        let input = random_input(&mut rng, engine.warehouse());
        let profile = engine.profile("u");
        let out = personalize(&input, &profile, engine.warehouse()).doc_ids;

        let (mut a, mut b) = (input.doc_ids.clone(), out.clone());
        a.sort();
        b.sort();
        not_permutation += usize::from(a != b);
        let score = |id: &String| profile.score(engine.warehouse().get(id).unwrap());
        let mut oracle = input.doc_ids.clone();
        oracle.sort_by(|x, y| score(y).partial_cmp(&score(x)).unwrap());
        not_stable += usize::from(oracle != out);
        let c = 10f64.powf(rng.random_range(-6.0..6.0));
        scale_changed += usize::from(personalize(&input, &profile.scaled(c), engine.warehouse()).doc_ids != out);

        let judged = engine
            .warehouse()
            .documents()
            .iter()
            .filter(|d| !d.topics.is_empty())
            .map(|d| d.doc_id.clone())
            .collect::<Vec<_>>()
            .choose(&mut rng)
            .cloned();
        let Some(judged) = judged else { continue };
        let single = engine.warehouse().get(&judged).unwrap().topics.len() == 1;
        let degree = rng.random_range(1..=3);
        let demoted = demotions(&mut engine, &sid, &judged, degree, &input);
        if single {
            single_topic_trials += 1;
            single_topic_violating += usize::from(!demoted.is_empty());
        }
        if !demoted.is_empty() {
            violating += 1;
            first_violation.get_or_insert_with(|| format!("judged {judged} (degree {degree}): {}", demoted.join(", ")));
        }
    }
    let known = known_counterexample();
    let permutation_ok = not_permutation == 0 && not_stable == 0;
    let scaling_ok = scale_changed == 0;
    let monotone_ok = violating == 0 && known.is_empty();
    let ok = permutation_ok && scaling_ok && monotone_ok;
    report(
        "personalization properties",
        ok,
        &format!(
            "{trials} trials; stable permutation {} ({not_permutation} non-permutations, {not_stable} unstable); \
             scaling invariance {} ({scale_changed} changed); monotonicity {} ({violating} trials demote a doc \
             sharing a judged topic, {single_topic_violating}/{single_topic_trials} with single-topic judged docs; \
             first: {}; fixed case J{{databases,olap,retrieval}} over input [Y{{databases}}, X{{olap,retrieval}}]: {})",
            verdict(permutation_ok),
            verdict(scaling_ok),
            verdict(monotone_ok),
            first_violation.as_deref().unwrap_or("none"),
            if known.is_empty() { "no demotion".to_string() } else { known.join(", ") },
        ),
    );
    assert!(ok, "personalization criterion not met; see the FAIL line");
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "holds"
    } else {
        "VIOLATED"
    }
}

#[test]
fn session_model_integrity() {
    let mut rng = gen::rng(0x5eed_0006);
    let (mut trees, mut top_level_bad, mut outside_bad, mut reopen_bad, mut sessions) = (0, 0, 0, 0, 0);
    for _ in 0..40 {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        let lines = gen::random_corpus_lines(&mut rng, 30);
        store
            .mutate(|e| e.ingest_lines(lines.iter().map(String::as_str), &Default::default()))
            .unwrap();
        let ids: Vec<String> = store.engine().warehouse().documents().iter().map(|d| d.doc_id.clone()).collect();
        let mut nodes: Vec<(String, usize)> = Vec::new();
        for _ in 0..rng.random_range(1..15) {
            let nestable: Vec<(String, usize)> = nodes.iter().filter(|(_, d)| *d < 3).cloned().collect();
            let node = if nestable.is_empty() || rng.random_bool(0.3) {
                let identity = *["u1", "u2"].choose(&mut rng).unwrap();
                (store.mutate(|e| e.start_session(identity, "objective")).unwrap(), 1)
            } else {
                let (parent, depth) = nestable.choose(&mut rng).unwrap().clone();
                (store.mutate(|e| e.start_subsession(&parent, "sub")).unwrap(), depth + 1)
            };
            nodes.push(node);
            let sid = nodes.choose(&mut rng).unwrap().0.clone();
            let k = rng.random_range(1..=ids.len());
            let solution: Vec<String> = ids.choose_multiple(&mut rng, k).cloned().collect();
            let activity = store.mutate(|e| e.record_activity(&sid, NewActivity::exploration(None, solution))).unwrap();
            let k = rng.random_range(0..=3);
            let judged: Vec<String> = ids.choose_multiple(&mut rng, k).cloned().collect();
            let evaluation = Evaluation {
                degree_of_pertinence: rng.random_range(0..=4),
                reasons: String::new(),
                judged_docs: judged,
            };
            // rejected evaluations must leave nothing behind
            let _ = store.mutate(|e| e.submit_evaluation(&sid, &activity.activity_id, evaluation).map(|_| ()));
        }
        trees += 1;
        sessions += nodes.len();
        let engine = store.engine();
        let top: BTreeSet<String> = engine.top_level_sessions(None).iter().map(|s| s.session_id.clone()).collect();
        top_level_bad += nodes.iter().filter(|(id, depth)| top.contains(id) != (*depth == 1)).count();
        for (id, _) in &nodes {
            for a in &engine.session(id).unwrap().activities {
                if let Some(e) = &a.evaluation {
                    outside_bad += usize::from(!e.judged_docs.iter().all(|d| a.solution.contains(d)));
                }
            }
        }
        let bytes = encode(store.engine());
        drop(store);
        let reopened = Store::open(dir.path()).unwrap();
        reopen_bad += usize::from(encode(reopened.engine()) != bytes);
    }
    let ok = top_level_bad == 0 && outside_bad == 0 && reopen_bad == 0;
    report(
        "session-model integrity",
        ok,
        &format!(
            "{trees} stores, {sessions} sessions up to depth 3; {top_level_bad} misplaced at top level, \
             {outside_bad} evaluations outside their solution, {reopen_bad} reopen mismatches"
        ),
    );
    assert!(ok);
}

#[tokio::test]
async fn cli_api_parity() {
    let cli_dir = tempfile::tempdir().unwrap();
    let http_dir = tempfile::tempdir().unwrap();
    let cli_outcome = equipe_via_cli(cli_dir.path());
    let http_outcome = equipe_via_http(http_dir.path()).await;
    let (ok, detail) = match (&cli_outcome, &http_outcome) {
        (Ok(c), Ok(h)) => {
            let ok = c == h && c.cells == expected_equipe_cells();
            let detail = if c == h {
                format!("identical outcomes (error, gaps, enrich report, cells, {} byte export)", c.export.len())
            } else {
                format!("cli {c:?} vs http {h:?}")
            };
            (ok, detail)
        }
        (c, h) => (false, format!("cli {c:?}, http {h:?}")),
    };
    report("CLI/API parity", ok, &detail);
    assert!(ok);
}
