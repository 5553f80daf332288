use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use ontogram::induction::{
    run_scripted, DecisionScript, InductionSession, IterationStats, SessionConfig,
};
use ontogram::{load_corpus, load_grammar, Corpus, Grammar};
use ontogram_cli::service::{
    spawn, CandidateView, HistoryView, ServeOptions, SessionDescriptor, Status,
};
use serde_json::{json, Value};
use tower::ServiceExt;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/synthetic")
        .join(name)
}

fn corpus() -> Arc<Corpus> {
    Arc::new(load_corpus(data("corpus.jsonl")).unwrap())
}

fn seed() -> Grammar {
    load_grammar(data("seed_grammar.txt")).unwrap()
}

fn script() -> DecisionScript {
    std::fs::read_to_string(data("decisions.txt"))
        .unwrap()
        .parse()
        .unwrap()
}

fn options() -> ServeOptions {
    ServeOptions {
        session_id: "t".into(),
        corpus_path: "corpus.jsonl".into(),
        grammar_path: "seed_grammar.txt".into(),
        checkpoint: None,
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}

async fn get_json<T: serde::de::DeserializeOwned>(app: &Router, uri: &str) -> T {
    let (status, body) = call(app, "GET", uri, None).await;
    assert_eq!(
        status,
        StatusCode::OK,
        "{uri}: {}",
        String::from_utf8_lossy(&body)
    );
    serde_json::from_slice(&body).unwrap()
}

/// Polls until the worker has settled at `iteration` decisions.
async fn settle(app: &Router, iteration: u32) -> SessionDescriptor {
    let deadline = Instant::now() + Duration::from_secs(60);
    loop {
        let d: SessionDescriptor = get_json(app, "/session").await;
        if d.iteration == iteration && d.status != Status::Parsing {
            return d;
        }
        assert!(Instant::now() < deadline, "session stuck at {d:?}");
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
}

async fn grammar_text(app: &Router) -> String {
    let (status, body) = call(app, "GET", "/grammar", None).await;
    assert_eq!(status, StatusCode::OK);
    String::from_utf8(body).unwrap()
}

#[tokio::test(flavor = "multi_thread")]
async fn served_decisions_reproduce_the_scripted_grammar() {
    let script = script();
    let mut scripted = InductionSession::new(seed(), corpus(), SessionConfig::default());
    run_scripted(&mut scripted, &script, |_| Ok(())).unwrap();
    let expected = scripted.grammar().to_text();

    let session = InductionSession::new(seed(), corpus(), SessionConfig::default());
    let (app, handle) = spawn(session, options());
    for &(iteration, property) in script.entries() {
        let d = settle(&app, iteration - 1).await;
        assert_eq!(d.status, Status::AwaitingDecision);
        let token = d.pending.unwrap().token;
        let (status, body) = call(
            &app,
            "POST",
            "/session/decision",
            Some(json!({"property": property.to_string(), "token": token})),
        )
        .await;
        assert_eq!(
            status,
            StatusCode::ACCEPTED,
            "{}",
            String::from_utf8_lossy(&body)
        );
    }
    settle(&app, script.entries().len() as u32).await;
    let served = grammar_text(&app).await;
    assert_eq!(served, expected);
    let golden = std::fs::read_to_string(data("grammar_induced.txt")).unwrap();
    assert_eq!(served, golden);

    let history: HistoryView = get_json(&app, "/session/history").await;
    let untimed = |rows: &[IterationStats]| -> Vec<IterationStats> {
        rows.iter()
            .cloned()
            .map(|mut r| {
                r.stats.parse_time_ms = 0.0;
                r
            })
            .collect()
    };
    assert_eq!(untimed(&history.series), untimed(scripted.history()));
    assert!(history.baseline.is_some());
    handle.shutdown().unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn candidate_view_shows_rule_and_samples() {
    let session = InductionSession::new(seed(), corpus(), SessionConfig::default());
    let (app, handle) = spawn(session, options());
    let d = settle(&app, 0).await;
    let c: CandidateView = get_json(&app, "/session/candidate").await;
    assert_eq!(c.rule, "<Relation> ::= <Person> was <Event> in <Location>");
    assert_eq!(c.token, d.pending.as_ref().unwrap().token);
    assert_eq!(c.iteration, 1);
    assert_eq!(c.frequency, 74);
    assert!(!c.samples.is_empty() && c.samples.len() <= 10);
    // the rule text reads back as a rule
    Grammar::parse(&format!("positive\t{}\n", c.rule)).unwrap();
    for s in &c.samples {
        assert_eq!(s.term, s.words[s.start..s.end].join(" "));
        let class = s.layers.iter().find(|l| l.name == "class").unwrap();
        assert!(class
            .tokens
            .iter()
            .all(|t| s.start <= t.start && t.end <= s.end));
    }
    handle.shutdown();
}

#[tokio::test(flavor = "multi_thread")]
async fn repeated_token_is_applied_once() {
    let session = InductionSession::new(seed(), corpus(), SessionConfig::default());
    let (app, handle) = spawn(session, options());
    let token = settle(&app, 0).await.pending.unwrap().token;
    let body = json!({"property": "positive", "token": token});
    let (first, _) = call(&app, "POST", "/session/decision", Some(body.clone())).await;
    assert_eq!(first, StatusCode::ACCEPTED);
    let (second, reply) = call(&app, "POST", "/session/decision", Some(body.clone())).await;
    assert_eq!(second, StatusCode::OK);
    let reply: Value = serde_json::from_slice(&reply).unwrap();
    assert_eq!(reply["status"], "already-applied");
    let d = settle(&app, 1).await;
    assert_eq!(d.iteration, 1);
    // and once more after the worker moved on
    let (third, _) = call(&app, "POST", "/session/decision", Some(body)).await;
    assert_eq!(third, StatusCode::OK);
    tokio::time::sleep(Duration::from_millis(50)).await;
    assert_eq!(settle(&app, 1).await.iteration, 1);
    assert_eq!(
        load_grammar_len(&grammar_text(&app).await),
        seed().len() + 1
    );
    handle.shutdown();
}

fn load_grammar_len(text: &str) -> usize {
    Grammar::parse(text).unwrap().len()
}

#[tokio::test(flavor = "multi_thread")]
async fn malformed_and_conflicting_decisions_are_rejected() {
    let session = InductionSession::new(seed(), corpus(), SessionConfig::default());
    let (app, handle) = spawn(session, options());
    settle(&app, 0).await;
    let (status, _) = call(
        &app,
        "POST",
        "/session/decision",
        Some(json!({"property": "maybe"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &app,
        "POST",
        "/session/decision",
        Some(json!({"nothing": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &app,
        "POST",
        "/session/decision",
        Some(json!({"property": "positive", "token": "t-99"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(settle(&app, 0).await.status, Status::AwaitingDecision);
    handle.shutdown();
}

#[tokio::test(flavor = "multi_thread")]
async fn stopped_session_has_no_candidate() {
    let config = SessionConfig {
        max_iterations: Some(0),
        ..SessionConfig::default()
    };
    let session = InductionSession::new(seed(), corpus(), config);
    let (app, handle) = spawn(session, options());
    let d = settle(&app, 0).await;
    assert_eq!(d.status, Status::Stopped);
    assert!(d.pending.is_none());
    let (status, _) = call(&app, "GET", "/session/candidate", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(
        &app,
        "POST",
        "/session/decision",
        Some(json!({"property": "positive"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(grammar_text(&app).await, seed().to_text());
    handle.shutdown();
}

#[tokio::test(flavor = "multi_thread")]
async fn checkpoint_resume_keeps_the_pending_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let opts = ServeOptions {
        checkpoint: Some(dir.path().to_path_buf()),
        ..options()
    };
    let session = InductionSession::new(seed(), corpus(), SessionConfig::default());
    let (app, handle) = spawn(session, opts);
    let token = settle(&app, 0).await.pending.unwrap().token;
    call(
        &app,
        "POST",
        "/session/decision",
        Some(json!({"property": "positive", "token": token})),
    )
    .await;
    let d = settle(&app, 1).await;
    let pending = d.pending.unwrap().rule;
    // simulates a crash: the worker is left running and the state is reread
    let resumed = InductionSession::resume(dir.path(), corpus()).unwrap();
    assert_eq!(resumed.iteration(), 1);
    assert_eq!(resumed.pending().unwrap().text(), pending);
    drop(handle);
}
