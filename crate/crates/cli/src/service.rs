//! HTTP review service around an induction session.
//!
//! A worker thread owns the session and is the only writer. It publishes a
//! snapshot after every step; request handlers read snapshots and hand
//! decisions to the worker over a channel.

use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::{mpsc, Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};

use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ontogram::induction::{CandidateRule, InductionSession, IterationStats, Mode, StopReason};
use ontogram::{Corpus, Property};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Idle,
    AwaitingDecision,
    Parsing,
    Stopped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingSummary {
    pub rule: String,
    pub frequency: usize,
    pub token: String,
}

/// `status` is `awaiting-decision` exactly when `pending` is set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub session_id: String,
    pub corpus: String,
    pub grammar: String,
    pub status: Status,
    pub iteration: u32,
    pub pending: Option<PendingSummary>,
    pub stop_reason: Option<StopReason>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenView {
    pub value: Option<String>,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerView {
    pub name: String,
    /// Tokens inside the sample term.
    pub tokens: Vec<TokenView>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleView {
    pub sentence: String,
    pub class: String,
    pub start: usize,
    pub end: usize,
    pub words: Vec<String>,
    pub term: String,
    pub layers: Vec<LayerView>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateView {
    pub token: String,
    /// Iteration the decision will complete.
    pub iteration: u32,
    pub rule: String,
    pub frequency: usize,
    pub samples: Vec<SampleView>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryView {
    pub baseline: Option<IterationStats>,
    pub series: Vec<IterationStats>,
}

pub fn candidate_view(
    candidate: &CandidateRule,
    corpus: &Corpus,
    iteration: u32,
    token: String,
) -> CandidateView {
    let samples = candidate
        .samples
        .iter()
        .filter_map(|n| {
            let s = corpus.get(&n.sentence)?;
            let layers = s
                .layers()
                .iter()
                .map(|l| LayerView {
                    name: l.name().to_string(),
                    tokens: l
                        .tokens()
                        .iter()
                        .filter(|t| n.span.contains(t.span))
                        .map(|t| TokenView {
                            value: t.value.clone(),
                            start: t.span.start,
                            end: t.span.end,
                        })
                        .collect(),
                })
                .collect();
            Some(SampleView {
                sentence: n.sentence.clone(),
                class: n.class.clone(),
                start: n.span.start,
                end: n.span.end,
                words: s.words().to_vec(),
                term: s.text(n.span),
                layers,
            })
        })
        .collect();
    CandidateView {
        token,
        iteration,
        rule: candidate.text(),
        frequency: candidate.frequency,
        samples,
    }
}

#[derive(Clone, Debug)]
pub struct ServeOptions {
    pub session_id: String,
    pub corpus_path: String,
    pub grammar_path: String,
    /// Written after every step when set.
    pub checkpoint: Option<PathBuf>,
}

struct Snapshot {
    descriptor: SessionDescriptor,
    candidate: Option<CandidateView>,
    history: HistoryView,
    grammar: String,
    /// Candidate tokens a decision was accepted for.
    applied: HashSet<String>,
}

enum Command {
    Decide(Property),
    Shutdown,
}

struct Shared {
    snapshot: RwLock<Snapshot>,
    sender: Mutex<mpsc::Sender<Command>>,
}

/// Owns the worker thread; dropping it does not stop the worker, call
/// [`ServiceHandle::shutdown`].
pub struct ServiceHandle {
    shared: Arc<Shared>,
    worker: Option<JoinHandle<InductionSession>>,
}

impl ServiceHandle {
    pub fn descriptor(&self) -> SessionDescriptor {
        self.shared
            .snapshot
            .read()
            .expect("snapshot lock")
            .descriptor
            .clone()
    }

    /// Stops the worker once it is done with the current step and returns
    /// the session.
    pub fn shutdown(mut self) -> Option<InductionSession> {
        let _ = self
            .shared
            .sender
            .lock()
            .expect("sender lock")
            .send(Command::Shutdown);
        self.worker.take()?.join().ok()
    }
}

fn token_for(session_id: &str, iteration: u32) -> String {
    format!("{session_id}-{iteration}")
}

struct Worker {
    session: InductionSession,
    shared: Arc<Shared>,
    opts: ServeOptions,
    error: Option<String>,
}

impl Worker {
    fn publish(&self, working: bool) {
        let s = &self.session;
        let next = s.iteration() + 1;
        let token = token_for(&self.opts.session_id, next);
        let candidate = s
            .pending()
            .map(|c| candidate_view(c, s.corpus(), next, token.clone()));
        let status = if s.stop_reason().is_some() {
            Status::Stopped
        } else if candidate.is_some() {
            Status::AwaitingDecision
        } else if working {
            Status::Parsing
        } else {
            Status::Idle
        };
        let descriptor = SessionDescriptor {
            session_id: self.opts.session_id.clone(),
            corpus: self.opts.corpus_path.clone(),
            grammar: self.opts.grammar_path.clone(),
            status,
            iteration: s.iteration(),
            pending: candidate.as_ref().map(|c| PendingSummary {
                rule: c.rule.clone(),
                frequency: c.frequency,
                token: c.token.clone(),
            }),
            stop_reason: s.stop_reason(),
            error: self.error.clone(),
        };
        let history = HistoryView {
            baseline: s.baseline().cloned(),
            series: s.history().to_vec(),
        };
        let mut snap = self.shared.snapshot.write().expect("snapshot lock");
        snap.descriptor = descriptor;
        snap.candidate = candidate;
        snap.history = history;
        snap.grammar = s.grammar().to_text();
    }

    fn checkpoint(&mut self) {
        if let Some(dir) = &self.opts.checkpoint {
            if let Err(e) = self.session.save_checkpoint(dir) {
                self.error = Some(format!("checkpoint failed: {e}"));
            }
        }
    }

    /// Runs iterations until a reviewer decision is needed or the session
    /// stops; auto mode accepts rules without review.
    fn advance(&mut self) {
        loop {
            let mode = self.session.mode();
            match mode {
                Mode::Stopped => break,
                Mode::Manual if self.session.pending().is_some() => break,
                _ => {}
            }
            if self.session.pending().is_none() {
                self.publish(true);
                match self.session.run_iteration() {
                    Ok(Some(_)) => {}
                    Ok(None) => break,
                    Err(e) => {
                        self.error = Some(e.to_string());
                        break;
                    }
                }
            }
            if mode == Mode::Auto {
                if let Err(e) = self.session.apply_decision(Property::Positive) {
                    self.error = Some(e.to_string());
                    break;
                }
                self.checkpoint();
            }
        }
        self.checkpoint();
        self.publish(false);
    }

    fn run(mut self, rx: mpsc::Receiver<Command>) -> InductionSession {
        self.advance();
        while let Ok(cmd) = rx.recv() {
            match cmd {
                Command::Decide(property) => {
                    self.publish(true);
                    match self.session.apply_decision(property) {
                        Ok(_) => {
                            self.error = None;
                            self.checkpoint();
                            self.advance();
                        }
                        Err(e) => {
                            self.error = Some(e.to_string());
                            self.publish(false);
                        }
                    }
                }
                Command::Shutdown => break,
            }
        }
        self.session
    }
}

/// Starts the session worker and returns the routes serving it.
pub fn spawn(session: InductionSession, opts: ServeOptions) -> (Router, ServiceHandle) {
    let (tx, rx) = mpsc::channel();
    let shared = Arc::new(Shared {
        snapshot: RwLock::new(Snapshot {
            descriptor: SessionDescriptor {
                session_id: opts.session_id.clone(),
                corpus: opts.corpus_path.clone(),
                grammar: opts.grammar_path.clone(),
                status: Status::Parsing,
                iteration: session.iteration(),
                pending: None,
                stop_reason: None,
                error: None,
            },
            candidate: None,
            history: HistoryView::default(),
            grammar: session.grammar().to_text(),
            applied: HashSet::new(),
        }),
        sender: Mutex::new(tx),
    });
    let worker = Worker {
        session,
        shared: Arc::clone(&shared),
        opts,
        error: None,
    };
    let handle = thread::Builder::new()
        .name("induction-session".into())
        .spawn(move || worker.run(rx))
        .expect("spawn session worker");
    let router = Router::new()
        .route("/session", get(get_session))
        .route("/session/candidate", get(get_candidate))
        .route("/session/decision", post(post_decision))
        .route("/session/history", get(get_history))
        .route("/grammar", get(get_grammar))
        .with_state(Arc::clone(&shared));
    (
        router,
        ServiceHandle {
            shared,
            worker: Some(handle),
        },
    )
}

type AppState = State<Arc<Shared>>;

async fn get_session(State(app): AppState) -> Json<SessionDescriptor> {
    Json(
        app.snapshot
            .read()
            .expect("snapshot lock")
            .descriptor
            .clone(),
    )
}

async fn get_candidate(State(app): AppState) -> Response {
    let snap = app.snapshot.read().expect("snapshot lock");
    match &snap.candidate {
        Some(c) => Json(c.clone()).into_response(),
        None => (
            StatusCode::NOT_FOUND,
            Json(json!({"error": "no pending candidate", "status": snap.descriptor.status})),
        )
            .into_response(),
    }
}

async fn get_history(State(app): AppState) -> Json<HistoryView> {
    Json(app.snapshot.read().expect("snapshot lock").history.clone())
}

async fn get_grammar(State(app): AppState) -> Response {
    let text = app.snapshot.read().expect("snapshot lock").grammar.clone();
    ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response()
}

#[derive(Debug, Deserialize)]
struct DecisionBody {
    property: String,
    #[serde(default)]
    token: Option<String>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({"error": message.into()}))).into_response()
}

async fn post_decision(
    State(app): AppState,
    body: Result<Json<DecisionBody>, axum::extract::rejection::JsonRejection>,
) -> Response {
    let Json(body) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let property: Property = match body.property.parse() {
        Ok(p) => p,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("{e}")),
    };
    let mut snap = app.snapshot.write().expect("snapshot lock");
    if let Some(t) = &body.token {
        if snap.applied.contains(t) {
            return (
                StatusCode::OK,
                Json(json!({"status": "already-applied", "token": t})),
            )
                .into_response();
        }
    }
    let Some(candidate) = snap.candidate.clone() else {
        return (
            StatusCode::CONFLICT,
            Json(json!({"error": "no pending candidate", "status": snap.descriptor.status})),
        )
            .into_response();
    };
    if body.token.as_ref().is_some_and(|t| *t != candidate.token) {
        return error(
            StatusCode::CONFLICT,
            format!(
                "token does not match the pending candidate {}",
                candidate.token
            ),
        );
    }
    if app
        .sender
        .lock()
        .expect("sender lock")
        .send(Command::Decide(property))
        .is_err()
    {
        return error(
            StatusCode::SERVICE_UNAVAILABLE,
            "session worker has stopped",
        );
    }
    snap.applied.insert(candidate.token.clone());
    snap.candidate = None;
    snap.descriptor.pending = None;
    snap.descriptor.status = Status::Parsing;
    (
        StatusCode::ACCEPTED,
        Json(json!({"status": "accepted", "token": candidate.token, "iteration": candidate.iteration, "property": property})),
    )
        .into_response()
}

/// Serves the routes until the future is dropped or ctrl-c arrives.
pub async fn serve(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
