use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::generalize::LayerPriority;
use super::propose::{propose_rules, CandidateRule};
use super::trigger::{estimate_trigger_probability, DEFAULT_TP_SAMPLES};
use super::InductionError;
use crate::corpus::Corpus;
use crate::grammar::{Grammar, Origin, Phase, Property, RuleId};
use crate::parser::{corpus_stats, InductionNode, ParseOutcome, ParseStats, Parser, ParserConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub parser: ParserConfig<f64>,
    pub priority: LayerPriority,
    pub tp_samples: usize,
    pub seed: u64,
    pub workers: usize,
    pub max_iterations: Option<u32>,
    pub time_budget: Option<Duration>,
    /// Rules accepted as positive without review once a stop criterion is met.
    pub auto_iterations: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            parser: ParserConfig::default(),
            priority: LayerPriority::default(),
            tp_samples: DEFAULT_TP_SAMPLES,
            seed: 0,
            workers: 1,
            max_iterations: None,
            time_budget: Some(Duration::from_secs(2 * 60 * 60)),
            auto_iterations: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIterations,
    TimeBudget,
    /// No null node generalizes to a new rule.
    Exhausted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxIterations => "iteration limit reached",
            StopReason::TimeBudget => "time budget spent",
            StopReason::Exhausted => "no candidates left",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Decisions come from the reviewer.
    Manual,
    /// Stop criteria met; the remaining rules are accepted as positive.
    Auto,
    Stopped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub iteration: u32,
    pub rule: RuleId,
    pub text: String,
    pub property: Property,
    pub frequency: usize,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// Parsing statistics recorded after a rule that changes parsing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: u32,
    pub rule: Option<RuleId>,
    /// Rules used for parsing.
    pub rules: usize,
    pub top_frequency: usize,
    pub induction_nodes: usize,
    pub stats: ParseStats,
}

pub const HISTORY_HEADER: [&str; 13] = [
    "iteration",
    "rule",
    "rules",
    "top_frequency",
    "induction_nodes",
    "sentences",
    "fully_parsed",
    "coverage",
    "tree_depth",
    "leaf_nodes",
    "null_leaf_nodes",
    "operations",
    "parse_time_ms",
];

impl IterationStats {
    pub fn csv_record(&self) -> Vec<String> {
        let s = &self.stats;
        vec![
            self.iteration.to_string(),
            self.rule.map(|r| r.to_string()).unwrap_or_default(),
            self.rules.to_string(),
            self.top_frequency.to_string(),
            self.induction_nodes.to_string(),
            s.sentences.to_string(),
            s.fully_parsed.to_string(),
            s.coverage.to_string(),
            s.tree_depth.to_string(),
            s.leaf_nodes.to_string(),
            s.null_leaf_nodes.to_string(),
            s.operations.to_string(),
            s.parse_time_ms.to_string(),
        ]
    }
}

/// Renders a stats series as CSV.
pub fn history_csv<'a>(rows: impl IntoIterator<Item = &'a IterationStats>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HISTORY_HEADER).expect("in-memory write");
    for row in rows {
        w.write_record(row.csv_record()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

struct ParsePass {
    version: u64,
    outcomes: Vec<ParseOutcome>,
    stats: ParseStats,
}

/// One grammar-induction run over a fixed corpus.
///
/// [`run_iteration`](Self::run_iteration) produces the next candidate and
/// [`apply_decision`](Self::apply_decision) settles it.
pub struct InductionSession {
    config: SessionConfig,
    corpus: Arc<Corpus>,
    grammar: Grammar,
    iteration: u32,
    stop_at: Option<u32>,
    exhausted: bool,
    pending: Option<CandidateRule>,
    decisions: Vec<Decision>,
    history: Vec<IterationStats>,
    baseline: Option<IterationStats>,
    started: Instant,
    elapsed_before: Duration,
    pass: Option<ParsePass>,
}

impl InductionSession {
    pub fn new(grammar: Grammar, corpus: Arc<Corpus>, config: SessionConfig) -> Self {
        InductionSession {
            config,
            corpus,
            grammar,
            iteration: 0,
            stop_at: None,
            exhausted: false,
            pending: None,
            decisions: Vec::new(),
            history: Vec::new(),
            baseline: None,
            started: Instant::now(),
            elapsed_before: Duration::ZERO,
            pass: None,
        }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Changes the iteration limit, e.g. when resuming with a new budget.
    pub fn set_max_iterations(&mut self, limit: Option<u32>) {
        self.config.max_iterations = limit;
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    /// Number of decisions taken so far.
    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn pending(&self) -> Option<&CandidateRule> {
        self.pending.as_ref()
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn history(&self) -> &[IterationStats] {
        &self.history
    }

    /// Statistics of the parse before the first recorded rule.
    pub fn baseline(&self) -> Option<&IterationStats> {
        self.baseline.as_ref()
    }

    pub fn elapsed(&self) -> Duration {
        self.elapsed_before + self.started.elapsed()
    }

    fn criterion(&self) -> Option<StopReason> {
        if self
            .config
            .max_iterations
            .is_some_and(|m| self.iteration >= m)
        {
            Some(StopReason::MaxIterations)
        } else if self.config.time_budget.is_some_and(|b| self.elapsed() >= b) {
            Some(StopReason::TimeBudget)
        } else {
            None
        }
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        if self.exhausted {
            return Some(StopReason::Exhausted);
        }
        let stop_at = self
            .stop_at
            .or_else(|| self.criterion().map(|_| self.iteration))?;
        if self.iteration >= stop_at + self.config.auto_iterations {
            self.criterion().or(Some(StopReason::MaxIterations))
        } else {
            None
        }
    }

    pub fn mode(&self) -> Mode {
        if self.stop_reason().is_some() {
            Mode::Stopped
        } else if self.stop_at.is_some() || self.criterion().is_some() {
            Mode::Auto
        } else {
            Mode::Manual
        }
    }

    fn latch(&mut self) {
        if self.stop_at.is_none() && self.criterion().is_some() {
            self.stop_at = Some(self.iteration);
        }
    }

    fn ensure_parsed(&mut self) -> Result<&ParsePass, InductionError> {
        let version = self.grammar.version();
        if self.pass.as_ref().map(|p| p.version) != Some(version) {
            let parser = Parser::new(&self.grammar, self.config.parser.clone());
            let outcomes = parser.parse_corpus(&self.corpus, self.config.workers);
            let stats = corpus_stats(&outcomes)?;
            self.pass = Some(ParsePass {
                version,
                outcomes,
                stats,
            });
        }
        Ok(self.pass.as_ref().expect("parse pass present"))
    }

    /// The outcomes of the latest parse pass under the current grammar.
    pub fn outcomes(&mut self) -> Result<&[ParseOutcome], InductionError> {
        Ok(&self.ensure_parsed()?.outcomes)
    }

    fn snapshot(
        &mut self,
        rule: Option<RuleId>,
        top_frequency: usize,
    ) -> Result<IterationStats, InductionError> {
        let rules = self.grammar.active_rules(Phase::Parsing).len();
        let iteration = self.iteration;
        let pass = self.ensure_parsed()?;
        Ok(IterationStats {
            iteration,
            rule,
            rules,
            top_frequency,
            induction_nodes: pass.outcomes.iter().map(|o| o.induction.len()).sum(),
            stats: pass.stats.clone(),
        })
    }

    /// Parses the corpus with the current grammar and promotes the best
    /// candidate. Returns `None`, and stops the session, when nothing is left
    /// to propose.
    pub fn run_iteration(&mut self) -> Result<Option<CandidateRule>, InductionError> {
        if self.pending.is_some() {
            return Err(InductionError::PendingDecision);
        }
        self.latch();
        if let Some(reason) = self.stop_reason() {
            return Err(InductionError::Stopped(reason));
        }
        if self.baseline.is_none() {
            self.baseline = Some(self.snapshot(None, 0)?);
        }
        let pass = self.ensure_parsed()?;
        let nodes: Vec<InductionNode> = pass
            .outcomes
            .iter()
            .flat_map(|o| o.induction.iter().cloned())
            .collect();
        let mut candidates = propose_rules(
            &nodes,
            &self.corpus,
            &self.grammar,
            &self.config.priority,
            &self.config.parser.limits,
        );
        if candidates.is_empty() {
            self.exhausted = true;
            return Ok(None);
        }
        let top = candidates.swap_remove(0);
        self.pending = Some(top.clone());
        Ok(Some(top))
    }

    /// Adds the pending candidate with `property`, estimates its trigger
    /// probability and, when the rule takes part in parsing, re-parses and
    /// records statistics.
    pub fn apply_decision(&mut self, property: Property) -> Result<RuleId, InductionError> {
        let candidate = self.pending.take().ok_or(InductionError::NoPending)?;
        let iteration = self.iteration + 1;
        let id = match self.grammar.add_rule(
            candidate.lhs.clone(),
            candidate.rhs.clone(),
            property,
            Origin::Induced(iteration),
        ) {
            Ok(id) => id,
            Err(e) => {
                self.pending = Some(candidate);
                return Err(e.into());
            }
        };
        let tp = estimate_trigger_probability(
            &candidate.rhs,
            &self.corpus,
            self.config.tp_samples,
            self.config.seed ^ u64::from(iteration).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            &self.config.parser.limits,
        )?;
        self.grammar.set_trigger_probability(id, tp)?;
        self.iteration = iteration;
        self.decisions.push(Decision {
            iteration,
            rule: id,
            text: candidate.text(),
            property,
            frequency: candidate.frequency,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        });
        if property.parses() {
            let row = self.snapshot(Some(id), candidate.frequency)?;
            self.history.push(row);
        } else if let Some(pass) = &mut self.pass {
            // rules outside parsing leave every tree unchanged
            pass.version = self.grammar.version();
        }
        self.latch();
        Ok(id)
    }

    /// Accepts candidates as positive while the session is in auto mode.
    pub fn run_auto(&mut self) -> Result<u32, InductionError> {
        let mut applied = 0;
        while self.mode() == Mode::Auto {
            if self.pending.is_none() && self.run_iteration()?.is_none() {
                break;
            }
            self.apply_decision(Property::Positive)?;
            applied += 1;
        }
        Ok(applied)
    }

    /// Writes the full session state. The state file is replaced atomically;
    /// the grammar, decision log and history files beside it are exports.
    pub fn save_checkpoint(&self, dir: impl AsRef<Path>) -> Result<(), InductionError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let state = Checkpoint {
            format: CHECKPOINT_FORMAT,
            config: self.config.clone(),
            grammar: self.grammar.to_text(),
            iteration: self.iteration,
            stop_at: self.stop_at,
            exhausted: self.exhausted,
            elapsed: self.elapsed(),
            pending: self.pending.clone(),
            decisions: self.decisions.clone(),
            history: self.history.clone(),
            baseline: self.baseline.clone(),
        };
        let json = serde_json::to_string_pretty(&state)
            .map_err(|e| InductionError::Checkpoint(e.to_string()))?;
        write_atomic(&dir.join("grammar.txt"), &state.grammar)?;
        write_atomic(&dir.join("decisions.tsv"), &decision_log(&self.decisions))?;
        write_atomic(&dir.join("history.csv"), &history_csv(&self.history))?;
        write_atomic(&dir.join("session.json"), &json)
    }

    pub fn resume(dir: impl AsRef<Path>, corpus: Arc<Corpus>) -> Result<Self, InductionError> {
        let text = fs::read_to_string(dir.as_ref().join("session.json"))?;
        let state: Checkpoint =
            serde_json::from_str(&text).map_err(|e| InductionError::Checkpoint(e.to_string()))?;
        if state.format != CHECKPOINT_FORMAT {
            return Err(InductionError::Checkpoint(format!(
                "unsupported format {}",
                state.format
            )));
        }
        Ok(InductionSession {
            config: state.config,
            corpus,
            grammar: Grammar::parse(&state.grammar)?,
            iteration: state.iteration,
            stop_at: state.stop_at,
            exhausted: state.exhausted,
            pending: state.pending,
            decisions: state.decisions,
            history: state.history,
            baseline: state.baseline,
            started: Instant::now(),
            elapsed_before: state.elapsed,
            pass: None,
        })
    }
}

const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: u32,
    config: SessionConfig,
    grammar: String,
    iteration: u32,
    stop_at: Option<u32>,
    exhausted: bool,
    elapsed: Duration,
    pending: Option<CandidateRule>,
    decisions: Vec<Decision>,
    history: Vec<IterationStats>,
    baseline: Option<IterationStats>,
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), InductionError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Decision log whose first two columns form a valid decision script.
pub fn decision_log(decisions: &[Decision]) -> String {
    let mut out = String::from("# iteration\tproperty\trule\tfrequency\ttimestamp\ttext\n");
    for d in decisions {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            d.iteration, d.property, d.rule, d.frequency, d.timestamp, d.text
        ));
    }
    out
}

/// Decisions keyed by iteration, read from `iteration <tab> property` lines.
/// Blank lines and `#` comments are skipped; extra columns are ignored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DecisionScript {
    entries: Vec<(u32, Property)>,
}

impl DecisionScript {
    pub fn new(entries: Vec<(u32, Property)>) -> Self {
        DecisionScript { entries }
    }

    pub fn entries(&self) -> &[(u32, Property)] {
        &self.entries
    }
}

impl FromStr for DecisionScript {
    type Err = InductionError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| InductionError::Script {
                line: i + 1,
                message,
            };
            let mut cols = line.split('\t');
            let it = cols.next().unwrap_or_default().trim();
            let prop = cols
                .next()
                .ok_or_else(|| err("expected `iteration<TAB>property`".into()))?
                .trim();
            let it: u32 = it
                .parse()
                .map_err(|_| err(format!("bad iteration `{it}`")))?;
            let prop: Property = prop.parse().map_err(|e| err(format!("{e}")))?;
            if entries.last().is_some_and(|&(last, _)| it <= last) {
                return Err(err(format!("iteration {it} is out of order")));
            }
            entries.push((it, prop));
        }
        Ok(DecisionScript { entries })
    }
}

/// Drives a session from a decision script until the script runs out or the
/// session stops. `after_step` runs after every applied decision, e.g. to
/// write a checkpoint. Script entries for iterations already taken are
/// skipped so a resumed session can replay the same script.
pub fn run_scripted(
    session: &mut InductionSession,
    script: &DecisionScript,
    mut after_step: impl FnMut(&InductionSession) -> Result<(), InductionError>,
) -> Result<(), InductionError> {
    let done = session.iteration();
    let mut entries = script
        .entries()
        .iter()
        .filter(|(it, _)| *it > done)
        .peekable();
    loop {
        let property = match session.mode() {
            Mode::Stopped => break,
            Mode::Auto => Property::Positive,
            Mode::Manual => {
                let Some(&&(it, property)) = entries.peek() else {
                    break;
                };
                let expected = session.iteration() + 1;
                if it != expected {
                    return Err(InductionError::ScriptMismatch {
                        expected,
                        found: it,
                    });
                }
                entries.next();
                property
            }
        };
        if session.pending().is_none() && session.run_iteration()?.is_none() {
            break;
        }
        session.apply_decision(property)?;
        after_step(session)?;
    }
    Ok(())
}

/// Number of a candidate's source nodes that the grammar now parses,
/// i.e. that no longer come out as null nodes of their class.
pub fn sources_parsed(
    grammar: &Grammar,
    corpus: &Corpus,
    candidate: &CandidateRule,
    config: &ParserConfig<f64>,
) -> usize {
    let parser = Parser::new(grammar, config.clone());
    candidate
        .sources
        .iter()
        .filter(|n| {
            corpus
                .get(&n.sentence)
                .is_some_and(|s| !parser.parse_span(s, n.span, &n.class).tree.root.is_null())
        })
        .count()
}
