use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::features;
use super::locate::{argument_occurrences, locate_entity_nodes, ConversionFailure, MatchConfig};
use super::models::{train, ModelKind, RelationModel, TrainConfig, TrainingTree};
use super::vtree::{candidates, extract_variable_tree, NodePath, Scope};
use super::{RelationExample, RelextError};
use crate::corpus::{Corpus, Span};
use crate::parser::SemanticNode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub matching: MatchConfig,
    pub train: TrainConfig,
    pub folds: usize,
    /// Seeds the subject-to-fold assignment.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            matching: MatchConfig::default(),
            train: TrainConfig::default(),
            folds: 10,
            seed: 0,
        }
    }
}

/// A relation together with where its arguments occur and, when conversion
/// succeeded, its entity nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedExample {
    pub example: RelationExample,
    /// Occurrences per argument; empty lists when the sentence is missing.
    pub occurrences: Vec<Vec<Span>>,
    pub located: Result<Vec<NodePath>, ConversionFailure>,
}

impl PreparedExample {
    pub fn is_eligible(&self) -> bool {
        !matches!(self.located, Err(ConversionFailure::NoMatch { .. }))
    }

    /// Whether predicted argument spans denote this relation.
    pub fn matches(&self, spans: &[Span]) -> bool {
        spans.len() == self.occurrences.len()
            && spans
                .iter()
                .zip(&self.occurrences)
                .all(|(s, occ)| occ.contains(s))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Prepared {
    pub examples: Vec<PreparedExample>,
}

/// Relation examples against the trees of their subject sentences, keyed by
/// sentence id.
pub fn prepare(
    examples: &[RelationExample],
    corpus: &Corpus,
    trees: &HashMap<String, SemanticNode>,
    cfg: &MatchConfig,
) -> Prepared {
    let examples = examples
        .par_iter()
        .map(|e| {
            let sentence = corpus.get(&e.subject);
            let occurrences: Vec<Vec<Span>> = e
                .arguments
                .iter()
                .map(|a| {
                    sentence
                        .map(|s| argument_occurrences(a, s, cfg))
                        .unwrap_or_default()
                })
                .collect();
            let located = match (sentence, trees.get(&e.subject)) {
                (Some(s), Some(root)) => locate_entity_nodes(e, s, root, cfg),
                _ => Err(ConversionFailure::NoMatch { argument: 0 }),
            };
            PreparedExample {
                example: e.clone(),
                occurrences,
                located,
            }
        })
        .collect();
    Prepared { examples }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionStats {
    pub eligible: usize,
    pub converted: usize,
    pub split: usize,
    pub subterm: usize,
}

impl ConversionStats {
    /// Converted, split and subterm shares of the eligible relations.
    pub fn fractions(&self) -> (f64, f64, f64) {
        let n = self.eligible.max(1) as f64;
        (
            self.converted as f64 / n,
            self.split as f64 / n,
            self.subterm as f64 / n,
        )
    }
}

impl Prepared {
    pub fn conversion(&self) -> ConversionStats {
        let mut s = ConversionStats::default();
        for e in &self.examples {
            match e.located {
                Ok(_) => s.converted += 1,
                Err(ConversionFailure::Split { .. }) => s.split += 1,
                Err(ConversionFailure::Subterm { .. }) => s.subterm += 1,
                Err(ConversionFailure::NoMatch { .. }) => continue,
            }
            s.eligible += 1;
        }
        s
    }

    pub fn predicates(&self) -> BTreeSet<&str> {
        self.examples
            .iter()
            .map(|e| e.example.predicate.as_str())
            .collect()
    }
}

/// Raw tallies; [`Metrics`] are derived from sums of these.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub predictions: usize,
    /// Predictions denoting a known relation.
    pub correct: usize,
    pub eligible: usize,
    pub converted: usize,
    /// Eligible relations found by at least one prediction.
    pub hits: usize,
    pub split: usize,
    pub subterm: usize,
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            predictions: self.predictions + o.predictions,
            correct: self.correct + o.correct,
            eligible: self.eligible + o.eligible,
            converted: self.converted + o.converted,
            hits: self.hits + o.hits,
            split: self.split + o.split,
            subterm: self.subterm + o.subterm,
        }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub converted_recall: f64,
    pub f1: f64,
    pub converted_f1: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl Counts {
    pub fn metrics(&self) -> Metrics {
        let precision = ratio(self.correct, self.predictions);
        let recall = ratio(self.hits, self.eligible);
        let converted_recall = ratio(self.hits, self.converted);
        Metrics {
            precision,
            recall,
            converted_recall,
            f1: harmonic(precision, recall),
            converted_f1: harmonic(precision, converted_recall),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub per_predicate: BTreeMap<String, Counts>,
}

impl EvalReport {
    /// Micro-averaged over predicates.
    pub fn total(&self) -> Counts {
        self.per_predicate
            .values()
            .fold(Counts::default(), |a, &b| a + b)
    }

    pub fn metrics(&self) -> Metrics {
        self.total().metrics()
    }
}

fn mix(seed: u64, text: &str) -> u64 {
    text.bytes().fold(seed ^ 0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// One candidate subtree of a sentence with its argument spans and, for the
/// linear models, its features.
#[derive(Clone, Debug)]
pub struct PoolEntry {
    pub entities: Vec<NodePath>,
    pub spans: Vec<Span>,
    pub tree: TrainingTree,
}

/// Candidate subtrees of every sentence, computed once per model kind and
/// arity and shared by all folds and predicates.
#[derive(Clone, Debug, Default)]
pub struct CandidatePool {
    pub kind: Option<ModelKind>,
    pub arity: usize,
    pub by_sentence: BTreeMap<String, Vec<PoolEntry>>,
}

impl CandidatePool {
    pub fn build(
        kind: ModelKind,
        arity: usize,
        ids: &[&str],
        corpus: &Corpus,
        trees: &HashMap<String, SemanticNode>,
        scope: Scope,
    ) -> Self {
        let set = kind.feature_set();
        let by_sentence = ids
            .par_iter()
            .filter_map(|&id| {
                let (sentence, root) = (corpus.get(id)?, trees.get(id)?);
                let entries = candidates(root, arity, scope)
                    .into_iter()
                    .map(|c| {
                        let features = set
                            .map(|s| features(s, root, sentence, &c.entities, &c.tree))
                            .unwrap_or_default();
                        let spans = c
                            .entities
                            .iter()
                            .map(|p| root.at(p).expect("candidate paths exist").span)
                            .collect();
                        PoolEntry {
                            entities: c.entities,
                            spans,
                            tree: TrainingTree {
                                tree: c.tree,
                                features,
                            },
                        }
                    })
                    .collect();
                Some((id.to_string(), entries))
            })
            .collect();
        CandidatePool {
            kind: Some(kind),
            arity,
            by_sentence,
        }
    }
}

/// Positive trees of `examples` plus, for the linear models, non-relation
/// candidates sampled from the training sentences.
fn training_set(
    kind: ModelKind,
    predicate: &str,
    examples: &[&PreparedExample],
    train_ids: &[&str],
    pool: &CandidatePool,
    corpus: &Corpus,
    trees: &HashMap<String, SemanticNode>,
    cfg: &TrainConfig,
) -> Result<(Vec<TrainingTree>, Vec<TrainingTree>), RelextError> {
    let set = kind.feature_set();
    let mut golds: BTreeMap<&str, Vec<&Vec<NodePath>>> = BTreeMap::new();
    let mut positives = Vec::new();
    for e in examples {
        let Ok(paths) = &e.located else { continue };
        let id = e.example.subject.as_str();
        let (Some(sentence), Some(root)) = (corpus.get(id), trees.get(id)) else {
            continue;
        };
        golds.entry(id).or_default().push(paths);
        let tree = extract_variable_tree(root, paths)?;
        let features = set
            .map(|s| features(s, root, sentence, paths, &tree))
            .unwrap_or_default();
        positives.push(TrainingTree { tree, features });
    }
    let mut negatives = Vec::new();
    if set.is_some() {
        for &id in train_ids {
            let Some(entries) = pool.by_sentence.get(id) else {
                continue;
            };
            let known = golds.get(id).map_or(&[][..], Vec::as_slice);
            let mut options: Vec<&PoolEntry> = entries
                .iter()
                .filter(|c| !known.iter().any(|g| **g == c.entities))
                .collect();
            let keep = (cfg.negative_ratio * known.len().max(1)).min(options.len());
            let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, &format!("{predicate}\t{id}")));
            options.shuffle(&mut rng);
            negatives.extend(options.into_iter().take(keep).map(|c| c.tree.clone()));
        }
    }
    Ok((positives, negatives))
}

/// Every sentence that has a tree, in corpus order.
fn parsed_ids<'a>(corpus: &'a Corpus, trees: &HashMap<String, SemanticNode>) -> Vec<&'a str> {
    corpus
        .sentences()
        .iter()
        .map(|s| s.id())
        .filter(|id| trees.contains_key(*id))
        .collect()
}

fn arity_of(prepared: &Prepared, predicate: &str) -> usize {
    prepared
        .examples
        .iter()
        .find(|e| e.example.predicate == predicate)
        .map_or(1, |e| e.example.arguments.len())
}

/// Trains one model for `predicate` on every sentence of the corpus.
pub fn train_relation(
    kind: ModelKind,
    predicate: &str,
    prepared: &Prepared,
    corpus: &Corpus,
    trees: &HashMap<String, SemanticNode>,
    cfg: &TrainConfig,
) -> Result<RelationModel, RelextError> {
    let ids = parsed_ids(corpus, trees);
    let arity = arity_of(prepared, predicate);
    let pool = match kind.feature_set() {
        Some(_) => CandidatePool::build(kind, arity, &ids, corpus, trees, cfg.scope),
        None => CandidatePool::default(),
    };
    let examples: Vec<&PreparedExample> = prepared
        .examples
        .iter()
        .filter(|e| e.example.predicate == predicate)
        .collect();
    let (pos, neg) = training_set(kind, predicate, &examples, &ids, &pool, corpus, trees, cfg)?;
    train(kind, &pos, &neg, cfg)
}

/// Assigns each sentence a fold by shuffling the ids in sorted order.
pub fn fold_assignment(ids: &[&str], folds: usize, seed: u64) -> HashMap<String, usize> {
    let mut sorted: Vec<&str> = ids
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    sorted.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s.to_string(), i % folds.max(1)))
        .collect()
}

/// Scores a model on the test sentences: every accepted candidate is a
/// prediction, checked against the known relations of its sentence.
pub fn score(
    model: Option<&RelationModel>,
    test_ids: &[&str],
    golds: &[&PreparedExample],
    pool: &CandidatePool,
) -> Counts {
    let mut counts = Counts::default();
    let mut by_subject: BTreeMap<&str, Vec<&PreparedExample>> = BTreeMap::new();
    for e in golds {
        by_subject
            .entry(e.example.subject.as_str())
            .or_default()
            .push(e);
    }
    for &id in test_ids {
        let known = by_subject.get(id).map_or(&[][..], Vec::as_slice);
        for g in known {
            match g.located {
                Ok(_) => counts.converted += 1,
                Err(ConversionFailure::Split { .. }) => counts.split += 1,
                Err(ConversionFailure::Subterm { .. }) => counts.subterm += 1,
                Err(ConversionFailure::NoMatch { .. }) => continue,
            }
            counts.eligible += 1;
        }
        let (Some(model), Some(entries)) = (model, pool.by_sentence.get(id)) else {
            continue;
        };
        let mut predicted: Vec<&[Span]> = Vec::new();
        for c in entries {
            if model.accepts(&c.tree.tree, &c.tree.features)
                && !predicted.contains(&c.spans.as_slice())
            {
                predicted.push(&c.spans);
            }
        }
        counts.predictions += predicted.len();
        counts.correct += predicted
            .iter()
            .filter(|p| known.iter().any(|g| g.is_eligible() && g.matches(p)))
            .count();
        counts.hits += known
            .iter()
            .filter(|g| g.is_eligible() && predicted.iter().any(|p| g.matches(p)))
            .count();
    }
    counts
}

/// K-fold cross-validation with folds drawn over the parsed sentences, one
/// model per predicate and fold.
pub fn cross_validate(
    kind: ModelKind,
    prepared: &Prepared,
    corpus: &Corpus,
    trees: &HashMap<String, SemanticNode>,
    cfg: &EvalConfig,
) -> Result<EvalReport, RelextError> {
    let ids = parsed_ids(corpus, trees);
    let fold_of = fold_assignment(&ids, cfg.folds, cfg.seed);
    let folds = cfg.folds.max(1);
    let predicates: Vec<&str> = prepared.predicates().into_iter().collect();
    let mut pools: BTreeMap<usize, CandidatePool> = BTreeMap::new();
    for &p in &predicates {
        let arity = arity_of(prepared, p);
        pools.entry(arity).or_insert_with(|| {
            CandidatePool::build(kind, arity, &ids, corpus, trees, cfg.train.scope)
        });
    }
    let jobs: Vec<(&str, usize)> = predicates
        .iter()
        .flat_map(|&p| (0..folds).map(move |f| (p, f)))
        .collect();
    let results: Vec<Result<(&str, Counts), RelextError>> = jobs
        .par_iter()
        .map(|&(predicate, fold)| {
            let pool = &pools[&arity_of(prepared, predicate)];
            let (test_ids, train_ids): (Vec<&str>, Vec<&str>) =
                ids.iter().partition(|id| fold_of[**id] == fold);
            let (test, train_ex): (Vec<&PreparedExample>, Vec<&PreparedExample>) = prepared
                .examples
                .iter()
                .filter(|e| e.example.predicate == predicate)
                .partition(|e| fold_of.get(&e.example.subject) == Some(&fold));
            let (pos, neg) = training_set(
                kind, predicate, &train_ex, &train_ids, pool, corpus, trees, &cfg.train,
            )?;
            let model = match train(kind, &pos, &neg, &cfg.train) {
                Ok(m) => Some(m),
                Err(RelextError::NoPositives | RelextError::NoNegatives(_)) => None,
                Err(e) => return Err(e),
            };
            Ok((predicate, score(model.as_ref(), &test_ids, &test, pool)))
        })
        .collect();
    let mut per_predicate: BTreeMap<String, Counts> = BTreeMap::new();
    for r in results {
        let (p, c) = r?;
        *per_predicate.entry(p.to_string()).or_default() += c;
    }
    Ok(EvalReport {
        model: kind,
        per_predicate,
    })
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

/// Plain-text comparison table, one row per model, followed by per-relation
/// F1 and the conversion breakdown.
pub fn render_report(reports: &[EvalReport], conversion: &ConversionStats) -> String {
    let mut out = String::new();
    let header = [
        "Model",
        "Precision",
        "Converted Recall",
        "Recall",
        "Converted F1",
        "F1",
    ];
    let rows: Vec<[String; 6]> = reports
        .iter()
        .map(|r| {
            let m = r.metrics();
            [
                r.model.to_string(),
                pct(m.precision),
                pct(m.converted_recall),
                pct(m.recall),
                pct(m.converted_f1),
                pct(m.f1),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..6)
        .map(|i| {
            rows.iter()
                .map(|r| r[i].len())
                .chain([header[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[&str]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    out.push_str(&line(&header));
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for r in &rows {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        out.push_str(&line(&cells));
    }

    let predicates: BTreeSet<&str> = reports
        .iter()
        .flat_map(|r| r.per_predicate.keys().map(String::as_str))
        .collect();
    if !predicates.is_empty() {
        out.push_str("\nF1 by relation\n");
        let _ = write!(out, "{:<20}", "relation");
        for r in reports {
            let _ = write!(out, " {:>6}", r.model.to_string());
        }
        out.push('\n');
        for p in predicates {
            let _ = write!(out, "{p:<20}");
            for r in reports {
                let f1 = r
                    .per_predicate
                    .get(p)
                    .map(|c| c.metrics().f1)
                    .unwrap_or(0.0);
                let _ = write!(out, " {:>6}", pct(f1));
            }
            out.push('\n');
        }
    }

    let (c, s, t) = conversion.fractions();
    let _ = writeln!(
        out,
        "\n{} eligible relations: {}% converted, {}% split, {}% subterm",
        conversion.eligible,
        pct(c),
        pct(s),
        pct(t)
    );
    out
}
