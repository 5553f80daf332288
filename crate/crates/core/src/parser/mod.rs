//! Top-down recursive-descent parsing into semantic trees.
//!
//! For every `(term, non-terminal)` pair the parser tries each eligible rule,
//! expands every ambiguous match recursively, and keeps the candidate with
//! the highest reliability. Terms no rule can expand become null nodes; all
//! nodes that are not fully parsed are collected for rule induction.

mod dump;
mod matching;
mod reliability;
mod stats;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LayeredSentence, Span};
use crate::grammar::{Grammar, Phase, Rule, RuleId, Symbol};
use crate::scalar::Scalar;

pub use dump::{read_tree_dump, write_tree_dump, TreeRecord};
pub use matching::{match_pattern, MatchLimits};
pub use reliability::{partial_score, reliability, ReliabilityParams};
pub use stats::{corpus_stats, ParseStats, StatsError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeStatus {
    FullyParsed,
    PartiallyParsed,
    Null,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticNode {
    pub class: String,
    #[serde(rename = "rule_id")]
    pub rule: Option<RuleId>,
    #[serde(with = "dump::span_pair")]
    pub span: Span,
    pub status: NodeStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<SemanticNode>,
}

impl SemanticNode {
    pub fn null(class: impl Into<String>, span: Span) -> Self {
        SemanticNode {
            class: class.into(),
            rule: None,
            span,
            status: NodeStatus::Null,
            children: Vec::new(),
        }
    }

    pub fn is_null(&self) -> bool {
        self.status == NodeStatus::Null
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Pre-order traversal.
    pub fn iter(&self) -> impl Iterator<Item = &SemanticNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let n = stack.pop()?;
            stack.extend(n.children.iter().rev());
            Some(n)
        })
    }

    /// Number of nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(SemanticNode::depth)
            .max()
            .unwrap_or(0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &SemanticNode> {
        self.iter().filter(|n| n.is_leaf())
    }

    /// Node reached by following child indices from this node.
    pub fn at(&self, path: &[usize]) -> Option<&SemanticNode> {
        path.iter().try_fold(self, |n, &i| n.children.get(i))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticTree {
    pub sentence: String,
    pub start: String,
    pub grammar_version: u64,
    pub root: SemanticNode,
}

impl SemanticTree {
    pub fn is_fully_parsed(&self) -> bool {
        self.root.status == NodeStatus::FullyParsed
    }
}

/// A node handed to rule induction: any parse result that was not fully
/// parsed, including losing ambiguous candidates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InductionNode {
    pub sentence: String,
    pub class: String,
    #[serde(with = "dump::span_pair")]
    pub span: Span,
    #[serde(rename = "rule_id")]
    pub rule: Option<RuleId>,
    pub status: NodeStatus,
}

impl InductionNode {
    pub fn is_null(&self) -> bool {
        self.status == NodeStatus::Null
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseOutcome {
    pub tree: SemanticTree,
    /// Deduplicated by `(span, class)`, in first-visit order.
    pub induction: Vec<InductionNode>,
    /// Number of `parse` invocations, memo hits included.
    pub operations: u64,
    pub aborted: bool,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParserConfig<F> {
    pub reliability: ReliabilityParams<F>,
    pub limits: MatchLimits,
    /// Per-sentence cap on parse invocations; exceeding it yields a null root.
    pub max_operations: u64,
    pub memoize: bool,
}

impl<F: Scalar> Default for ParserConfig<F> {
    fn default() -> Self {
        ParserConfig {
            reliability: ReliabilityParams::default(),
            limits: MatchLimits::default(),
            max_operations: 1_000_000,
            memoize: true,
        }
    }
}

/// A parser bound to one immutable grammar snapshot.
pub struct Parser<'g, F> {
    grammar: &'g Grammar,
    config: ParserConfig<F>,
    index: HashMap<String, Vec<Rule>>,
    universal: Vec<&'g Rule>,
}

impl<'g, F: Scalar> Parser<'g, F> {
    pub fn new(grammar: &'g Grammar, config: ParserConfig<F>) -> Self {
        let universal: Vec<&Rule> = grammar
            .active_rules(Phase::Parsing)
            .into_iter()
            .filter(|r| r.is_universal())
            .collect();
        let index = grammar
            .non_terminals()
            .iter()
            .map(|nt| (nt.clone(), grammar.rules_for(nt, Phase::Parsing)))
            .collect();
        Parser {
            grammar,
            config,
            index,
            universal,
        }
    }

    pub fn grammar(&self) -> &'g Grammar {
        self.grammar
    }

    pub fn config(&self) -> &ParserConfig<F> {
        &self.config
    }

    fn rules_for(&self, class: &str) -> std::borrow::Cow<'_, [Rule]> {
        match self.index.get(class) {
            Some(rules) => std::borrow::Cow::Borrowed(rules),
            None => std::borrow::Cow::Owned(
                self.universal
                    .iter()
                    .filter_map(|r| crate::grammar::instantiate_universal(r, class).ok())
                    .collect(),
            ),
        }
    }

    /// Parses the whole sentence from the grammar's start symbol.
    pub fn parse(&self, sentence: &LayeredSentence) -> ParseOutcome {
        self.parse_span(sentence, sentence.full_span(), self.grammar.start())
    }

    /// Parses one term of a sentence as the given class.
    pub fn parse_span(&self, sentence: &LayeredSentence, span: Span, class: &str) -> ParseOutcome {
        let t0 = Instant::now();
        let mut run = Run {
            parser: self,
            sentence,
            memo: HashMap::new(),
            active: HashMap::new(),
            induction: IndexMap::new(),
            ops: 0,
            aborted: false,
        };
        let (built, _, _) = run.parse(span, Rc::from(class), 0);
        let (root, induction) = if run.aborted {
            let root = SemanticNode::null(class, span);
            let node = induction_node(sentence.id(), &root);
            (root, vec![node])
        } else {
            (
                built.node.to_owned_node(),
                run.induction.into_values().collect(),
            )
        };
        ParseOutcome {
            tree: SemanticTree {
                sentence: sentence.id().to_string(),
                start: class.to_string(),
                grammar_version: self.grammar.version(),
                root,
            },
            induction,
            operations: run.ops,
            aborted: run.aborted,
            elapsed: t0.elapsed(),
        }
    }

    /// Parses every sentence with `workers` threads; output follows corpus order.
    pub fn parse_corpus(&self, corpus: &Corpus, workers: usize) -> Vec<ParseOutcome> {
        use rayon::prelude::*;
        if workers <= 1 {
            return corpus.sentences().iter().map(|s| self.parse(s)).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| {
            corpus
                .sentences()
                .par_iter()
                .map(|s| self.parse(s))
                .collect()
        })
    }
}

fn induction_node(sentence: &str, n: &SemanticNode) -> InductionNode {
    InductionNode {
        sentence: sentence.to_string(),
        class: n.class.clone(),
        span: n.span,
        rule: n.rule,
        status: n.status,
    }
}

#[derive(Debug)]
struct Node {
    class: Rc<str>,
    rule: Option<RuleId>,
    span: Span,
    status: NodeStatus,
    children: Vec<Rc<Node>>,
}

impl Node {
    fn to_owned_node(&self) -> SemanticNode {
        SemanticNode {
            class: self.class.to_string(),
            rule: self.rule,
            span: self.span,
            status: self.status,
            children: self.children.iter().map(|c| c.to_owned_node()).collect(),
        }
    }
}

#[derive(Clone)]
struct Built<F> {
    node: Rc<Node>,
    score: F,
}

type Key = (Span, Rc<str>);

/// Classes a call reached through unit rules, i.e. without leaving its span.
/// Only these can be cut short by a cycle guard, so a memoized result is
/// reusable exactly when none of them is in progress at that span.
type Footprint = Rc<Vec<Rc<str>>>;

struct Run<'p, 'g, F> {
    parser: &'p Parser<'g, F>,
    sentence: &'p LayeredSentence,
    /// Results with the classes their computation visited at the same span.
    memo: HashMap<Key, (Built<F>, Footprint)>,
    /// In-progress calls and their recursion depth.
    active: HashMap<Key, usize>,
    induction: IndexMap<Key, InductionNode>,
    ops: u64,
    aborted: bool,
}

impl<F: Scalar> Run<'_, '_, F> {
    fn null(class: Rc<str>, span: Span) -> Built<F> {
        Built {
            node: Rc::new(Node {
                class,
                rule: None,
                span,
                status: NodeStatus::Null,
                children: Vec::new(),
            }),
            score: F::zero(),
        }
    }

    /// Returns the best node, the shallowest in-progress depth the result
    /// depended on through a cycle (`usize::MAX` if none) and its footprint.
    fn parse(&mut self, span: Span, class: Rc<str>, depth: usize) -> (Built<F>, usize, Footprint) {
        self.ops += 1;
        if self.ops > self.parser.config.max_operations {
            self.aborted = true;
        }
        if self.aborted {
            return (
                Self::null(class.clone(), span),
                usize::MAX,
                Rc::new(vec![class]),
            );
        }
        let key = (span, class.clone());
        if let Some((b, fp)) = self.memo.get(&key) {
            if !fp
                .iter()
                .any(|c| self.active.contains_key(&(span, c.clone())))
            {
                return (b.clone(), usize::MAX, fp.clone());
            }
        }
        if let Some(&d) = self.active.get(&key) {
            // unit-rule cycle: the re-entered call cannot expand
            return (Self::null(class.clone(), span), d, Rc::new(vec![class]));
        }
        self.active.insert(key.clone(), depth);

        let parser = self.parser;
        let rules = parser.rules_for(&class);
        let mut dep = usize::MAX;
        let mut footprint = vec![class.clone()];
        let mut best: Option<(Built<F>, &Rule)> = None;
        for rule in rules.iter() {
            let slots: Vec<Rc<str>> = rule
                .rhs
                .iter()
                .filter_map(|s| match s {
                    Symbol::NonTerminal { name } => Some(Rc::from(name.as_str())),
                    _ => None,
                })
                .collect();
            for terms in match_pattern(&rule.rhs, span, self.sentence, &parser.config.limits) {
                let mut children = Vec::with_capacity(terms.len());
                for (t, c) in terms.iter().zip(&slots) {
                    let (child, d, fp) = self.parse(*t, c.clone(), depth + 1);
                    dep = dep.min(d);
                    if *t == span {
                        for c in fp.iter() {
                            if !footprint.contains(c) {
                                footprint.push(c.clone());
                            }
                        }
                    }
                    children.push(child);
                }
                let cand = self.candidate(class.clone(), span, rule, children);
                best = match best {
                    Some((b, br)) if !prefer(&cand, rule, &b, br) => Some((b, br)),
                    _ => Some((cand, rule)),
                };
            }
        }
        self.active.remove(&key);

        let result = best.map_or_else(|| Self::null(class, span), |(b, _)| b);
        if result.node.status != NodeStatus::FullyParsed && !self.induction.contains_key(&key) {
            let n = &result.node;
            self.induction.insert(
                key.clone(),
                InductionNode {
                    sentence: self.sentence.id().to_string(),
                    class: n.class.to_string(),
                    span: n.span,
                    rule: n.rule,
                    status: n.status,
                },
            );
        }
        let footprint = Rc::new(footprint);
        if parser.config.memoize && dep >= depth {
            self.memo.insert(key, (result.clone(), footprint.clone()));
        }
        (result, dep, footprint)
    }

    fn candidate(
        &self,
        class: Rc<str>,
        span: Span,
        rule: &Rule,
        children: Vec<Built<F>>,
    ) -> Built<F> {
        let full = children
            .iter()
            .all(|c| c.node.status == NodeStatus::FullyParsed);
        let (status, score) = if full {
            (NodeStatus::FullyParsed, F::one())
        } else {
            let s = partial_score(
                &self.parser.config.reliability,
                F::of(rule.trigger_probability),
                children.iter().map(|c| (c.node.span.len(), c.score)),
            );
            (NodeStatus::PartiallyParsed, s)
        };
        Built {
            node: Rc::new(Node {
                class,
                rule: Some(rule.id),
                span,
                status,
                children: children.into_iter().map(|c| c.node).collect(),
            }),
            score,
        }
    }
}

/// Whether candidate `a` (parsed by `ra`) beats the current best `b`.
///
/// Higher reliability wins; ties go to the lower rule id, then to child terms
/// that start earlier and, at equal start, run longer.
fn prefer<F: Scalar>(a: &Built<F>, ra: &Rule, b: &Built<F>, rb: &Rule) -> bool {
    match a.score.partial_cmp(&b.score) {
        Some(Ordering::Greater) => return true,
        Some(Ordering::Less) => return false,
        _ => {}
    }
    match ra.id.cmp(&rb.id) {
        Ordering::Less => return true,
        Ordering::Greater => return false,
        Ordering::Equal => {}
    }
    let key = |n: &Node| -> Vec<(usize, std::cmp::Reverse<usize>)> {
        n.children
            .iter()
            .map(|c| (c.span.start, std::cmp::Reverse(c.span.end)))
            .collect()
    };
    key(&a.node) < key(&b.node)
}
