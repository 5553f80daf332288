use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generalize::{generalize_layers, BottomUp, LayerPriority};
use crate::corpus::Corpus;
use crate::grammar::{render_symbols, Grammar, Symbol};
use crate::parser::{match_pattern, InductionNode, MatchLimits};

/// Number of exemplar nodes shown to the reviewer.
pub const SAMPLE_COUNT: usize = 10;

/// A rule generalized from one or more null nodes, awaiting a decision.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRule {
    pub lhs: Symbol,
    pub rhs: Vec<Symbol>,
    pub frequency: usize,
    /// Up to [`SAMPLE_COUNT`] source nodes, from distinct sentences first.
    pub samples: Vec<InductionNode>,
    /// Every null node that generalized to this rule, in corpus order.
    pub sources: Vec<InductionNode>,
}

impl CandidateRule {
    /// Display form, `<Lhs> ::= rhs`.
    pub fn text(&self) -> String {
        format!("{} ::= {}", self.lhs, render_symbols(&self.rhs))
    }
}

/// Generalizes one null node into a right-hand side, or `None` if the
/// resulting rule would not be able to parse the node itself.
pub fn generalize_node(
    node: &InductionNode,
    corpus: &Corpus,
    reducer: &BottomUp,
    priority: &LayerPriority,
    limits: &MatchLimits,
) -> Option<Vec<Symbol>> {
    let sentence = corpus.get(&node.sentence)?;
    if node.span.end > sentence.len() || node.span.is_empty() {
        return None;
    }
    let rhs = reducer.reduce(&generalize_layers(sentence, node.span, priority));
    if rhs.len() == 1 && rhs[0].nt_name() == Some(node.class.as_str()) {
        return None;
    }
    if match_pattern(&rhs, node.span, sentence, limits).is_empty() {
        return None;
    }
    Some(rhs)
}

/// Groups the null nodes by their generalized `(lhs, rhs)` and ranks the
/// groups by frequency, then longer rhs, then rule text.
///
/// Pairs already in the grammar are dropped, blocked ones included.
pub fn propose_rules(
    nodes: &[InductionNode],
    corpus: &Corpus,
    grammar: &Grammar,
    priority: &LayerPriority,
    limits: &MatchLimits,
) -> Vec<CandidateRule> {
    let reducer = BottomUp::new(grammar);
    let generalized: Vec<(usize, Vec<Symbol>)> = nodes
        .par_iter()
        .enumerate()
        .filter(|(_, n)| n.is_null())
        .filter_map(|(i, n)| {
            generalize_node(n, corpus, &reducer, priority, limits).map(|rhs| (i, rhs))
        })
        .collect();

    let mut groups: BTreeMap<(Symbol, Vec<Symbol>), Vec<&InductionNode>> = BTreeMap::new();
    for (i, rhs) in generalized {
        let lhs = Symbol::nt(nodes[i].class.clone());
        groups.entry((lhs, rhs)).or_default().push(&nodes[i]);
    }

    let order = |n: &InductionNode| (corpus.position(&n.sentence), n.span, n.class.clone());
    let mut out: Vec<CandidateRule> = groups
        .into_iter()
        .filter(|((lhs, rhs), _)| grammar.find(lhs, rhs).is_none())
        .map(|((lhs, rhs), mut members)| {
            members.sort_by_key(|n| order(n));
            let sources: Vec<InductionNode> = members.into_iter().cloned().collect();
            CandidateRule {
                samples: pick_samples(&sources),
                frequency: sources.len(),
                lhs,
                rhs,
                sources,
            }
        })
        .collect();
    out.sort_by(rank);
    out
}

/// Promotion order.
pub fn rank(a: &CandidateRule, b: &CandidateRule) -> Ordering {
    b.frequency
        .cmp(&a.frequency)
        .then(b.rhs.len().cmp(&a.rhs.len()))
        .then_with(|| render_symbols(&a.rhs).cmp(&render_symbols(&b.rhs)))
        .then_with(|| a.lhs.to_string().cmp(&b.lhs.to_string()))
}

fn pick_samples(sources: &[InductionNode]) -> Vec<InductionNode> {
    let mut seen = HashSet::new();
    let mut picked: Vec<usize> = Vec::new();
    for (i, n) in sources.iter().enumerate() {
        if picked.len() == SAMPLE_COUNT {
            break;
        }
        if seen.insert(n.sentence.as_str()) {
            picked.push(i);
        }
    }
    for i in 0..sources.len() {
        if picked.len() == SAMPLE_COUNT {
            break;
        }
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    picked.sort_unstable();
    picked.into_iter().map(|i| sources[i].clone()).collect()
}
