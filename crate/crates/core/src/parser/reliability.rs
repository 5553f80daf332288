use serde::{Deserialize, Serialize};

use super::{NodeStatus, SemanticNode};
use crate::grammar::Grammar;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityParams<F> {
    /// Weight of the trigger-probability penalty.
    pub beta: F,
}

impl<F: Scalar> Default for ReliabilityParams<F> {
    fn default() -> Self {
        ReliabilityParams { beta: F::of(0.05) }
    }
}

/// Score of a partially parsed node from its rule's trigger probability and
/// its children as `(term length, reliability)` pairs:
/// `beta * (1 - tp) + (1 - beta) * sum(|c| * r(c)) / sum(|c|)`.
pub fn partial_score<F: Scalar>(
    params: &ReliabilityParams<F>,
    trigger_probability: F,
    children: impl IntoIterator<Item = (usize, F)>,
) -> F {
    let (mut weighted, mut total) = (F::zero(), F::zero());
    for (len, r) in children {
        let len = F::of_usize(len);
        weighted = weighted + len * r;
        total = total + len;
    }
    assert!(total > F::zero(), "partially parsed node without children");
    let beta = params.beta;
    beta * (F::one() - trigger_probability) + (F::one() - beta) * (weighted / total)
}

/// Reliability of a node: 1 when fully parsed, 0 when null, otherwise the
/// length-weighted blend of its children penalised by its rule's trigger
/// probability.
pub fn reliability<F: Scalar>(
    node: &SemanticNode,
    params: &ReliabilityParams<F>,
    grammar: &Grammar,
) -> F {
    match node.status {
        NodeStatus::FullyParsed => F::one(),
        NodeStatus::Null => F::zero(),
        NodeStatus::PartiallyParsed => {
            let tp = node
                .rule
                .and_then(|id| grammar.rule(id))
                .map_or(0.0, |r| r.trigger_probability);
            partial_score(
                params,
                F::of(tp),
                node.children
                    .iter()
                    .map(|c| (c.span.len(), reliability(c, params, grammar))),
            )
        }
    }
}
