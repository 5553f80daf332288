use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ParseOutcome, SemanticNode};

/// Corpus-level parsing statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseStats {
    pub sentences: usize,
    pub fully_parsed: f64,
    pub coverage: f64,
    pub tree_depth: f64,
    pub leaf_nodes: f64,
    pub null_leaf_nodes: f64,
    pub operations: f64,
    pub parse_time_ms: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("statistics need at least one parsed sentence")]
    Empty,
}

/// Fraction of the root's words that are not inside a null node.
pub fn coverage(root: &SemanticNode) -> f64 {
    let total = root.span.len();
    if total == 0 {
        return 0.0;
    }
    let null_words: usize = root
        .leaves()
        .filter(|n| n.is_null())
        .map(|n| n.span.len())
        .sum();
    (total - null_words) as f64 / total as f64
}

pub fn corpus_stats(outcomes: &[ParseOutcome]) -> Result<ParseStats, StatsError> {
    if outcomes.is_empty() {
        return Err(StatsError::Empty);
    }
    let n = outcomes.len() as f64;
    let mean = |f: &dyn Fn(&ParseOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / n;
    Ok(ParseStats {
        sentences: outcomes.len(),
        fully_parsed: mean(&|o| f64::from(u8::from(o.tree.is_fully_parsed()))),
        coverage: mean(&|o| coverage(&o.tree.root)),
        tree_depth: mean(&|o| o.tree.root.depth() as f64),
        leaf_nodes: mean(&|o| o.tree.root.leaves().count() as f64),
        null_leaf_nodes: mean(&|o| o.tree.root.leaves().filter(|l| l.is_null()).count() as f64),
        operations: mean(&|o| o.operations as f64),
        parse_time_ms: mean(&|o| o.elapsed.as_secs_f64() * 1e3),
    })
}

impl fmt::Display for ParseStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: [(&str, String); 8] = [
            ("sentences", self.sentences.to_string()),
            (
                "fully parsed sentences",
                format!("{:.2}%", self.fully_parsed * 100.0),
            ),
            ("avg. coverage", format!("{:.2}%", self.coverage * 100.0)),
            ("avg. tree depth", format!("{:.2}", self.tree_depth)),
            (
                "avg. number of leaf nodes",
                format!("{:.2}", self.leaf_nodes),
            ),
            (
                "avg. number of null leaf nodes",
                format!("{:.2}", self.null_leaf_nodes),
            ),
            (
                "avg. number of operations",
                format!("{:.1}", self.operations),
            ),
            ("avg parsing time", format!("{:.3} ms", self.parse_time_ms)),
        ];
        for (name, value) in rows {
            writeln!(f, "{name:<32}{value}")?;
        }
        Ok(())
    }
}
