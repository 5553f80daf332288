//! JSON Lines dump of parse results, one sentence per line.

use serde::{Deserialize, Serialize};

use super::{InductionNode, ParseOutcome, SemanticNode};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub sentence: String,
    pub start: String,
    pub grammar_version: u64,
    pub operations: u64,
    pub root: SemanticNode,
    #[serde(default)]
    pub induction: Vec<InductionNode>,
}

impl From<&ParseOutcome> for TreeRecord {
    fn from(o: &ParseOutcome) -> Self {
        TreeRecord {
            sentence: o.tree.sentence.clone(),
            start: o.tree.start.clone(),
            grammar_version: o.tree.grammar_version,
            operations: o.operations,
            root: o.tree.root.clone(),
            induction: o.induction.clone(),
        }
    }
}

pub fn write_tree_dump(outcomes: &[ParseOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        out.push_str(&serde_json::to_string(&TreeRecord::from(o)).expect("tree serializes"));
        out.push('\n');
    }
    out
}

pub fn read_tree_dump(text: &str) -> Result<Vec<TreeRecord>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

pub(crate) mod span_pair {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::corpus::Span;

    pub fn serialize<S: Serializer>(span: &Span, s: S) -> Result<S::Ok, S::Error> {
        [span.start, span.end].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Span, D::Error> {
        let [start, end] = <[usize; 2]>::deserialize(d)?;
        if start >= end {
            return Err(serde::de::Error::custom(format!(
                "empty span [{start}, {end})"
            )));
        }
        Ok(Span { start, end })
    }
}
