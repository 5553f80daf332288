//! Relation learning over semantic trees.
//!
//! A known relation is turned into a training example by locating its
//! arguments as nodes of the subject sentence's tree and cutting out the
//! minimal subtree joining them, anonymized into a [`VariableTree`]. Models
//! then decide which candidate subtrees of unseen trees express the relation.

mod eval;
mod features;
mod locate;
mod logistic;
mod models;
mod vtree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{
    cross_validate, fold_assignment, prepare, render_report, score, train_relation, CandidatePool,
    ConversionStats, Counts, EvalConfig, EvalReport, Metrics, PoolEntry, Prepared, PreparedExample,
};
pub use features::{features, FeatureSet};
pub use locate::{
    argument_occurrences, canonical_date, locate_entity_nodes, ConversionFailure, DateStyle,
    MatchConfig,
};
pub use logistic::{LogisticRegression, TrainingData};
pub use models::{
    predict, train, BasicModel, ModelKind, NetModel, NetState, RelationModel, TrainConfig,
    TrainingTree,
};
pub use vtree::{
    candidates, extract_variable_tree, node_at, Candidate, NodePath, Scope, VariableNode,
    VariableTree,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueKind {
    /// An ontology resource, matched against the instance layer.
    Resource,
    /// An ISO `yyyy-mm-dd` date, matched against words after rendering.
    Date,
    /// Plain text, matched against words.
    String,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueKind::Resource => "resource",
            ValueKind::Date => "date",
            ValueKind::String => "string",
        })
    }
}

impl FromStr for ValueKind {
    type Err = RelextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "resource" => Ok(ValueKind::Resource),
            "date" => Ok(ValueKind::Date),
            "string" => Ok(ValueKind::String),
            other => Err(RelextError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Argument {
    pub value: String,
    pub kind: ValueKind,
}

/// A known relation whose subject names the sentence it is expressed in.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationExample {
    pub predicate: String,
    pub subject: String,
    pub arguments: Vec<Argument>,
}

#[derive(Debug, Error)]
pub enum RelextError {
    #[error("relation file line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unknown value kind `{0}`")]
    UnknownKind(String),
    #[error("no node at path {0:?}")]
    NoSuchNode(Vec<usize>),
    #[error("a variable tree needs at least one entity node")]
    NoEntities,
    #[error("training needs at least one positive example")]
    NoPositives,
    #[error("{0:?} training needs negative examples")]
    NoNegatives(ModelKind),
    #[error("model expects arity {expected}, got {found}")]
    Arity { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Reads `predicate <tab> subject <tab> object <tab> kind` lines.
pub fn read_relations(text: &str) -> Result<Vec<RelationExample>, RelextError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| RelextError::Malformed {
            line: i + 1,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        let [predicate, subject, object, kind] = cols[..] else {
            return Err(err(format!("expected 4 columns, found {}", cols.len())));
        };
        if predicate.is_empty() || subject.is_empty() || object.is_empty() {
            return Err(err("empty field".into()));
        }
        out.push(RelationExample {
            predicate: predicate.to_string(),
            subject: subject.to_string(),
            arguments: vec![Argument {
                value: object.to_string(),
                kind: kind.parse().map_err(|e: RelextError| err(e.to_string()))?,
            }],
        });
    }
    Ok(out)
}

pub fn write_relations(examples: &[RelationExample]) -> String {
    let mut out = String::new();
    for e in examples {
        for a in &e.arguments {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.predicate, e.subject, a.value, a.kind
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relation_file_round_trip() {
        let text = "birthDate\thess\t1883-06-24\tdate\nbirthPlace\thess\tSchloss_Waldstein\tresource\nalias\thess\tVictor Franz\tstring\n";
        let rel = read_relations(text).unwrap();
        assert_eq!(rel.len(), 3);
        assert_eq!(rel[0].arguments[0].kind, ValueKind::Date);
        assert_eq!(write_relations(&rel), text);
        assert!(matches!(
            read_relations("a\tb\tc"),
            Err(RelextError::Malformed { line: 1, .. })
        ));
        assert!(read_relations("a\tb\tc\tnumber").is_err());
    }
}
