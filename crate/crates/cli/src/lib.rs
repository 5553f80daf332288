//! Command line tools and the induction review service.

pub mod cli;
pub mod service;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use anyhow::{Context, Result};
use ontogram::parser::{read_tree_dump, ParseOutcome, SemanticNode};
use ontogram::relext::{RelationModel, Scope};
use ontogram::{load_corpus, load_grammar, Corpus, Grammar};
use serde::{Deserialize, Serialize};

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    load_corpus(path).with_context(|| format!("reading corpus {}", path.display()))
}

pub fn read_grammar(path: &Path) -> Result<Grammar> {
    load_grammar(path).with_context(|| format!("reading grammar {}", path.display()))
}

/// Roots of the sentences the parser got anything out of, keyed by sentence.
pub fn trees_from_outcomes(outcomes: &[ParseOutcome]) -> HashMap<String, SemanticNode> {
    outcomes
        .iter()
        .filter(|o| !o.tree.root.is_null())
        .map(|o| (o.tree.sentence.clone(), o.tree.root.clone()))
        .collect()
}

pub fn read_trees(path: &Path) -> Result<HashMap<String, SemanticNode>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let records = read_tree_dump(&text).map_err(anyhow::Error::msg)?;
    Ok(records
        .into_iter()
        .filter(|r| !r.root.is_null())
        .map(|r| (r.sentence, r.root))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredicateModel {
    pub arity: usize,
    pub model: RelationModel,
}

/// Trained relation models, one per predicate, as written by `relex-train`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: String,
    pub scope: Scope,
    pub predicates: BTreeMap<String, PredicateModel>,
}
