use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::features::{features, FeatureSet};
use super::logistic::LogisticRegression;
use super::vtree::{candidates, Scope, VariableNode, VariableTree};
use super::RelextError;
use crate::corpus::{LayeredSentence, Span};
use crate::parser::SemanticNode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Memorizes the training trees.
    Basic,
    /// Generalizes the training trees into a state network.
    Net,
    /// Logistic regression over variable nodes.
    Lr,
    /// Plus context leaves.
    Lrc,
    /// Plus entity words.
    Lrcl,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Basic,
        ModelKind::Net,
        ModelKind::Lr,
        ModelKind::Lrc,
        ModelKind::Lrcl,
    ];

    pub fn feature_set(self) -> Option<FeatureSet> {
        match self {
            ModelKind::Basic | ModelKind::Net => None,
            ModelKind::Lr => Some(FeatureSet::Nodes),
            ModelKind::Lrc => Some(FeatureSet::Context),
            ModelKind::Lrcl => Some(FeatureSet::Lexical),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Basic => "Basic",
            ModelKind::Net => "Net",
            ModelKind::Lr => "LR",
            ModelKind::Lrc => "LRC",
            ModelKind::Lrcl => "LRCL",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown model `{s}` (expected basic, net, lr, lrc or lrcl)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub l2: f64,
    pub epochs: usize,
    pub tolerance: f64,
    pub threshold: f64,
    /// Negative candidates kept per positive, per sentence.
    pub negative_ratio: usize,
    pub seed: u64,
    pub scope: Scope,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2: 1.0,
            epochs: 500,
            tolerance: 1e-6,
            threshold: 0.5,
            negative_ratio: 10,
            seed: 0,
            scope: Scope::default(),
        }
    }
}

/// A labelled variable tree; `features` is empty unless a linear model
/// needs it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingTree {
    pub tree: VariableTree,
    pub features: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicModel {
    pub trees: BTreeSet<String>,
}

impl BasicModel {
    pub fn accepts(&self, tree: &VariableTree) -> bool {
        self.trees.contains(tree.canonical())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetState {
    pub id: usize,
    /// Training trees containing this label.
    pub count: usize,
    /// Whether the label was seen standing for an argument.
    pub accepting: bool,
}

/// Node labels become states and parent-child pairs become edges; a tree is
/// accepted when its root is a start state, each of its edges is known and
/// each of its leaves is accepting. Every training tree is accepted, and so
/// are recombinations of their parts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetModel {
    pub states: BTreeMap<String, NetState>,
    pub edges: BTreeSet<(usize, usize)>,
    pub starts: BTreeSet<usize>,
    pub trained: usize,
}

impl NetModel {
    pub fn fit<'a>(trees: impl IntoIterator<Item = &'a VariableTree>) -> Self {
        let mut m = NetModel::default();
        for t in trees {
            m.trained += 1;
            let mut seen = BTreeSet::new();
            let root = m.state(t.root());
            m.starts.insert(root);
            for n in t.root().iter() {
                let id = m.state(n);
                if seen.insert(id) {
                    m.states.get_mut(&n.label()).expect("just added").count += 1;
                }
                for c in &n.children {
                    let cid = m.state(c);
                    m.edges.insert((id, cid));
                }
            }
        }
        m
    }

    fn state(&mut self, n: &VariableNode) -> usize {
        let next = self.states.len();
        let s = self.states.entry(n.label()).or_insert(NetState {
            id: next,
            count: 0,
            accepting: false,
        });
        s.accepting |= !n.arguments.is_empty();
        s.id
    }

    pub fn accepts(&self, tree: &VariableTree) -> bool {
        let id = |n: &VariableNode| self.states.get(&n.label());
        let Some(root) = id(tree.root()) else {
            return false;
        };
        if !self.starts.contains(&root.id) {
            return false;
        }
        tree.root().iter().all(|n| {
            let Some(s) = id(n) else { return false };
            if n.children.is_empty() && !s.accepting {
                return false;
            }
            n.children
                .iter()
                .all(|c| id(c).is_some_and(|cs| self.edges.contains(&(s.id, cs.id))))
        })
    }

    /// Share of training trees containing each state, by label.
    pub fn fractions(&self) -> BTreeMap<&str, f64> {
        self.states
            .iter()
            .map(|(l, s)| (l.as_str(), s.count as f64 / self.trained.max(1) as f64))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RelationModel {
    Basic(BasicModel),
    Net(NetModel),
    Lr(LogisticRegression<f64>),
    Lrc(LogisticRegression<f64>),
    Lrcl(LogisticRegression<f64>),
}

impl RelationModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            RelationModel::Basic(_) => ModelKind::Basic,
            RelationModel::Net(_) => ModelKind::Net,
            RelationModel::Lr(_) => ModelKind::Lr,
            RelationModel::Lrc(_) => ModelKind::Lrc,
            RelationModel::Lrcl(_) => ModelKind::Lrcl,
        }
    }

    /// `features` is only read by the linear models.
    pub fn accepts(&self, tree: &VariableTree, features: &[String]) -> bool {
        match self {
            RelationModel::Basic(m) => m.accepts(tree),
            RelationModel::Net(m) => m.accepts(tree),
            RelationModel::Lr(m) | RelationModel::Lrc(m) | RelationModel::Lrcl(m) => {
                m.predict(features)
            }
        }
    }
}

pub fn train(
    kind: ModelKind,
    positives: &[TrainingTree],
    negatives: &[TrainingTree],
    cfg: &TrainConfig,
) -> Result<RelationModel, RelextError> {
    if positives.is_empty() {
        return Err(RelextError::NoPositives);
    }
    Ok(match kind {
        ModelKind::Basic => RelationModel::Basic(BasicModel {
            trees: positives
                .iter()
                .map(|t| t.tree.canonical().to_string())
                .collect(),
        }),
        ModelKind::Net => RelationModel::Net(NetModel::fit(positives.iter().map(|t| &t.tree))),
        linear => {
            if negatives.is_empty() {
                return Err(RelextError::NoNegatives(linear));
            }
            let examples: Vec<(Vec<&str>, bool)> = positives
                .iter()
                .map(|t| (t, true))
                .chain(negatives.iter().map(|t| (t, false)))
                .map(|(t, y)| (t.features.iter().map(String::as_str).collect(), y))
                .collect();
            let m = LogisticRegression::fit(
                &examples,
                cfg.l2,
                cfg.epochs,
                cfg.tolerance,
                cfg.threshold,
            );
            match linear {
                ModelKind::Lr => RelationModel::Lr(m),
                ModelKind::Lrc => RelationModel::Lrc(m),
                _ => RelationModel::Lrcl(m),
            }
        }
    })
}

/// Argument spans of every accepted candidate subtree, deduplicated, in
/// candidate order.
pub fn predict(
    model: &RelationModel,
    root: &SemanticNode,
    sentence: &LayeredSentence,
    arity: usize,
    scope: Scope,
) -> Vec<Vec<Span>> {
    let set = model.kind().feature_set();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for c in candidates(root, arity, scope) {
        let feats = set
            .map(|s| features(s, root, sentence, &c.entities, &c.tree))
            .unwrap_or_default();
        if !model.accepts(&c.tree, &feats) {
            continue;
        }
        let spans: Vec<Span> = c
            .entities
            .iter()
            .map(|p| root.at(p).expect("candidate paths exist").span)
            .collect();
        if seen.insert(spans.clone()) {
            out.push(spans);
        }
    }
    out
}
