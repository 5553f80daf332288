use std::fmt::{self, Write as _};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::RelextError;
use crate::grammar::RuleId;
use crate::parser::SemanticNode;

/// Child indices from the root down to a node.
pub type NodePath = Vec<usize>;

pub fn node_at<'a>(
    root: &'a SemanticNode,
    path: &[usize],
) -> Result<&'a SemanticNode, RelextError> {
    root.at(path)
        .ok_or_else(|| RelextError::NoSuchNode(path.to_vec()))
}

/// A semantic node stripped of its term.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariableNode {
    pub class: String,
    pub rule: Option<RuleId>,
    /// Index among the children of the original parent; `None` at the root.
    pub position: Option<usize>,
    /// Relation argument indices this node stands for, empty if none.
    pub arguments: Vec<usize>,
    pub children: Vec<VariableNode>,
}

impl VariableNode {
    /// The node's own identity, children excluded.
    pub fn label(&self) -> String {
        let mut s = serde_json::to_string(&self.class).expect("string serializes");
        match self.rule {
            Some(r) => write!(s, "#{r}").unwrap(),
            None => s.push_str("#-"),
        }
        match self.position {
            Some(p) => write!(s, "@{p}").unwrap(),
            None => s.push_str("@-"),
        }
        if !self.arguments.is_empty() {
            let args: Vec<String> = self
                .arguments
                .iter()
                .map(|a| format!("?{}", a + 1))
                .collect();
            write!(s, "[{}]", args.join(",")).unwrap();
        }
        s
    }

    fn write_canonical(&self, out: &mut String) {
        out.push_str(&self.label());
        if !self.children.is_empty() {
            out.push('(');
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                c.write_canonical(out);
            }
            out.push(')');
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &VariableNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let n = stack.pop()?;
            stack.extend(n.children.iter().rev());
            Some(n)
        })
    }
}

/// An anonymized subtree with a canonical text form; two trees are equal
/// exactly when their canonical forms are.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariableTree {
    root: VariableNode,
    canonical: String,
}

impl VariableTree {
    pub fn new(root: VariableNode) -> Self {
        let mut canonical = String::new();
        root.write_canonical(&mut canonical);
        VariableTree { root, canonical }
    }

    pub fn root(&self) -> &VariableNode {
        &self.root
    }

    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    /// 64-bit FNV-1a of the canonical form.
    pub fn hash64(&self) -> u64 {
        self.canonical.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }

    pub fn len(&self) -> usize {
        self.root.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Whether the tree is a single chain.
    pub fn is_path(&self) -> bool {
        self.root.iter().all(|n| n.children.len() <= 1)
    }
}

impl PartialEq for VariableTree {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}

impl Eq for VariableTree {}

impl Hash for VariableTree {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical.hash(state);
    }
}

impl fmt::Display for VariableTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

/// Cuts the minimal subtree joining the entity nodes out of a semantic tree.
/// With one entity the subtree is the path from the root; with several it is
/// rooted at their lowest common ancestor. `entities[i]` becomes argument `i`.
pub fn extract_variable_tree(
    root: &SemanticNode,
    entities: &[NodePath],
) -> Result<VariableTree, RelextError> {
    if entities.is_empty() {
        return Err(RelextError::NoEntities);
    }
    for p in entities {
        node_at(root, p)?;
    }
    let top: NodePath = if entities.len() == 1 {
        Vec::new()
    } else {
        let mut prefix = entities[0].clone();
        for p in &entities[1..] {
            let common = prefix.iter().zip(p).take_while(|(a, b)| a == b).count();
            prefix.truncate(common);
        }
        prefix
    };
    let start = node_at(root, &top)?;
    let relative: Vec<(usize, &[usize])> = entities
        .iter()
        .enumerate()
        .map(|(i, p)| (i, &p[top.len()..]))
        .collect();
    Ok(VariableTree::new(build(start, None, &relative)))
}

fn build(
    node: &SemanticNode,
    position: Option<usize>,
    entities: &[(usize, &[usize])],
) -> VariableNode {
    let mut arguments: Vec<usize> = entities
        .iter()
        .filter(|(_, p)| p.is_empty())
        .map(|(i, _)| *i)
        .collect();
    arguments.sort_unstable();
    let mut children = Vec::new();
    for (ci, child) in node.children.iter().enumerate() {
        let below: Vec<(usize, &[usize])> = entities
            .iter()
            .filter(|(_, p)| p.first() == Some(&ci))
            .map(|(i, p)| (*i, &p[1..]))
            .collect();
        if !below.is_empty() {
            children.push(build(child, Some(ci), &below));
        }
    }
    VariableNode {
        class: node.class.clone(),
        rule: node.rule,
        position,
        arguments,
        children,
    }
}

/// Which nodes may stand for a relation argument in a prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    /// Leaves of the semantic tree only.
    Leaves,
    /// Every node.
    #[default]
    Nodes,
}

/// A subtree considered during prediction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub entities: Vec<NodePath>,
    pub tree: VariableTree,
}

fn collect(node: &SemanticNode, path: &mut NodePath, scope: Scope, out: &mut Vec<NodePath>) {
    if scope == Scope::Nodes || node.children.is_empty() {
        out.push(path.clone());
    }
    for (i, c) in node.children.iter().enumerate() {
        path.push(i);
        collect(c, path, scope, out);
        path.pop();
    }
}

fn is_prefix(a: &[usize], b: &[usize]) -> bool {
    a.len() <= b.len() && b[..a.len()] == *a
}

/// Every subtree whose designated nodes are `arity` distinct nodes of which
/// none lies above another, once per assignment of argument positions.
pub fn candidates(root: &SemanticNode, arity: usize, scope: Scope) -> Vec<Candidate> {
    let mut endpoints = Vec::new();
    collect(root, &mut Vec::new(), scope, &mut endpoints);
    let mut out = Vec::new();
    let mut chosen: Vec<NodePath> = Vec::new();
    fn rec(
        root: &SemanticNode,
        endpoints: &[NodePath],
        arity: usize,
        chosen: &mut Vec<NodePath>,
        out: &mut Vec<Candidate>,
    ) {
        if chosen.len() == arity {
            let tree = extract_variable_tree(root, chosen).expect("endpoints exist");
            out.push(Candidate {
                entities: chosen.clone(),
                tree,
            });
            return;
        }
        for e in endpoints {
            if chosen.iter().any(|c| is_prefix(c, e) || is_prefix(e, c)) {
                continue;
            }
            chosen.push(e.clone());
            rec(root, endpoints, arity, chosen, out);
            chosen.pop();
        }
    }
    if arity > 0 {
        rec(root, &endpoints, arity, &mut chosen, &mut out);
    }
    out
}
