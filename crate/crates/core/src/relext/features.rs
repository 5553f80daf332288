use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::vtree::{NodePath, VariableTree};
use crate::corpus::LayeredSentence;
use crate::parser::SemanticNode;

/// Feature families for the linear models, each a superset of the previous.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSet {
    /// One feature per variable node.
    Nodes,
    /// Plus leaf nodes next to the subtree.
    Context,
    /// Plus the words of the entity nodes.
    Lexical,
}

fn lca(entities: &[NodePath]) -> NodePath {
    if entities.len() == 1 {
        return Vec::new();
    }
    let mut prefix = entities[0].clone();
    for p in &entities[1..] {
        let common = prefix.iter().zip(p).take_while(|(a, b)| a == b).count();
        prefix.truncate(common);
    }
    prefix
}

/// Sorted, deduplicated feature names of one candidate subtree.
pub fn features(
    set: FeatureSet,
    root: &SemanticNode,
    sentence: &LayeredSentence,
    entities: &[NodePath],
    tree: &VariableTree,
) -> Vec<String> {
    let mut out: BTreeSet<String> = tree
        .root()
        .iter()
        .map(|n| format!("n:{}", n.label()))
        .collect();
    if set >= FeatureSet::Context {
        let top = lca(entities);
        let mut members: BTreeSet<NodePath> = BTreeSet::new();
        for e in entities {
            for len in top.len()..=e.len() {
                members.insert(e[..len].to_vec());
            }
        }
        for m in &members {
            let Some((_, parent)) = m.split_last() else {
                continue;
            };
            let Some(p) = root.at(parent) else { continue };
            for (i, sib) in p.children.iter().enumerate() {
                let mut sp = parent.to_vec();
                sp.push(i);
                if sib.is_leaf() && !members.contains(&sp) {
                    let rule = sib.rule.map_or("-".to_string(), |r| r.to_string());
                    out.insert(format!("c:{}#{rule}", sib.class));
                }
            }
        }
    }
    if set >= FeatureSet::Lexical {
        for (i, e) in entities.iter().enumerate() {
            if let Some(n) = root.at(e) {
                for w in &sentence.words()[n.span.start..n.span.end] {
                    out.insert(format!("l{}:{}", i + 1, w.to_lowercase()));
                }
            }
        }
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::relext::vtree::extract_variable_tree;
    use crate::relext::vtree::tests::fig2_pair;

    #[test]
    fn feature_families_nest() {
        let (a, _) = fig2_pair();
        let words: Vec<String> = (0..9).map(|i| format!("W{i}")).collect();
        let line = format!(
            r#"{{"id":"a","words":{}}}"#,
            serde_json::to_string(&words).unwrap()
        );
        let s = Corpus::parse(&line).unwrap().sentences()[0].clone();
        let entities = vec![vec![1, 1]];
        let t = extract_variable_tree(&a, &entities).unwrap();
        let n = features(FeatureSet::Nodes, &a, &s, &entities, &t);
        let c = features(FeatureSet::Context, &a, &s, &entities, &t);
        let l = features(FeatureSet::Lexical, &a, &s, &entities, &t);
        assert_eq!(n.len(), 3);
        // the Profession leaf next to Location; Person is not a leaf
        assert_eq!(
            c.iter().filter(|f| f.starts_with("c:")).collect::<Vec<_>>(),
            ["c:Profession#5"]
        );
        assert_eq!(
            l.iter().filter(|f| f.starts_with('l')).collect::<Vec<_>>(),
            ["l1:w6", "l1:w7", "l1:w8"]
        );
        assert!(n.iter().all(|f| c.contains(f)) && c.iter().all(|f| l.contains(f)));
    }
}
