//! Two-step generalization of a term into a rule right-hand side: first by
//! annotation layer, then by greedy bottom-up reduction with existing rules.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::corpus::{LayeredSentence, Span, LEXICAL};
use crate::grammar::{instantiate_universal, Grammar, Phase, RuleId, Symbol};

/// Order in which layers claim word positions. The last layer is always
/// lexical so every position receives a symbol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPriority(Vec<String>);

impl LayerPriority {
    pub fn new<S: Into<String>>(layers: impl IntoIterator<Item = S>) -> Self {
        let mut v: Vec<String> = layers.into_iter().map(Into::into).collect();
        v.retain(|l| l != LEXICAL);
        v.push(LEXICAL.to_string());
        LayerPriority(v)
    }

    pub fn layers(&self) -> &[String] {
        &self.0
    }
}

impl Default for LayerPriority {
    fn default() -> Self {
        LayerPriority::new(["class", "instance", "named-entity", "small-caps"])
    }
}

/// Rewrites a term as a sequence of terminals drawn from the highest-priority
/// layer that has a non-null token lying entirely inside the term over still
/// unclaimed positions.
pub fn generalize_layers(
    sentence: &LayeredSentence,
    span: Span,
    priority: &LayerPriority,
) -> Vec<Symbol> {
    generalize_layers_spanned(sentence, span, priority)
        .into_iter()
        .map(|(s, _)| s)
        .collect()
}

/// Like [`generalize_layers`] but keeps the word span of every symbol.
pub fn generalize_layers_spanned(
    sentence: &LayeredSentence,
    span: Span,
    priority: &LayerPriority,
) -> Vec<(Symbol, Span)> {
    let mut claimed: Vec<Option<(Symbol, Span)>> = vec![None; span.len()];
    for name in priority.layers() {
        let Some(layer) = sentence.layer(name) else {
            continue;
        };
        for tok in layer.tokens() {
            let Some(value) = &tok.value else { continue };
            if !span.contains(tok.span) {
                continue;
            }
            let slots = tok.span.start - span.start..tok.span.end - span.start;
            if claimed[slots.clone()].iter().any(Option::is_some) {
                continue;
            }
            claimed[slots.start] = Some((Symbol::t(value.clone(), name.clone()), tok.span));
            for slot in &mut claimed[slots.start + 1..slots.end] {
                // marks the tail of a multi-word token
                *slot = Some((Symbol::Universal, tok.span));
            }
        }
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < claimed.len() {
        match claimed[i].take() {
            Some((sym, sp)) => {
                i += sp.len();
                out.push((sym, sp));
            }
            None => {
                // only reachable when the lexical layer is absent from the sentence
                let pos = span.start + i;
                out.push((
                    Symbol::word(sentence.words()[pos].clone()),
                    Span::new(pos, pos + 1),
                ));
                i += 1;
            }
        }
    }
    out
}

/// Multi-pattern matcher over symbol ids.
#[derive(Debug, Default)]
struct AhoCorasick {
    goto: Vec<HashMap<u32, usize>>,
    fail: Vec<usize>,
    /// Pattern indices ending at each state, fail-chain outputs included.
    out: Vec<Vec<usize>>,
    lens: Vec<usize>,
}

impl AhoCorasick {
    fn new(patterns: &[Vec<u32>]) -> Self {
        let mut ac = AhoCorasick {
            goto: vec![HashMap::new()],
            fail: vec![0],
            out: vec![Vec::new()],
            lens: patterns.iter().map(Vec::len).collect(),
        };
        for (pi, pat) in patterns.iter().enumerate() {
            let mut s = 0;
            for &sym in pat {
                s = match ac.goto[s].get(&sym) {
                    Some(&next) => next,
                    None => {
                        let next = ac.goto.len();
                        ac.goto.push(HashMap::new());
                        ac.fail.push(0);
                        ac.out.push(Vec::new());
                        ac.goto[s].insert(sym, next);
                        next
                    }
                };
            }
            ac.out[s].push(pi);
        }
        let mut queue: VecDeque<usize> = ac.goto[0].values().copied().collect();
        while let Some(s) = queue.pop_front() {
            let edges: Vec<(u32, usize)> = ac.goto[s].iter().map(|(&k, &v)| (k, v)).collect();
            for (sym, next) in edges {
                queue.push_back(next);
                let mut f = ac.fail[s];
                let target = loop {
                    if let Some(&t) = ac.goto[f].get(&sym) {
                        break t;
                    }
                    if f == 0 {
                        break 0;
                    }
                    f = ac.fail[f];
                };
                ac.fail[next] = target;
                let inherited = ac.out[target].clone();
                ac.out[next].extend(inherited);
            }
        }
        ac
    }

    /// All `(start, pattern)` occurrences, overlapping ones included.
    fn find_all(&self, text: &[u32]) -> Vec<(usize, usize)> {
        let mut found = Vec::new();
        let mut s = 0;
        for (i, sym) in text.iter().enumerate() {
            loop {
                if let Some(&t) = self.goto[s].get(sym) {
                    s = t;
                    break;
                }
                if s == 0 {
                    break;
                }
                s = self.fail[s];
            }
            for &p in &self.out[s] {
                found.push((i + 1 - self.lens[p], p));
            }
        }
        found
    }
}

/// Greedy bottom-up reducer built from the induction-active rules of one
/// grammar snapshot. Universal schemas are instantiated for every known
/// non-terminal.
pub struct BottomUp {
    ids: HashMap<Symbol, u32>,
    automaton: AhoCorasick,
    /// `(rule id, lhs, rhs length)` per pattern.
    reductions: Vec<(RuleId, Symbol, usize)>,
}

const UNKNOWN: u32 = u32::MAX;

impl BottomUp {
    pub fn new(grammar: &Grammar) -> Self {
        let mut concrete = Vec::new();
        for rule in grammar.active_rules(Phase::Induction) {
            if rule.is_universal() {
                for nt in grammar.non_terminals() {
                    if let Ok(r) = instantiate_universal(rule, nt) {
                        concrete.push(r);
                    }
                }
            } else {
                concrete.push(rule.clone());
            }
        }
        let mut ids: HashMap<Symbol, u32> = HashMap::new();
        let mut patterns = Vec::with_capacity(concrete.len());
        let mut reductions = Vec::with_capacity(concrete.len());
        for r in concrete {
            let pat = r
                .rhs
                .iter()
                .map(|s| {
                    let next = ids.len() as u32;
                    *ids.entry(s.clone()).or_insert(next)
                })
                .collect();
            patterns.push(pat);
            reductions.push((r.id, r.lhs, r.rhs.len()));
        }
        BottomUp {
            ids,
            automaton: AhoCorasick::new(&patterns),
            reductions,
        }
    }

    /// Replaces rule right-hand sides by their left-hand sides until no rule
    /// matches. In each pass overlapping matches are resolved greedily:
    /// longer first, then leftmost, then lower rule id.
    pub fn reduce(&self, symbols: &[Symbol]) -> Vec<Symbol> {
        let mut current = symbols.to_vec();
        let mut seen: HashSet<Vec<Symbol>> = HashSet::new();
        loop {
            let encoded: Vec<u32> = current
                .iter()
                .map(|s| self.ids.get(s).copied().unwrap_or(UNKNOWN))
                .collect();
            let mut matches: Vec<(usize, usize, RuleId, usize)> = self
                .automaton
                .find_all(&encoded)
                .into_iter()
                .map(|(start, p)| {
                    let (id, _, len) = &self.reductions[p];
                    (start, *len, *id, p)
                })
                .collect();
            if matches.is_empty() {
                return current;
            }
            matches.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)).then(a.2.cmp(&b.2)));
            let mut taken = vec![false; current.len()];
            let mut chosen: Vec<(usize, usize, usize)> = Vec::new();
            for (start, len, _, p) in matches {
                if taken[start..start + len].iter().any(|&t| t) {
                    continue;
                }
                taken[start..start + len].iter_mut().for_each(|t| *t = true);
                chosen.push((start, len, p));
            }
            chosen.sort_unstable();
            let mut next = Vec::with_capacity(current.len());
            let mut i = 0;
            for (start, len, p) in chosen {
                next.extend_from_slice(&current[i..start]);
                next.push(self.reductions[p].1.clone());
                i = start + len;
            }
            next.extend_from_slice(&current[i..]);
            seen.insert(std::mem::replace(&mut current, next));
            // unit rules can cycle; stop at the first repeated sequence
            if seen.contains(&current) {
                return current;
            }
        }
    }
}

/// One-shot form of [`BottomUp::reduce`].
pub fn generalize_bottom_up(symbols: &[Symbol], grammar: &Grammar) -> Vec<Symbol> {
    BottomUp::new(grammar).reduce(symbols)
}
