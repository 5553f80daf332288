//! Ontology assertions read off the grammar and off null nodes.
//!
//! Class rules (`<B> ::= <A>`) give `subClassOf(A, B)`; instance rules
//! (`<C> ::= software engineer`) give `isa(SoftwareEngineer, C)`. Arguments
//! are always ordered `isa(instance, class)`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, LEXICAL};
use crate::grammar::{Grammar, Property, RuleId, Symbol};
use crate::induction::{generalize_layers, LayerPriority};
use crate::parser::InductionNode;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Predicate {
    Isa,
    SubClassOf,
    Named(String),
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Isa => f.write_str("isa"),
            Predicate::SubClassOf => f.write_str("subClassOf"),
            Predicate::Named(n) => f.write_str(n),
        }
    }
}

impl From<&str> for Predicate {
    fn from(s: &str) -> Self {
        match s {
            "isa" => Predicate::Isa,
            "subClassOf" => Predicate::SubClassOf,
            other => Predicate::Named(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Seed,
    Rule(RuleId),
    NullNodes {
        frequency: usize,
    },
    /// Premises, in the order they were chained.
    Inferred(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub predicate: Predicate,
    pub subject: String,
    pub object: String,
    pub provenance: Provenance,
    pub confidence: Option<f64>,
    pub note: Option<String>,
}

impl Assertion {
    pub fn new(
        predicate: Predicate,
        subject: impl Into<String>,
        object: impl Into<String>,
        provenance: Provenance,
    ) -> Self {
        Assertion {
            predicate,
            subject: subject.into(),
            object: object.into(),
            provenance,
            confidence: None,
            note: None,
        }
    }

    pub fn isa(
        instance: impl Into<String>,
        class: impl Into<String>,
        provenance: Provenance,
    ) -> Self {
        Assertion::new(Predicate::Isa, instance, class, provenance)
    }

    pub fn sub_class_of(
        sub: impl Into<String>,
        sup: impl Into<String>,
        provenance: Provenance,
    ) -> Self {
        Assertion::new(Predicate::SubClassOf, sub, sup, provenance)
    }

    /// `(predicate, subject, object)`, the identity used for deduplication.
    pub fn key(&self) -> (Predicate, String, String) {
        (
            self.predicate.clone(),
            self.subject.clone(),
            self.object.clone(),
        )
    }

    pub fn frequency(&self) -> Option<usize> {
        match self.provenance {
            Provenance::NullNodes { frequency } => Some(frequency),
            _ => None,
        }
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.predicate, self.subject, self.object)
    }
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("triple file line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("empty {field} in assertion {assertion}")]
    Empty {
        field: &'static str,
        assertion: String,
    },
}

/// Assertions with seed and learned parts kept apart.
#[derive(Clone, Debug, Default)]
pub struct Ontology {
    assertions: Vec<Assertion>,
    seed: Vec<bool>,
    keys: HashSet<(Predicate, String, String)>,
    classes: BTreeSet<String>,
    instances: BTreeSet<String>,
}

impl Ontology {
    pub fn new() -> Self {
        Ontology::default()
    }

    /// Adds an assertion unless an equal triple is already present.
    pub fn insert(&mut self, a: Assertion, seed: bool) -> Result<bool, OntologyError> {
        for (field, v) in [("subject", &a.subject), ("object", &a.object)] {
            if v.trim().is_empty() {
                return Err(OntologyError::Empty {
                    field,
                    assertion: a.to_string(),
                });
            }
        }
        if !self.keys.insert(a.key()) {
            return Ok(false);
        }
        match a.predicate {
            Predicate::Isa => {
                self.instances.insert(a.subject.clone());
                self.classes.insert(a.object.clone());
            }
            Predicate::SubClassOf => {
                self.classes.insert(a.subject.clone());
                self.classes.insert(a.object.clone());
            }
            Predicate::Named(_) => {
                self.instances.insert(a.subject.clone());
                self.instances.insert(a.object.clone());
            }
        }
        self.assertions.push(a);
        self.seed.push(seed);
        Ok(true)
    }

    pub fn assertions(&self) -> &[Assertion] {
        &self.assertions
    }

    pub fn seed(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions
            .iter()
            .zip(&self.seed)
            .filter(|(_, &s)| s)
            .map(|(a, _)| a)
    }

    pub fn learned(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions
            .iter()
            .zip(&self.seed)
            .filter(|(_, &s)| !s)
            .map(|(a, _)| a)
    }

    pub fn classes(&self) -> &BTreeSet<String> {
        &self.classes
    }

    pub fn instances(&self) -> &BTreeSet<String> {
        &self.instances
    }

    pub fn contains(&self, predicate: &Predicate, subject: &str, object: &str) -> bool {
        self.keys
            .contains(&(predicate.clone(), subject.to_string(), object.to_string()))
    }
}

/// Title-cases and concatenates the words of a label:
/// `software engineer` becomes `SoftwareEngineer`.
pub fn mint_identifier(words: &[&str]) -> String {
    let mut out = String::new();
    for w in words {
        let mut chars = w.chars().filter(|c| c.is_alphanumeric());
        if let Some(first) = chars.next() {
            out.extend(first.to_uppercase());
            out.extend(chars);
        }
    }
    out
}

/// Layer roles used when reading rules as ontology statements.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyConfig {
    /// Layers whose tokens name classes.
    pub class_layers: Vec<String>,
    /// Layers whose tokens name instances.
    pub instance_layers: Vec<String>,
    /// Layers whose tokens are plain words of a label.
    pub label_layers: Vec<String>,
}

impl Default for TaxonomyConfig {
    fn default() -> Self {
        TaxonomyConfig {
            class_layers: vec!["named-entity".into(), "class".into()],
            instance_layers: vec!["instance".into()],
            label_layers: vec![LEXICAL.into(), "small-caps".into()],
        }
    }
}

enum Reading {
    Class(String),
    Instance { id: String, label: Option<String> },
}

fn read_rule(lhs: &str, rhs: &[Symbol], cfg: &TaxonomyConfig) -> Option<Reading> {
    let has = |layers: &[String], layer: &str| layers.iter().any(|l| l == layer);
    if let [single] = rhs {
        match single {
            Symbol::NonTerminal { name } if name != lhs => {
                return Some(Reading::Class(name.clone()))
            }
            Symbol::Terminal { value, layer } if has(&cfg.class_layers, layer) => {
                return (value != lhs).then(|| Reading::Class(value.clone()))
            }
            _ => {}
        }
    }
    let mut instance = None;
    let mut words = Vec::new();
    for s in rhs {
        match s {
            Symbol::Terminal { value, layer } if has(&cfg.instance_layers, layer) => {
                if instance.replace(value.clone()).is_some() {
                    return None;
                }
            }
            Symbol::Terminal { value, layer } if has(&cfg.label_layers, layer) => {
                words.push(value.as_str())
            }
            _ => return None,
        }
    }
    match instance {
        Some(id) => Some(Reading::Instance { id, label: None }),
        None => {
            let id = mint_identifier(&words);
            (!id.is_empty()).then(|| Reading::Instance {
                id,
                label: Some(words.join(" ")),
            })
        }
    }
}

/// Reads positive class and instance rules as `subClassOf` and `isa`
/// assertions. Universal schemas, self references and mixed right-hand sides
/// yield nothing.
///
/// A minted identifier that collides with a class name or with an identifier
/// minted from a different label gets a numeric suffix and a note.
pub fn extract_taxonomy(grammar: &Grammar, cfg: &TaxonomyConfig) -> Vec<Assertion> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut minted: HashMap<String, String> = HashMap::new();
    let mut taken: HashSet<String> = grammar.non_terminals().iter().cloned().collect();
    for rule in grammar.rules() {
        if rule.property != Property::Positive {
            continue;
        }
        let Symbol::NonTerminal { name: lhs } = &rule.lhs else {
            continue;
        };
        let assertion = match read_rule(lhs, &rule.rhs, cfg) {
            None => continue,
            Some(Reading::Class(sub)) => {
                Assertion::sub_class_of(sub, lhs.clone(), Provenance::Rule(rule.id))
            }
            Some(Reading::Instance { id, label: None }) => {
                Assertion::isa(id, lhs.clone(), Provenance::Rule(rule.id))
            }
            Some(Reading::Instance {
                id,
                label: Some(label),
            }) => {
                let mut note = None;
                let resolved = match minted.get(&label) {
                    Some(existing) => existing.clone(),
                    None => {
                        let mut candidate = id.clone();
                        let mut n = 2;
                        while taken.contains(&candidate) {
                            candidate = format!("{id}{n}");
                            n += 1;
                        }
                        taken.insert(candidate.clone());
                        minted.insert(label.clone(), candidate.clone());
                        candidate
                    }
                };
                if resolved != id {
                    note = Some(format!("renamed from {id} (label \"{label}\")"));
                }
                let mut a = Assertion::isa(resolved, lhs.clone(), Provenance::Rule(rule.id));
                a.note = note;
                a
            }
        };
        if seen.insert(assertion.key()) {
            out.push(assertion);
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Inference {
    pub assertions: Vec<Assertion>,
    /// Classes on each `subClassOf` cycle, sorted.
    pub cycles: Vec<Vec<String>>,
}

/// Derives what seed and new assertions entail together but neither set
/// entails alone: `subClassOf` is transitive and `isa` is inherited along it.
///
/// Classes on a `subClassOf` cycle are reported and excluded from chaining.
pub fn infer_relations(new: &[Assertion], seed: &[Assertion]) -> Inference {
    let all: Vec<&Assertion> = seed.iter().chain(new).collect();
    let (closed, cycles) = closure(&all);
    let (seed_closed, _) = closure(&seed.iter().collect::<Vec<_>>());
    let mut known: HashSet<_> = all.iter().map(|a| a.key()).collect();
    known.extend(seed_closed.iter().map(Assertion::key));
    let assertions = closed
        .into_iter()
        .filter(|a| !known.contains(&a.key()))
        .collect();
    Inference { assertions, cycles }
}

fn closure(input: &[&Assertion]) -> (Vec<Assertion>, Vec<Vec<String>>) {
    let mut graph: DiGraph<String, ()> = DiGraph::new();
    let mut index: BTreeMap<String, NodeIndex> = BTreeMap::new();
    let mut node = |g: &mut DiGraph<String, ()>, name: &str| {
        *index
            .entry(name.to_string())
            .or_insert_with(|| g.add_node(name.to_string()))
    };
    let mut edges = BTreeSet::new();
    for a in input
        .iter()
        .filter(|a| a.predicate == Predicate::SubClassOf)
    {
        let (s, o) = (node(&mut graph, &a.subject), node(&mut graph, &a.object));
        if edges.insert((a.subject.clone(), a.object.clone())) {
            graph.add_edge(s, o, ());
        }
    }
    let mut cyclic: HashSet<NodeIndex> = HashSet::new();
    let mut cycles = Vec::new();
    for scc in tarjan_scc(&graph) {
        let looped = scc.len() > 1 || graph.contains_edge(scc[0], scc[0]);
        if looped {
            let mut names: Vec<String> = scc.iter().map(|&i| graph[i].clone()).collect();
            names.sort();
            cycles.push(names);
            cyclic.extend(scc);
        }
    }
    cycles.sort();

    // superclass -> shortest chain of stated edges, per class off any cycle
    let supers = |start: &str| -> BTreeMap<String, Vec<String>> {
        let mut found = BTreeMap::new();
        let Some(&s) = index.get(start) else {
            return found;
        };
        if cyclic.contains(&s) {
            return found;
        }
        let mut queue = VecDeque::from([(s, Vec::<String>::new())]);
        let mut visited = HashSet::from([s]);
        while let Some((at, chain)) = queue.pop_front() {
            let mut next: Vec<NodeIndex> = graph
                .neighbors(at)
                .filter(|n| !cyclic.contains(n))
                .collect();
            next.sort_by(|a, b| graph[*a].cmp(&graph[*b]));
            for n in next {
                if visited.insert(n) {
                    let mut c = chain.clone();
                    c.push(format!("subClassOf({}, {})", graph[at], graph[n]));
                    found.insert(graph[n].clone(), c.clone());
                    queue.push_back((n, c));
                }
            }
        }
        found
    };

    let mut out: Vec<Assertion> = Vec::new();
    let mut keys = HashSet::new();
    let mut push = |a: Assertion, out: &mut Vec<Assertion>| {
        if keys.insert(a.key()) {
            out.push(a);
        }
    };
    let classes: Vec<String> = index.keys().cloned().collect();
    for c in &classes {
        for (sup, chain) in supers(c) {
            push(
                Assertion::sub_class_of(c.clone(), sup, Provenance::Inferred(chain)),
                &mut out,
            );
        }
    }
    let mut memberships: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for a in input.iter().filter(|a| a.predicate == Predicate::Isa) {
        memberships.entry(&a.subject).or_default().insert(&a.object);
    }
    for (inst, direct) in memberships {
        for class in &direct {
            push(
                Assertion::isa(inst, *class, Provenance::Inferred(vec![])),
                &mut out,
            );
        }
        for class in direct {
            for (sup, chain) in supers(class) {
                let mut c = vec![format!("isa({inst}, {class})")];
                c.extend(chain);
                push(Assertion::isa(inst, sup, Provenance::Inferred(c)), &mut out);
            }
        }
    }
    (out, cycles)
}

/// Instances mined from null nodes: a term made of one instance token, or of
/// plain words only, is taken as an instance of the node's class.
pub fn extract_instances(
    nodes: &[InductionNode],
    corpus: &Corpus,
    min_frequency: usize,
    priority: &LayerPriority,
    cfg: &TaxonomyConfig,
) -> Vec<Assertion> {
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for n in nodes.iter().filter(|n| n.is_null()) {
        let Some(sentence) = corpus.get(&n.sentence) else {
            continue;
        };
        if n.span.end > sentence.len() {
            continue;
        }
        if let Some(id) = atomic_instance(&generalize_layers(sentence, n.span, priority), cfg) {
            *counts.entry((n.class.clone(), id)).or_default() += 1;
        }
    }
    let mut out: Vec<Assertion> = counts
        .into_iter()
        .filter(|(_, f)| *f >= min_frequency)
        .map(|((class, inst), frequency)| {
            Assertion::isa(inst, class, Provenance::NullNodes { frequency })
        })
        .collect();
    out.sort_by(|a, b| {
        b.frequency()
            .cmp(&a.frequency())
            .then_with(|| a.key().cmp(&b.key()))
    });
    out
}

/// Default layer order for instance mining: instance tokens claim words
/// first, and annotation layers that only echo words are left out.
pub fn instance_priority() -> LayerPriority {
    LayerPriority::new(["instance", "class", "named-entity"])
}

fn atomic_instance(symbols: &[Symbol], cfg: &TaxonomyConfig) -> Option<String> {
    if let [Symbol::Terminal { value, layer }] = symbols {
        if cfg.instance_layers.contains(layer) {
            return Some(value.clone());
        }
    }
    let mut words = Vec::with_capacity(symbols.len());
    for s in symbols {
        match s {
            Symbol::Terminal { value, layer } if layer == LEXICAL => words.push(value.as_str()),
            _ => return None,
        }
    }
    let id = mint_identifier(&words);
    (!id.is_empty()).then_some(id)
}

fn provenance_text(a: &Assertion) -> String {
    let mut s = match &a.provenance {
        Provenance::Seed => "seed".to_string(),
        Provenance::Rule(id) => format!("rule:{id}"),
        Provenance::NullNodes { .. } => "null-nodes".to_string(),
        Provenance::Inferred(chain) => format!("inferred:{}", chain.join(" + ")),
    };
    if let Some(note) = &a.note {
        s.push(';');
        s.push_str(note);
    }
    s
}

/// Tab-separated triples: predicate, subject, object, provenance, and for
/// mined instances the frequency.
pub fn write_triples(assertions: &[Assertion]) -> String {
    let mut out = String::new();
    for a in assertions {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}",
            a.predicate,
            a.subject,
            a.object,
            provenance_text(a)
        ));
        if let Some(f) = a.frequency() {
            out.push_str(&format!("\t{f}"));
        }
        if let Some(c) = a.confidence {
            if a.frequency().is_none() {
                out.push('\t');
            }
            out.push_str(&format!("\t{c}"));
        }
        out.push('\n');
    }
    out
}

pub fn read_triples(text: &str) -> Result<Vec<Assertion>, OntologyError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| OntologyError::Malformed {
            line: i + 1,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if !(4..=6).contains(&cols.len()) {
            return Err(err(format!(
                "expected 4 to 6 columns, found {}",
                cols.len()
            )));
        }
        let frequency = match cols.get(4).filter(|c| !c.is_empty()) {
            Some(f) => Some(
                f.parse::<usize>()
                    .map_err(|_| err(format!("bad frequency `{f}`")))?,
            ),
            None => None,
        };
        let confidence = match cols.get(5) {
            Some(c) => Some(
                c.parse::<f64>()
                    .map_err(|_| err(format!("bad confidence `{c}`")))?,
            ),
            None => None,
        };
        let (prov, note) = match cols[3].split_once(';') {
            Some((p, n)) => (p, Some(n.to_string())),
            None => (cols[3], None),
        };
        let provenance = match prov.split_once(':') {
            None if prov == "seed" => Provenance::Seed,
            None if prov == "null-nodes" => Provenance::NullNodes {
                frequency: frequency
                    .ok_or_else(|| err("null-nodes provenance needs a frequency".into()))?,
            },
            Some(("rule", id)) => Provenance::Rule(RuleId(
                id.parse().map_err(|_| err(format!("bad rule id `{id}`")))?,
            )),
            Some(("inferred", chain)) => Provenance::Inferred(if chain.is_empty() {
                vec![]
            } else {
                chain.split(" + ").map(str::to_string).collect()
            }),
            _ => return Err(err(format!("unknown provenance `{prov}`"))),
        };
        if cols[1].is_empty() || cols[2].is_empty() {
            return Err(err("empty subject or object".into()));
        }
        out.push(Assertion {
            predicate: Predicate::from(cols[0]),
            subject: cols[1].to_string(),
            object: cols[2].to_string(),
            provenance,
            confidence,
            note,
        });
    }
    Ok(out)
}

impl FromStr for Provenance {
    type Err = OntologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let line = format!("isa\tx\ty\t{s}");
        read_triples(&line).map(|mut v| v.remove(0).provenance)
    }
}

/// Up to `per_class` randomly chosen `isa` assertions per class, as CSV with
/// an empty `correct` column to fill in by hand.
pub fn evaluation_sample(assertions: &[Assertion], per_class: usize, seed: u64) -> String {
    let mut by_class: BTreeMap<&str, Vec<&Assertion>> = BTreeMap::new();
    for a in assertions.iter().filter(|a| a.predicate == Predicate::Isa) {
        by_class.entry(&a.object).or_default().push(a);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["class", "instance", "frequency", "provenance", "correct"])
        .expect("in-memory write");
    for (class, members) in by_class {
        let mut picked: Vec<usize> = if members.len() <= per_class {
            (0..members.len()).collect()
        } else {
            sample(&mut rng, members.len(), per_class).into_vec()
        };
        picked.sort_unstable();
        for i in picked {
            let a = members[i];
            let freq = a.frequency().map(|f| f.to_string()).unwrap_or_default();
            w.write_record([
                class,
                a.subject.as_str(),
                freq.as_str(),
                provenance_text(a).as_str(),
                "",
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
