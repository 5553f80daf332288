use std::collections::BTreeSet;

use ontogram::corpus::{interpret, Token};
use ontogram::grammar::{instantiate_universal, Phase};
use ontogram::induction::{generalize_bottom_up, propose_rules, LayerPriority};
use ontogram::ontology::{
    extract_instances, extract_taxonomy, infer_relations, instance_priority, Assertion, Provenance,
    TaxonomyConfig,
};
use ontogram::parser::{match_pattern, reliability, MatchLimits, NodeStatus, SemanticNode};
use ontogram::relext::{candidates, Counts, Scope};
use ontogram::{
    load_corpus, save_corpus, Corpus, Grammar, LayeredSentence, Origin, Parser, ParserConfig,
    Property, ReliabilityParams, RuleId, Span, Symbol,
};
use proptest::prelude::*;

const WORDS: [&str; 10] = [
    "Ann", "was", "born", "in", "Oslo", "a", "poet", "from", "Rome", "is",
];
const CLASSES: [&str; 3] = ["Person", "Location", "Profession"];

const RULES: [&str; 22] = [
    "<Relation> ::= <Person> <Tail>",
    "<Relation> ::= <Person> was <Event> in <Location>",
    "<Relation> ::= <Person> is <Role>",
    "<Tail> ::= <A> <B>",
    "<Tail> ::= <A>",
    "<A> ::= <B>",
    "<B> ::= <A>",
    "<A> ::= <Verb> <Event>",
    "<B> ::= in <Location>",
    "<B> ::= <Location>",
    "<*> ::= a <*>",
    "<*> ::= <*> from <Location>",
    "<Role> ::= <Profession>",
    "<Role> ::= <Role> <Role>",
    "<Person> ::= Person{class}",
    "<Location> ::= Location{class}",
    "<Profession> ::= Profession{class}",
    "<Profession> ::= poet",
    "<Event> ::= born",
    "<Verb> ::= was",
    "<Verb> ::= is",
    "<Person> ::= Ann",
];

const PROPERTIES: [Property; 4] = [
    Property::Positive,
    Property::Neutral,
    Property::Negative,
    Property::NonInducible,
];

/// Splits `0..len` into contiguous pieces from a list of cut flags.
fn tiles(len: usize, cuts: &[bool]) -> Vec<Span> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..len {
        if cuts[i % cuts.len()] {
            out.push(Span::new(start, i));
            start = i;
        }
    }
    out.push(Span::new(start, len));
    out
}

fn sentence_strategy() -> impl Strategy<Value = LayeredSentence> {
    (
        proptest::collection::vec(0..WORDS.len(), 1..=7),
        proptest::collection::vec(any::<bool>(), 1..8),
        proptest::collection::vec(0..=CLASSES.len(), 8),
        proptest::collection::vec(any::<bool>(), 8),
        0u32..1000,
    )
        .prop_map(|(words, cuts, classes, named, id)| {
            let words: Vec<String> = words.into_iter().map(|w| WORDS[w].to_string()).collect();
            let spans = tiles(words.len(), &cuts);
            let class_tokens = spans
                .iter()
                .zip(classes.iter().cycle())
                .map(|(&span, &c)| Token {
                    value: CLASSES.get(c).map(|v| v.to_string()),
                    span,
                })
                .collect();
            let instance_tokens = spans
                .iter()
                .zip(named.iter().cycle())
                .map(|(&span, &n)| Token {
                    value: n.then(|| {
                        (span.start..span.end)
                            .map(|i| words[i].as_str())
                            .collect::<Vec<_>>()
                            .join("_")
                    }),
                    span,
                })
                .collect();
            LayeredSentence::new(
                format!("s{id}"),
                words,
                [
                    ("instance".to_string(), instance_tokens),
                    ("class".to_string(), class_tokens),
                ],
            )
            .expect("generated layers tile the sentence")
        })
}

fn corpus_strategy() -> impl Strategy<Value = Corpus> {
    proptest::collection::vec(sentence_strategy(), 1..6).prop_map(|sentences| {
        let mut seen = BTreeSet::new();
        let unique = sentences
            .into_iter()
            .filter(|s| seen.insert(s.id().to_string()))
            .collect();
        Corpus::new(vec!["instance".into(), "class".into()], unique)
    })
}

/// A random subset of the rule pool with random properties and trigger
/// probabilities; the first rule is always kept.
fn grammar_strategy() -> impl Strategy<Value = Grammar> {
    (
        proptest::collection::vec(any::<bool>(), RULES.len()),
        proptest::collection::vec(0..PROPERTIES.len(), RULES.len()),
        proptest::collection::vec(0.0f64..=1.0, RULES.len()),
    )
        .prop_map(|(keep, props, tps)| {
            let mut text = String::from("%start <Relation>\n");
            for (i, rule) in RULES.iter().enumerate() {
                if i == 0 || keep[i] {
                    text.push_str(&format!("{}\t{rule}\n", PROPERTIES[props[i]]));
                }
            }
            let mut g = Grammar::parse(&text).expect("pool rules parse");
            let ids: Vec<RuleId> = g.rules().map(|r| r.id).collect();
            for (id, tp) in ids.into_iter().zip(tps) {
                g.set_trigger_probability(id, tp).unwrap();
            }
            g
        })
}

/// Each internal node's children are a match of its rule over its span.
fn children_match_rules(n: &SemanticNode, g: &Grammar, s: &LayeredSentence) -> bool {
    if n.children.is_empty() {
        return true;
    }
    let Some(rule) = n.rule.and_then(|id| g.rule(id)) else {
        return false;
    };
    let rhs: Vec<Symbol> = if rule.is_universal() {
        instantiate_universal(rule, &n.class).unwrap().rhs
    } else {
        rule.rhs.clone()
    };
    let spans: Vec<Span> = n.children.iter().map(|c| c.span).collect();
    match_pattern(&rhs, n.span, s, &MatchLimits::unlimited()).contains(&spans)
        && n.children.iter().all(|c| children_match_rules(c, g, s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn full_span_interprets_in_every_layer(s in sentence_strategy()) {
        for layer in s.layers() {
            let a = interpret(&s, s.full_span(), layer.name()).unwrap();
            let b = interpret(&s, s.full_span(), layer.name()).unwrap();
            prop_assert!(a.is_valid());
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn corpus_round_trips_byte_for_byte(c in corpus_strategy()) {
        let text = c.to_jsonl();
        prop_assert_eq!(Corpus::parse(&text).unwrap().to_jsonl(), text.clone());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        save_corpus(&c, &path).unwrap();
        let once = std::fs::read_to_string(&path).unwrap();
        save_corpus(&load_corpus(&path).unwrap(), &path).unwrap();
        prop_assert_eq!(std::fs::read_to_string(&path).unwrap(), once);
    }

    #[test]
    fn phases_nest_and_universals_instantiate(g in grammar_strategy()) {
        let all: BTreeSet<RuleId> = g.rules().map(|r| r.id).collect();
        let parsing: BTreeSet<RuleId> = g.active_rules(Phase::Parsing).iter().map(|r| r.id).collect();
        let induction: BTreeSet<RuleId> = g.active_rules(Phase::Induction).iter().map(|r| r.id).collect();
        prop_assert!(induction.is_subset(&parsing));
        prop_assert!(parsing.is_subset(&all));
        for r in g.rules().filter(|r| r.is_universal()) {
            for class in g.non_terminals() {
                if let Ok(concrete) = instantiate_universal(r, class) {
                    prop_assert!(concrete.lhs != Symbol::Universal);
                    prop_assert!(!concrete.rhs.contains(&Symbol::Universal));
                }
            }
        }
    }

    #[test]
    fn every_mutation_bumps_the_version(g in grammar_strategy(), p in 0..PROPERTIES.len(), tp in 0.0f64..=1.0) {
        let mut g = g;
        let id = g.rules().next().unwrap().id;
        let mut last = g.version();
        g.set_property(id, PROPERTIES[p]).unwrap();
        prop_assert!(g.version() > last);
        last = g.version();
        g.set_trigger_probability(id, tp).unwrap();
        prop_assert!(g.version() > last);
        last = g.version();
        let snapshot = g.clone();
        g.add_rule(Symbol::nt("Fresh"), vec![Symbol::word("zzz")], Property::Positive, Origin::Seed).unwrap();
        prop_assert!(g.version() > last);
        prop_assert!(snapshot.len() + 1 == g.len());
        prop_assert!(snapshot.rules().all(|r| r.lhs != Symbol::nt("Fresh")));
    }

    #[test]
    fn parse_trees_are_well_formed(g in grammar_strategy(), s in sentence_strategy()) {
        let out = Parser::new(&g, ParserConfig::default()).parse(&s);
        let root = &out.tree.root;
        prop_assert_eq!(root.span, s.full_span());
        let mut leaves: Vec<Span> = root.leaves().map(|l| l.span).collect();
        leaves.sort();
        prop_assert!(leaves.windows(2).all(|w| w[0].end <= w[1].start), "leaves overlap: {:?}", leaves);
        prop_assert!(children_match_rules(root, &g, &s));
        let r: f64 = reliability(root, &ReliabilityParams::default(), &g);
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert_eq!(r == 1.0, root.status == NodeStatus::FullyParsed);
        for n in &out.induction {
            prop_assert!(n.status != NodeStatus::FullyParsed);
        }
    }

    #[test]
    fn memo_is_an_optimization_only(g in grammar_strategy(), s in sentence_strategy()) {
        let memo = Parser::new(&g, ParserConfig::default()).parse(&s);
        let plain = Parser::new(&g, ParserConfig { memoize: false, ..ParserConfig::default() }).parse(&s);
        prop_assert_eq!(&memo.tree, &plain.tree);
        prop_assert_eq!(&memo.induction, &plain.induction);
        prop_assert!(memo.operations <= plain.operations);
    }

    #[test]
    fn worker_count_does_not_change_results(g in grammar_strategy(), c in corpus_strategy()) {
        let p = Parser::new(&g, ParserConfig::default());
        let one = p.parse_corpus(&c, 1);
        let four = p.parse_corpus(&c, 4);
        prop_assert_eq!(one.len(), four.len());
        for (a, b) in one.iter().zip(&four) {
            prop_assert_eq!(&a.tree, &b.tree);
            prop_assert_eq!(&a.induction, &b.induction);
        }
    }

    #[test]
    fn bottom_up_reaches_a_fixpoint(g in grammar_strategy(), s in sentence_strategy()) {
        let symbols = ontogram::induction::generalize_layers(&s, s.full_span(), &LayerPriority::default());
        let reduced = generalize_bottom_up(&symbols, &g);
        prop_assert!(reduced.len() <= symbols.len());
        // a fixpoint reduces to itself unless unit rules cycle
        let again = generalize_bottom_up(&reduced, &g);
        prop_assert!(again.len() <= reduced.len());
    }

    #[test]
    fn proposals_ignore_node_order(g in grammar_strategy(), c in corpus_strategy(), seed in any::<u64>()) {
        let p = Parser::new(&g, ParserConfig::default());
        let nodes: Vec<_> = p.parse_corpus(&c, 1).into_iter().flat_map(|o| o.induction).collect();
        let mut shuffled = nodes.clone();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        let limits = MatchLimits::default();
        let a = propose_rules(&nodes, &c, &g, &LayerPriority::default(), &limits);
        let b = propose_rules(&shuffled, &c, &g, &LayerPriority::default(), &limits);
        let key = |v: &[ontogram::induction::CandidateRule]| -> Vec<(String, usize)> {
            v.iter().map(|r| (r.text(), r.frequency)).collect()
        };
        prop_assert_eq!(key(&a), key(&b));
    }

    #[test]
    fn taxonomy_is_pure_and_positive_only(g in grammar_strategy()) {
        let cfg = TaxonomyConfig::default();
        let a = extract_taxonomy(&g, &cfg);
        prop_assert_eq!(&a, &extract_taxonomy(&g, &cfg));
        for x in &a {
            let Provenance::Rule(id) = x.provenance else {
                return Err(TestCaseError::fail(format!("{x} has no rule provenance")));
            };
            prop_assert_eq!(g.rule(id).unwrap().property, Property::Positive);
        }
    }

    #[test]
    fn instance_counts_stay_within_null_nodes(g in grammar_strategy(), c in corpus_strategy(), min in 1usize..4) {
        let p = Parser::new(&g, ParserConfig::default());
        let nodes: Vec<_> = p.parse_corpus(&c, 1).into_iter().flat_map(|o| o.induction).collect();
        let nulls = nodes.iter().filter(|n| n.is_null()).count();
        let found = extract_instances(&nodes, &c, min, &instance_priority(), &TaxonomyConfig::default());
        let total: usize = found.iter().map(|a| a.frequency().unwrap()).sum();
        prop_assert!(total <= nulls);
        prop_assert!(found.iter().all(|a| a.frequency().unwrap() >= min));
    }

    #[test]
    fn inference_is_a_fixpoint(edges in proptest::collection::vec((0u8..12, 0u8..12), 0..30), isa in proptest::collection::vec((0u8..6, 0u8..12), 0..10), cut in 0usize..40) {
        let mut stated: Vec<Assertion> = edges
            .iter()
            .filter(|(a, b)| a < b)
            .map(|(a, b)| Assertion::sub_class_of(format!("C{a}"), format!("C{b}"), Provenance::Seed))
            .collect();
        stated.extend(isa.iter().map(|(i, c)| Assertion::isa(format!("i{i}"), format!("C{c}"), Provenance::Seed)));
        let cut = cut.min(stated.len());
        let (seed, new) = stated.split_at(cut);
        let first = infer_relations(new, seed);
        let mut grown = new.to_vec();
        grown.extend(first.assertions.iter().cloned());
        let second = infer_relations(&grown, seed);
        prop_assert!(second.assertions.is_empty(), "{:?}", second.assertions);
    }

    #[test]
    fn unary_leaf_candidates_are_root_paths(g in grammar_strategy(), s in sentence_strategy()) {
        let root = Parser::new(&g, ParserConfig::default()).parse(&s).tree.root;
        let found = candidates(&root, 1, Scope::Leaves);
        prop_assert_eq!(found.len(), root.leaves().count());
        for c in &found {
            prop_assert!(c.tree.is_path());
            prop_assert_eq!(c.tree.len(), c.entities[0].len() + 1);
            prop_assert!(root.at(&c.entities[0]).unwrap().is_leaf());
        }
    }

    #[test]
    fn f1_agrees_with_precision_and_recall(p in 0usize..50, c in 0usize..50, e in 0usize..50, h in 0usize..50, conv in 0usize..50) {
        let counts = Counts {
            predictions: p.max(c),
            correct: c,
            eligible: e.max(h).max(conv),
            converted: conv.max(h),
            hits: h,
            split: 0,
            subterm: 0,
        };
        let m = counts.metrics();
        let harmonic = |a: f64, b: f64| if a + b == 0.0 { 0.0 } else { 2.0 * a * b / (a + b) };
        prop_assert!((m.f1 - harmonic(m.precision, m.recall)).abs() < 1e-9);
        prop_assert!((m.converted_f1 - harmonic(m.precision, m.converted_recall)).abs() < 1e-9);
        prop_assert!(m.converted_recall >= m.recall);
    }
}
