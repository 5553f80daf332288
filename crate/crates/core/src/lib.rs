//! Joint induction of a semantic grammar and an ontology from layered text.
//!
//! Sentences annotated in parallel layers ([`corpus`]) are parsed top-down
//! into semantic trees ([`parser`]) with a context-free grammar whose
//! non-terminals are semantic classes ([`grammar`]). Terms no rule can expand
//! drive an iterative, human-reviewed rule induction loop ([`induction`]).
//! The grammar and the trees then feed ontology extraction ([`ontology`]) and
//! relation learning ([`relext`]).

pub mod corpus;
pub mod grammar;
pub mod induction;
pub mod ontology;
pub mod parser;
pub mod relext;
pub mod scalar;

pub use corpus::{load_corpus, save_corpus, Corpus, LayeredSentence, Span, Term};
pub use grammar::{load_grammar, save_grammar, Grammar, Origin, Property, Rule, RuleId, Symbol};
pub use scalar::Scalar;

/// Default floating-point type.
pub type Real = f64;

pub type ReliabilityParams = parser::ReliabilityParams<Real>;
pub type ParserConfig = parser::ParserConfig<Real>;
pub type Parser<'g> = parser::Parser<'g, Real>;
pub type LogisticRegression = relext::LogisticRegression<Real>;
