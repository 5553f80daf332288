//! Semantic context-free grammar: symbols, rules with properties, and the
//! text format used to persist them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LEXICAL;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Symbol {
    /// A semantic class, e.g. `<Person>`.
    NonTerminal { name: String },
    /// A non-null token value of some layer, e.g. `Person{class}`.
    Terminal { value: String, layer: String },
    /// `<*>`, replaced consistently by any one non-terminal.
    Universal,
}

impl Symbol {
    pub fn nt(name: impl Into<String>) -> Self {
        Symbol::NonTerminal { name: name.into() }
    }

    pub fn t(value: impl Into<String>, layer: impl Into<String>) -> Self {
        Symbol::Terminal {
            value: value.into(),
            layer: layer.into(),
        }
    }

    pub fn word(value: impl Into<String>) -> Self {
        Symbol::t(value, LEXICAL)
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Symbol::Terminal { .. })
    }

    /// Non-terminals and the universal symbol both match a sub-term.
    pub fn is_slot(&self) -> bool {
        !self.is_terminal()
    }

    pub fn nt_name(&self) -> Option<&str> {
        match self {
            Symbol::NonTerminal { name } => Some(name),
            _ => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::NonTerminal { name } => write!(f, "<{name}>"),
            Symbol::Universal => f.write_str("<*>"),
            Symbol::Terminal { value, layer } => {
                for (i, c) in value.chars().enumerate() {
                    if c.is_whitespace() || matches!(c, '\\' | '{' | '}') || (i == 0 && c == '<') {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                if layer != LEXICAL {
                    write!(f, "{{{layer}}}")?;
                }
                Ok(())
            }
        }
    }
}

/// Renders a symbol sequence in display notation.
pub fn render_symbols(symbols: &[Symbol]) -> String {
    symbols
        .iter()
        .map(Symbol::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NotationError {
    #[error("unterminated `<` at column {0}")]
    UnterminatedNonTerminal(usize),
    #[error("empty non-terminal name at column {0}")]
    EmptyName(usize),
    #[error("empty terminal value at column {0}")]
    EmptyTerminal(usize),
    #[error("malformed layer suffix at column {0}")]
    BadLayer(usize),
    #[error("dangling escape at end of input")]
    DanglingEscape,
}

/// Parses display notation (`<Person> is a Profession{class}`) into symbols.
pub fn parse_symbols(text: &str) -> Result<Vec<Symbol>, NotationError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let col = i + 1;
        if chars[i] == '<' {
            let close = chars[i + 1..]
                .iter()
                .position(|&c| c == '>')
                .ok_or(NotationError::UnterminatedNonTerminal(col))?;
            let name: String = chars[i + 1..i + 1 + close].iter().collect();
            let name = name.trim();
            out.push(match name {
                "" => return Err(NotationError::EmptyName(col)),
                "*" | "_" => Symbol::Universal,
                n => Symbol::nt(n),
            });
            i += close + 2;
            continue;
        }
        let mut value = String::new();
        let mut layer: Option<String> = None;
        while i < chars.len() && !chars[i].is_whitespace() {
            match chars[i] {
                '\\' => {
                    let c = *chars.get(i + 1).ok_or(NotationError::DanglingEscape)?;
                    value.push(c);
                    i += 2;
                }
                '{' => {
                    let close = chars[i + 1..]
                        .iter()
                        .position(|&c| c == '}')
                        .ok_or(NotationError::BadLayer(col))?;
                    let name: String = chars[i + 1..i + 1 + close].iter().collect();
                    i += close + 2;
                    if name.is_empty() || (i < chars.len() && !chars[i].is_whitespace()) {
                        return Err(NotationError::BadLayer(col));
                    }
                    layer = Some(name);
                }
                c => {
                    value.push(c);
                    i += 1;
                }
            }
        }
        if value.is_empty() {
            return Err(NotationError::EmptyTerminal(col));
        }
        out.push(Symbol::t(
            value,
            layer.unwrap_or_else(|| LEXICAL.to_string()),
        ));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Positive,
    Neutral,
    Negative,
    NonInducible,
}

impl Property {
    /// Used by the top-down parser.
    pub fn parses(self) -> bool {
        matches!(self, Property::Positive | Property::NonInducible)
    }

    /// Used by bottom-up generalization during induction.
    pub fn induces(self) -> bool {
        self == Property::Positive
    }

    /// Neutral and negative rules are inert and block re-induction.
    pub fn is_blocking(self) -> bool {
        matches!(self, Property::Neutral | Property::Negative)
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Positive => "positive",
            Property::Neutral => "neutral",
            Property::Negative => "negative",
            Property::NonInducible => "non-inducible",
        })
    }
}

impl FromStr for Property {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "positive" => Ok(Property::Positive),
            "neutral" => Ok(Property::Neutral),
            "negative" => Ok(Property::Negative),
            "non-inducible" => Ok(Property::NonInducible),
            other => Err(GrammarError::UnknownProperty(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Seed,
    Induced(u32),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Seed => f.write_str("seed"),
            Origin::Induced(i) => write!(f, "induced:{i}"),
        }
    }
}

impl FromStr for Origin {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "seed" {
            return Ok(Origin::Seed);
        }
        s.strip_prefix("induced:")
            .and_then(|n| n.parse().ok())
            .map(Origin::Induced)
            .ok_or_else(|| GrammarError::Malformed(format!("bad origin `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleId(pub u32);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: RuleId,
    pub lhs: Symbol,
    pub rhs: Vec<Symbol>,
    pub property: Property,
    /// Probability that the right-hand side matches a random term.
    pub trigger_probability: f64,
    pub origin: Origin,
}

impl Rule {
    pub fn is_universal(&self) -> bool {
        self.lhs == Symbol::Universal
    }

    /// `lhs ::= rhs` in display notation; also the identity used for dedup.
    pub fn body(&self) -> String {
        rule_key(&self.lhs, &self.rhs)
    }

    pub fn slot_count(&self) -> usize {
        self.rhs.iter().filter(|s| s.is_slot()).count()
    }

    pub fn has_terminal(&self) -> bool {
        self.rhs.iter().any(Symbol::is_terminal)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.body())
    }
}

pub fn rule_key(lhs: &Symbol, rhs: &[Symbol]) -> String {
    format!("{lhs} ::= {}", render_symbols(rhs))
}

/// Replaces every `<*>` in a universal rule with the given class.
pub fn instantiate_universal(rule: &Rule, class: &str) -> Result<Rule, GrammarError> {
    if !rule.is_universal() {
        return Err(GrammarError::NotUniversal(rule.id));
    }
    let sub = |s: &Symbol| match s {
        Symbol::Universal => Symbol::nt(class),
        other => other.clone(),
    };
    Ok(Rule {
        id: rule.id,
        lhs: sub(&rule.lhs),
        rhs: rule.rhs.iter().map(sub).collect(),
        property: rule.property,
        trigger_probability: rule.trigger_probability,
        origin: rule.origin,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Parsing,
    Induction,
}

#[derive(Debug, Error, PartialEq)]
pub enum GrammarError {
    #[error("rule has an empty right-hand side")]
    EmptyRhs,
    #[error("left-hand side must be a non-terminal or <*>, got `{0}`")]
    InvalidLhs(String),
    #[error("<*> must appear on both sides of a rule or on neither: `{0}`")]
    UniversalMismatch(String),
    #[error("rule `{0}` rewrites a symbol to itself")]
    SelfRewrite(String),
    #[error("rule `{body}` is {existing} and cannot be re-added as {requested}")]
    Blocked {
        body: String,
        existing: Property,
        requested: Property,
    },
    #[error("rule `{body}` already exists as {existing}")]
    Duplicate { body: String, existing: Property },
    #[error("rule {0} has no universal symbol")]
    NotUniversal(RuleId),
    #[error("unknown rule id {0}")]
    UnknownRule(RuleId),
    #[error("duplicate rule id {0}")]
    DuplicateId(RuleId),
    #[error("unknown property `{0}`")]
    UnknownProperty(String),
    #[error("trigger probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("{0}")]
    Notation(#[from] NotationError),
    #[error("{0}")]
    Malformed(String),
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<GrammarError>,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Rule set with start symbol and non-terminal inventory.
///
/// Every mutation bumps `version`; parsers work on a borrowed or cloned
/// snapshot and therefore never see later additions.
#[derive(Clone, Debug)]
pub struct Grammar {
    rules: BTreeMap<RuleId, Rule>,
    start: String,
    non_terminals: BTreeSet<String>,
    version: u64,
    next_id: u32,
    by_body: HashMap<String, RuleId>,
}

impl PartialEq for Grammar {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
            && self.start == other.start
            && self.non_terminals == other.non_terminals
    }
}

impl Default for Grammar {
    fn default() -> Self {
        Grammar::new("Relation")
    }
}

impl Grammar {
    pub fn new(start: impl Into<String>) -> Self {
        let start = start.into();
        Grammar {
            rules: BTreeMap::new(),
            non_terminals: BTreeSet::from([start.clone()]),
            start,
            version: 0,
            next_id: 1,
            by_body: HashMap::new(),
        }
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn set_start(&mut self, start: impl Into<String>) {
        self.start = start.into();
        self.non_terminals.insert(self.start.clone());
        self.version += 1;
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn non_terminals(&self) -> &BTreeSet<String> {
        &self.non_terminals
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rule(&self, id: RuleId) -> Option<&Rule> {
        self.rules.get(&id)
    }

    pub fn find(&self, lhs: &Symbol, rhs: &[Symbol]) -> Option<&Rule> {
        self.by_body
            .get(&rule_key(lhs, rhs))
            .and_then(|id| self.rules.get(id))
    }

    /// True when `(lhs, rhs)` is stored as neutral or negative.
    pub fn is_blocked(&self, lhs: &Symbol, rhs: &[Symbol]) -> bool {
        self.find(lhs, rhs)
            .is_some_and(|r| r.property.is_blocking())
    }

    pub fn add_rule(
        &mut self,
        lhs: Symbol,
        rhs: Vec<Symbol>,
        property: Property,
        origin: Origin,
    ) -> Result<RuleId, GrammarError> {
        validate(&lhs, &rhs)?;
        let body = rule_key(&lhs, &rhs);
        if let Some(&id) = self.by_body.get(&body) {
            let existing = self.rules[&id].property;
            if existing == property {
                return Ok(id);
            }
            if existing.is_blocking() {
                return Err(GrammarError::Blocked {
                    body,
                    existing,
                    requested: property,
                });
            }
            return Err(GrammarError::Duplicate { body, existing });
        }
        let id = RuleId(self.next_id);
        self.insert(Rule {
            id,
            lhs,
            rhs,
            property,
            trigger_probability: 0.0,
            origin,
        });
        Ok(id)
    }

    fn insert(&mut self, rule: Rule) {
        for s in std::iter::once(&rule.lhs).chain(&rule.rhs) {
            if let Symbol::NonTerminal { name } = s {
                self.non_terminals.insert(name.clone());
            }
        }
        self.next_id = self.next_id.max(rule.id.0 + 1);
        self.by_body.insert(rule.body(), rule.id);
        self.rules.insert(rule.id, rule);
        self.version += 1;
    }

    /// Changes a rule's property and returns the previous one.
    pub fn set_property(
        &mut self,
        id: RuleId,
        property: Property,
    ) -> Result<Property, GrammarError> {
        let rule = self
            .rules
            .get_mut(&id)
            .ok_or(GrammarError::UnknownRule(id))?;
        let old = std::mem::replace(&mut rule.property, property);
        self.version += 1;
        Ok(old)
    }

    pub fn set_trigger_probability(&mut self, id: RuleId, tp: f64) -> Result<(), GrammarError> {
        if !(0.0..=1.0).contains(&tp) {
            return Err(GrammarError::BadProbability(tp));
        }
        let rule = self
            .rules
            .get_mut(&id)
            .ok_or(GrammarError::UnknownRule(id))?;
        rule.trigger_probability = tp;
        self.version += 1;
        Ok(())
    }

    pub fn active_rules(&self, phase: Phase) -> Vec<&Rule> {
        self.rules
            .values()
            .filter(|r| match phase {
                Phase::Parsing => r.property.parses(),
                Phase::Induction => r.property.induces(),
            })
            .collect()
    }

    /// Concrete rules able to expand `class` in the given phase, with
    /// universal schemas instantiated for it, in rule-id order.
    pub fn rules_for(&self, class: &str, phase: Phase) -> Vec<Rule> {
        self.active_rules(phase)
            .into_iter()
            .filter_map(|r| match &r.lhs {
                Symbol::NonTerminal { name } if name == class => Some(r.clone()),
                Symbol::Universal => instantiate_universal(r, class).ok(),
                _ => None,
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("%start <{}>\n", self.start);
        for r in self.rules.values() {
            out.push_str(&format!(
                "{}\t{}\tid={}\ttp={}\torigin={}\n",
                r.property,
                r.body(),
                r.id,
                r.trigger_probability,
                r.origin
            ));
        }
        out
    }

    /// Parses the grammar text format.
    ///
    /// Each rule line is `property <TAB> lhs ::= rhs`, optionally followed by
    /// `id=`, `tp=` and `origin=` fields. `%start <Name>` sets the start
    /// symbol; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut g = Grammar::default();
        let mut pending: Vec<(usize, Rule, bool)> = Vec::new();
        let mut used = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let at = |source: GrammarError| GrammarError::Line {
                line,
                source: Box::new(source),
            };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("%start") {
                let syms = parse_symbols(rest).map_err(|e| at(e.into()))?;
                match syms.as_slice() {
                    [Symbol::NonTerminal { name }] => g.set_start(name.clone()),
                    _ => return Err(at(GrammarError::Malformed("bad %start directive".into()))),
                }
                continue;
            }
            let (rule, explicit) = parse_rule_line(raw).map_err(at)?;
            if explicit && !used.insert(rule.id) {
                return Err(at(GrammarError::DuplicateId(rule.id)));
            }
            pending.push((line, rule, explicit));
        }
        let mut next = used.iter().next_back().map_or(1, |id| id.0 + 1);
        for (line, mut rule, explicit) in pending {
            if !explicit {
                rule.id = RuleId(next);
                next += 1;
            }
            if let Some(&other) = g.by_body.get(&rule.body()) {
                return Err(GrammarError::Line {
                    line,
                    source: Box::new(GrammarError::Duplicate {
                        body: rule.body(),
                        existing: g.rules[&other].property,
                    }),
                });
            }
            g.insert(rule);
        }
        Ok(g)
    }
}

fn validate(lhs: &Symbol, rhs: &[Symbol]) -> Result<(), GrammarError> {
    if rhs.is_empty() {
        return Err(GrammarError::EmptyRhs);
    }
    if lhs.is_terminal() {
        return Err(GrammarError::InvalidLhs(lhs.to_string()));
    }
    let universal_rhs = rhs.contains(&Symbol::Universal);
    if (*lhs == Symbol::Universal) != universal_rhs {
        return Err(GrammarError::UniversalMismatch(rule_key(lhs, rhs)));
    }
    if rhs.len() == 1 && rhs[0] == *lhs {
        return Err(GrammarError::SelfRewrite(rule_key(lhs, rhs)));
    }
    Ok(())
}

fn parse_rule_line(raw: &str) -> Result<(Rule, bool), GrammarError> {
    let mut fields = raw.split('\t');
    let property: Property = fields.next().unwrap_or_default().parse()?;
    let body = fields
        .next()
        .ok_or_else(|| GrammarError::Malformed("expected `property<TAB>lhs ::= rhs`".into()))?;
    let (lhs_text, rhs_text) = body
        .split_once("::=")
        .ok_or_else(|| GrammarError::Malformed("missing `::=`".into()))?;
    let lhs = match parse_symbols(lhs_text)?.as_slice() {
        [s] => s.clone(),
        _ => {
            return Err(GrammarError::Malformed(
                "left-hand side must be one symbol".into(),
            ))
        }
    };
    let rhs = parse_symbols(rhs_text)?;
    validate(&lhs, &rhs)?;
    let mut rule = Rule {
        id: RuleId(0),
        lhs,
        rhs,
        property,
        trigger_probability: 0.0,
        origin: Origin::Seed,
    };
    let mut explicit = false;
    for field in fields {
        let field = field.trim();
        if field.is_empty() {
            continue;
        }
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| GrammarError::Malformed(format!("bad field `{field}`")))?;
        match key {
            "id" => {
                let id = value
                    .parse()
                    .map_err(|_| GrammarError::Malformed(format!("bad id `{value}`")))?;
                rule.id = RuleId(id);
                explicit = true;
            }
            "tp" => {
                let tp: f64 = value
                    .parse()
                    .map_err(|_| GrammarError::Malformed(format!("bad tp `{value}`")))?;
                if !(0.0..=1.0).contains(&tp) {
                    return Err(GrammarError::BadProbability(tp));
                }
                rule.trigger_probability = tp;
            }
            "origin" => rule.origin = value.parse()?,
            other => return Err(GrammarError::Malformed(format!("unknown field `{other}`"))),
        }
    }
    Ok((rule, explicit))
}

pub fn load_grammar(path: impl AsRef<Path>) -> Result<Grammar, GrammarError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| GrammarError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Grammar::parse(&text)
}

pub fn save_grammar(grammar: &Grammar, path: impl AsRef<Path>) -> Result<(), GrammarError> {
    let path = path.as_ref();
    fs::write(path, grammar.to_text()).map_err(|e| GrammarError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syms(s: &str) -> Vec<Symbol> {
        parse_symbols(s).unwrap()
    }

    #[test]
    fn notation_parses_and_renders() {
        let s = syms("<Person> is a Profession{class} from <Life Role> Phil_Madeira{instance}");
        assert_eq!(s[0], Symbol::nt("Person"));
        assert_eq!(s[1], Symbol::word("is"));
        assert_eq!(s[3], Symbol::t("Profession", "class"));
        assert_eq!(s[5], Symbol::nt("Life Role"));
        assert_eq!(
            render_symbols(&s),
            "<Person> is a Profession{class} from <Life Role> Phil_Madeira{instance}"
        );
        assert_eq!(
            syms("<_> ::="),
            vec![Symbol::Universal, Symbol::word("::=")]
        );
    }

    #[test]
    fn notation_escapes_awkward_terminals() {
        let awkward = vec![
            Symbol::word("<3"),
            Symbol::t("a{b}", "ne"),
            Symbol::word("x y"),
        ];
        let text = render_symbols(&awkward);
        assert_eq!(parse_symbols(&text).unwrap(), awkward);
    }

    #[test]
    fn add_rule_is_idempotent() {
        let mut g = Grammar::default();
        let rhs = syms("<Person> is <Life Role>");
        let a = g
            .add_rule(
                Symbol::nt("Relation"),
                rhs.clone(),
                Property::Positive,
                Origin::Seed,
            )
            .unwrap();
        let v = g.version();
        let b = g
            .add_rule(
                Symbol::nt("Relation"),
                rhs,
                Property::Positive,
                Origin::Seed,
            )
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(g.version(), v);
        assert!(g.non_terminals().contains("Life Role"));
    }

    #[test]
    fn neutral_rules_cannot_be_reinduced() {
        let mut g = Grammar::default();
        let rhs = syms("the university");
        g.add_rule(
            Symbol::nt("Date"),
            rhs.clone(),
            Property::Neutral,
            Origin::Induced(601),
        )
        .unwrap();
        let err = g
            .add_rule(
                Symbol::nt("Date"),
                rhs.clone(),
                Property::Positive,
                Origin::Induced(602),
            )
            .unwrap_err();
        assert!(matches!(err, GrammarError::Blocked { .. }));
        assert!(g.is_blocked(&Symbol::nt("Date"), &rhs));
    }

    #[test]
    fn rejects_invalid_rules() {
        let mut g = Grammar::default();
        assert_eq!(
            g.add_rule(Symbol::nt("A"), vec![], Property::Positive, Origin::Seed),
            Err(GrammarError::EmptyRhs)
        );
        assert!(matches!(
            g.add_rule(
                Symbol::nt("A"),
                syms("a <*>"),
                Property::Positive,
                Origin::Seed
            ),
            Err(GrammarError::UniversalMismatch(_))
        ));
        assert!(matches!(
            g.add_rule(
                Symbol::nt("A"),
                syms("<A>"),
                Property::Positive,
                Origin::Seed
            ),
            Err(GrammarError::SelfRewrite(_))
        ));
    }

    #[test]
    fn universal_instantiation() {
        let mut g = Grammar::default();
        let id = g
            .add_rule(
                Symbol::Universal,
                syms("a <*>"),
                Property::Positive,
                Origin::Seed,
            )
            .unwrap();
        let r = instantiate_universal(g.rule(id).unwrap(), "Life Role").unwrap();
        assert_eq!(r.body(), "<Life Role> ::= a <Life Role>");
        assert_eq!(r.id, id);

        let id = g
            .add_rule(
                Symbol::Universal,
                syms("<*> and <*>"),
                Property::Positive,
                Origin::Seed,
            )
            .unwrap();
        let r = instantiate_universal(g.rule(id).unwrap(), "Location").unwrap();
        assert_eq!(r.body(), "<Location> ::= <Location> and <Location>");
        assert!(!r.rhs.contains(&Symbol::Universal));

        let concrete = g
            .add_rule(Symbol::nt("X"), syms("x"), Property::Positive, Origin::Seed)
            .unwrap();
        assert_eq!(
            instantiate_universal(g.rule(concrete).unwrap(), "Y"),
            Err(GrammarError::NotUniversal(concrete))
        );
    }

    #[test]
    fn active_rules_by_phase() {
        let mut g = Grammar::default();
        assert!(g.active_rules(Phase::Parsing).is_empty());
        let props = [
            Property::Positive,
            Property::Neutral,
            Property::Negative,
            Property::NonInducible,
        ];
        for (i, p) in props.iter().enumerate() {
            g.add_rule(
                Symbol::nt("A"),
                vec![Symbol::word(format!("w{i}"))],
                *p,
                Origin::Seed,
            )
            .unwrap();
        }
        let parsing: Vec<_> = g
            .active_rules(Phase::Parsing)
            .iter()
            .map(|r| r.property)
            .collect();
        assert_eq!(parsing, [Property::Positive, Property::NonInducible]);
        let induction: Vec<_> = g
            .active_rules(Phase::Induction)
            .iter()
            .map(|r| r.property)
            .collect();
        assert_eq!(induction, [Property::Positive]);
    }

    #[test]
    fn text_round_trip() {
        let mut g = Grammar::new("Relation");
        g.add_rule(
            Symbol::nt("Relation"),
            syms("<Person> is <Life Role>"),
            Property::Positive,
            Origin::Seed,
        )
        .unwrap();
        let id = g
            .add_rule(
                Symbol::nt("Life Role"),
                syms("born in <Location>"),
                Property::NonInducible,
                Origin::Induced(3),
            )
            .unwrap();
        g.set_trigger_probability(id, 0.1234567890123).unwrap();
        g.add_rule(
            Symbol::nt("Date"),
            syms("the university"),
            Property::Neutral,
            Origin::Induced(4),
        )
        .unwrap();
        let back = Grammar::parse(&g.to_text()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_text(), g.to_text());
    }

    #[test]
    fn load_reports_line_of_bad_rule() {
        let text = "positive\t<A> ::= a\n\npositive\t<B> ::=\n";
        match Grammar::parse(text).unwrap_err() {
            GrammarError::Line { line, source } => {
                assert_eq!(line, 3);
                assert_eq!(*source, GrammarError::EmptyRhs);
            }
            e => panic!("unexpected {e}"),
        }
    }
}
