use serde::{Deserialize, Serialize};

use super::vtree::NodePath;
use super::{Argument, RelationExample, ValueKind};
use crate::corpus::{LayeredSentence, Span};
use crate::parser::SemanticNode;

/// How ISO dates are written in the corpus text.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DateStyle {
    /// `24 June 1883`
    #[default]
    DayMonthYear,
    /// `June 24 , 1883`
    MonthDayYear,
}

const MONTHS: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

/// Renders `yyyy-mm-dd` as corpus words; `None` if the value is not an ISO
/// date.
pub fn canonical_date(iso: &str, style: DateStyle) -> Option<Vec<String>> {
    let mut it = iso.splitn(3, '-');
    let (y, m, d) = (it.next()?, it.next()?, it.next()?);
    if y.len() != 4 || m.len() != 2 || d.len() != 2 {
        return None;
    }
    let year: u32 = y.parse().ok()?;
    let month: usize = m.parse().ok()?;
    let day: u32 = d.parse().ok()?;
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
        return None;
    }
    let name = MONTHS[month - 1].to_string();
    Some(match style {
        DateStyle::DayMonthYear => vec![day.to_string(), name, year.to_string()],
        DateStyle::MonthDayYear => vec![name, day.to_string(), ",".into(), year.to_string()],
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Layer holding resource identifiers.
    pub resource_layer: String,
    pub date_style: DateStyle,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            resource_layer: "instance".into(),
            date_style: DateStyle::default(),
        }
    }
}

/// Spans of the sentence where an argument value occurs, left to right.
pub fn argument_occurrences(
    arg: &Argument,
    sentence: &LayeredSentence,
    cfg: &MatchConfig,
) -> Vec<Span> {
    let words: Vec<String> = match arg.kind {
        ValueKind::Resource => {
            return sentence
                .layer(&cfg.resource_layer)
                .map(|l| {
                    l.tokens()
                        .iter()
                        .filter(|t| t.value.as_deref() == Some(arg.value.as_str()))
                        .map(|t| t.span)
                        .collect()
                })
                .unwrap_or_default();
        }
        ValueKind::Date => match canonical_date(&arg.value, cfg.date_style) {
            Some(w) => w,
            None => arg.value.split_whitespace().map(str::to_string).collect(),
        },
        ValueKind::String => arg.value.split_whitespace().map(str::to_string).collect(),
    };
    let text = sentence.words();
    if words.is_empty() || words.len() > text.len() {
        return Vec::new();
    }
    (0..=text.len() - words.len())
        .filter(|&s| text[s..s + words.len()] == words[..])
        .map(|s| Span::new(s, s + words.len()))
        .collect()
}

/// Why a relation could not be turned into a variable tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConversionFailure {
    /// The value does not occur in the sentence; the relation is not eligible.
    NoMatch { argument: usize },
    /// The value's words are spread over several nodes.
    Split { argument: usize },
    /// The value's words are only part of a node's term.
    Subterm { argument: usize },
}

fn deepest_exact(node: &SemanticNode, span: Span, path: &mut NodePath) -> Option<NodePath> {
    if !node.span.contains(span) {
        return None;
    }
    for (i, c) in node.children.iter().enumerate() {
        path.push(i);
        let found = deepest_exact(c, span, path);
        path.pop();
        if found.is_some() {
            return found;
        }
    }
    (node.span == span).then(|| path.clone())
}

fn deepest_containing(node: &SemanticNode, span: Span) -> &SemanticNode {
    node.children
        .iter()
        .find(|c| c.span.contains(span))
        .map_or(node, |c| deepest_containing(c, span))
}

fn classify(root: &SemanticNode, span: Span) -> bool {
    // true for split, false for subterm
    let holder = deepest_containing(root, span);
    let touched: Vec<&SemanticNode> = holder
        .children
        .iter()
        .filter(|c| c.span.overlaps(span))
        .collect();
    touched.len() >= 2 || touched.iter().any(|c| !span.contains(c.span))
}

/// Finds, for every argument, the deepest node whose term equals one of the
/// value's occurrences (leftmost occurrence first).
pub fn locate_entity_nodes(
    example: &RelationExample,
    sentence: &LayeredSentence,
    root: &SemanticNode,
    cfg: &MatchConfig,
) -> Result<Vec<NodePath>, ConversionFailure> {
    let mut occurrences = Vec::with_capacity(example.arguments.len());
    for (i, arg) in example.arguments.iter().enumerate() {
        let occ = argument_occurrences(arg, sentence, cfg);
        if occ.is_empty() {
            return Err(ConversionFailure::NoMatch { argument: i });
        }
        occurrences.push(occ);
    }
    let mut out = Vec::with_capacity(occurrences.len());
    for (i, occ) in occurrences.iter().enumerate() {
        match occ
            .iter()
            .find_map(|&s| deepest_exact(root, s, &mut Vec::new()))
        {
            Some(path) => out.push(path),
            None if classify(root, occ[0]) => return Err(ConversionFailure::Split { argument: i }),
            None => return Err(ConversionFailure::Subterm { argument: i }),
        }
    }
    Ok(out)
}
