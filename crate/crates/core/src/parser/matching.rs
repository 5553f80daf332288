use serde::{Deserialize, Serialize};

use crate::corpus::{LayeredSentence, Span};
use crate::grammar::Symbol;

/// Limits applied to right-hand sides made only of non-terminals, which are
/// the most ambiguous patterns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchLimits {
    /// Maximum number of non-terminals in a terminal-free pattern.
    pub max_pure_slots: usize,
    /// Maximum word length of the first non-terminal's term in such a
    /// pattern when it has more than one non-terminal.
    pub max_first_slot_len: usize,
}

impl Default for MatchLimits {
    fn default() -> Self {
        MatchLimits {
            max_pure_slots: 2,
            max_first_slot_len: 3,
        }
    }
}

impl MatchLimits {
    pub fn unlimited() -> Self {
        MatchLimits {
            max_pure_slots: usize::MAX,
            max_first_slot_len: usize::MAX,
        }
    }

    pub fn admits(&self, pattern: &[Symbol]) -> bool {
        pattern.iter().any(Symbol::is_terminal)
            || pattern.iter().filter(|s| s.is_slot()).count() <= self.max_pure_slots
    }
}

/// Matches a right-hand side against `span` like a regular expression whose
/// non-terminals are `+` wildcards over words and whose terminals must equal
/// a whole token of their layer.
///
/// Returns every way to assign sub-terms to the non-terminals, in order.
pub fn match_pattern(
    pattern: &[Symbol],
    span: Span,
    sentence: &LayeredSentence,
    limits: &MatchLimits,
) -> Vec<Vec<Span>> {
    let mut out = Vec::new();
    if span.is_empty() || span.end > sentence.len() || pattern.is_empty() || !limits.admits(pattern)
    {
        return out;
    }
    // a single slot has exactly one split, so only multi-slot pure patterns are capped
    let pure = !pattern.iter().any(Symbol::is_terminal) && pattern.len() > 1;
    let mut m = Matcher {
        pattern,
        sentence,
        end: span.end,
        first_cap: if pure {
            limits.max_first_slot_len
        } else {
            usize::MAX
        },
        acc: Vec::new(),
        out: &mut out,
    };
    m.go(0, span.start);
    out
}

struct Matcher<'a> {
    pattern: &'a [Symbol],
    sentence: &'a LayeredSentence,
    end: usize,
    first_cap: usize,
    acc: Vec<Span>,
    out: &'a mut Vec<Vec<Span>>,
}

impl Matcher<'_> {
    fn go(&mut self, idx: usize, pos: usize) {
        if idx == self.pattern.len() {
            if pos == self.end {
                self.out.push(self.acc.clone());
            }
            return;
        }
        // each remaining symbol consumes at least one word
        let remaining = self.pattern.len() - idx;
        if pos + remaining > self.end {
            return;
        }
        match &self.pattern[idx] {
            Symbol::Terminal { value, layer } => {
                let Some(layer) = self.sentence.layer(layer) else {
                    return;
                };
                if let Some(tok) = layer.token_starting_at(pos) {
                    if tok.span.end <= self.end && tok.value.as_deref() == Some(value.as_str()) {
                        self.go(idx + 1, tok.span.end);
                    }
                }
            }
            _ => {
                let cap = if self.acc.is_empty() {
                    self.first_cap
                } else {
                    usize::MAX
                };
                let last = (self.end - (remaining - 1)).min(pos.saturating_add(cap));
                for e in pos + 1..=last {
                    self.acc.push(Span::new(pos, e));
                    self.go(idx + 1, e);
                    self.acc.pop();
                }
            }
        }
    }
}
