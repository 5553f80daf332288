//! Layered sentence representation.
//!
//! A sentence is a sequence of words plus any number of annotation layers.
//! Every layer tiles the word positions `[0, len)` with tokens; a token may
//! span several words (a named entity, a linked instance) or be null when the
//! position carries no annotation. The lexical layer is implicit: one token per
//! word, never null.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the implicit word layer.
pub const LEXICAL: &str = "lexical";

/// Half-open word interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "inverted span [{start}, {end})");
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// A contiguous span of a particular sentence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term {
    pub sentence: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    /// `None` marks a null token.
    pub value: Option<String>,
    pub span: Span,
}

impl Token {
    pub fn is_null(&self) -> bool {
        self.value.is_none()
    }
}

/// One annotation layer of a sentence with a word → token index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layer {
    name: String,
    tokens: Vec<Token>,
    cover: Vec<usize>,
}

impl Layer {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Token covering word `pos`.
    pub fn token_at(&self, pos: usize) -> &Token {
        &self.tokens[self.cover[pos]]
    }

    /// Token that begins exactly at word `pos`, if any.
    pub fn token_starting_at(&self, pos: usize) -> Option<&Token> {
        let tok = self.tokens.get(*self.cover.get(pos)?)?;
        (tok.span.start == pos).then_some(tok)
    }

    /// True when neither boundary of `span` falls inside a token.
    pub fn respects(&self, span: Span) -> bool {
        if span.is_empty() || span.end > self.cover.len() {
            return false;
        }
        self.token_at(span.start).span.start == span.start
            && self.token_at(span.end - 1).span.end == span.end
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SentenceError {
    #[error("sentence has no words (lexical layer missing)")]
    MissingLexical,
    #[error("layer name `{0}` is reserved")]
    ReservedLayer(String),
    #[error("layer `{layer}`: span [{start}, {end}) is outside the sentence of {len} words")]
    SpanOutOfRange {
        layer: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("layer `{layer}`: token at [{start}, {end}) overlaps its predecessor")]
    Overlap {
        layer: String,
        start: usize,
        end: usize,
    },
    #[error("layer `{layer}`: words [{start}, {end}) are not covered by any token")]
    Gap {
        layer: String,
        start: usize,
        end: usize,
    },
    #[error("layer `{layer}`: token at [{start}, {end}) has an empty value")]
    EmptyValue {
        layer: String,
        start: usize,
        end: usize,
    },
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: sentence `{id}`: {source}")]
    Invalid {
        line: usize,
        id: String,
        #[source]
        source: SentenceError,
    },
    #[error("line {line}: sentence `{id}` uses layer `{layer}` which the header does not declare")]
    UndeclaredLayer {
        line: usize,
        id: String,
        layer: String,
    },
    #[error("line {line}: duplicate sentence id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),
    #[error("term {span} lies outside sentence `{id}` of {len} words")]
    TermOutOfRange { id: String, span: Span, len: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredSentence {
    id: String,
    words: Vec<String>,
    /// Lexical layer first, then annotation layers in declaration order.
    layers: Vec<Layer>,
}

impl LayeredSentence {
    /// Builds a sentence from words and annotation layers.
    ///
    /// Token lists are sorted by start position, validated for range,
    /// overlap and tiling, and multi-word null tokens are split into
    /// single-word nulls.
    pub fn new(
        id: impl Into<String>,
        words: Vec<String>,
        annotations: impl IntoIterator<Item = (String, Vec<Token>)>,
    ) -> Result<Self, SentenceError> {
        if words.is_empty() {
            return Err(SentenceError::MissingLexical);
        }
        let len = words.len();
        let lexical = Layer {
            name: LEXICAL.to_string(),
            tokens: words
                .iter()
                .enumerate()
                .map(|(i, w)| Token {
                    value: Some(w.clone()),
                    span: Span::new(i, i + 1),
                })
                .collect(),
            cover: (0..len).collect(),
        };
        let mut layers = vec![lexical];
        for (name, tokens) in annotations {
            if name == LEXICAL {
                return Err(SentenceError::ReservedLayer(name));
            }
            layers.push(build_layer(name, tokens, len)?);
        }
        Ok(LayeredSentence {
            id: id.into(),
            words,
            layers,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn full_span(&self) -> Span {
        Span::new(0, self.len())
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Annotation layers, excluding the lexical one.
    pub fn annotation_layers(&self) -> &[Layer] {
        &self.layers[1..]
    }

    /// Words of `span` joined by single spaces.
    pub fn text(&self, span: Span) -> String {
        self.words[span.start..span.end].join(" ")
    }

    pub fn term(&self, span: Span) -> Term {
        Term {
            sentence: self.id.clone(),
            span,
        }
    }
}

fn build_layer(name: String, mut tokens: Vec<Token>, len: usize) -> Result<Layer, SentenceError> {
    tokens.sort_by_key(|t| (t.span.start, t.span.end));
    let mut out: Vec<Token> = Vec::with_capacity(len);
    let mut cover = Vec::with_capacity(len);
    let mut pos = 0;
    for tok in tokens {
        let Span { start, end } = tok.span;
        if start >= end || end > len {
            return Err(SentenceError::SpanOutOfRange {
                layer: name,
                start,
                end,
                len,
            });
        }
        if start < pos {
            return Err(SentenceError::Overlap {
                layer: name,
                start,
                end,
            });
        }
        if start > pos {
            return Err(SentenceError::Gap {
                layer: name,
                start: pos,
                end: start,
            });
        }
        match tok.value {
            Some(ref v) if v.is_empty() => {
                return Err(SentenceError::EmptyValue {
                    layer: name,
                    start,
                    end,
                })
            }
            Some(_) => {
                cover.extend(std::iter::repeat(out.len()).take(end - start));
                out.push(tok);
            }
            None => {
                for i in start..end {
                    cover.push(out.len());
                    out.push(Token {
                        value: None,
                        span: Span::new(i, i + 1),
                    });
                }
            }
        }
        pos = end;
    }
    if pos < len {
        return Err(SentenceError::Gap {
            layer: name,
            start: pos,
            end: len,
        });
    }
    Ok(Layer {
        name,
        tokens: out,
        cover,
    })
}

/// Interpretation of a term in one layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermInterpretation {
    pub span: Span,
    pub layer: String,
    /// `None` when the span breaks a token of the layer.
    pub tokens: Option<Vec<Token>>,
}

impl TermInterpretation {
    pub fn is_valid(&self) -> bool {
        self.tokens.is_some()
    }
}

pub fn interpret(
    sentence: &LayeredSentence,
    span: Span,
    layer: &str,
) -> Result<TermInterpretation, CorpusError> {
    if span.is_empty() || span.end > sentence.len() {
        return Err(CorpusError::TermOutOfRange {
            id: sentence.id.clone(),
            span,
            len: sentence.len(),
        });
    }
    let l = sentence
        .layer(layer)
        .ok_or_else(|| CorpusError::UnknownLayer(layer.to_string()))?;
    let tokens = l.respects(span).then(|| {
        let first = l.cover[span.start];
        let last = l.cover[span.end - 1];
        l.tokens[first..=last].to_vec()
    });
    Ok(TermInterpretation {
        span,
        layer: layer.to_string(),
        tokens,
    })
}

/// An ordered collection of sentences sharing a layer inventory.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    layer_names: Vec<String>,
    sentences: Vec<LayeredSentence>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(layer_names: Vec<String>, sentences: Vec<LayeredSentence>) -> Self {
        let by_id = sentences
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), i))
            .collect();
        Corpus {
            layer_names,
            sentences,
            by_id,
        }
    }

    /// Annotation layer names in declaration order (lexical excluded).
    pub fn layer_names(&self) -> &[String] {
        &self.layer_names
    }

    pub fn sentences(&self) -> &[LayeredSentence] {
        &self.sentences
    }

    pub fn get(&self, id: &str) -> Option<&LayeredSentence> {
        self.by_id.get(id).map(|&i| &self.sentences[i])
    }

    /// Index of a sentence in file order.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        read_corpus(text.as_bytes())
    }

    /// Canonical serialization: a header line declaring the layer order,
    /// then one compact record per sentence with every layer written in
    /// header order and null tokens one per word.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = serde_json::json!({ "layers": self.layer_names });
        out.push_str(&header.to_string());
        out.push('\n');
        for s in &self.sentences {
            let mut layers = IndexMap::new();
            for name in &self.layer_names {
                let toks = s
                    .layer(name)
                    .map(|l| {
                        l.tokens
                            .iter()
                            .map(|t| TokenRecord {
                                v: t.value.clone(),
                                s: t.span.start,
                                e: t.span.end,
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                layers.insert(name.clone(), toks);
            }
            let rec = SentenceRecord {
                id: s.id.clone(),
                words: s.words.clone(),
                layers,
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct TokenRecord {
    v: Option<String>,
    s: usize,
    e: usize,
}

#[derive(Serialize, Deserialize)]
struct SentenceRecord {
    id: String,
    words: Vec<String>,
    #[serde(default)]
    layers: IndexMap<String, Vec<TokenRecord>>,
}

#[derive(Deserialize)]
struct HeaderRecord {
    layers: Vec<String>,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_corpus(BufReader::new(file))
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(corpus.to_jsonl().as_bytes()).map_err(io)
}

fn read_corpus(reader: impl BufRead) -> Result<Corpus, CorpusError> {
    let mut declared: Option<Vec<String>> = None;
    let mut records: Vec<(usize, SentenceRecord)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: format!("line {lineno}"),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
        let is_header =
            value.get("id").is_none() && value.get("layers").is_some_and(|l| l.is_array());
        if is_header {
            if declared.is_some() || !records.is_empty() {
                return Err(CorpusError::Malformed {
                    line: lineno,
                    message: "layer header must be the first record".into(),
                });
            }
            let h: HeaderRecord =
                serde_json::from_value(value).map_err(|e| CorpusError::Malformed {
                    line: lineno,
                    message: e.to_string(),
                })?;
            declared = Some(h.layers);
            continue;
        }
        let rec: SentenceRecord =
            serde_json::from_value(value).map_err(|e| CorpusError::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
        records.push((lineno, rec));
    }

    let layer_names = match declared {
        Some(names) => {
            for (line, rec) in &records {
                if let Some(name) = rec.layers.keys().find(|k| !names.contains(k)) {
                    return Err(CorpusError::UndeclaredLayer {
                        line: *line,
                        id: rec.id.clone(),
                        layer: name.clone(),
                    });
                }
            }
            names
        }
        None => {
            let mut names: Vec<String> = Vec::new();
            for (_, rec) in &records {
                for k in rec.layers.keys() {
                    if !names.contains(k) {
                        names.push(k.clone());
                    }
                }
            }
            names
        }
    };

    let mut sentences = Vec::with_capacity(records.len());
    let mut seen = HashMap::new();
    for (line, mut rec) in records {
        if seen.insert(rec.id.clone(), line).is_some() {
            return Err(CorpusError::DuplicateId { line, id: rec.id });
        }
        let len = rec.words.len();
        let annotations: Vec<(String, Vec<Token>)> = layer_names
            .iter()
            .map(|name| {
                let toks = match rec.layers.swap_remove(name) {
                    Some(list) => list
                        .into_iter()
                        .map(|t| Token {
                            value: t.v,
                            span: Span {
                                start: t.s,
                                end: t.e,
                            },
                        })
                        .collect(),
                    // absent layer: the sentence carries no annotation there
                    None if len > 0 => vec![Token {
                        value: None,
                        span: Span::new(0, len),
                    }],
                    None => Vec::new(),
                };
                (name.clone(), toks)
            })
            .collect();
        let sentence =
            LayeredSentence::new(rec.id.clone(), rec.words, annotations).map_err(|source| {
                CorpusError::Invalid {
                    line,
                    id: rec.id,
                    source,
                }
            })?;
        sentences.push(sentence);
    }
    Ok(Corpus::new(layer_names, sentences))
}
