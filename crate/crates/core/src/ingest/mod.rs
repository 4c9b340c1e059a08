//! Reading reviews and their dependency parses into a validated dataset.

mod align;
mod conllu;
mod dataset;
mod semeval;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use align::{align_span, token_extents};
pub use conllu::parse_conllu;
pub use dataset::{build_dataset, build_dataset_from, read_dataset, write_dataset, DatasetSummary, InstanceRecord};
pub use semeval::{parse_semeval_xml, AspectTerm, SemevalDoc, XmlSentence};
pub use tree::{DepTree, Token, TreeDefect};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("malformed CoNLL-U line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("sentence ending at line {line} is not a tree: {reason}")]
    NonTree { line: usize, reason: String },
    #[error("line {line}: head {head} outside sentence of length {n}")]
    HeadOutOfRange { line: usize, head: usize, n: usize },
    #[error("XML syntax error: {0}")]
    XmlSyntax(String),
    #[error("unknown polarity {0:?}")]
    UnknownPolarity(String),
    #[error("sentence {sentence_id}: aspect span [{from}, {to}) outside text of {len} characters")]
    SpanOutOfBounds {
        sentence_id: String,
        from: usize,
        to: usize,
        len: usize,
    },
    #[error("alignment failure: {0}")]
    AlignmentFailure(String),
    #[error("sentence count mismatch: {xml} XML sentences ({retained} with aspects) vs {conllu} CoNLL-U sentences")]
    CountMismatch {
        xml: usize,
        retained: usize,
        conllu: usize,
    },
    #[error("sentence id mismatch at position {position}: XML {xml:?} vs CoNLL-U {conllu:?}")]
    IdMismatch {
        position: usize,
        xml: String,
        conllu: String,
    },
    #[error("bad dataset record on line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
}

/// Sentiment polarity of an aspect term. The integer codes are stable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolarityLabel {
    Positive = 0,
    Negative = 1,
    Neutral = 2,
    Conflict = 3,
}

impl PolarityLabel {
    pub const COUNT: usize = 4;
    pub const ALL: [PolarityLabel; 4] = [
        PolarityLabel::Positive,
        PolarityLabel::Negative,
        PolarityLabel::Neutral,
        PolarityLabel::Conflict,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PolarityLabel::Positive => "positive",
            PolarityLabel::Negative => "negative",
            PolarityLabel::Neutral => "neutral",
            PolarityLabel::Conflict => "conflict",
        }
    }
}

impl fmt::Display for PolarityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolarityLabel {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == lower)
            .ok_or_else(|| IngestError::UnknownPolarity(s.to_string()))
    }
}

/// Inclusive, 1-based token range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn single(index: usize) -> Self {
        Span::new(index, index)
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start..=self.end).contains(&index)
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }

    /// True when `1 <= start <= end <= n`.
    pub fn is_valid_for(&self, n: usize) -> bool {
        self.start >= 1 && self.start <= self.end && self.end <= n
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for Span {
    type Err = String;

    /// Parses `s:e` or a single index `s`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |p: &str| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| format!("invalid span {s:?}, expected START:END"))
        };
        let span = match s.split_once(':') {
            Some((a, b)) => Span::new(parse(a)?, parse(b)?),
            None => Span::single(parse(s)?),
        };
        if span.start == 0 || span.start > span.end {
            return Err(format!("invalid span {s:?}, need 1 <= START <= END"));
        }
        Ok(span)
    }
}

/// One (sentence, aspect term) pair with its gold polarity.
#[derive(Clone, Debug, PartialEq)]
pub struct ReviewInstance {
    pub sentence_id: String,
    pub tree: DepTree,
    pub aspect_span: Span,
    pub label: PolarityLabel,
    /// Character offsets `[from, to)` of the aspect term in the original text.
    pub char_span: (usize, usize),
}

impl ReviewInstance {
    pub fn new(
        sentence_id: impl Into<String>,
        tree: DepTree,
        aspect_span: Span,
        label: PolarityLabel,
    ) -> Result<Self, IngestError> {
        if !aspect_span.is_valid_for(tree.len()) {
            return Err(IngestError::AlignmentFailure(format!(
                "span {aspect_span} outside sentence of length {}",
                tree.len()
            )));
        }
        Ok(ReviewInstance {
            sentence_id: sentence_id.into(),
            tree,
            aspect_span,
            label,
            char_span: (0, 0),
        })
    }

    pub fn aspect_forms(&self) -> impl Iterator<Item = &str> {
        self.aspect_span
            .indices()
            .map(move |i| self.tree.token(i).form.as_str())
    }
}
