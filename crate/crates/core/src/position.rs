//! Token-to-aspect distances.
//!
//! The model's position signal is the number of dependency edges between a
//! token and the aspect term, with edge direction ignored. The linear
//! word-offset distance is kept as a baseline.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ingest::{DepTree, ReviewInstance, Span};

pub const DEFAULT_CLAMP: usize = 30;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PositionError {
    #[error("token index {index} outside sentence of length {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("aspect span {span} invalid for sentence of length {n}")]
    InvalidSpan { span: Span, n: usize },
    #[error("cannot pad {n} positions to {pad_to}")]
    PadTooSmall { pad_to: usize, n: usize },
    #[error("distance clamp must be at least 1")]
    BadClamp,
}

/// Per-token distances to the aspect span, clamped to `clamp`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositionVector {
    pub dists: Vec<usize>,
    pub clamp: usize,
}

impl PositionVector {
    pub fn len(&self) -> usize {
        self.dists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dists.is_empty()
    }

    /// Row reserved for padding positions in the position table.
    pub fn pad_index(&self) -> usize {
        pad_index(self.clamp)
    }

    /// Distances as embedding rows, followed by the PAD row up to `pad_to`.
    pub fn to_embedding_indices(&self, pad_to: usize) -> Result<Vec<usize>, PositionError> {
        if pad_to < self.dists.len() {
            return Err(PositionError::PadTooSmall {
                pad_to,
                n: self.dists.len(),
            });
        }
        let mut out = self.dists.clone();
        out.resize(pad_to, self.pad_index());
        Ok(out)
    }
}

impl fmt::Display for PositionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, d) in self.dists.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        f.write_str("]")
    }
}

pub fn pad_index(clamp: usize) -> usize {
    clamp + 1
}

/// Number of rows a position table needs for `clamp`: distances `0..=clamp` and PAD.
pub fn table_rows(clamp: usize) -> usize {
    clamp + 2
}

/// BFS distances from a 0-based source over the undirected tree.
fn bfs(tree: &DepTree, source: usize) -> Vec<usize> {
    let adj = tree.adjacency0();
    let mut dist = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Edges on the path between tokens `i` and `j` (1-based).
pub fn tree_distance(tree: &DepTree, i: usize, j: usize) -> Result<usize, PositionError> {
    let n = tree.len();
    for index in [i, j] {
        if index == 0 || index > n {
            return Err(PositionError::IndexOutOfRange { index, n });
        }
    }
    Ok(bfs(tree, i - 1)[j - 1])
}

fn check(span: Span, n: usize, clamp: usize) -> Result<(), PositionError> {
    if clamp == 0 {
        return Err(PositionError::BadClamp);
    }
    if !span.is_valid_for(n) {
        return Err(PositionError::InvalidSpan { span, n });
    }
    Ok(())
}

/// Dependency-path distance of every token to the nearest aspect token.
pub fn position_vector(tree: &DepTree, span: Span, clamp: usize) -> Result<PositionVector, PositionError> {
    check(span, tree.len(), clamp)?;
    let mut dists = vec![usize::MAX; tree.len()];
    for a in span.indices() {
        for (d, from_a) in dists.iter_mut().zip(bfs(tree, a - 1)) {
            *d = (*d).min(from_a);
        }
    }
    for d in &mut dists {
        *d = (*d).min(clamp);
    }
    Ok(PositionVector { dists, clamp })
}

/// Linear token distance to the nearest span boundary.
pub fn word_offset_vector(n: usize, span: Span, clamp: usize) -> Result<PositionVector, PositionError> {
    check(span, n, clamp)?;
    let dists = (1..=n)
        .map(|k| {
            let d = if k < span.start {
                span.start - k
            } else {
                k.saturating_sub(span.end)
            };
            d.min(clamp)
        })
        .collect();
    Ok(PositionVector { dists, clamp })
}

/// Which distance feeds the position embeddings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PositionKind {
    #[default]
    Tree,
    WordOffset,
}

impl PositionKind {
    pub fn compute(self, inst: &ReviewInstance, clamp: usize) -> Result<PositionVector, PositionError> {
        match self {
            PositionKind::Tree => position_vector(&inst.tree, inst.aspect_span, clamp),
            PositionKind::WordOffset => word_offset_vector(inst.tree.len(), inst.aspect_span, clamp),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PositionKind::Tree => "tree",
            PositionKind::WordOffset => "offset",
        }
    }
}

impl FromStr for PositionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tree" => Ok(PositionKind::Tree),
            "offset" => Ok(PositionKind::WordOffset),
            other => Err(format!("unknown position kind {other:?} (tree|offset)")),
        }
    }
}
