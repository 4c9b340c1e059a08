use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;
use std::str::FromStr;

use rand::Rng;

use super::ModelError;
use crate::ingest::{ReviewInstance, Span};
use crate::nn::Param;
use crate::position;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Word to row mapping. Rows 0 and 1 are PAD and UNK.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
    lowercase: bool,
}

impl Vocab {
    pub fn from_words(words: impl IntoIterator<Item = String>, lowercase: bool) -> Self {
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut index: HashMap<String, usize> = all.iter().cloned().zip(0..).collect();
        for w in words {
            let w = if lowercase { w.to_lowercase() } else { w };
            if !index.contains_key(&w) {
                index.insert(w.clone(), all.len());
                all.push(w);
            }
        }
        Vocab {
            words: all,
            index,
            lowercase,
        }
    }

    /// Vocabulary of every form in `data`, most frequent first, ties alphabetical.
    pub fn build<'a>(data: impl IntoIterator<Item = &'a ReviewInstance>, lowercase: bool) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for inst in data {
            for f in inst.tree.forms() {
                let f = if lowercase { f.to_lowercase() } else { f.to_string() };
                *counts.entry(f).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Vocab::from_words(ranked.into_iter().map(|(w, _)| w), lowercase)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn lookup(&self, form: &str) -> usize {
        let hit = if self.lowercase {
            self.index.get(&form.to_lowercase())
        } else {
            self.index.get(form)
        };
        hit.copied().unwrap_or(UNK)
    }
}

/// Word vectors, one row per vocabulary entry. The PAD row stays zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub vocab: Vocab,
    pub table: Param,
}

impl EmbeddingTable {
    pub fn new(vocab: Vocab, dim: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut table = Param::uniform(vocab.len(), dim, scale, rng);
        table.value.row_mut(PAD).fill(0.0);
        EmbeddingTable { vocab, table }
    }

    pub fn dim(&self) -> usize {
        self.table.value.cols()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        self.table.value.row(r)
    }

    /// Copies pretrained vectors into matching rows; returns how many matched.
    pub fn load_pretrained(&mut self, pre: &Pretrained) -> Result<usize, ModelError> {
        if pre.dim != self.dim() {
            return Err(ModelError::Embedding {
                line: 0,
                reason: format!("file has dimension {}, model expects {}", pre.dim, self.dim()),
            });
        }
        let mut hits = 0;
        for (row, word) in self.vocab.words.iter().enumerate().skip(2) {
            if let Some(v) = pre.vectors.get(word) {
                self.table.value.row_mut(row).copy_from_slice(v);
                hits += 1;
            }
        }
        Ok(hits)
    }

    /// Removes any gradient that reached the PAD row.
    pub fn clear_pad_grad(&mut self) {
        self.table.grad.row_mut(PAD).fill(0.0);
    }
}

/// Trainable distance embeddings: rows `0..=clamp` plus the PAD row.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionTable {
    pub clamp: usize,
    pub table: Param,
}

impl PositionTable {
    pub fn new(clamp: usize, dim: usize, scale: f64, rng: &mut impl Rng) -> Self {
        PositionTable {
            clamp,
            table: Param::uniform(position::table_rows(clamp), dim, scale, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.table.value.cols()
    }

    pub fn rows(&self) -> usize {
        self.table.value.rows()
    }

    pub fn pad_index(&self) -> usize {
        position::pad_index(self.clamp)
    }
}

/// How the embeddings of a multi-token aspect are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AspectPooling {
    #[default]
    Mean,
    Sum,
    /// The span token whose syntactic head lies outside the span.
    Head,
}

impl AspectPooling {
    pub fn as_str(self) -> &'static str {
        match self {
            AspectPooling::Mean => "mean",
            AspectPooling::Sum => "sum",
            AspectPooling::Head => "head",
        }
    }

    /// `(token index, weight)` pairs whose weighted sum of rows is the aspect vector.
    pub fn weights(self, inst: &ReviewInstance) -> Vec<(usize, f64)> {
        let span: Span = inst.aspect_span;
        match self {
            AspectPooling::Mean => {
                let w = 1.0 / span.len() as f64;
                span.indices().map(|i| (i, w)).collect()
            }
            AspectPooling::Sum => span.indices().map(|i| (i, 1.0)).collect(),
            AspectPooling::Head => {
                let head = span
                    .indices()
                    .find(|&i| !span.contains(inst.tree.token(i).head))
                    .unwrap_or(span.start);
                vec![(head, 1.0)]
            }
        }
    }
}

impl FromStr for AspectPooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(AspectPooling::Mean),
            "sum" => Ok(AspectPooling::Sum),
            "head" => Ok(AspectPooling::Head),
            other => Err(format!("unknown aspect pooling {other:?} (mean|sum|head)")),
        }
    }
}

/// Weighted sum of embedding rows.
pub fn aspect_vector(table: &EmbeddingTable, rows: &[(usize, f64)]) -> Result<Vec<f64>, ModelError> {
    if rows.is_empty() {
        return Err(ModelError::EmptyAspect);
    }
    let mut out = vec![0.0; table.dim()];
    for &(r, w) in rows {
        for (o, v) in out.iter_mut().zip(table.row(r)) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Static word vectors read from a text file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pretrained {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

/// Reads GloVe / word2vec text vectors: `word v1 ... vd` per line, with an
/// optional `count dim` header. When `keep` is given, other words are skipped.
pub fn load_pretrained<R: BufRead>(r: R, keep: Option<&HashSet<String>>) -> Result<Pretrained, ModelError> {
    let mut out = Pretrained::default();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| ModelError::Embedding {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let rest: Vec<&str> = parts.collect();
        if i == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
            continue;
        }
        if keep.is_some_and(|k| !k.contains(word)) {
            continue;
        }
        let v: Vec<f64> = rest
            .iter()
            .map(|x| x.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| ModelError::Embedding {
                line: i + 1,
                reason: e.to_string(),
            })?;
        if out.dim == 0 {
            out.dim = v.len();
        }
        if v.len() != out.dim || v.is_empty() {
            return Err(ModelError::Embedding {
                line: i + 1,
                reason: format!("expected {} components, found {}", out.dim, v.len()),
            });
        }
        out.vectors.insert(word.to_string(), v);
    }
    Ok(out)
}
