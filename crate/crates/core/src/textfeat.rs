//! Item text features: tokenization, word-embedding tables and the
//! per-item average of word vectors over an item's aggregated reviews.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::{Dataset, Split};
use crate::error::DataError;

const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Lowercases `text` and splits it on runs of non-alphanumeric characters.
/// Tokens made only of digits are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !t.chars().all(char::is_numeric))
        .map(str::to_lowercase)
        .collect()
}

/// A set of tokens excluded from feature composition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    /// Parses one token per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        StopWords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(ENGLISH_STOPWORDS)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn insert(&mut self, token: impl Into<String>) -> bool {
        self.0.insert(token.into())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for StopWords {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        StopWords(iter.into_iter().map(Into::into).collect())
    }
}

/// Dense word vectors of a fixed dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    words: Vec<String>,
    data: Vec<f64>,
    duplicates: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            index: HashMap::new(),
            words: Vec::new(),
            data: Vec::new(),
            duplicates: 0,
        }
    }

    /// Adds a vector; an already present word keeps its first vector and
    /// bumps the duplicate counter. Returns whether the word was inserted.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> bool {
        assert_eq!(vector.len(), self.dim, "embedding length mismatch");
        if self.index.contains_key(word) {
            self.duplicates += 1;
            return false;
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
        self.data.extend_from_slice(vector);
        true
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Number of repeated words seen while loading.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&k| &self.data[k * self.dim..(k + 1) * self.dim])
    }

    /// Words in insertion order.
    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Loads vectors in the word2vec text format: a `V D` header line followed
/// by `word v1 .. vD` rows.
pub fn load_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable, DataError> {
    let mut lines = reader.lines().enumerate();
    let (declared, dim) = loop {
        let Some((idx, line)) = lines.next() else {
            return Err(DataError::Parse {
                line: 1,
                reason: "missing header".into(),
            });
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || DataError::Parse {
            line: idx + 1,
            reason: format!("expected header \"V D\", found {line:?}"),
        };
        let mut parts = line.split_whitespace();
        let v: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let d: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() || d == 0 {
            return Err(bad());
        }
        break (v, d);
    };

    let mut table = EmbeddingTable::new(dim);
    let mut rows = 0;
    let mut vector = Vec::with_capacity(dim);
    for (idx, line) in lines {
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        vector.clear();
        for part in parts {
            let value: f64 = part.parse().map_err(|_| DataError::Parse {
                line: idx + 1,
                reason: format!("non-numeric component {part:?}"),
            })?;
            vector.push(value);
        }
        if vector.len() != dim {
            return Err(DataError::DimensionMismatch {
                line: idx + 1,
                expected: dim,
                found: vector.len(),
            });
        }
        table.insert(word, &vector);
        rows += 1;
    }
    if rows != declared {
        log::warn!("embedding header declares {declared} rows, file has {rows}");
    }
    if table.duplicates() > 0 {
        log::warn!("{} duplicate embedding rows ignored", table.duplicates());
    }
    Ok(table)
}

/// Deterministic unit-norm pseudo-embeddings, one per vocabulary word,
/// derived from a hash of `(seed, word)`.
pub fn synth_embeddings<'a, I>(vocab: I, dim: usize, seed: u64) -> EmbeddingTable
where
    I: IntoIterator<Item = &'a str>,
{
    assert!(dim >= 1, "embedding dimension must be positive");
    let vocab: BTreeSet<&str> = vocab.into_iter().collect();
    let mut table = EmbeddingTable::new(dim);
    let mut vector = vec![0.0; dim];
    for word in vocab {
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(word.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
        for v in vector.iter_mut() {
            *v = rng.gen_range(-1.0..=1.0);
        }
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            vector.iter_mut().for_each(|v| *v /= norm);
        } else {
            vector[0] = 1.0;
        }
        table.insert(word, &vector);
    }
    table
}

/// Which reviews feed an item's document.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DocScope {
    /// Every review of the item, including held-out interactions.
    #[default]
    AllReviews,
    /// Only reviews attached to training interactions.
    TrainingOnly,
}

/// Per-item text feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    rows: Vec<f64>,
    coverage: Vec<usize>,
    oov: Vec<usize>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major values. Coverage is set to 1 for
    /// non-zero rows and 0 otherwise.
    pub fn from_rows(dim: usize, rows: Vec<f64>) -> Self {
        assert!(dim >= 1 && rows.len().is_multiple_of(dim), "ragged feature rows");
        let n = rows.len() / dim;
        let coverage = (0..n)
            .map(|i| usize::from(rows[i * dim..(i + 1) * dim].iter().any(|&v| v != 0.0)))
            .collect();
        FeatureMatrix {
            dim,
            rows,
            coverage,
            oov: vec![0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn item_count(&self) -> usize {
        self.coverage.len()
    }

    pub fn row(&self, item: usize) -> &[f64] {
        &self.rows[item * self.dim..(item + 1) * self.dim]
    }

    /// Number of token occurrences averaged into the row.
    pub fn coverage(&self, item: usize) -> usize {
        self.coverage[item]
    }

    /// Number of out-of-vocabulary token occurrences skipped for the item.
    pub fn oov(&self, item: usize) -> usize {
        self.oov[item]
    }

    /// Header `N D`, then one `item v1 .. vD` line per item. Values use the
    /// shortest representation that parses back to the same float.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.item_count(), self.dim);
        for i in 0..self.item_count() {
            let _ = write!(out, "{i}");
            for v in self.row(i) {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`FeatureMatrix::to_text`] output. Coverage counts are not
    /// stored in the file, see [`FeatureMatrix::from_rows`].
    pub fn from_text(text: &str) -> Result<Self, DataError> {
        let mut lines = text.lines().enumerate();
        let header_err = || DataError::Parse {
            line: 1,
            reason: "expected header \"N D\"".into(),
        };
        let (_, header) = lines.next().ok_or_else(header_err)?;
        let mut parts = header.split_whitespace();
        let n: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(header_err)?;
        let dim: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(header_err)?;
        if dim == 0 {
            return Err(header_err());
        }
        let mut rows = vec![0.0; n * dim];
        let mut seen = vec![false; n];
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |reason: String| DataError::Parse {
                line: idx + 1,
                reason,
            };
            let mut parts = line.split_whitespace();
            let item: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .filter(|&i| i < n)
                .ok_or_else(|| parse_err("bad item index".into()))?;
            if std::mem::replace(&mut seen[item], true) {
                return Err(parse_err(format!("item {item} listed twice")));
            }
            let values: Vec<f64> = parts
                .map(|p| p.parse().map_err(|_| parse_err(format!("non-numeric value {p:?}"))))
                .collect::<Result<_, _>>()?;
            if values.len() != dim {
                return Err(DataError::DimensionMismatch {
                    line: idx + 1,
                    expected: dim,
                    found: values.len(),
                });
            }
            rows[item * dim..(item + 1) * dim].copy_from_slice(&values);
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(DataError::Inconsistent(format!(
                "feature file has no row for item {missing}"
            )));
        }
        Ok(FeatureMatrix::from_rows(dim, rows))
    }
}

/// Averages the embeddings of every in-vocabulary, non-stop-word token
/// occurrence in each item's aggregated reviews. Items with no contributing
/// token get the zero vector.
pub fn compose_item_features(
    d: &Dataset,
    split: &Split,
    table: &EmbeddingTable,
    stopwords: &StopWords,
    scope: DocScope,
) -> FeatureMatrix {
    let dim = table.dim();
    let n = d.item_count();
    let mut rows = vec![0.0; n * dim];
    let mut coverage = vec![0usize; n];
    let mut oov = vec![0usize; n];

    for ((u, i), text) in d.reviews() {
        if scope == DocScope::TrainingOnly && split.train(u).binary_search(&i).is_err() {
            continue;
        }
        let row = &mut rows[i * dim..(i + 1) * dim];
        for token in tokenize(text) {
            if stopwords.contains(&token) {
                continue;
            }
            match table.get(&token) {
                Some(e) => {
                    row.iter_mut().zip(e).for_each(|(r, v)| *r += v);
                    coverage[i] += 1;
                }
                None => oov[i] += 1,
            }
        }
    }
    for (i, &c) in coverage.iter().enumerate() {
        if c > 0 {
            let scale = c as f64;
            rows[i * dim..(i + 1) * dim]
                .iter_mut()
                .for_each(|r| *r /= scale);
        }
    }
    FeatureMatrix {
        dim,
        rows,
        coverage,
        oov,
    }
}
