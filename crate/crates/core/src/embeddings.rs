//! Token vectors for Model 1 (subword-composed, fastText style) and
//! per-example contextual vectors for Model 2 (ingested from a file, or
//! produced by a fallback provider that averages subword embeddings).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::NewsExample;
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, seeds, ParamId, ParamSet, Tape, Tensor, Var};

pub const DEFAULT_BUCKET_COUNT: u64 = 1 << 20;
pub const DEFAULT_NGRAM_MIN: usize = 3;
pub const DEFAULT_NGRAM_MAX: usize = 6;
pub const DEFAULT_DIM: usize = 100;
/// Dimension convention for contextual vectors when nothing else is
/// configured; the file header's own dimension always wins.
pub const DEFAULT_CONTEXTUAL_DIM: usize = 1024;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut h = FNV_OFFSET ^ seed;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Character n-grams of the token wrapped in `<` and `>` boundary markers,
/// in order, duplicates kept. Lengths longer than the wrapped token
/// contribute nothing.
pub fn char_ngrams(token: &str, n_min: usize, n_max: usize) -> Vec<String> {
    let wrapped: Vec<char> = std::iter::once('<')
        .chain(token.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    for n in n_min..=n_max {
        if n == 0 || n > wrapped.len() {
            continue;
        }
        for start in 0..=(wrapped.len() - n) {
            out.push(wrapped[start..start + n].iter().collect());
        }
    }
    out
}

/// Word vectors plus hashed character-n-gram buckets.
///
/// The table itself is frozen data: word vectors as loaded, and bucket
/// vectors defined by a seeded pseudo-random draw keyed on the bucket index.
/// Training materializes individual bucket rows as parameters (see
/// [`EmbeddingParams`]); untouched buckets keep their derived value, so
/// lookup stays total over any alphabet.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    words: BTreeMap<String, Vec<f32>>,
    bucket_count: u64,
    n_min: usize,
    n_max: usize,
    hash_seed: u64,
    init_scale: f32,
}

impl EmbeddingTable {
    /// Table without pretrained words: every token is embedded through its
    /// n-gram buckets alone.
    pub fn with_config(
        dim: usize,
        bucket_count: u64,
        n_min: usize,
        n_max: usize,
        hash_seed: u64,
    ) -> Result<Self> {
        if dim == 0 || bucket_count == 0 {
            return Err(Error::Config(
                "embedding dimension and bucket count must be positive".into(),
            ));
        }
        if n_min > n_max || n_min == 0 {
            return Err(Error::Config(format!(
                "bad n-gram range [{n_min}, {n_max}]"
            )));
        }
        Ok(EmbeddingTable {
            dim,
            words: BTreeMap::new(),
            bucket_count,
            n_min,
            n_max,
            hash_seed,
            init_scale: 1.0 / (dim as f32).sqrt(),
        })
    }

    /// Loads the standard text vector format: a `count dim` header line,
    /// then one `token v1 .. vd` row per line, space-separated.
    pub fn load_pretrained(path: &Path, expected_dim: usize, hash_seed: u64) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty vector file, expected `count dim` header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected `count dim` header, got {header:?}"),
            });
        }
        let count: usize = fields[0].parse().map_err(|_| Error::Parse {
            line: 1,
            message: format!("bad count {:?}", fields[0]),
        })?;
        let dim: usize = fields[1].parse().map_err(|_| Error::Parse {
            line: 1,
            message: format!("bad dimension {:?}", fields[1]),
        })?;
        if dim != expected_dim {
            return Err(Error::Config(format!(
                "vector file has dimension {dim}, expected {expected_dim}"
            )));
        }
        let mut table = EmbeddingTable::with_config(
            dim,
            DEFAULT_BUCKET_COUNT,
            DEFAULT_NGRAM_MIN,
            DEFAULT_NGRAM_MAX,
            hash_seed,
        )?;
        let mut rows = 0usize;
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let mut parts = line.split_whitespace();
            let token = parts.next().ok_or(Error::Parse {
                line: lineno,
                message: "missing token".into(),
            })?;
            let vec: Vec<f32> = parts
                .map(|p| {
                    p.parse::<f32>().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("bad float {p:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            if vec.len() != dim {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("row has {} values, expected {dim}", vec.len()),
                });
            }
            table.words.insert(token.to_string(), vec);
            rows += 1;
        }
        if rows != count {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: format!("header declared {count} rows but file has {rows}"),
            });
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bucket_count(&self) -> u64 {
        self.bucket_count
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        (self.n_min, self.n_max)
    }

    pub fn hash_seed(&self) -> u64 {
        self.hash_seed
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.words.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }

    pub fn word_vector(&self, token: &str) -> Option<&[f32]> {
        self.words.get(token).map(Vec::as_slice)
    }

    pub fn insert_word(&mut self, token: String, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Shape(format!(
                "word vector length {} does not match dimension {}",
                vector.len(),
                self.dim
            )));
        }
        self.words.insert(token, vector);
        Ok(())
    }

    pub fn bucket_of(&self, ngram: &str) -> u64 {
        fnv1a(ngram.as_bytes(), self.hash_seed) % self.bucket_count
    }

    pub fn buckets_of(&self, token: &str) -> Vec<u64> {
        char_ngrams(token, self.n_min, self.n_max)
            .iter()
            .map(|g| self.bucket_of(g))
            .collect()
    }

    /// Initial value of a bucket row, derived deterministically from the
    /// table's hash seed and the bucket index.
    pub fn derived_bucket_vector(&self, bucket: u64) -> Vec<f32> {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(self.hash_seed, &[seeds::BUCKET, bucket]));
        let s = self.init_scale;
        (0..self.dim).map(|_| rng.random_range(-s..=s)).collect()
    }

    /// Frozen total lookup: known words get their vector plus the mean of
    /// their n-gram bucket vectors; unknown words get the bucket mean alone.
    /// A token whose wrapped form is shorter than every n-gram length and
    /// that has no word vector embeds to zero.
    pub fn embed_token(&self, token: &str) -> Tensor {
        let mut acc = vec![0.0f32; self.dim];
        let buckets = self.buckets_of(token);
        if !buckets.is_empty() {
            for &b in &buckets {
                for (a, v) in acc.iter_mut().zip(self.derived_bucket_vector(b)) {
                    *a += v;
                }
            }
            for a in &mut acc {
                *a /= buckets.len() as f32;
            }
        }
        if let Some(w) = self.word_vector(token) {
            for (a, v) in acc.iter_mut().zip(w) {
                *a += v;
            }
        }
        Tensor::row(acc).expect("dim is positive")
    }
}

/// Trainable embedding assembly: the frozen table plus materialized
/// parameter rows for the buckets (and optionally words) of a training
/// vocabulary.
#[derive(Debug, Clone)]
pub struct EmbeddingParams {
    pub table: EmbeddingTable,
    pub bucket_params: BTreeMap<u64, ParamId>,
    pub word_params: BTreeMap<String, ParamId>,
    pub train_buckets: bool,
    pub train_words: bool,
}

impl EmbeddingParams {
    /// Materializes one parameter row per distinct bucket (and per known
    /// word, when words are trainable) of the vocabulary. Initial values
    /// equal the frozen table's, so an untrained assembly embeds exactly
    /// like [`EmbeddingTable::embed_token`].
    pub fn build<'a>(
        table: EmbeddingTable,
        vocab: impl Iterator<Item = &'a str>,
        train_buckets: bool,
        train_words: bool,
        ps: &mut ParamSet,
    ) -> Result<Self> {
        let mut seen_buckets = std::collections::BTreeSet::new();
        let mut seen_words = std::collections::BTreeSet::new();
        for token in vocab {
            if train_buckets {
                for b in table.buckets_of(token) {
                    seen_buckets.insert(b);
                }
            }
            if train_words && table.word_vector(token).is_some() {
                seen_words.insert(token.to_string());
            }
        }
        let mut buckets: BTreeMap<u64, ParamId> = BTreeMap::new();
        let mut words: BTreeMap<String, ParamId> = BTreeMap::new();
        for b in seen_buckets {
            let t = Tensor::row(table.derived_bucket_vector(b))?.with_requires_grad();
            buckets.insert(b, ps.add(format!("embedding.bucket.{b}"), t)?);
        }
        for w in seen_words {
            let t = Tensor::row(table.word_vector(&w).unwrap().to_vec())?.with_requires_grad();
            let id = ps.add(format!("embedding.word.{w}"), t)?;
            words.insert(w, id);
        }
        Ok(EmbeddingParams {
            table,
            bucket_params: buckets,
            word_params: words,
            train_buckets,
            train_words,
        })
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    /// Tape-recorded embedding of one token: the trainable twin of
    /// [`EmbeddingTable::embed_token`], with materialized rows bound as
    /// parameters and everything else entering as frozen leaves.
    pub fn embed(&self, tape: &mut Tape, ps: &ParamSet, token: &str) -> Result<Var> {
        let buckets = self.table.buckets_of(token);
        let mut rows: Vec<Var> = Vec::with_capacity(buckets.len());
        for b in buckets {
            match self.bucket_params.get(&b) {
                Some(&id) => rows.push(tape.param(ps, id)),
                None => rows.push(tape.leaf(Tensor::row(self.table.derived_bucket_vector(b))?)),
            }
        }
        let ngram_mean = if rows.is_empty() {
            None
        } else if rows.len() == 1 {
            Some(rows[0])
        } else {
            let stacked = tape.stack_rows(&rows)?;
            Some(tape.mean_rows(stacked)?)
        };
        let word = match self.word_params.get(token) {
            Some(&id) => Some(tape.param(ps, id)),
            None => self
                .table
                .word_vector(token)
                .map(|v| tape.leaf(Tensor::row(v.to_vec()).expect("dim positive"))),
        };
        match (ngram_mean, word) {
            (Some(n), Some(w)) => tape.add(n, w),
            (Some(n), None) => Ok(n),
            (None, Some(w)) => Ok(w),
            (None, None) => Ok(tape.leaf(Tensor::zeros(&[1, self.table.dim()])?)),
        }
    }
}

/// Where Model 2's per-example vectors come from.
#[derive(Debug, Clone)]
pub enum ContextualProvider {
    /// Vectors read from a file keyed by (example id, field).
    File {
        dim: usize,
        topic: BTreeMap<String, Vec<f32>>,
        body: BTreeMap<String, Vec<f32>>,
    },
    /// Mean of frozen subword embeddings over the field's tokens; makes the
    /// Model 2 pipeline runnable with no external artifacts.
    FallbackMean { table: EmbeddingTable },
}

impl ContextualProvider {
    /// Parses the contextual vector format: a `#dim D` header line, then one
    /// record per line — example id, field name (`topic`|`body`), then D
    /// floats, all tab-separated.
    pub fn load_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty contextual vector file, expected `#dim D` header".into(),
        })?;
        let dim: usize = header
            .strip_prefix("#dim ")
            .and_then(|d| d.trim().parse().ok())
            .ok_or(Error::Parse {
                line: 1,
                message: format!("expected `#dim D` header, got {header:?}"),
            })?;
        let mut topic = BTreeMap::new();
        let mut body = BTreeMap::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != dim + 2 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!(
                        "record has {} fields, expected id + field + {dim} values",
                        fields.len()
                    ),
                });
            }
            let vec: Vec<f32> = fields[2..]
                .iter()
                .map(|p| {
                    p.parse::<f32>().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("bad float {p:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            let map = match fields[1] {
                "topic" => &mut topic,
                "body" => &mut body,
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("unknown field {other:?}, expected topic or body"),
                    })
                }
            };
            map.insert(fields[0].to_string(), vec);
        }
        Ok(ContextualProvider::File { dim, topic, body })
    }

    pub fn fallback(table: EmbeddingTable) -> Self {
        ContextualProvider::FallbackMean { table }
    }

    pub fn dim(&self) -> usize {
        match self {
            ContextualProvider::File { dim, .. } => *dim,
            ContextualProvider::FallbackMean { table } => table.dim(),
        }
    }

    /// Human-readable provenance for reports.
    pub fn label(&self) -> &'static str {
        match self {
            ContextualProvider::File { .. } => "contextual-file",
            ContextualProvider::FallbackMean { .. } => "fallback-mean",
        }
    }

    fn mean_of_tokens(table: &EmbeddingTable, tokens: &[String]) -> Vec<f32> {
        let mut acc = vec![0.0f32; table.dim()];
        if tokens.is_empty() {
            return acc;
        }
        for tok in tokens {
            let v = table.embed_token(tok);
            for (a, x) in acc.iter_mut().zip(v.data()) {
                *a += x;
            }
        }
        for a in &mut acc {
            *a /= tokens.len() as f32;
        }
        acc
    }

    /// One fixed-length vector per field for the example.
    pub fn vectors(&self, example: &NewsExample) -> Result<(Vec<f32>, Vec<f32>)> {
        match self {
            ContextualProvider::File { topic, body, .. } => {
                let t = topic.get(&example.id).ok_or_else(|| {
                    Error::Lookup(format!("no topic vector for example id {:?}", example.id))
                })?;
                let b = body.get(&example.id).ok_or_else(|| {
                    Error::Lookup(format!("no body vector for example id {:?}", example.id))
                })?;
                Ok((t.clone(), b.clone()))
            }
            ContextualProvider::FallbackMean { table } => Ok((
                Self::mean_of_tokens(table, &example.topic),
                Self::mean_of_tokens(table, &example.body),
            )),
        }
    }
}

/// Writes vectors in the contextual file format. Used to materialize
/// fixture files and to round-trip in tests.
pub fn write_contextual_file(
    path: &Path,
    dim: usize,
    records: &[(String, &'static str, Vec<f32>)],
) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    writeln!(out, "#dim {dim}").unwrap();
    for (id, field, vec) in records {
        out.push_str(id);
        out.push('\t');
        out.push_str(field);
        for v in vec {
            write!(out, "\t{v}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
