use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::{ContextualProvider, EmbeddingParams, EmbeddingTable};
use crate::error::{Error, Result};
use crate::models::{
    EncoderStack, MergeKind, MlpParams, Model, Model1, Model2, ModelDims, ModelKind,
};
use crate::numerics::{ParamSet, Tensor};

/// Model file layout: magic, format version, JSON metadata header (model
/// kind, hyperparameters, vocabulary fingerprint, shape table), then the
/// named raw little-endian single-precision arrays.
pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"FNDMODEL";

#[derive(Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingMeta {
    dim: usize,
    bucket_count: u64,
    n_min: usize,
    n_max: usize,
    hash_seed: u64,
    train_buckets: bool,
    train_words: bool,
    frozen_words: Vec<String>,
    trained_words: Vec<String>,
    bucket_ids: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct Model1Meta {
    dims: ModelDims,
    topic_cap: usize,
    body_cap: usize,
    dropout_p: f32,
    embedding: EmbeddingMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ProviderMeta {
    File {
        dim: usize,
        ids: Vec<String>,
    },
    FallbackMean {
        dim: usize,
        bucket_count: u64,
        n_min: usize,
        n_max: usize,
        hash_seed: u64,
        frozen_words: Vec<String>,
    },
}

#[derive(Serialize, Deserialize)]
struct Model2Meta {
    merge: MergeKind,
    dropout_p: f32,
    provider: ProviderMeta,
}

#[derive(Serialize, Deserialize)]
struct FileHeader {
    model_kind: ModelKind,
    /// Caller-supplied configuration echo (resolved settings and their
    /// fingerprint); opaque to the loader.
    metadata: serde_json::Value,
    vocab_fingerprint: String,
    payload_len: u64,
    arrays: Vec<ArrayEntry>,
    model1: Option<Model1Meta>,
    model2: Option<Model2Meta>,
}

fn fnv_str(h: &mut u64, s: &str) {
    for b in s.bytes() {
        *h ^= b as u64;
        *h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
}

fn vocab_fingerprint(words: &[String], bucket_ids: &[u64], dim: usize) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    fnv_str(&mut h, &dim.to_string());
    for w in words {
        fnv_str(&mut h, w);
        fnv_str(&mut h, "\u{1f}");
    }
    for b in bucket_ids {
        fnv_str(&mut h, &b.to_string());
    }
    format!("{h:016x}")
}

struct PayloadWriter {
    bytes: Vec<u8>,
    arrays: Vec<ArrayEntry>,
}

impl PayloadWriter {
    fn new() -> Self {
        PayloadWriter {
            bytes: Vec::new(),
            arrays: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, shape: Vec<usize>, data: &[f32]) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.arrays.push(ArrayEntry {
            name: name.to_string(),
            shape,
            offset: self.bytes.len() as u64,
        });
        for v in data {
            self.bytes.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn push_rows(&mut self, name: &str, dim: usize, rows: &[&[f32]]) {
        if rows.is_empty() {
            return;
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            data.extend_from_slice(r);
        }
        self.push(name, vec![rows.len(), dim], &data);
    }
}

fn table_frozen_words(table: &EmbeddingTable) -> (Vec<String>, Vec<Vec<f32>>) {
    let mut names = Vec::new();
    let mut vecs = Vec::new();
    for (w, v) in table.words() {
        names.push(w.to_string());
        vecs.push(v.to_vec());
    }
    (names, vecs)
}

/// Serializes a trained model with a caller-provided metadata echo.
pub fn save_model(model: &Model, metadata: &serde_json::Value, path: &Path) -> Result<()> {
    let mut writer = PayloadWriter::new();
    let header = match model {
        Model::One(m) => {
            for id in m.params.ids() {
                let name = m.params.name(id).to_string();
                if name.starts_with("embedding.") {
                    continue;
                }
                let t = m.params.get(id);
                writer.push(&name, t.shape().to_vec(), t.data());
            }
            let emb = &m.embedding;
            let dim = emb.table.dim();
            let bucket_ids: Vec<u64> = emb.bucket_params.keys().copied().collect();
            let bucket_rows: Vec<&[f32]> = emb
                .bucket_params
                .values()
                .map(|&id| m.params.get(id).data())
                .collect();
            writer.push_rows("embedding.trained_buckets", dim, &bucket_rows);
            let trained_words: Vec<String> = emb.word_params.keys().cloned().collect();
            let word_rows: Vec<&[f32]> = emb
                .word_params
                .values()
                .map(|&id| m.params.get(id).data())
                .collect();
            writer.push_rows("embedding.trained_words", dim, &word_rows);
            let (frozen_words, frozen_vecs) = table_frozen_words(&emb.table);
            let frozen_rows: Vec<&[f32]> = frozen_vecs.iter().map(Vec::as_slice).collect();
            writer.push_rows("embedding.frozen_words", dim, &frozen_rows);

            let (n_min, n_max) = emb.table.ngram_range();
            FileHeader {
                model_kind: ModelKind::Model1,
                metadata: metadata.clone(),
                vocab_fingerprint: vocab_fingerprint(&frozen_words, &bucket_ids, dim),
                payload_len: writer.bytes.len() as u64,
                arrays: std::mem::take(&mut writer.arrays),
                model1: Some(Model1Meta {
                    dims: m.dims.clone(),
                    topic_cap: m.topic_cap,
                    body_cap: m.body_cap,
                    dropout_p: m.mlp.dropout_p,
                    embedding: EmbeddingMeta {
                        dim,
                        bucket_count: emb.table.bucket_count(),
                        n_min,
                        n_max,
                        hash_seed: emb.table.hash_seed(),
                        train_buckets: emb.train_buckets,
                        train_words: emb.train_words,
                        frozen_words,
                        trained_words,
                        bucket_ids,
                    },
                }),
                model2: None,
            }
        }
        Model::Two(m) => {
            for id in m.params.ids() {
                let t = m.params.get(id);
                writer.push(m.params.name(id), t.shape().to_vec(), t.data());
            }
            let provider = match &m.provider {
                ContextualProvider::File { dim, topic, body } => {
                    let ids: Vec<String> = topic.keys().cloned().collect();
                    let topic_rows: Vec<&[f32]> = topic.values().map(Vec::as_slice).collect();
                    writer.push_rows("provider.topic", *dim, &topic_rows);
                    let body_rows: Vec<&[f32]> =
                        ids.iter().filter_map(|id| body.get(id)).map(Vec::as_slice).collect();
                    if body_rows.len() != ids.len() {
                        return Err(Error::ModelIntegrity(
                            "provider body vectors missing for some ids".into(),
                        ));
                    }
                    writer.push_rows("provider.body", *dim, &body_rows);
                    ProviderMeta::File {
                        dim: *dim,
                        ids,
                    }
                }
                ContextualProvider::FallbackMean { table } => {
                    let (frozen_words, frozen_vecs) = table_frozen_words(table);
                    let frozen_rows: Vec<&[f32]> = frozen_vecs.iter().map(Vec::as_slice).collect();
                    writer.push_rows("provider.frozen_words", table.dim(), &frozen_rows);
                    let (n_min, n_max) = table.ngram_range();
                    ProviderMeta::FallbackMean {
                        dim: table.dim(),
                        bucket_count: table.bucket_count(),
                        n_min,
                        n_max,
                        hash_seed: table.hash_seed(),
                        frozen_words,
                    }
                }
            };
            let fingerprint = match &provider {
                ProviderMeta::File { ids, dim } => vocab_fingerprint(ids, &[], *dim),
                ProviderMeta::FallbackMean {
                    frozen_words, dim, ..
                } => vocab_fingerprint(frozen_words, &[], *dim),
            };
            FileHeader {
                model_kind: ModelKind::Model2,
                metadata: metadata.clone(),
                vocab_fingerprint: fingerprint,
                payload_len: writer.bytes.len() as u64,
                arrays: std::mem::take(&mut writer.arrays),
                model1: None,
                model2: Some(Model2Meta {
                    merge: m.merge,
                    dropout_p: m.mlp.dropout_p,
                    provider,
                }),
            }
        }
    };

    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::ModelIntegrity(format!("header serialization failed: {e}")))?;
    let mut out = Vec::with_capacity(8 + 4 + 8 + header_json.len() + writer.bytes.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_json);
    out.extend_from_slice(&writer.bytes);
    fs::write(path, out)?;
    Ok(())
}

struct PayloadReader<'a> {
    bytes: &'a [u8],
    arrays: &'a [ArrayEntry],
}

impl<'a> PayloadReader<'a> {
    fn validate(&self) -> Result<()> {
        let mut expected_offset = 0u64;
        for a in self.arrays {
            if a.shape.is_empty() || a.shape.iter().any(|&d| d == 0) {
                return Err(Error::ModelIntegrity(format!(
                    "array {:?} has a zero dimension",
                    a.name
                )));
            }
            if a.offset != expected_offset {
                return Err(Error::ModelIntegrity(format!(
                    "array {:?} offset {} does not follow the previous array (expected {})",
                    a.name, a.offset, expected_offset
                )));
            }
            let numel: usize = a.shape.iter().product();
            expected_offset += (numel * 4) as u64;
        }
        if expected_offset != self.bytes.len() as u64 {
            return Err(Error::ModelIntegrity(format!(
                "shape table implies {} payload bytes but {} are present",
                expected_offset,
                self.bytes.len()
            )));
        }
        Ok(())
    }

    fn find(&self, name: &str) -> Option<&ArrayEntry> {
        self.arrays.iter().find(|a| a.name == name)
    }

    fn read(&self, entry: &ArrayEntry) -> Vec<f32> {
        let numel: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        self.bytes[start..start + numel * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect()
    }

    /// Rows of a consolidated `[n, dim]` array; absent arrays give no rows.
    fn rows(&self, name: &str, expect_rows: usize, dim: usize) -> Result<Vec<Vec<f32>>> {
        if expect_rows == 0 {
            return Ok(Vec::new());
        }
        let entry = self.find(name).ok_or_else(|| {
            Error::ModelIntegrity(format!("missing payload array {name:?}"))
        })?;
        if entry.shape != [expect_rows, dim] {
            return Err(Error::ModelIntegrity(format!(
                "array {name:?} has shape {:?}, expected [{expect_rows}, {dim}]",
                entry.shape
            )));
        }
        Ok(self.read(entry).chunks(dim).map(<[f32]>::to_vec).collect())
    }
}

/// Loads a model file; returns the model and its metadata echo.
pub fn load_model(path: &Path) -> Result<(Model, serde_json::Value)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 + 4 + 8 {
        return Err(Error::ModelTruncated(format!(
            "file is only {} bytes",
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::ModelVersion(
            "bad magic string; not a model file of this format".into(),
        ));
    }
    let version = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);
    if version != FORMAT_VERSION {
        return Err(Error::ModelVersion(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    if bytes.len() < 20 + header_len {
        return Err(Error::ModelTruncated(
            "file ends inside the metadata header".into(),
        ));
    }
    let header: FileHeader = serde_json::from_slice(&bytes[20..20 + header_len])
        .map_err(|e| Error::ModelIntegrity(format!("bad metadata header: {e}")))?;
    let payload = &bytes[20 + header_len..];
    if (payload.len() as u64) < header.payload_len {
        return Err(Error::ModelTruncated(format!(
            "payload has {} bytes, header declares {}",
            payload.len(),
            header.payload_len
        )));
    }
    if payload.len() as u64 > header.payload_len {
        return Err(Error::ModelIntegrity(format!(
            "payload has {} trailing bytes beyond the declared {}",
            payload.len() as u64 - header.payload_len,
            header.payload_len
        )));
    }
    let reader = PayloadReader {
        bytes: payload,
        arrays: &header.arrays,
    };
    reader.validate()?;

    let model = match header.model_kind {
        ModelKind::Model1 => {
            let meta = header.model1.as_ref().ok_or_else(|| {
                Error::ModelIntegrity("model1 file without model1 metadata".into())
            })?;
            let mut ps = ParamSet::new();
            for entry in header.arrays.iter().filter(|a| {
                !a.name.starts_with("embedding.")
            }) {
                let t = Tensor::new(entry.shape.clone(), reader.read(entry))?.with_requires_grad();
                ps.add(entry.name.clone(), t)?;
            }
            let e = &meta.embedding;
            let mut table =
                EmbeddingTable::with_config(e.dim, e.bucket_count, e.n_min, e.n_max, e.hash_seed)?;
            let frozen = reader.rows("embedding.frozen_words", e.frozen_words.len(), e.dim)?;
            for (w, v) in e.frozen_words.iter().zip(frozen) {
                table.insert_word(w.clone(), v)?;
            }
            let bucket_rows =
                reader.rows("embedding.trained_buckets", e.bucket_ids.len(), e.dim)?;
            let mut bucket_params = std::collections::BTreeMap::new();
            for (&b, row) in e.bucket_ids.iter().zip(bucket_rows) {
                let t = Tensor::row(row)?.with_requires_grad();
                bucket_params.insert(b, ps.add(format!("embedding.bucket.{b}"), t)?);
            }
            let word_rows = reader.rows("embedding.trained_words", e.trained_words.len(), e.dim)?;
            let mut word_params = std::collections::BTreeMap::new();
            for (w, row) in e.trained_words.iter().zip(word_rows) {
                let t = Tensor::row(row)?.with_requires_grad();
                word_params.insert(w.clone(), ps.add(format!("embedding.word.{w}"), t)?);
            }
            let embedding = EmbeddingParams {
                table,
                bucket_params,
                word_params,
                train_buckets: e.train_buckets,
                train_words: e.train_words,
            };
            let topic_encoder = EncoderStack::from_names(&ps, "topic")?;
            let body_encoder = if meta.dims.share_encoders {
                topic_encoder.clone()
            } else {
                EncoderStack::from_names(&ps, "body")?
            };
            let mlp = MlpParams::from_names(&ps, "mlp", meta.dropout_p)?;
            Model::One(Model1 {
                params: ps,
                embedding,
                topic_encoder,
                body_encoder,
                mlp,
                dims: meta.dims.clone(),
                topic_cap: meta.topic_cap,
                body_cap: meta.body_cap,
            })
        }
        ModelKind::Model2 => {
            let meta = header.model2.as_ref().ok_or_else(|| {
                Error::ModelIntegrity("model2 file without model2 metadata".into())
            })?;
            let mut ps = ParamSet::new();
            for entry in header.arrays.iter().filter(|a| !a.name.starts_with("provider.")) {
                let t = Tensor::new(entry.shape.clone(), reader.read(entry))?.with_requires_grad();
                ps.add(entry.name.clone(), t)?;
            }
            let provider = match &meta.provider {
                ProviderMeta::File { dim, ids } => {
                    let topic_rows = reader.rows("provider.topic", ids.len(), *dim)?;
                    let body_rows = reader.rows("provider.body", ids.len(), *dim)?;
                    let mut topic = std::collections::BTreeMap::new();
                    let mut body = std::collections::BTreeMap::new();
                    for ((id, t), b) in ids.iter().zip(topic_rows).zip(body_rows) {
                        topic.insert(id.clone(), t);
                        body.insert(id.clone(), b);
                    }
                    ContextualProvider::File {
                        dim: *dim,
                        topic,
                        body,
                    }
                }
                ProviderMeta::FallbackMean {
                    dim,
                    bucket_count,
                    n_min,
                    n_max,
                    hash_seed,
                    frozen_words,
                } => {
                    let mut table =
                        EmbeddingTable::with_config(*dim, *bucket_count, *n_min, *n_max, *hash_seed)?;
                    let rows = reader.rows("provider.frozen_words", frozen_words.len(), *dim)?;
                    for (w, v) in frozen_words.iter().zip(rows) {
                        table.insert_word(w.clone(), v)?;
                    }
                    ContextualProvider::FallbackMean { table }
                }
            };
            let mlp = MlpParams::from_names(&ps, "mlp", meta.dropout_p)?;
            Model::Two(Model2::from_parts(ps, provider, mlp, meta.merge))
        }
    };
    Ok((model, header.metadata))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_mini, Dataset};
    use crate::models::{Classifier, ModelDims};
    use serde_json::json;

    fn build_model1(ds: &Dataset) -> Model1 {
        let table = EmbeddingTable::with_config(12, 1 << 12, 3, 5, 3).unwrap();
        let all: Vec<usize> = (0..ds.len()).collect();
        let vocab = ds.vocabulary(&all);
        Model1::new(
            table,
            &vocab,
            ModelDims {
                embedding_dim: 12,
                hidden_dim: 6,
                attn_dim: 6,
                share_encoders: false,
            },
            16,
            48,
            true,
            false,
            0.2,
            77,
        )
        .unwrap()
    }

    #[test]
    fn model1_round_trip_predicts_identically() {
        let ds = generate_mini(21);
        let model = build_model1(&ds);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fnd");
        save_model(&Model::One(model), &json!({"fingerprint": "abc"}), &path).unwrap();
        let (loaded, meta) = load_model(&path).unwrap();
        assert_eq!(meta["fingerprint"], "abc");
        let reload = match &loaded {
            Model::One(m) => m,
            _ => panic!("wrong kind"),
        };
        let original = build_model1(&ds);
        for ex in ds.examples.iter().take(10) {
            let a = original.predict(ex).unwrap();
            let b = reload.predict(ex).unwrap();
            assert_eq!(a.probs, b.probs, "example {}", ex.id);
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn save_is_byte_deterministic() {
        let ds = generate_mini(22);
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.fnd"), dir.path().join("b.fnd"));
        save_model(&Model::One(build_model1(&ds)), &json!({}), &p1).unwrap();
        save_model(&Model::One(build_model1(&ds)), &json!({}), &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn corrupt_magic_is_a_version_error() {
        let ds = generate_mini(23);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fnd");
        save_model(&Model::One(build_model1(&ds)), &json!({}), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelVersion(_))));
    }

    #[test]
    fn truncated_file_is_detected() {
        let ds = generate_mini(24);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fnd");
        save_model(&Model::One(build_model1(&ds)), &json!({}), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 64]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelTruncated(_))));
    }

    #[test]
    fn edited_shape_is_an_integrity_error() {
        let ds = generate_mini(25);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fnd");
        save_model(&Model::One(build_model1(&ds)), &json!({}), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let mut header: FileHeader = serde_json::from_slice(&bytes[20..20 + header_len]).unwrap();
        header.arrays[0].shape[0] += 1;
        let new_header = serde_json::to_vec(&header).unwrap();
        let mut out = Vec::new();
        out.extend_from_slice(&bytes[..12]);
        out.extend_from_slice(&(new_header.len() as u64).to_le_bytes());
        out.extend_from_slice(&new_header);
        out.extend_from_slice(&bytes[20 + header_len..]);
        fs::write(&path, out).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelIntegrity(_))));
    }

    #[test]
    fn model2_fallback_round_trip() {
        let table = EmbeddingTable::with_config(8, 1 << 10, 3, 4, 9).unwrap();
        let provider = ContextualProvider::fallback(table);
        let model = Model2::new(provider, MergeKind::Concat, 0.2, 5).unwrap();
        let ds = generate_mini(26);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m2.fnd");
        save_model(&Model::Two(model), &json!({}), &path).unwrap();
        let (loaded, _) = load_model(&path).unwrap();
        let m2 = match &loaded {
            Model::Two(m) => m,
            _ => panic!("wrong kind"),
        };
        let rebuilt = Model2::new(
            ContextualProvider::fallback(EmbeddingTable::with_config(8, 1 << 10, 3, 4, 9).unwrap()),
            MergeKind::Concat,
            0.2,
            5,
        )
        .unwrap();
        for ex in ds.examples.iter().take(5) {
            assert_eq!(
                m2.predict(ex).unwrap().probs,
                rebuilt.predict(ex).unwrap().probs
            );
        }
    }
}
