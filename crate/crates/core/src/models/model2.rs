use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::NewsExample;
use crate::embeddings::ContextualProvider;
use crate::error::{Error, Result};
use crate::models::{
    cross_entropy_loss, mlp_forward, Classifier, MlpParams, ModelKind, Prediction,
};
use crate::numerics::{derive_seed, seeds, ParamSet, Tape, Tensor, Var};

/// How the topic and body vectors are combined before the MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeKind {
    /// Concatenation, mirroring the first model's merge. The default.
    Concat,
    /// Elementwise sum, available for ablation.
    Sum,
}

impl MergeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MergeKind::Concat => "concat",
            MergeKind::Sum => "sum",
        }
    }

    pub fn parse(s: &str) -> Option<MergeKind> {
        match s {
            "concat" => Some(MergeKind::Concat),
            "sum" => Some(MergeKind::Sum),
            _ => None,
        }
    }

    pub fn merged_dim(self, provider_dim: usize) -> usize {
        match self {
            MergeKind::Concat => 2 * provider_dim,
            MergeKind::Sum => provider_dim,
        }
    }
}

/// Contextual vectors per field, merged and fed to the MLP head. The
/// provider's vectors are frozen inputs; only the MLP trains. Vectors are
/// memoized per example id (the fallback provider recomputes subword means
/// otherwise).
pub struct Model2 {
    pub params: ParamSet,
    pub provider: ContextualProvider,
    pub mlp: MlpParams,
    pub merge: MergeKind,
    cache: std::sync::RwLock<std::collections::HashMap<String, (Vec<f32>, Vec<f32>)>>,
}

impl Model2 {
    pub fn new(
        provider: ContextualProvider,
        merge: MergeKind,
        dropout_p: f32,
        seed: u64,
    ) -> Result<Self> {
        let mut ps = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[seeds::INIT]));
        let mlp = MlpParams::init(
            &mut ps,
            "mlp",
            merge.merged_dim(provider.dim()),
            dropout_p,
            &mut rng,
        )?;
        Ok(Model2 {
            params: ps,
            provider,
            mlp,
            merge,
            cache: Default::default(),
        })
    }

    /// Reassembles a loaded model.
    pub(crate) fn from_parts(
        params: ParamSet,
        provider: ContextualProvider,
        mlp: MlpParams,
        merge: MergeKind,
    ) -> Self {
        Model2 {
            params,
            provider,
            mlp,
            merge,
            cache: Default::default(),
        }
    }

    fn provider_vectors(&self, example: &NewsExample) -> Result<(Vec<f32>, Vec<f32>)> {
        if let Some(hit) = self.cache.read().unwrap().get(&example.id) {
            return Ok(hit.clone());
        }
        let vectors = self.provider.vectors(example)?;
        self.cache
            .write()
            .unwrap()
            .insert(example.id.clone(), vectors.clone());
        Ok(vectors)
    }

    fn merged_input(&self, example: &NewsExample) -> Result<Tensor> {
        let (mut topic, mut body) = self.provider_vectors(example)?;
        if topic.len() != self.provider.dim() || body.len() != self.provider.dim() {
            return Err(Error::Shape(format!(
                "provider returned vectors of length {}/{}, expected {}",
                topic.len(),
                body.len(),
                self.provider.dim()
            )));
        }
        // Provider magnitudes vary wildly between sources (subword means are
        // tiny, real contextual vectors are not); unit-normalize each field
        // so the MLP sees a stable input scale. Zero vectors stay zero.
        for v in [&mut topic, &mut body] {
            let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            if norm > 0.0 {
                for x in v.iter_mut() {
                    *x /= norm;
                }
            }
        }
        let merged = match self.merge {
            MergeKind::Concat => {
                let mut m = topic;
                m.extend_from_slice(&body);
                m
            }
            MergeKind::Sum => topic.iter().zip(&body).map(|(a, b)| a + b).collect(),
        };
        Tensor::row(merged)
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        example: &NewsExample,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let merged = tape.leaf(self.merged_input(example)?);
        mlp_forward(tape, &self.params, &self.mlp, merged, dropout)
    }
}

impl Classifier for Model2 {
    fn kind(&self) -> ModelKind {
        ModelKind::Model2
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn example_loss(
        &self,
        tape: &mut Tape,
        example: &NewsExample,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let probs = self.forward(tape, example, dropout)?;
        cross_entropy_loss(tape, probs, example.label)
    }

    fn predict(&self, example: &NewsExample) -> Result<Prediction> {
        let mut tape = Tape::new();
        let probs_var = self.forward(&mut tape, example, None)?;
        let probs = [tape.data(probs_var)[0], tape.data(probs_var)[1]];
        Ok(Prediction {
            probs,
            label: Prediction::label_from_probs(probs),
            topic_attention: None,
            body_attention: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DatasetKind, Domain, Label};
    use crate::embeddings::EmbeddingTable;
    use std::collections::BTreeMap;

    fn example(id: &str, topic: &str, body: &str) -> NewsExample {
        NewsExample::build(
            id.into(),
            DatasetKind::Celebrity,
            Domain::Celebrity,
            Label::Fake,
            topic.into(),
            body.into(),
            true,
        )
    }

    fn file_provider(dim: usize, ids: &[&str]) -> ContextualProvider {
        let mut topic = BTreeMap::new();
        let mut body = BTreeMap::new();
        for (i, id) in ids.iter().enumerate() {
            let base = i as f32;
            topic.insert(id.to_string(), (0..dim).map(|j| base + j as f32 * 0.1).collect());
            body.insert(id.to_string(), (0..dim).map(|j| -base - j as f32 * 0.1).collect());
        }
        ContextualProvider::File { dim, topic, body }
    }

    #[test]
    fn zero_params_give_uniform_output() {
        let provider = file_provider(4, &["e1"]);
        let mut m = Model2::new(provider, MergeKind::Concat, 0.2, 1).unwrap();
        for id in m.params.ids().collect::<Vec<_>>() {
            m.params.get_mut(id).data_mut().fill(0.0);
        }
        let p = m.predict(&example("e1", "t", "b")).unwrap();
        assert_eq!(p.probs, [0.5, 0.5]);
        assert_eq!(p.label, Label::Fake); // tie rule
    }

    #[test]
    fn concatenation_is_ordered() {
        let provider = file_provider(4, &["e1"]);
        let m = Model2::new(provider, MergeKind::Concat, 0.0, 2).unwrap();
        let merged = m.merged_input(&example("e1", "t", "b")).unwrap();
        let (topic, body) = m.provider.vectors(&example("e1", "t", "b")).unwrap();
        let unit = |v: &[f32]| {
            let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            v.iter().map(|x| x / n).collect::<Vec<_>>()
        };
        assert_eq!(&merged.data()[..4], unit(&topic).as_slice());
        assert_eq!(&merged.data()[4..], unit(&body).as_slice());
        assert_ne!(&merged.data()[..4], &merged.data()[4..]);
    }

    #[test]
    fn missing_id_propagates_lookup_error() {
        let provider = file_provider(4, &["e1"]);
        let m = Model2::new(provider, MergeKind::Concat, 0.0, 3).unwrap();
        let err = m.predict(&example("missing", "t", "b")).unwrap_err();
        match err {
            Error::Lookup(msg) => assert!(msg.contains("missing")),
            other => panic!("expected lookup error, got {other}"),
        }
    }

    #[test]
    fn fallback_single_token_equals_its_embedding() {
        let table = EmbeddingTable::with_config(6, 1 << 10, 3, 4, 11).unwrap();
        let expected = table.embed_token("president").data().to_vec();
        let provider = ContextualProvider::fallback(table);
        let ex = example("e1", "president", "president president president");
        let (topic, body) = provider.vectors(&ex).unwrap();
        assert_eq!(topic, expected);
        // Mean over repeated copies of the same token is that token's vector.
        for (b, e) in body.iter().zip(&expected) {
            assert!((b - e).abs() < 1e-6);
        }
    }

    /// dim-4 fixture against a scalar recomputation of the merged input.
    #[test]
    fn merged_vector_matches_hand_computation() {
        let provider = file_provider(4, &["e1", "e2"]);
        let m = Model2::new(provider, MergeKind::Sum, 0.0, 4).unwrap();
        let merged = m.merged_input(&example("e2", "t", "b")).unwrap();
        // topic = [1.0, 1.1, 1.2, 1.3], body = [-1.0, -1.1, -1.2, -1.3]
        for v in merged.data() {
            assert!(v.abs() < 1e-6);
        }
    }
}
