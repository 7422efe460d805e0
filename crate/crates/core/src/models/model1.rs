use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::NewsExample;
use crate::embeddings::{EmbeddingParams, EmbeddingTable};
use crate::encoder::{attention_pool, bigru_encode, AttentionParams, GruCellParams};
use crate::error::{Error, Result};
use crate::models::{
    cross_entropy_loss, mlp_forward, Classifier, MlpParams, ModelDims, ModelKind, Prediction,
};
use crate::numerics::{derive_seed, seeds, ParamSet, Tape, Var};

/// BiGRU encoder plus attention pooling for one input field.
#[derive(Debug, Clone)]
pub struct EncoderStack {
    pub fwd: GruCellParams,
    pub bwd: GruCellParams,
    pub attn: AttentionParams,
}

impl EncoderStack {
    fn init(
        ps: &mut ParamSet,
        prefix: &str,
        embedding_dim: usize,
        hidden_dim: usize,
        attn_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Ok(EncoderStack {
            fwd: GruCellParams::init(ps, &format!("{prefix}.fwd"), embedding_dim, hidden_dim, rng)?,
            bwd: GruCellParams::init(ps, &format!("{prefix}.bwd"), embedding_dim, hidden_dim, rng)?,
            attn: AttentionParams::init(ps, &format!("{prefix}.attn"), 2 * hidden_dim, attn_dim, rng)?,
        })
    }

    pub(crate) fn from_names(ps: &ParamSet, prefix: &str) -> Result<Self> {
        Ok(EncoderStack {
            fwd: GruCellParams::from_names(ps, &format!("{prefix}.fwd"))?,
            bwd: GruCellParams::from_names(ps, &format!("{prefix}.bwd"))?,
            attn: AttentionParams::from_names(ps, &format!("{prefix}.attn"))?,
        })
    }
}

/// Subword embeddings, one encoder stack per field (optionally shared), and
/// the MLP head over the concatenated sentence vectors.
pub struct Model1 {
    pub params: ParamSet,
    pub embedding: EmbeddingParams,
    pub topic_encoder: EncoderStack,
    pub body_encoder: EncoderStack,
    pub mlp: MlpParams,
    pub dims: ModelDims,
    pub topic_cap: usize,
    pub body_cap: usize,
}

/// Tape handles of one Model 1 forward pass.
pub struct Model1Output {
    pub probs: Var,
    pub topic_weights: Var,
    pub body_weights: Var,
    pub topic_tokens: Vec<String>,
    pub body_tokens: Vec<String>,
}

impl Model1 {
    /// Builds a fresh model. `vocab` decides which embedding rows become
    /// trainable parameters; pass the training vocabulary.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        table: EmbeddingTable,
        vocab: &[String],
        dims: ModelDims,
        topic_cap: usize,
        body_cap: usize,
        train_buckets: bool,
        train_words: bool,
        dropout_p: f32,
        seed: u64,
    ) -> Result<Self> {
        if table.dim() != dims.embedding_dim {
            return Err(Error::Config(format!(
                "embedding table dimension {} does not match configured {}",
                table.dim(),
                dims.embedding_dim
            )));
        }
        let mut ps = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[seeds::INIT]));
        let topic_encoder = EncoderStack::init(
            &mut ps,
            "topic",
            dims.embedding_dim,
            dims.hidden_dim,
            dims.attn_dim,
            &mut rng,
        )?;
        let body_encoder = if dims.share_encoders {
            topic_encoder.clone()
        } else {
            EncoderStack::init(
                &mut ps,
                "body",
                dims.embedding_dim,
                dims.hidden_dim,
                dims.attn_dim,
                &mut rng,
            )?
        };
        let mlp = MlpParams::init(&mut ps, "mlp", 4 * dims.hidden_dim, dropout_p, &mut rng)?;
        let embedding = EmbeddingParams::build(
            table,
            vocab.iter().map(String::as_str),
            train_buckets,
            train_words,
            &mut ps,
        )?;
        Ok(Model1 {
            params: ps,
            embedding,
            topic_encoder,
            body_encoder,
            mlp,
            dims,
            topic_cap,
            body_cap,
        })
    }

    fn encode_field(
        &self,
        tape: &mut Tape,
        encoder: &EncoderStack,
        tokens: &[String],
    ) -> Result<(Var, Var)> {
        let xs: Vec<Var> = tokens
            .iter()
            .map(|t| self.embedding.embed(tape, &self.params, t))
            .collect::<Result<_>>()?;
        let annotations = bigru_encode(tape, &self.params, &encoder.fwd, &encoder.bwd, &xs)?;
        let pooled = attention_pool(tape, &self.params, &encoder.attn, annotations)?;
        Ok((pooled.sentence, pooled.weights))
    }

    /// Full forward pass: embed, encode and pool each field, concatenate the
    /// two sentence vectors, classify.
    pub fn forward(
        &self,
        tape: &mut Tape,
        example: &NewsExample,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Model1Output> {
        let topic_tokens: Vec<String> =
            example.topic.iter().take(self.topic_cap).cloned().collect();
        let body_tokens: Vec<String> = example.body.iter().take(self.body_cap).cloned().collect();
        if topic_tokens.is_empty() {
            return Err(Error::Data(format!(
                "example {:?} has an empty topic after tokenization",
                example.id
            )));
        }
        if body_tokens.is_empty() {
            return Err(Error::Data(format!(
                "example {:?} has an empty body after tokenization",
                example.id
            )));
        }
        let (topic_vec, topic_weights) =
            self.encode_field(tape, &self.topic_encoder, &topic_tokens)?;
        let (body_vec, body_weights) = self.encode_field(tape, &self.body_encoder, &body_tokens)?;
        let merged = tape.concat_cols(topic_vec, body_vec)?;
        let probs = mlp_forward(tape, &self.params, &self.mlp, merged, dropout)?;
        Ok(Model1Output {
            probs,
            topic_weights,
            body_weights,
            topic_tokens,
            body_tokens,
        })
    }
}

impl Classifier for Model1 {
    fn kind(&self) -> ModelKind {
        ModelKind::Model1
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
        let out = self.forward(tape, example, dropout)?;
        cross_entropy_loss(tape, out.probs, example.label)
    }

    fn predict(&self, example: &NewsExample) -> Result<Prediction> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, example, None)?;
        let probs = [tape.data(out.probs)[0], tape.data(out.probs)[1]];
        Ok(Prediction {
            probs,
            label: Prediction::label_from_probs(probs),
            topic_attention: Some((out.topic_tokens, tape.data(out.topic_weights).to_vec())),
            body_attention: Some((out.body_tokens, tape.data(out.body_weights).to_vec())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DatasetKind, Domain, Label};
    use crate::numerics::grad_check;

    fn example(topic: &str, body: &str, label: Label) -> NewsExample {
        NewsExample::build(
            "t1".into(),
            DatasetKind::FakenewsAmt,
            Domain::Politics,
            label,
            topic.into(),
            body.into(),
            true,
        )
    }

    fn tiny_model(seed: u64) -> Model1 {
        let table = EmbeddingTable::with_config(8, 1 << 12, 3, 4, 5).unwrap();
        let vocab: Vec<String> = ["president", "confirmed", "statement", "shocking", "story"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        Model1::new(
            table,
            &vocab,
            ModelDims {
                embedding_dim: 8,
                hidden_dim: 4,
                attn_dim: 4,
                share_encoders: false,
            },
            16,
            32,
            true,
            false,
            0.2,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn probabilities_form_a_distribution() {
        let m = tiny_model(1);
        let ex = example("President confirmed", "The statement was shocking. Story.", Label::Legit);
        let p = m.predict(&ex).unwrap();
        assert!(p.probs.iter().all(|&v| v >= 0.0));
        assert!((p.probs[0] + p.probs[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn single_token_topic_trace_is_one() {
        let m = tiny_model(2);
        let ex = example("President", "Confirmed story here.", Label::Fake);
        let p = m.predict(&ex).unwrap();
        let (tokens, weights) = p.topic_attention.unwrap();
        assert_eq!(tokens, ["president"]);
        assert_eq!(weights, [1.0]);
    }

    #[test]
    fn empty_field_names_example() {
        let m = tiny_model(3);
        let ex = example("?!", "Body words here.", Label::Fake);
        let err = m.predict(&ex).unwrap_err();
        match err {
            Error::Data(msg) => assert!(msg.contains("t1")),
            other => panic!("expected data error, got {other}"),
        }
    }

    #[test]
    fn truncation_monotonicity() {
        let mut a = tiny_model(4);
        let ex = example("Short topic", "A body of several words here.", Label::Legit);
        let before = a.predict(&ex).unwrap();
        a.topic_cap = 10_000;
        a.body_cap = 10_000;
        let after = a.predict(&ex).unwrap();
        assert_eq!(before.probs, after.probs);
    }

    #[test]
    fn evaluation_does_not_mutate_parameters() {
        let m = tiny_model(5);
        let snapshot = m.params.snapshot();
        let ex = example("President confirmed", "The statement was shocking.", Label::Fake);
        let _ = m.predict(&ex).unwrap();
        let _ = m.predict(&ex).unwrap();
        assert_eq!(m.params.snapshot(), snapshot);
    }

    /// End-to-end gradient of the cross-entropy loss on a 3-token example.
    #[test]
    fn full_loss_gradient_matches_finite_differences() {
        let m = tiny_model(6);
        let ex = example("President", "Shocking confirmed story", Label::Fake);
        let err = grad_check(&m.params, 4, 9, |tape, _ps| {
            m.example_loss(tape, &ex, None)
        })
        .unwrap();
        assert!(err < 1e-3, "max relative error {err}");
    }
}
