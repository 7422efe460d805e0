//! Model assembly, training, prediction, and serialization for the two
//! classifiers.

mod mlp;
mod model1;
mod model2;
mod serialize;
mod train;

pub use mlp::{mlp_forward, MlpParams, HIDDEN_WIDTHS};
pub use model1::{EncoderStack, Model1, Model1Output};
pub use model2::{MergeKind, Model2};
pub use serialize::{load_model, save_model, FORMAT_VERSION};
pub use train::{evaluate, train, EpochStats, EvalResult, PredRecord, TrainHistory};

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, NewsExample};
use crate::error::Result;
use crate::numerics::{ParamSet, Tape, Var};
use rand_chacha::ChaCha8Rng;

/// Which classifier an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Model1,
    Model2,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Model1 => "model1",
            ModelKind::Model2 => "model2",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "model1" => Some(ModelKind::Model1),
            "model2" => Some(ModelKind::Model2),
            _ => None,
        }
    }
}

/// Architecture knobs of Model 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDims {
    pub embedding_dim: usize,
    /// GRU state width per direction.
    pub hidden_dim: usize,
    pub attn_dim: usize,
    /// One encoder parameter set for both fields instead of separate ones.
    pub share_encoders: bool,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            embedding_dim: crate::embeddings::DEFAULT_DIM,
            hidden_dim: 100,
            attn_dim: 100,
            share_encoders: false,
        }
    }
}

/// Training-loop settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub max_epochs: usize,
    /// Early-stop patience in epochs without validation improvement.
    pub patience: usize,
    pub topic_cap: usize,
    pub body_cap: usize,
    pub dropout_enabled: bool,
    /// Stop as soon as validation accuracy reaches this value.
    pub stop_at_val_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 1,
            batch_size: 16,
            learning_rate: 1e-3,
            max_epochs: 50,
            patience: 5,
            topic_cap: 64,
            body_cap: 512,
            dropout_enabled: true,
            stop_at_val_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || self.max_epochs == 0
            || self.patience == 0
            || self.topic_cap == 0
            || self.body_cap == 0
        {
            return Err(crate::Error::Config(
                "batch size, epochs, patience and caps must be positive".into(),
            ));
        }
        if self.learning_rate <= 0.0 {
            return Err(crate::Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Classifier output for one example: a distribution over {fake, legit},
/// the argmax label (ties predict fake), and attention traces when the
/// model has them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    /// `[p_fake, p_legit]`, nonnegative, summing to 1.
    pub probs: [f32; 2],
    pub label: Label,
    /// (truncated tokens, aligned weights) for the topic field.
    pub topic_attention: Option<(Vec<String>, Vec<f32>)>,
    pub body_attention: Option<(Vec<String>, Vec<f32>)>,
}

impl Prediction {
    pub(crate) fn label_from_probs(probs: [f32; 2]) -> Label {
        // Tie at 0.5 predicts fake.
        if probs[Label::Fake.class_index()] >= probs[Label::Legit.class_index()] {
            Label::Fake
        } else {
            Label::Legit
        }
    }

    /// Probability assigned to the predicted label.
    pub fn confidence(&self) -> f32 {
        self.probs[self.label.class_index()]
    }
}

/// Common training/evaluation surface of the two models.
pub trait Classifier: Sync {
    fn kind(&self) -> ModelKind;
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    /// Tape-recorded cross-entropy loss of one example. `dropout` carries
    /// the seeded generator during training forwards and is `None` for
    /// deterministic inference.
    fn example_loss(
        &self,
        tape: &mut Tape,
        example: &NewsExample,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Var>;
    fn predict(&self, example: &NewsExample) -> Result<Prediction>;
}

/// Either trained classifier, as stored in model files.
pub enum Model {
    One(Model1),
    Two(Model2),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::One(_) => ModelKind::Model1,
            Model::Two(_) => ModelKind::Model2,
        }
    }

    pub fn predict(&self, example: &NewsExample) -> Result<Prediction> {
        match self {
            Model::One(m) => m.predict(example),
            Model::Two(m) => m.predict(example),
        }
    }

    pub fn as_classifier(&self) -> &dyn Classifier {
        match self {
            Model::One(m) => m,
            Model::Two(m) => m,
        }
    }
}

/// Cross-entropy of the gold class under the predicted distribution.
pub(crate) fn cross_entropy_loss(tape: &mut Tape, probs: Var, gold: Label) -> Result<Var> {
    let mut onehot = vec![0.0f32; 2];
    onehot[gold.class_index()] = 1.0;
    let target = tape.leaf(crate::numerics::Tensor::matrix(2, 1, onehot)?);
    let picked = tape.matmul(probs, target)?;
    let log_p = tape.ln(picked)?;
    tape.scale(log_p, -1.0)
}
