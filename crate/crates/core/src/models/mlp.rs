use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamSet, Tape, Tensor, Var};

/// Hidden layer widths of the classifier head, in order.
pub const HIDDEN_WIDTHS: [usize; 5] = [512, 256, 128, 50, 10];
const CLASSES: usize = 2;

/// Five ReLU hidden layers plus a 2-way softmax classification layer, with
/// dropout between consecutive hidden layers during training.
#[derive(Debug, Clone)]
pub struct MlpParams {
    /// (weight, bias) per layer; the last entry is the classification layer.
    pub layers: Vec<(ParamId, ParamId)>,
    pub input_dim: usize,
    pub dropout_p: f32,
}

impl MlpParams {
    pub fn init(
        ps: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        dropout_p: f32,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout_p) {
            return Err(Error::Config(format!(
                "dropout probability must be in [0, 1), got {dropout_p}"
            )));
        }
        let mut layers = Vec::with_capacity(HIDDEN_WIDTHS.len() + 1);
        let mut fan_in = input_dim;
        for (i, &width) in HIDDEN_WIDTHS.iter().chain(std::iter::once(&CLASSES)).enumerate() {
            let limit = (6.0 / (fan_in + width) as f32).sqrt();
            let data = (0..fan_in * width)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            let w = ps.add(
                format!("{prefix}.{i}.w"),
                Tensor::matrix(fan_in, width, data)?.with_requires_grad(),
            )?;
            let b = ps.add(
                format!("{prefix}.{i}.b"),
                Tensor::zeros(&[1, width])?.with_requires_grad(),
            )?;
            layers.push((w, b));
            fan_in = width;
        }
        Ok(MlpParams {
            layers,
            input_dim,
            dropout_p,
        })
    }

    pub fn from_names(ps: &ParamSet, prefix: &str, dropout_p: f32) -> Result<Self> {
        let mut layers = Vec::new();
        for i in 0..=HIDDEN_WIDTHS.len() {
            let w = ps
                .id_by_name(&format!("{prefix}.{i}.w"))
                .ok_or_else(|| Error::ModelIntegrity(format!("missing parameter {prefix}.{i}.w")))?;
            let b = ps
                .id_by_name(&format!("{prefix}.{i}.b"))
                .ok_or_else(|| Error::ModelIntegrity(format!("missing parameter {prefix}.{i}.b")))?;
            layers.push((w, b));
        }
        let input_dim = ps.get(layers[0].0).dims2()?.0;
        Ok(MlpParams {
            layers,
            input_dim,
            dropout_p,
        })
    }
}

/// Forward pass to class probabilities. When `dropout` carries a generator,
/// inverted-dropout masks are drawn between consecutive hidden layers;
/// without one the pass is deterministic.
pub fn mlp_forward(
    tape: &mut Tape,
    ps: &ParamSet,
    mlp: &MlpParams,
    input: Var,
    dropout: Option<&mut ChaCha8Rng>,
) -> Result<Var> {
    let (_, width) = tape.value(input).dims2()?;
    if width != mlp.input_dim {
        return Err(Error::Config(format!(
            "classifier expects input width {}, got {width}",
            mlp.input_dim
        )));
    }
    let mut rng = dropout;
    let mut h = input;
    let hidden_count = mlp.layers.len() - 1;
    for (i, &(w, b)) in mlp.layers[..hidden_count].iter().enumerate() {
        let wv = tape.param(ps, w);
        let bv = tape.param(ps, b);
        let lin = tape.matmul(h, wv)?;
        let lin = tape.add(lin, bv)?;
        h = tape.relu(lin)?;
        // Dropout sits between hidden layers, not after the last one.
        if i + 1 < hidden_count {
            if let Some(r) = rng.as_deref_mut() {
                if mlp.dropout_p > 0.0 {
                    let keep = 1.0 - mlp.dropout_p;
                    let n = tape.value(h).numel();
                    let mask: Vec<f32> = (0..n)
                        .map(|_| {
                            if r.random::<f32>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let mask = tape.leaf(Tensor::row(mask)?);
                    h = tape.mul(h, mask)?;
                }
            }
        }
    }
    let (w, b) = mlp.layers[hidden_count];
    let wv = tape.param(ps, w);
    let bv = tape.param(ps, b);
    let logits = tape.matmul(h, wv)?;
    let logits = tape.add(logits, bv)?;
    tape.softmax(logits)
}
