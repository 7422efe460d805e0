//! Bidirectional GRU word encoder and word-level attention pooling: a token
//! vector sequence becomes one sentence vector plus the attention weights
//! used to build it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamSet, Tape, Tensor, Var};

/// Gate and candidate weights of one GRU direction. No bias terms; the
/// update is
///
/// ```text
/// z = sigmoid(x U_z + s W_z)
/// r = sigmoid(x U_r + s W_r)
/// h = tanh(x U_h + r * (s W_h))
/// s' = (1 - z) * h + z * s
/// ```
///
/// with a candidate-state weight `W_h` distinct from the reset gate's `W_r`;
/// reusing `W_r` for the candidate would silently tie the two roles
/// together (covered by a test).
#[derive(Debug, Clone)]
pub struct GruCellParams {
    pub u_z: ParamId,
    pub u_r: ParamId,
    pub u_h: ParamId,
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f32).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Tensor::matrix(rows, cols, data)
        .expect("positive dims")
        .with_requires_grad()
}

impl GruCellParams {
    pub fn init(
        ps: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Ok(GruCellParams {
            u_z: ps.add(format!("{prefix}.u_z"), glorot(rng, input_dim, hidden_dim))?,
            u_r: ps.add(format!("{prefix}.u_r"), glorot(rng, input_dim, hidden_dim))?,
            u_h: ps.add(format!("{prefix}.u_h"), glorot(rng, input_dim, hidden_dim))?,
            w_z: ps.add(format!("{prefix}.w_z"), glorot(rng, hidden_dim, hidden_dim))?,
            w_r: ps.add(format!("{prefix}.w_r"), glorot(rng, hidden_dim, hidden_dim))?,
            w_h: ps.add(format!("{prefix}.w_h"), glorot(rng, hidden_dim, hidden_dim))?,
            input_dim,
            hidden_dim,
        })
    }

    /// Rebuilds the handle from parameter names (used when loading models).
    pub fn from_names(ps: &ParamSet, prefix: &str) -> Result<Self> {
        let lookup = |suffix: &str| {
            ps.id_by_name(&format!("{prefix}.{suffix}")).ok_or_else(|| {
                Error::ModelIntegrity(format!("missing parameter {prefix}.{suffix}"))
            })
        };
        let u_z = lookup("u_z")?;
        let (input_dim, hidden_dim) = ps.get(u_z).dims2()?;
        Ok(GruCellParams {
            u_z,
            u_r: lookup("u_r")?,
            u_h: lookup("u_h")?,
            w_z: lookup("w_z")?,
            w_r: lookup("w_r")?,
            w_h: lookup("w_h")?,
            input_dim,
            hidden_dim,
        })
    }
}

/// Intermediate values of one GRU step.
#[derive(Debug, Clone, Copy)]
pub struct GruStep {
    /// Update gate, elementwise in (0, 1).
    pub update: Var,
    /// Reset gate, elementwise in (0, 1).
    pub reset: Var,
    /// Candidate state, elementwise in (-1, 1).
    pub candidate: Var,
    /// New state: per-coordinate convex combination of candidate and
    /// previous state, weighted by the update gate.
    pub state: Var,
}

fn named_matmul(tape: &mut Tape, x: Var, w: Var, name: &str) -> Result<Var> {
    tape.matmul(x, w)
        .map_err(|e| Error::Shape(format!("{name}: {e}")))
}

/// One GRU step over `x_t` of shape `[1, d_in]` and `s_prev` of shape
/// `[1, d_h]`.
pub fn gru_step(
    tape: &mut Tape,
    ps: &ParamSet,
    cell: &GruCellParams,
    x: Var,
    s_prev: Var,
) -> Result<GruStep> {
    let u_z = tape.param(ps, cell.u_z);
    let u_r = tape.param(ps, cell.u_r);
    let u_h = tape.param(ps, cell.u_h);
    let w_z = tape.param(ps, cell.w_z);
    let w_r = tape.param(ps, cell.w_r);
    let w_h = tape.param(ps, cell.w_h);

    let xu_z = named_matmul(tape, x, u_z, "U_z")?;
    let sw_z = named_matmul(tape, s_prev, w_z, "W_z")?;
    let z_pre = tape.add(xu_z, sw_z)?;
    let z = tape.sigmoid(z_pre)?;

    let xu_r = named_matmul(tape, x, u_r, "U_r")?;
    let sw_r = named_matmul(tape, s_prev, w_r, "W_r")?;
    let r_pre = tape.add(xu_r, sw_r)?;
    let r = tape.sigmoid(r_pre)?;

    let xu_h = named_matmul(tape, x, u_h, "U_h")?;
    let sw_h = named_matmul(tape, s_prev, w_h, "W_h")?;
    let gated = tape.mul(r, sw_h)?;
    let h_pre = tape.add(xu_h, gated)?;
    let h = tape.tanh(h_pre)?;

    let one_minus_z = tape.one_minus(z)?;
    let keep_new = tape.mul(one_minus_z, h)?;
    let keep_old = tape.mul(z, s_prev)?;
    let state = tape.add(keep_new, keep_old)?;

    Ok(GruStep {
        update: z,
        reset: r,
        candidate: h,
        state,
    })
}

/// Runs forward and backward GRUs from zero initial states and returns the
/// annotation matrix `[L, 2 d_h]`: row t is the forward state after reading
/// tokens 1..=t concatenated with the backward state after reading L..=t.
pub fn bigru_encode(
    tape: &mut Tape,
    ps: &ParamSet,
    fwd: &GruCellParams,
    bwd: &GruCellParams,
    xs: &[Var],
) -> Result<Var> {
    if xs.is_empty() {
        return Err(Error::Usage("bigru_encode needs at least one token".into()));
    }
    let d_h = fwd.hidden_dim;

    let mut forward_states = Vec::with_capacity(xs.len());
    let mut state = tape.leaf(Tensor::zeros(&[1, d_h])?);
    for &x in xs {
        state = gru_step(tape, ps, fwd, x, state)?.state;
        forward_states.push(state);
    }

    let mut backward_states = vec![Var(0); xs.len()];
    let mut state = tape.leaf(Tensor::zeros(&[1, d_h])?);
    for (t, &x) in xs.iter().enumerate().rev() {
        state = gru_step(tape, ps, bwd, x, state)?.state;
        backward_states[t] = state;
    }

    let rows: Vec<Var> = forward_states
        .iter()
        .zip(&backward_states)
        .map(|(&f, &b)| tape.concat_cols(f, b))
        .collect::<Result<_>>()?;
    tape.stack_rows(&rows)
}

/// Projection, context vector, and bias of the word-level attention layer.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    /// Projection `[2 d_h, d_a]`.
    pub w: ParamId,
    /// Bias `[1, d_a]`.
    pub b: ParamId,
    /// Context vector `[d_a, 1]`, randomly initialized and jointly learned.
    pub u: ParamId,
    pub input_dim: usize,
    pub attn_dim: usize,
}

impl AttentionParams {
    pub fn init(
        ps: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        attn_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let normal = Normal::new(0.0, 0.1).unwrap();
        let u_data: Vec<f32> = (0..attn_dim).map(|_| normal.sample(rng) as f32).collect();
        Ok(AttentionParams {
            w: ps.add(format!("{prefix}.w"), glorot(rng, input_dim, attn_dim))?,
            b: ps.add(
                format!("{prefix}.b"),
                Tensor::zeros(&[1, attn_dim])?.with_requires_grad(),
            )?,
            u: ps.add(
                format!("{prefix}.u"),
                Tensor::matrix(attn_dim, 1, u_data)?.with_requires_grad(),
            )?,
            input_dim,
            attn_dim,
        })
    }

    pub fn from_names(ps: &ParamSet, prefix: &str) -> Result<Self> {
        let lookup = |suffix: &str| {
            ps.id_by_name(&format!("{prefix}.{suffix}")).ok_or_else(|| {
                Error::ModelIntegrity(format!("missing parameter {prefix}.{suffix}"))
            })
        };
        let w = lookup("w")?;
        let (input_dim, attn_dim) = ps.get(w).dims2()?;
        Ok(AttentionParams {
            w,
            b: lookup("b")?,
            u: lookup("u")?,
            input_dim,
            attn_dim,
        })
    }
}

/// Attention pooling result: the sentence vector, the weights that produced
/// it (kept for visualization), and the annotations they pooled.
#[derive(Debug, Clone, Copy)]
pub struct AttentionOutput {
    /// `[1, 2 d_h]` weighted sum of annotations.
    pub sentence: Var,
    /// `[L, 1]` nonnegative weights summing to 1.
    pub weights: Var,
    pub annotations: Var,
}

/// Scores every annotation row against the learned context vector and pools
/// rows by the softmax-normalized weights.
pub fn attention_pool(
    tape: &mut Tape,
    ps: &ParamSet,
    attn: &AttentionParams,
    annotations: Var,
) -> Result<AttentionOutput> {
    let (rows, _) = tape.value(annotations).dims2()?;
    if rows == 0 {
        return Err(Error::Usage("attention_pool needs at least one row".into()));
    }
    let w = tape.param(ps, attn.w);
    let b = tape.param(ps, attn.b);
    let u = tape.param(ps, attn.u);
    let proj = named_matmul(tape, annotations, w, "W_w")?;
    let proj = tape.add_row_broadcast(proj, b)?;
    let hidden = tape.tanh(proj)?;
    let scores = named_matmul(tape, hidden, u, "u_w")?;
    let weights = tape.softmax(scores)?;
    let weights_row = tape.reshape(weights, vec![1, rows])?;
    let sentence = tape.matmul(weights_row, annotations)?;
    Ok(AttentionOutput {
        sentence,
        weights,
        annotations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;
    use rand::SeedableRng;

    fn test_rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn zeroed(ps: &mut ParamSet) {
        for id in ps.ids().collect::<Vec<_>>() {
            ps.get_mut(id).data_mut().fill(0.0);
        }
    }

    #[test]
    fn zero_weights_halve_previous_state() {
        let mut ps = ParamSet::new();
        let cell = GruCellParams::init(&mut ps, "g", 3, 2, &mut test_rng(0)).unwrap();
        zeroed(&mut ps);
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::row(vec![0.4, -1.0, 2.0]).unwrap());
        let s_prev = tape.leaf(Tensor::row(vec![0.6, -0.2]).unwrap());
        let step = gru_step(&mut tape, &ps, &cell, x, s_prev).unwrap();
        assert_eq!(tape.data(step.update), &[0.5, 0.5]);
        assert_eq!(tape.data(step.reset), &[0.5, 0.5]);
        assert_eq!(tape.data(step.candidate), &[0.0, 0.0]);
        assert_eq!(tape.data(step.state), &[0.3, -0.1]);
    }

    #[test]
    fn zero_input_and_state_give_zero_state() {
        let mut ps = ParamSet::new();
        let cell = GruCellParams::init(&mut ps, "g", 3, 2, &mut test_rng(9)).unwrap();
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[1, 3]).unwrap());
        let s_prev = tape.leaf(Tensor::zeros(&[1, 2]).unwrap());
        let step = gru_step(&mut tape, &ps, &cell, x, s_prev).unwrap();
        assert_eq!(tape.data(step.state), &[0.0, 0.0]);
    }

    /// d_in = d_h = 2 with hand-chosen weights, against an independent
    /// scalar recomputation in f64.
    #[test]
    fn gru_step_matches_scalar_oracle() {
        let mut ps = ParamSet::new();
        let mat = |v: [f32; 4]| {
            Tensor::matrix(2, 2, v.to_vec())
                .unwrap()
                .with_requires_grad()
        };
        let u_z = [0.1, -0.2, 0.3, 0.4];
        let u_r = [-0.5, 0.2, 0.1, 0.0];
        let u_h = [0.25, 0.5, -0.3, 0.1];
        let w_z = [0.2, 0.1, -0.1, 0.3];
        let w_r = [0.0, -0.4, 0.2, 0.2];
        let w_h = [0.3, 0.3, -0.2, 0.5];
        let cell = GruCellParams {
            u_z: ps.add("g.u_z", mat(u_z)).unwrap(),
            u_r: ps.add("g.u_r", mat(u_r)).unwrap(),
            u_h: ps.add("g.u_h", mat(u_h)).unwrap(),
            w_z: ps.add("g.w_z", mat(w_z)).unwrap(),
            w_r: ps.add("g.w_r", mat(w_r)).unwrap(),
            w_h: ps.add("g.w_h", mat(w_h)).unwrap(),
            input_dim: 2,
            hidden_dim: 2,
        };
        let x = [0.7f64, -0.3];
        let s = [0.2f64, 0.5];

        // Scalar oracle.
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let dot2 =
            |a: &[f64; 2], m: &[f32; 4], j: usize| a[0] * m[j] as f64 + a[1] * m[2 + j] as f64;
        let mut expect = [0.0f64; 2];
        for (j, e) in expect.iter_mut().enumerate() {
            let z = sig(dot2(&x, &u_z, j) + dot2(&s, &w_z, j));
            let r = sig(dot2(&x, &u_r, j) + dot2(&s, &w_r, j));
            let h = (dot2(&x, &u_h, j) + r * dot2(&s, &w_h, j)).tanh();
            *e = (1.0 - z) * h + z * s[j];
        }

        let mut tape = Tape::new();
        let xv = tape.leaf(Tensor::row(x.iter().map(|&v| v as f32).collect()).unwrap());
        let sv = tape.leaf(Tensor::row(s.iter().map(|&v| v as f32).collect()).unwrap());
        let step = gru_step(&mut tape, &ps, &cell, xv, sv).unwrap();
        for j in 0..2 {
            assert!(
                (tape.data(step.state)[j] as f64 - expect[j]).abs() < 1e-6,
                "coordinate {j}: {} vs {expect:?}",
                tape.data(step.state)[j]
            );
        }
    }

    #[test]
    fn gate_bounds_and_state_interpolation() {
        let mut ps = ParamSet::new();
        let cell = GruCellParams::init(&mut ps, "g", 4, 3, &mut test_rng(31)).unwrap();
        let mut rng = test_rng(77);
        for _ in 0..200 {
            let x: Vec<f32> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s: Vec<f32> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut tape = Tape::new();
            let xv = tape.leaf(Tensor::row(x).unwrap());
            let sv = tape.leaf(Tensor::row(s.clone()).unwrap());
            let step = gru_step(&mut tape, &ps, &cell, xv, sv).unwrap();
            for j in 0..3 {
                let z = tape.data(step.update)[j];
                let r = tape.data(step.reset)[j];
                let h = tape.data(step.candidate)[j];
                let out = tape.data(step.state)[j];
                assert!(z > 0.0 && z < 1.0);
                assert!(r > 0.0 && r < 1.0);
                assert!(h > -1.0 && h < 1.0);
                let (lo, hi) = (h.min(s[j]), h.max(s[j]));
                assert!(out >= lo - 1e-6 && out <= hi + 1e-6);
            }
        }
    }

    #[test]
    fn bigru_single_token_is_two_steps_from_zero() {
        let mut ps = ParamSet::new();
        let fwd = GruCellParams::init(&mut ps, "f", 3, 2, &mut test_rng(1)).unwrap();
        let bwd = GruCellParams::init(&mut ps, "b", 3, 2, &mut test_rng(2)).unwrap();
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::row(vec![0.1, 0.2, -0.4]).unwrap());
        let ann = bigru_encode(&mut tape, &ps, &fwd, &bwd, &[x]).unwrap();
        assert_eq!(tape.value(ann).shape(), &[1, 4]);

        let zero = tape.leaf(Tensor::zeros(&[1, 2]).unwrap());
        let f = gru_step(&mut tape, &ps, &fwd, x, zero).unwrap();
        let b = gru_step(&mut tape, &ps, &bwd, x, zero).unwrap();
        let row = tape.data(ann).to_vec();
        assert_eq!(&row[..2], tape.data(f.state));
        assert_eq!(&row[2..], tape.data(b.state));
    }

    /// On a palindrome with shared direction parameters, the annotation
    /// matrix equals its own reversal with halves swapped.
    #[test]
    fn bigru_palindrome_symmetry() {
        let mut ps = ParamSet::new();
        let cell = GruCellParams::init(&mut ps, "g", 2, 2, &mut test_rng(5)).unwrap();
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::row(vec![0.3, -0.7]).unwrap());
        let b = tape.leaf(Tensor::row(vec![1.1, 0.4]).unwrap());
        let xs = [a, b, a];
        let ann = bigru_encode(&mut tape, &ps, &cell, &cell, &xs).unwrap();
        let data = tape.data(ann);
        let l = 3;
        let d = 2;
        for t in 0..l {
            let mirror = l - 1 - t;
            for j in 0..d {
                let fwd = data[t * 2 * d + j];
                let bwd_mirror = data[mirror * 2 * d + d + j];
                assert!(
                    (fwd - bwd_mirror).abs() < 1e-6,
                    "row {t} fwd[{j}] vs row {mirror} bwd[{j}]"
                );
            }
        }
    }

    /// L = 3, d = 2: composition must equal running gru_step six times.
    #[test]
    fn bigru_composition_oracle() {
        let mut ps = ParamSet::new();
        let fwd = GruCellParams::init(&mut ps, "f", 2, 2, &mut test_rng(41)).unwrap();
        let bwd = GruCellParams::init(&mut ps, "b", 2, 2, &mut test_rng(42)).unwrap();
        let inputs = [[0.2f32, -0.1], [0.8, 0.3], [-0.5, 0.9]];

        let mut tape = Tape::new();
        let xs: Vec<Var> = inputs
            .iter()
            .map(|v| tape.leaf(Tensor::row(v.to_vec()).unwrap()))
            .collect();
        let ann = bigru_encode(&mut tape, &ps, &fwd, &bwd, &xs).unwrap();

        // Manual composition.
        let mut state = tape.leaf(Tensor::zeros(&[1, 2]).unwrap());
        let mut fwd_states = Vec::new();
        for &x in &xs {
            state = gru_step(&mut tape, &ps, &fwd, x, state).unwrap().state;
            fwd_states.push(tape.data(state).to_vec());
        }
        let mut state = tape.leaf(Tensor::zeros(&[1, 2]).unwrap());
        let mut bwd_states = vec![Vec::new(); 3];
        for (t, &x) in xs.iter().enumerate().rev() {
            state = gru_step(&mut tape, &ps, &bwd, x, state).unwrap().state;
            bwd_states[t] = tape.data(state).to_vec();
        }
        for t in 0..3 {
            let row = &tape.data(ann)[t * 4..(t + 1) * 4];
            assert_eq!(&row[..2], fwd_states[t].as_slice());
            assert_eq!(&row[2..], bwd_states[t].as_slice());
        }
    }

    #[test]
    fn bigru_rejects_empty_sequence() {
        let mut ps = ParamSet::new();
        let cell = GruCellParams::init(&mut ps, "g", 2, 2, &mut test_rng(0)).unwrap();
        let mut tape = Tape::new();
        let err = bigru_encode(&mut tape, &ps, &cell, &cell, &[]).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn attention_single_row_passes_through() {
        let mut ps = ParamSet::new();
        let attn = AttentionParams::init(&mut ps, "a", 4, 3, &mut test_rng(8)).unwrap();
        let mut tape = Tape::new();
        let ann = tape.leaf(Tensor::matrix(1, 4, vec![0.4, -0.2, 1.0, 0.5]).unwrap());
        let out = attention_pool(&mut tape, &ps, &attn, ann).unwrap();
        assert_eq!(tape.data(out.weights), &[1.0]);
        assert_eq!(tape.data(out.sentence), tape.data(ann));
    }

    #[test]
    fn attention_identical_rows_pool_uniformly() {
        let mut ps = ParamSet::new();
        let attn = AttentionParams::init(&mut ps, "a", 3, 2, &mut test_rng(4)).unwrap();
        let mut tape = Tape::new();
        let row = vec![0.3f32, -0.9, 0.1];
        let data: Vec<f32> = row.iter().cycle().take(12).copied().collect();
        let ann = tape.leaf(Tensor::matrix(4, 3, data).unwrap());
        let out = attention_pool(&mut tape, &ps, &attn, ann).unwrap();
        for w in tape.data(out.weights) {
            assert!((w - 0.25).abs() < 1e-6);
        }
        for (s, r) in tape.data(out.sentence).iter().zip(&row) {
            assert!((s - r).abs() < 1e-6);
        }
    }

    /// L = 3, d_a = 2 hand case: weights and sentence vector against an
    /// independent scalar recomputation.
    #[test]
    fn attention_matches_scalar_oracle() {
        let mut ps = ParamSet::new();
        let w = [0.2f32, -0.1, 0.4, 0.3];
        let b = [0.05f32, -0.2];
        let u = [0.7f32, -0.5];
        let attn = AttentionParams {
            w: ps
                .add(
                    "a.w",
                    Tensor::matrix(2, 2, w.to_vec()).unwrap().with_requires_grad(),
                )
                .unwrap(),
            b: ps
                .add("a.b", Tensor::row(b.to_vec()).unwrap().with_requires_grad())
                .unwrap(),
            u: ps
                .add(
                    "a.u",
                    Tensor::matrix(2, 1, u.to_vec()).unwrap().with_requires_grad(),
                )
                .unwrap(),
            input_dim: 2,
            attn_dim: 2,
        };
        let rows = [[0.5f64, -0.3], [1.2, 0.8], [-0.9, 0.25]];

        // Scalar oracle in f64.
        let mut scores = [0.0f64; 3];
        for (t, row) in rows.iter().enumerate() {
            let mut hidden = [0.0f64; 2];
            for (j, h) in hidden.iter_mut().enumerate() {
                let pre = row[0] * w[j] as f64 + row[1] * w[2 + j] as f64 + b[j] as f64;
                *h = pre.tanh();
            }
            scores[t] = hidden[0] * u[0] as f64 + hidden[1] * u[1] as f64;
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let alpha: Vec<f64> = exps.iter().map(|e| e / total).collect();
        let mut sent = [0.0f64; 2];
        for (t, row) in rows.iter().enumerate() {
            sent[0] += alpha[t] * row[0];
            sent[1] += alpha[t] * row[1];
        }

        let mut tape = Tape::new();
        let data: Vec<f32> = rows.iter().flatten().map(|&v| v as f32).collect();
        let ann = tape.leaf(Tensor::matrix(3, 2, data).unwrap());
        let out = attention_pool(&mut tape, &ps, &attn, ann).unwrap();
        for t in 0..3 {
            assert!((tape.data(out.weights)[t] as f64 - alpha[t]).abs() < 1e-6);
        }
        for j in 0..2 {
            assert!((tape.data(out.sentence)[j] as f64 - sent[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn attention_weights_normalize_for_many_lengths() {
        let mut ps = ParamSet::new();
        let attn = AttentionParams::init(&mut ps, "a", 3, 4, &mut test_rng(66)).unwrap();
        let mut rng = test_rng(13);
        for l in 1..=64usize {
            let mut tape = Tape::new();
            let data: Vec<f32> = (0..l * 3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let ann = tape.leaf(Tensor::matrix(l, 3, data).unwrap());
            let out = attention_pool(&mut tape, &ps, &attn, ann).unwrap();
            let weights = tape.data(out.weights);
            assert!(weights.iter().all(|&w| w >= 0.0));
            let sum: f32 = weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "L={l} sum={sum}");
            // Pooled vector really is the weighted sum of the rows.
            for j in 0..3 {
                let manual: f32 = (0..l)
                    .map(|t| weights[t] * tape.data(ann)[t * 3 + j])
                    .sum();
                assert!((manual - tape.data(out.sentence)[j]).abs() < 1e-5);
            }
        }
    }

    /// Scaling the context vector changes the weights but never the argmax.
    #[test]
    fn context_scaling_keeps_argmax() {
        let mut ps = ParamSet::new();
        let attn = AttentionParams::init(&mut ps, "a", 3, 4, &mut test_rng(15)).unwrap();
        let mut rng = test_rng(99);
        let data: Vec<f32> = (0..5 * 3).map(|_| rng.random_range(-2.0..2.0)).collect();

        let argmax = |ps: &ParamSet| {
            let mut tape = Tape::new();
            let ann = tape.leaf(Tensor::matrix(5, 3, data.clone()).unwrap());
            let out = attention_pool(&mut tape, ps, &attn, ann).unwrap();
            let weights = tape.data(out.weights).to_vec();
            weights
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        let before = argmax(&ps);
        for scale in [0.5f32, 3.0, 10.0] {
            let mut scaled = ps.clone();
            let u = attn.u;
            for v in scaled.get_mut(u).data_mut() {
                *v *= scale;
            }
            assert_eq!(argmax(&scaled), before, "scale {scale}");
        }
    }

    #[test]
    fn gru_gradients_check_out() {
        let mut ps = ParamSet::new();
        let cell = GruCellParams::init(&mut ps, "g", 3, 2, &mut test_rng(21)).unwrap();
        let err = grad_check(&ps, 6, 3, |tape, ps| {
            let x = tape.leaf(Tensor::row(vec![0.5, -0.8, 0.2]).unwrap());
            let s = tape.leaf(Tensor::row(vec![0.3, -0.4]).unwrap());
            let step = gru_step(tape, ps, &cell, x, s)?;
            tape.sum(step.state)
        })
        .unwrap();
        assert!(err < 1e-3, "max relative error {err}");
    }

    #[test]
    fn attention_gradients_check_out() {
        let mut ps = ParamSet::new();
        let attn = AttentionParams::init(&mut ps, "a", 4, 3, &mut test_rng(22)).unwrap();
        let mut rng = test_rng(23);
        let data: Vec<f32> = (0..3 * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = grad_check(&ps, 6, 4, move |tape, ps| {
            let ann = tape.leaf(Tensor::matrix(3, 4, data.clone()).unwrap());
            let out = attention_pool(tape, ps, &attn, ann)?;
            tape.sum(out.sentence)
        })
        .unwrap();
        assert!(err < 1e-3, "max relative error {err}");
    }

    /// The candidate-state weight is its own matrix: zeroing W_h changes the
    /// output while W_r stays fixed, which would be impossible if the two
    /// were tied.
    #[test]
    fn candidate_weight_is_distinct_from_reset_weight() {
        let mut ps = ParamSet::new();
        let cell = GruCellParams::init(&mut ps, "g", 2, 2, &mut test_rng(55)).unwrap();
        let run = |ps: &ParamSet| {
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::row(vec![0.9, -0.4]).unwrap());
            let s = tape.leaf(Tensor::row(vec![0.5, 0.7]).unwrap());
            let step = gru_step(&mut tape, ps, &cell, x, s).unwrap();
            tape.data(step.state).to_vec()
        };
        let base = run(&ps);
        let mut zeroed_wh = ps.clone();
        zeroed_wh.get_mut(cell.w_h).data_mut().fill(0.0);
        assert_ne!(base, run(&zeroed_wh));
        assert_eq!(ps.get(cell.w_r).data(), zeroed_wh.get(cell.w_r).data());
    }
}
