use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, seeds, ParamSet, Tape, Var};

/// Central-difference step. Differences are evaluated by replaying the
/// recorded tape in double precision, so this step is well inside the
/// accurate range.
pub const FD_STEP: f64 = 1e-4;

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-6 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compares reverse-mode gradients against central finite differences.
///
/// `forward` must be deterministic for fixed inputs (dropout disabled); it
/// is run twice and a mismatch is reported as an error. For every trainable
/// parameter bound by the forward pass, up to `probes_per_param` coordinates
/// are sampled and perturbed by ±[`FD_STEP`] in an f64 replay of the tape.
/// Returns the worst relative error observed.
pub fn grad_check<F>(ps: &ParamSet, probes_per_param: usize, seed: u64, forward: F) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamSet) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = forward(&mut tape, ps)?;
    if tape.value(loss).numel() != 1 {
        return Err(Error::Usage("grad_check needs a scalar loss".into()));
    }

    let mut second = Tape::new();
    let loss2 = forward(&mut second, ps)?;
    if second.data(loss2)[0].to_bits() != tape.data(loss)[0].to_bits() {
        return Err(Error::Nondeterministic(format!(
            "two forward evaluations differ: {} vs {}",
            tape.data(loss)[0],
            second.data(loss2)[0]
        )));
    }

    tape.backward(loss)?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[seeds::PROBE]));
    let mut worst = 0.0f64;
    for id in ps.ids() {
        if !ps.get(id).requires_grad() {
            continue;
        }
        let Some(var) = tape.param_var(id) else {
            continue;
        };
        let n = ps.get(id).numel();
        let analytic: Vec<f32> = match tape.grad(var) {
            Some(g) => g.to_vec(),
            None => vec![0.0; n],
        };
        let probes = probes_per_param.min(n);
        for _ in 0..probes {
            let coord = rng.random_range(0..n);
            let base = tape.value(var).data()[coord] as f64;
            let up = tape.replay_f64(loss, &[(var, coord, base + FD_STEP)]);
            let down = tape.replay_f64(loss, &[(var, coord, base - FD_STEP)]);
            let fd = (up - down) / (2.0 * FD_STEP);
            let err = relative_error(analytic[coord] as f64, fd);
            if err > worst {
                worst = err;
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;
    use rand_distr::{Distribution, Normal};

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
        let dist = Normal::new(0.0, 0.5).unwrap();
        let data = (0..rows * cols)
            .map(|_| dist.sample(rng) as f32)
            .collect();
        Tensor::matrix(rows, cols, data).unwrap().with_requires_grad()
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ps = ParamSet::new();
        let a = ps.add("a", random_matrix(&mut rng, 3, 4)).unwrap();
        let b = ps.add("b", random_matrix(&mut rng, 4, 2)).unwrap();
        let err = grad_check(&ps, 8, 0, |tape, ps| {
            let av = tape.param(ps, a);
            let bv = tape.param(ps, b);
            let c = tape.matmul(av, bv)?;
            let s = tape.sigmoid(c)?;
            tape.sum(s)
        })
        .unwrap();
        assert!(err < 1e-3, "max relative error {err}");
    }

    #[test]
    fn linear_layer_is_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ps = ParamSet::new();
        let w = ps.add("w", random_matrix(&mut rng, 4, 3)).unwrap();
        let bias = ps.add("b", random_matrix(&mut rng, 1, 3)).unwrap();
        let x = Tensor::row(vec![0.3, -0.8, 1.1, 0.25]).unwrap();
        let err = grad_check(&ps, 12, 1, move |tape, ps| {
            let xv = tape.leaf(x.clone());
            let wv = tape.param(ps, w);
            let bv = tape.param(ps, bias);
            let y = tape.matmul(xv, wv)?;
            let y = tape.add(y, bv)?;
            let y = tape.tanh(y)?;
            tape.sum(y)
        })
        .unwrap();
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn detects_nondeterministic_forward() {
        use std::sync::atomic::{AtomicU32, Ordering};
        let counter = AtomicU32::new(0);
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::scalar(1.0).with_requires_grad())
            .unwrap();
        let err = grad_check(&ps, 1, 0, |tape, _| {
            let shift = counter.fetch_add(1, Ordering::SeqCst) as f32;
            let x = tape.leaf(Tensor::scalar(shift));
            tape.sum(x)
        })
        .unwrap_err();
        assert!(matches!(err, Error::Nondeterministic(_)));
    }
}
