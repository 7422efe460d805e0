//! Dense tensor arithmetic with reverse-mode automatic differentiation,
//! the Adam optimizer, and a finite-difference gradient checker.
//!
//! All forward computation in the crate goes through a [`Tape`]: values are
//! appended as nodes, operator applications are recorded, and
//! [`Tape::backward`] replays the record in exact reverse order to fill the
//! gradient slots. Learnable parameters live outside the tape in a
//! [`ParamSet`] and are bound to tape leaves once per forward pass, so a
//! parameter used twice accumulates both contributions.
//!
//! Training and inference run in single precision. The gradient checker
//! replays recorded tapes in double precision, because central differences
//! are noise-dominated in `f32`.

mod adam;
mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use gradcheck::{grad_check, FD_STEP};
pub use params::{ParamId, ParamSet};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

/// Splitmix64-style stream derivation so every consumer of randomness gets
/// an independent, reproducible seed from (base seed, purpose, indices).
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut z = base.wrapping_add(0x9e3779b97f4a7c15);
    for &t in tags {
        z ^= t.wrapping_mul(0xbf58476d1ce4e5b9).rotate_left(31);
        z = z.wrapping_add(0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
    }
    z
}

/// Short tag constants for seed derivation, kept in one place so the
/// mapping from purpose to stream is stable.
pub mod seeds {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const DROPOUT: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const BUCKET: u64 = 5;
    pub const PROBE: u64 = 6;
}
