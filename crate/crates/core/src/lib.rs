//! Few-shot action classification with prototype-centred attentive learning.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numeric piece of
//! the pipeline: a small dense matrix type with hand-written reverse passes,
//! episode sampling and synthetic benchmarks, the stage-1 embedding head and
//! cosine classifier, hybrid support/query attention, the query-centred and
//! prototype-centred objectives, and the two-stage trainer.
//!
//! File formats, checkpoints, threading and the command line live in the
//! `pal` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod attention;
pub mod data;
pub mod embed;
mod error;
pub mod numcore;
pub mod objective;
pub mod pipeline;
pub mod trainer;

pub use error::{Error, Result};
pub use numcore::{Gradients, Matrix, ParamId};

/// Deterministic random source used by every sampler in the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build the crate's random source from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded with `seed`.
///
/// Evaluation uses one stream per episode index so that any partition of the
/// episodes over workers reproduces the sequential result.
pub fn rng_stream(seed: u64, stream: u64) -> Rng {
    let mut rng = rng_from_seed(seed);
    rng.set_stream(stream);
    rng
}
