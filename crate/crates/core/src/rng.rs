//! Reproducible random streams.
//!
//! Every random quantity in the crate is drawn from a [`ChaCha8Rng`] keyed by
//! a 64-bit seed and positioned on a 64-bit stream id. The stream id is the
//! bitwise OR of a purpose tag (top byte) and an index (low 56 bits), so the
//! rule is `stream(seed, tag | index)`: the key comes from the seed, the
//! ChaCha stream selects the substream. Work can therefore be split across
//! any number of workers without changing a single drawn bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose tags occupying the top byte of a stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamTag {
    /// Spike vector of a planted sample.
    Spike = 1,
    /// One matrix column (index = column).
    Column = 2,
    /// Derivation of per-trial seeds (index = trial).
    Trial = 3,
    /// Blocks of Monte-Carlo replicas (index = block).
    Replica = 4,
    /// Sampled enumeration policy (index = block).
    Subset = 5,
    /// Probe vectors used by verification code.
    Probe = 6,
    /// Anything else a caller needs (index chosen by the caller).
    Aux = 7,
}

const INDEX_BITS: u32 = 56;
const INDEX_MASK: u64 = (1 << INDEX_BITS) - 1;

pub fn stream_id(tag: StreamTag, index: u64) -> u64 {
    debug_assert!(index <= INDEX_MASK, "stream index overflows 56 bits");
    ((tag as u64) << INDEX_BITS) | (index & INDEX_MASK)
}

/// Generator for substream `(tag, index)` of `seed`.
pub fn stream(seed: u64, tag: StreamTag, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tag, index));
    rng
}

/// Seed for trial `t` of an experiment run under `master`.
pub fn derive_seed(master: u64, tag: StreamTag, index: u64) -> u64 {
    stream(master, tag, index).next_u64()
}
