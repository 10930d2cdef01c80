//! Seeded fading draws from a [`CdfTable`].
//!
//! Generator: ChaCha20 (`rand_chacha::ChaCha20Rng`). The key comes from
//! `SeedableRng::seed_from_u64(seed)`, the ChaCha stream number is the
//! `stream_id`, and every draw consumes exactly one `u64` (two 32-bit
//! keystream words). The uniform variate is `(x >> 11) * 2^-53`, in [0, 1).
//! These choices fix the sequence for a given `(seed, stream_id)`, and the
//! keystream position makes it possible to resume after any number of draws.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::fading::CdfTable;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    draws: u64,
    rng: ChaCha20Rng,
}

impl PartialEq for RngStream {
    fn eq(&self, other: &Self) -> bool {
        self.position() == other.position()
    }
}

/// A fresh stream for `(seed, stream_id)`.
pub fn make_stream(seed: u64, stream_id: u64) -> RngStream {
    RngStream::resume(seed, stream_id, 0)
}

impl RngStream {
    /// Stream positioned after `draws` draws.
    pub fn resume(seed: u64, stream_id: u64, draws: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        rng.set_word_pos(u128::from(draws) * 2);
        Self {
            seed,
            stream_id,
            draws,
            rng,
        }
    }

    /// `(seed, stream_id, draws so far)`; feed back into [`RngStream::resume`].
    pub fn position(&self) -> (u64, u64, u64) {
        (self.seed, self.stream_id, self.draws)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.rng.next_u64()
    }

    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// One inverse-transform draw from `table`.
pub fn sample_fading(table: &CdfTable, rng: &mut RngStream) -> f64 {
    table.invert(rng.next_uniform())
}
