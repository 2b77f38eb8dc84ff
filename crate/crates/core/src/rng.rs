use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::SeedSpec;

/// Independent random streams used per trial. The tag is folded into the
/// ChaCha key, so streams for different purposes never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub(crate) enum Purpose {
    Defectives = 1,
    Design = 2,
    Dilution = 3,
}

pub(crate) fn stream(seed: SeedSpec, purpose: Purpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(seed.stream_id);
    rng
}

/// Maps a raw 64-bit draw onto (0, 1]; 53 bits of resolution.
#[inline]
pub(crate) fn unit_open_closed(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Counter-addressed uniforms: the draw for a (row, col) pair is read at a
/// fixed word position, so it does not depend on which other entries were
/// sampled first.
pub(crate) struct AddressedUniforms {
    rng: ChaCha8Rng,
    cols: u128,
}

impl AddressedUniforms {
    pub(crate) fn new(seed: SeedSpec, purpose: Purpose, cols: usize) -> Self {
        Self { rng: stream(seed, purpose), cols: cols as u128 }
    }

    pub(crate) fn at(&mut self, row: usize, col: usize) -> f64 {
        let slot = row as u128 * self.cols + col as u128;
        self.rng.set_word_pos(2 * slot);
        unit_open_closed(self.rng.next_u64())
    }
}
