//! Seed derivation and labelled random sub-streams.
//!
//! Every random quantity in the toolkit is drawn from a ChaCha8 stream keyed by
//! a 64-bit seed and selected by a fixed stream label. ChaCha is counter based,
//! so two labels never share output and the draws of one label do not depend on
//! how many values another label consumed.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

/// Stream labels. Values are part of the reproducibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    JumpTimes = 1,
    JumpSizes = 2,
    Gaussian = 3,
    SchemeComponent1 = 11,
    SchemeComponent2 = 12,
}

/// Purpose labels used when deriving per-replication seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Scheme,
    Path,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            // ASCII "scheme\0\0" and "path\0\0\0\0"
            Purpose::Scheme => 0x7363_6865_6d65_0000,
            Purpose::Path => 0x7061_7468_0000_0000,
        }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Labelled hash of `(base_seed, n, replication, purpose)`.
pub fn derive_seed(base_seed: u64, n: u64, replication: u64, purpose: Purpose) -> u64 {
    let mut h = splitmix64(base_seed);
    for word in [n, replication, purpose.tag()] {
        h = splitmix64(h ^ word);
    }
    h
}

/// Generator for one labelled sub-stream of `seed`.
pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut z = seed;
    for chunk in key.chunks_exact_mut(8) {
        z = splitmix64(z);
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream as u64);
    rng
}
