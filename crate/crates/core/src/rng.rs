//! Counter-style random streams.
//!
//! Every unit of parallel work (a circuit, a shot, a pool slot, a theory
//! sample) owns a ChaCha8 stream keyed by the global seed and selected by a
//! hash of its coordinates. Results therefore do not depend on scheduling or
//! on the number of workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags that keep the streams of different subsystems disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    InstanceGates = 1,
    Shot = 2,
    PoolSlot = 3,
    TheorySample = 4,
    CircuitSeed = 5,
    Test = 99,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed and a list of coordinates into one 64-bit value.
pub fn derive_seed(seed: u64, purpose: Purpose, coords: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ splitmix64(purpose as u64));
    for &c in coords {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

/// Independent stream for the given coordinates.
pub fn stream(seed: u64, purpose: Purpose, coords: &[u64]) -> StreamRng {
    let mut key = [0u8; 32];
    let mut s = seed;
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(derive_seed(seed, purpose, coords));
    rng
}
