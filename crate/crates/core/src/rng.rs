//! Counter-based Gaussian noise keyed by `(master_seed, replica, particle,
//! step)`.
//!
//! The ChaCha20 key holds `(master_seed, replica)`, the 64-bit stream id is
//! the particle slot, and the block counter is derived from the step index.
//! Any increment can be regenerated in isolation, so output never depends on
//! how particles or replicas are scheduled across workers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Recorded in run metadata next to every seed.
pub const RNG_ALGORITHM: &str =
    "chacha20/rand_chacha-0.9 key=(master_seed,replica) stream=particle block=step; box-muller normals";

const KEY_TAG: [u8; 16] = *b"meanfield-noise\0";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseKey {
    pub master_seed: u64,
    pub replica: u64,
}

impl NoiseKey {
    pub fn new(master_seed: u64, replica: u64) -> Self {
        NoiseKey {
            master_seed,
            replica,
        }
    }

    fn key_bytes(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replica.to_le_bytes());
        key[16..].copy_from_slice(&KEY_TAG);
        key
    }

    pub fn particle_stream(&self, particle: usize) -> ParticleStream {
        let mut rng = ChaCha20Rng::from_seed(self.key_bytes());
        rng.set_stream(particle as u64);
        ParticleStream { rng }
    }
}

/// Noise source for one particle slot.
pub struct ParticleStream {
    rng: ChaCha20Rng,
}

impl ParticleStream {
    /// Fills `out` with independent standard normals for `step`.
    pub fn standard_normals(&mut self, step: usize, out: &mut [f64]) {
        // 16 words per block, 4 words per Box-Muller pair.
        let blocks = out.len().div_ceil(8).max(1) as u128;
        self.rng.set_word_pos(step as u128 * blocks * 16);
        for pair in out.chunks_mut(2) {
            let u1 = open_unit(self.rng.next_u64());
            let u2 = open_unit(self.rng.next_u64());
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            pair[0] = r * c;
            if pair.len() > 1 {
                pair[1] = r * s;
            }
        }
    }
}

/// Uniform on the open interval (0, 1) from the top 53 bits.
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// General-purpose seeded generator for auxiliary randomness (probes,
/// projections, test ensembles). `purpose` separates independent uses of the
/// same seed.
pub fn seeded_rng(seed: u64, purpose: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}
