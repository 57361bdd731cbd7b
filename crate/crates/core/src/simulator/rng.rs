//! Counter-keyed randomness: every vertex of every replica owns one ChaCha
//! block addressed by `(seed, replica, vertex id)`, so samples do not depend
//! on traversal order, boundary treatment or scheduling.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 32-bit words in one ChaCha block.
const WORDS_PER_VERTEX: u128 = 16;

/// Raw uniforms attached to one vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct VertexDraws {
    /// Compared with `p` for the initial state.
    pub initial: f64,
    /// Unit exponential driving self-infection.
    pub self_infection: f64,
    /// Uniform mapped through the recovery tail.
    pub recovery: f64,
    /// Unit exponential driving transmission to the parent.
    pub transmission: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct ReplicaRng {
    rng: ChaCha8Rng,
}

/// Uniform on `[0, 1)` with 53 random bits.
fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Unit exponential by inversion; finite because `unit < 1`.
fn exponential(x: u64) -> f64 {
    -(-unit(x)).ln_1p()
}

impl ReplicaRng {
    pub(crate) fn new(seed: u64, replica: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replica);
        ReplicaRng { rng }
    }

    pub(crate) fn vertex(&mut self, id: u64) -> VertexDraws {
        self.rng.set_word_pos(id as u128 * WORDS_PER_VERTEX);
        let r = &mut self.rng;
        VertexDraws {
            initial: unit(r.next_u64()),
            self_infection: exponential(r.next_u64()),
            recovery: unit(r.next_u64()),
            transmission: exponential(r.next_u64()),
        }
    }
}
