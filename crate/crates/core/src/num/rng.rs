//! Counter-based, splittable random streams.
//!
//! An [`RngStream`] is an immutable `(seed, stream_id)` descriptor. Every
//! descriptor keys its own ChaCha8 keystream, and each keystream is further
//! split into independent lanes, so the draws a replication consumes never
//! depend on which thread produced them or on what other streams did.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for inside one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Train = 1,
    Eval = 2,
    Folds = 3,
    Population = 4,
    Matrices = 5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

const KEY_TAG: &[u8; 16] = b"qrisk.rngstream\0";

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Stream for `(seed, replication, purpose)`; distinct triples never collide.
    pub fn replication(seed: u64, rep: u64, purpose: Purpose) -> Self {
        assert!(rep < (1 << 56), "replication index out of range");
        Self::new(seed, (rep << 8) | purpose as u64)
    }

    /// Lane 0 of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        self.lane(0)
    }

    /// An independent sub-sequence of this stream.
    pub fn lane(&self, lane: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream_id.to_le_bytes());
        key[16..].copy_from_slice(KEY_TAG);
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(lane);
        rng
    }
}
