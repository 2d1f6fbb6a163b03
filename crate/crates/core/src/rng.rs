//! Seed derivation for independent, order-insensitive random streams.
//!
//! Every stream is a ChaCha8 generator whose seed is a SplitMix64 hash of a
//! path of integers, e.g. `(master_seed, run, group, ENGINE)`. Two different
//! paths give unrelated streams, and a stream never depends on the order in
//! which other streams were created, so batches can be evaluated in any order
//! (or in parallel) without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stochastic draw in the crate.
pub type SimRng = ChaCha8Rng;

/// Stream tag for the engine (spreading, alerts, outbreak).
pub const ENGINE: u64 = 0x454e_4749_4e45;
/// Stream tag for endowment sampling.
pub const ENDOWMENTS: u64 = 0x454e_444f_5753;
/// Stream tag for per-agent policy draws.
pub const POLICY: u64 = 0x504f_4c49_4359;
/// Stream tag for the end-of-game coin flips.
pub const TERMINATION: u64 = 0x5445_524d;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A position in the stream tree. Cheap to copy and extend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn root(seed: u64) -> Self {
        StreamKey(splitmix64(seed))
    }

    /// Child stream identified by `id`.
    pub fn child(self, id: u64) -> Self {
        StreamKey(splitmix64(
            self.0 ^ splitmix64(id.wrapping_add(0x6a09_e667_f3bc_c909)),
        ))
    }

    pub fn rng(self) -> SimRng {
        let mut seed = [0u8; 32];
        let mut state = self.0;
        for chunk in seed.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        SimRng::from_seed(seed)
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

/// Key of the stream owned by one group of one run.
pub fn group_key(master_seed: u64, run_id: u64, group_id: u64) -> StreamKey {
    StreamKey::root(master_seed).child(run_id).child(group_id)
}
