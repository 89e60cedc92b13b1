//! Reproducible random streams.
//!
//! Every agent of every trial draws from its own ChaCha8 stream. The key is
//! derived from the experiment seed and the agent role, the stream number is
//! the trial id, so no two agents ever share generator state and the draws of
//! a trial do not depend on which worker executes it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The party a random stream belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Pitcher,
    BatterL,
    BatterR,
    Coordinator,
    /// Pitch-time schedule shared by all parties before the run.
    Schedule,
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::Pitcher => 0x5049_5443,
            Role::BatterL => 0x4241_544c,
            Role::BatterR => 0x4241_5452,
            Role::Coordinator => 0x434f_4f52,
            Role::Schedule => 0x5343_4845,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed recorded in trial records: hash(experiment_seed, trial_id).
pub fn trial_seed(experiment_seed: u64, trial_id: u64) -> u64 {
    mix64(mix64(experiment_seed) ^ trial_id.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Handle to one independent random stream.
#[derive(Clone, Debug)]
pub struct RandomStream(ChaCha8Rng);

impl RandomStream {
    pub fn from_seed_u64(seed: u64) -> Self {
        RandomStream(ChaCha8Rng::seed_from_u64(seed))
    }

    /// The stream owned by `role` during trial `trial_id`.
    pub fn for_agent(experiment_seed: u64, trial_id: u64, role: Role) -> Self {
        let mut key = [0u8; 32];
        let mut state = mix64(experiment_seed ^ role.tag());
        for chunk in key.chunks_exact_mut(8) {
            state = mix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(trial_id);
        RandomStream(rng)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
}
