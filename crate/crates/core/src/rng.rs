//! Deterministic random stream derivation.
//!
//! Every random draw in a run comes from a ChaCha stream whose seed is a
//! stable mix of `(master_seed, seed_index, agent, role)`. The mix is a
//! SplitMix64 chain, so stream identity does not depend on thread
//! scheduling, iteration order, or the standard library's hasher.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for all simulation streams.
pub type SimRng = ChaCha8Rng;

/// What a stream is used for. Distinct roles never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Instance,
    Noise,
    Gossip,
    Actions,
    Trial,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::Instance => 0x1157_a1ce,
            StreamRole::Noise => 0x0b5e_4e01,
            StreamRole::Gossip => 0x6055_1b00,
            StreamRole::Actions => 0xac71_0a5e,
            StreamRole::Trial => 0x7e1a_1500,
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

/// Stable 64-bit seed for the given coordinates.
pub fn derive_seed(master_seed: u64, seed_index: u64, agent: u64, role: StreamRole) -> u64 {
    [seed_index, agent, role.tag()]
        .into_iter()
        .fold(splitmix64(master_seed), |acc, x| splitmix64(acc ^ splitmix64(x)))
}

/// Open the stream at the given coordinates.
pub fn stream(master_seed: u64, seed_index: u64, agent: u64, role: StreamRole) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master_seed, seed_index, agent, role))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derivation_is_stable_and_role_separated() {
        let a = derive_seed(7, 3, 1, StreamRole::Noise);
        assert_eq!(a, derive_seed(7, 3, 1, StreamRole::Noise));
        assert_ne!(a, derive_seed(7, 3, 1, StreamRole::Gossip));
        assert_ne!(a, derive_seed(7, 3, 2, StreamRole::Noise));
        assert_ne!(a, derive_seed(7, 4, 1, StreamRole::Noise));
        assert_ne!(a, derive_seed(8, 3, 1, StreamRole::Noise));
    }

    #[test]
    fn streams_replay() {
        let mut r1 = stream(1, 2, 3, StreamRole::Trial);
        let mut r2 = stream(1, 2, 3, StreamRole::Trial);
        for _ in 0..16 {
            assert_eq!(r1.next_u64(), r2.next_u64());
        }
    }
}
