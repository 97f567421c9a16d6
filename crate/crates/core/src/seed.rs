//! Counter-based seed derivation.
//!
//! Every stochastic draw in a run is keyed by a path of indices below the
//! master seed, e.g. `(master, policy, segment, view)`. Two runs that visit the
//! same keys get the same streams no matter how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream domains, so that e.g. policy sampling and view generation at the
/// same index never share a stream.
pub mod domain {
    pub const POLICY: u64 = 0x706f_6c69;
    pub const VIEW: u64 = 0x7669_6577;
    pub const HIDDEN: u64 = 0x6869_6464;
    pub const TARGET: u64 = 0x7461_7267;
    pub const CANDIDATE: u64 = 0x6361_6e64;
    pub const AUGMENT: u64 = 0x6175_676d;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a key path into a single 64-bit seed.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn rng(master: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(master, path))
}
