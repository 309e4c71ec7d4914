//! Deterministic random substreams.
//!
//! Every path owns its own ChaCha8 stream selected by `(seed, path_index)`,
//! so a path is bit-identical no matter which worker draws it or in which
//! order. Independent ensembles (different horizons, numerator and
//! denominator of the overlap) use seeds derived with [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `(seed, path_index)` identity of one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub seed: u64,
    pub path_index: u64,
}

impl RandomStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        Self { seed, path_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.path_index);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the sub-ensemble labelled `tag`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(tag.wrapping_add(0xD1B5_4A32_D192_ED03)))
}
