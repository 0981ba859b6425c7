//! Seed derivation. Every random stream in a run is derived from one master
//! seed plus a stream name and optional integer keys, so results never depend
//! on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named sub-streams of the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Encode,
    Split,
    Init,
    GrowthNoise,
    Shuffle,
    Label,
    Synth,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Encode => 0x656e_636f_6465,
            Stream::Split => 0x0073_706c_6974,
            Stream::Init => 0x696e_6974,
            Stream::GrowthNoise => 0x6772_6f77_7468,
            Stream::Shuffle => 0x7368_7566_666c,
            Stream::Label => 0x006c_6162_656c,
            Stream::Synth => 0x0073_796e_7468,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a sequence of keys into a new 64-bit seed.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn sub_seed(master: u64, stream: Stream) -> u64 {
    derive_seed(master, &[stream.tag()])
}

pub fn rng_for(master: u64, stream: Stream, keys: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(sub_seed(master, stream), keys))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
