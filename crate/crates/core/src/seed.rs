//! Deterministic seed splitting. Every random stream in the pipeline is
//! derived from one root seed plus a stage tag and an index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STAGE_FCM: u64 = 0x46434d;
pub const STAGE_PSO: u64 = 0x50534f;
pub const STAGE_CC: u64 = 0x4343;
pub const STAGE_SYNTH: u64 = 0x53594e;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(root: u64, stage: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ splitmix64(stage)) ^ index)
}

pub fn rng(root: u64, stage: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, stage, index))
}
