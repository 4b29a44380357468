//! Deterministic seed derivation.
//!
//! A single master seed drives the whole pipeline. Each stage mixes a fixed
//! tag into the master seed through SplitMix64, so stages are decorrelated
//! but fully reproducible, and rerunning one stage never perturbs another.

/// Stage tags. The numeric values are part of the on-disk reproducibility
/// contract: changing them changes every derived stream.
pub mod stage {
    pub const SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const EMBED: u64 = 4;
    pub const LABEL: u64 = 5;
    pub const SYNTH: u64 = 6;
}

/// SplitMix64 finalizer (Steele, Lea & Flood 2014).
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive a stage seed from the master seed and a stage tag.
pub fn derive(master: u64, tag: u64) -> u64 {
    splitmix64(master ^ splitmix64(tag))
}
