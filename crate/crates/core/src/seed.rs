//! Seed derivation. A session seed fans out into independent sub-seeds so
//! that each random consumer (initial front, initial pick, every adapt run,
//! simulated users) can be replayed on its own.
//!
//! `derive(seed, stream, index) = mix(mix(seed ^ stream·φ) ^ (index + 1)·φ')`
//! where `mix` is the SplitMix64 finalizer.

/// Sub-seed streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    InitialFront = 1,
    InitialPick = 2,
    Adapt = 3,
    User = 4,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const INDEX_MULT: u64 = 0xD1B5_4A32_D192_ED03;

pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, stream: Stream, index: u64) -> u64 {
    let s = mix(seed ^ (stream as u64).wrapping_mul(GOLDEN));
    mix(s ^ index.wrapping_add(1).wrapping_mul(INDEX_MULT))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_and_indices_separate() {
        let a = derive(1, Stream::Adapt, 0);
        assert_ne!(a, derive(1, Stream::Adapt, 1));
        assert_ne!(a, derive(1, Stream::User, 0));
        assert_ne!(a, derive(2, Stream::Adapt, 0));
        assert_eq!(a, derive(1, Stream::Adapt, 0));
    }
}
