//! Counter-based reproducible random streams.
//!
//! Every stochastic operation draws from a stream keyed by
//! (master seed, replica index, purpose tag), so replicas can run on
//! independent workers and still reproduce bitwise.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for derived streams. Distinct tags give independent streams
/// even for the same (seed, replica) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Sample = 1,
    OuFlow = 2,
    AdditiveFlow = 3,
    MatrixFlow = 4,
    SdeDriver = 5,
    Bootstrap = 6,
    Probe = 7,
    Comparison = 8,
}

/// Derives a ChaCha stream from the (master, replica, tag) triple.
pub fn stream(master_seed: u64, replica: u64, purpose: Purpose) -> ChaCha8Rng {
    stream_raw(master_seed, replica, purpose as u64)
}

pub fn stream_raw(master_seed: u64, replica: u64, tag: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&replica.to_le_bytes());
    seed[16..24].copy_from_slice(&tag.to_le_bytes());
    // fixed salt so that a zero triple is not the all-zero seed
    seed[24..32].copy_from_slice(&0x9e37_79b9_7f4a_7c15u64.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = stream(7, 3, Purpose::Sample);
        let mut b = stream(7, 3, Purpose::Sample);
        assert_eq!(a.next_u64(), b.next_u64());

        let mut c = stream(7, 3, Purpose::OuFlow);
        let mut d = stream(7, 4, Purpose::Sample);
        let mut a2 = stream(7, 3, Purpose::Sample);
        let x = a2.next_u64();
        assert_ne!(x, c.next_u64());
        assert_ne!(x, d.next_u64());
    }
}
