//! Philox4x32-10 counter-based generator and per-replication stream
//! derivation.
//!
//! A stream is fully determined by `(base_seed, tag, replication)`: the seed
//! is the Philox key, the remaining words of the 128-bit counter hold the
//! tag and the replication index, and the low word counts blocks.  Streams
//! therefore never overlap and can be created in any order on any thread.

use rand_core::{impls, RngCore};

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

/// One Philox4x32 block with ten rounds.
#[inline]
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for round in 0..10 {
        if round > 0 {
            key[0] = key[0].wrapping_add(W0);
            key[1] = key[1].wrapping_add(W1);
        }
        let p0 = (M0 as u64) * (ctr[0] as u64);
        let p1 = (M1 as u64) * (ctr[2] as u64);
        let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
        let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
        ctr = [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0];
    }
    ctr
}

/// Independent purposes that draw from the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum StreamTag {
    Distance = 1,
    NPoint = 2,
    Arratia = 3,
    Scaled = 4,
    Auxiliary = 5,
}

#[derive(Debug, Clone)]
pub struct Philox4x32 {
    key: [u32; 2],
    counter: [u32; 4],
    buffer: [u32; 4],
    index: usize,
}

impl Philox4x32 {
    pub fn new(key: [u32; 2], counter: [u32; 4]) -> Self {
        Self {
            key,
            counter,
            buffer: [0; 4],
            index: 4,
        }
    }

    /// The stream for `replication` under `tag`, keyed by `base_seed`.
    pub fn stream(base_seed: u64, tag: StreamTag, replication: u64) -> Self {
        Self::new(
            [base_seed as u32, (base_seed >> 32) as u32],
            [0, tag as u32, replication as u32, (replication >> 32) as u32],
        )
    }

    /// Number of 128-bit blocks consumed so far.
    pub fn blocks_used(&self) -> u32 {
        self.counter[0]
    }

    #[inline]
    fn refill(&mut self) {
        self.buffer = philox4x32_10(self.counter, self.key);
        // The low word is the block index of this stream; 2^32 blocks is far
        // beyond any single replication.
        self.counter[0] = self.counter[0].wrapping_add(1);
        self.index = 0;
    }
}

impl RngCore for Philox4x32 {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        if self.index == 4 {
            self.refill();
        }
        let v = self.buffer[self.index];
        self.index += 1;
        v
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        impls::next_u64_via_u32(self)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }
}
