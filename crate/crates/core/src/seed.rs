//! Independent per-purpose seeds derived from one master seed.
//!
//! Every random decision in an experiment draws from a generator seeded by
//! `derive(master, stream, ids)`, so results never depend on execution order
//! or thread scheduling.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(z: u64) -> u64 {
    let mut z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Purpose tags keeping the derived streams disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Data = 1,
    Split = 2,
    Partition = 3,
    Attackers = 4,
    Init = 5,
    Sampling = 6,
    Training = 7,
    Attack = 8,
    Root = 9,
}

pub fn derive(master: u64, stream: Stream, ids: &[u64]) -> u64 {
    let mut acc = splitmix(master ^ splitmix(stream as u64));
    for &id in ids {
        acc = splitmix(acc ^ id);
    }
    acc
}
