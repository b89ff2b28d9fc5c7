/// Independent random streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Topology = 1,
    Codebook = 2,
    Train = 3,
    Pattern = 4,
    Test = 5,
}

#[inline]
fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of one presentation or construction step, a pure function of the
/// master seed and its coordinates so it does not depend on execution order.
pub fn derive_seed(master: u64, purpose: Purpose, class: u64, sample: u64) -> u64 {
    let mut h = splitmix(master);
    for part in [purpose as u64, class, sample] {
        h = splitmix(h ^ part);
    }
    h
}
