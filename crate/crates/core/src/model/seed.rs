use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams used by a simulated channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StreamKind {
    Photon,
    Dark,
    Jitter,
    Crosstalk,
    /// Accept/reject draws of the detector dynamics.
    Detection,
    /// Channel jitter of the time-tagging electronics.
    Tcspc,
}

impl StreamKind {
    pub const ALL: [StreamKind; 6] = [
        StreamKind::Photon,
        StreamKind::Dark,
        StreamKind::Jitter,
        StreamKind::Crosstalk,
        StreamKind::Detection,
        StreamKind::Tcspc,
    ];

    fn tag(self) -> u64 {
        match self {
            StreamKind::Photon => 1,
            StreamKind::Dark => 2,
            StreamKind::Jitter => 3,
            StreamKind::Crosstalk => 4,
            StreamKind::Detection => 5,
            StreamKind::Tcspc => 6,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one (channel, stream) pair. Pure: depends only on its arguments.
///
/// The (channel, kind) pair is packed into one word and pushed through a
/// bijective mixer, so distinct pairs below 2^56 channels never collide for a
/// fixed master seed.
pub fn substream_seed(master_seed: u64, channel: usize, kind: StreamKind) -> u64 {
    let key = ((channel as u64) << 8) | kind.tag();
    splitmix64(splitmix64(master_seed) ^ key)
}

pub fn substream_rng(master_seed: u64, channel: usize, kind: StreamKind) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master_seed, channel, kind))
}
