//! Collision-free derivation of per-task RNG streams from one master seed.
//!
//! Every random draw in the harness comes from a `ChaCha8Rng` keyed by the
//! 4-tuple `(master_seed, replication_id, grid_index, role)`. The tuple is
//! packed injectively into the 256-bit ChaCha key, so distinct tuples can
//! never share a stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Role of a derived random stream within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    /// Predictor draws (and time-series initial values).
    DataInputs,
    /// Noise draws (regression epsilon, Bernoulli labels).
    DataNoise,
    /// Weight initialization for one grid point.
    Init,
    /// Mini-batch shuffling during training for one grid point.
    Shuffle,
    /// Sample-splitting permutation.
    Split,
    /// Bernoulli relabeling of image datasets.
    Relabel,
    /// Monte-Carlo constant estimation.
    MonteCarlo,
    /// Dropout masks in reference-model training.
    Dropout,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::DataInputs => 1,
            StreamRole::DataNoise => 2,
            StreamRole::Init => 3,
            StreamRole::Shuffle => 4,
            StreamRole::Split => 5,
            StreamRole::Relabel => 6,
            StreamRole::MonteCarlo => 7,
            StreamRole::Dropout => 8,
        }
    }
}

/// Derive the RNG stream for `(master_seed, replication_id, grid_index, role)`.
///
/// The four words are written little-endian into the ChaCha key, one word per
/// 64-bit lane, so the mapping from tuples to keys is injective.
pub fn derive_rng(
    master_seed: u64,
    replication_id: u64,
    grid_index: u64,
    role: StreamRole,
) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&replication_id.to_le_bytes());
    key[16..24].copy_from_slice(&grid_index.to_le_bytes());
    key[24..32].copy_from_slice(&role.tag().to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
