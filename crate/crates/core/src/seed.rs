//! Hierarchical seed derivation.
//!
//! A child seed is the first eight bytes (little-endian) of
//! `SHA-256("kpzlat-seed-v1" || root || label_1 || ... || label_k)`, where each
//! label is encoded as a one-byte tag, a little-endian `u64` length or value,
//! and the raw bytes for text labels. The encoding does not depend on the
//! platform's endianness or pointer width.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"kpzlat-seed-v1";

/// One component of a seed label path.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Text(String),
    Index(u64),
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Text(s.to_owned())
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label::Text(s)
    }
}

macro_rules! label_from_int {
    ($($t:ty),*) => {$(
        impl From<$t> for Label {
            fn from(v: $t) -> Self {
                Label::Index(v as u64)
            }
        }
    )*};
}
label_from_int!(u8, u16, u32, u64, usize);

/// Derives a child seed from `root` and a label path.
pub fn seed_stream(root: u64, labels: &[Label]) -> u64 {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(root.to_le_bytes());
    for label in labels {
        match label {
            Label::Text(s) => {
                h.update([0x01]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            Label::Index(i) => {
                h.update([0x02]);
                h.update(i.to_le_bytes());
            }
        }
    }
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// `seed_stream(root, &[a.into(), b.into(), ...])`.
#[macro_export]
macro_rules! seed {
    ($root:expr $(, $label:expr)* $(,)?) => {
        $crate::seed::seed_stream($root, &[$($crate::seed::Label::from($label)),*])
    };
}

/// The generator used everywhere a stream of randomness is needed.
pub type Rng = Xoshiro256PlusPlus;

pub fn rng_from(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}
