use rand::SeedableRng;
use sha2::{Digest, Sha256};

use crate::Rng64;

/// Node of the seed-derivation tree.
///
/// A run's master seed is the root; each child is keyed by a label and an
/// index (`master → "attack2p" → worker i → episode j`). Child seeds are the
/// first eight bytes of `SHA-256(parent_le ‖ label ‖ 0x00 ‖ index_le)`, so
/// siblings are independent of creation order and no ambient RNG exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedTree {
    seed: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { seed: master }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn child(&self, label: &str, index: u64) -> SeedTree {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(label.as_bytes());
        h.update([0u8]);
        h.update(index.to_le_bytes());
        let d = h.finalize();
        SeedTree {
            seed: u64::from_le_bytes(d[..8].try_into().expect("8 bytes")),
        }
    }

    pub fn rng(&self) -> Rng64 {
        Rng64::seed_from_u64(self.seed)
    }

    /// Shorthand for `self.child(label, index).rng()`.
    pub fn rng_for(&self, label: &str, index: u64) -> Rng64 {
        self.child(label, index).rng()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn children_are_stable_and_distinct() {
        let root = SeedTree::new(42);
        assert_eq!(root.child("worker", 3), SeedTree::new(42).child("worker", 3));
        assert_ne!(root.child("worker", 3), root.child("worker", 4));
        assert_ne!(root.child("worker", 3), root.child("episode", 3));
        assert_ne!(root.child("a", 1), SeedTree::new(43).child("a", 1));
        let mut a = root.rng_for("x", 0);
        let mut b = root.child("x", 0).rng();
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }
}
