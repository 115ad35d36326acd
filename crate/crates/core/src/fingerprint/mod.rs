//! Fixed molecular featurizers: circular count fingerprints and substructure
//! count vectors.

mod morgan;
mod substructure;

pub use morgan::{morgan_environments, morgan_fingerprint, Environment, FingerprintConfig, MAX_RADIUS};
pub use substructure::{
    default_library, substructure_counts, substructure_matches, BudgetExceeded, MatchBudget, SubstructureLibrary,
};

use thiserror::Error;

use crate::molgraph::SmilesError;

#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error("invalid fingerprint config: {0}")]
    InvalidConfig(String),
    #[error("substructure library line {line}: {reason}")]
    Library { line: usize, reason: String },
    #[error("substructure library line {line}: {source}")]
    LibrarySmiles { line: usize, source: SmilesError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A folded fingerprint: a fixed-width vector of non-negative counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    values: Vec<u32>,
    support: Vec<u32>,
}

impl Fingerprint {
    pub fn from_values(values: Vec<u32>) -> Fingerprint {
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| i as u32)
            .collect();
        Fingerprint { values, support }
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn width(&self) -> usize {
        self.values.len()
    }

    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    /// Nonzero positions in ascending order.
    pub fn support(&self) -> &[u32] {
        &self.support
    }

    /// `(position, count)` for every nonzero position.
    pub fn sparse(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.support.iter().map(|&i| (i, self.values[i as usize]))
    }
}

const MIX_K1: u64 = 0xbf58_476d_1ce4_e5b9;
const MIX_K2: u64 = 0x94d0_49bb_1331_11eb;

fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(MIX_K1);
    x ^= x >> 27;
    x = x.wrapping_mul(MIX_K2);
    x ^ (x >> 31)
}

/// Seed-free 64-bit hash of an integer sequence (splitmix64 finalizer
/// chained over the elements). Independent of platform and process.
pub fn hash_sequence(values: &[u64]) -> u64 {
    let mut h = mix64(values.len() as u64 ^ 0x9e37_79b9_7f4a_7c15);
    for &v in values {
        h = mix64(h ^ mix64(v.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_order_sensitive_and_frozen() {
        assert_ne!(hash_sequence(&[1, 2]), hash_sequence(&[2, 1]));
        assert_ne!(hash_sequence(&[0]), hash_sequence(&[0, 0]));
        assert_eq!(hash_sequence(&[6, 0, 0, 4, 0, 0, 0]), 13_053_656_430_581_666_785);
    }

    #[test]
    fn fingerprint_support() {
        let fp = Fingerprint::from_values(vec![0, 2, 0, 1]);
        assert_eq!(fp.nnz(), 2);
        assert_eq!(fp.support(), &[1, 3]);
        assert_eq!(fp.sparse().collect::<Vec<_>>(), vec![(1, 2), (3, 1)]);
    }
}
