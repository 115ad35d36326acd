//! Circular (Morgan / ECFP-style) fingerprints.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{hash_sequence, Fingerprint, FingerprintError};
use crate::molgraph::{Chirality, MolGraph};

pub const MAX_RADIUS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FingerprintConfig {
    pub radius: u32,
    /// Folded vector length.
    pub width: usize,
    /// Count occurrences; when false every position is a 0/1 bit.
    pub counted: bool,
    pub use_chirality: bool,
}

impl Default for FingerprintConfig {
    fn default() -> Self {
        FingerprintConfig {
            radius: 2,
            width: 2048,
            counted: true,
            use_chirality: true,
        }
    }
}

impl FingerprintConfig {
    pub fn validate(&self) -> Result<(), FingerprintError> {
        if self.width == 0 {
            return Err(FingerprintError::InvalidConfig("width must be at least 1".into()));
        }
        if self.radius > MAX_RADIUS {
            return Err(FingerprintError::InvalidConfig(format!(
                "radius {} exceeds the maximum of {MAX_RADIUS}",
                self.radius
            )));
        }
        Ok(())
    }
}

/// One surviving circular environment before folding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Environment {
    pub identifier: u64,
    pub radius: u32,
    pub center: usize,
    /// Sorted atom indices covered by the environment.
    pub atoms: Vec<usize>,
}

fn chirality_code(c: Chirality) -> u64 {
    match c {
        Chirality::None => 0,
        Chirality::Clockwise => 1,
        Chirality::CounterClockwise => 2,
    }
}

fn initial_identifier(mol: &MolGraph, atom: usize, cfg: &FingerprintConfig) -> u64 {
    let a = mol.atom(atom);
    let mut invariant = vec![
        a.element.atomic_number() as u64,
        mol.heavy_degree(atom) as u64,
        a.formal_charge as i64 as u64,
        mol.total_h(atom) as u64,
        a.in_ring as u64,
        a.aromatic as u64,
    ];
    if cfg.use_chirality {
        invariant.push(chirality_code(a.chirality));
    }
    hash_sequence(&invariant)
}

/// Enumerates the deduplicated circular environments of `mol` up to
/// `cfg.radius`. Hydrogen atoms present as graph nodes are folded into
/// their neighbor's hydrogen count and are not environment centers.
///
/// An environment is dropped when an environment covering the same atom
/// set was already emitted at this or a lower radius. Within an iteration
/// candidates are visited in identifier order, so the survivor does not
/// depend on atom numbering.
pub fn morgan_environments(mol: &MolGraph, cfg: &FingerprintConfig) -> Vec<Environment> {
    let heavy = mol.heavy_atoms();
    let n = mol.atom_count();
    let words = n.div_ceil(64).max(1);

    let mut ids = vec![0u64; n];
    let mut sets = vec![vec![0u64; words]; n];
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut out = Vec::new();

    let mut round: Vec<(u64, usize)> = Vec::with_capacity(heavy.len());
    for &a in &heavy {
        ids[a] = initial_identifier(mol, a, cfg);
        sets[a][a / 64] |= 1 << (a % 64);
        round.push((ids[a], a));
    }
    round.sort_unstable();
    for &(id, a) in &round {
        seen.insert(sets[a].clone());
        out.push(Environment {
            identifier: id,
            radius: 0,
            center: a,
            atoms: vec![a],
        });
    }

    let mut neighbor_terms: Vec<(u64, u64)> = Vec::new();
    for radius in 1..=cfg.radius {
        let mut next_ids = ids.clone();
        let mut next_sets = sets.clone();
        round.clear();
        for &a in &heavy {
            neighbor_terms.clear();
            for &(nbr, bond) in mol.neighbors(a) {
                if mol.atom(nbr).element.is_hydrogen() {
                    continue;
                }
                neighbor_terms.push((mol.bond(bond).order.code(), ids[nbr]));
                for (w, word) in next_sets[a].iter_mut().enumerate() {
                    *word |= sets[nbr][w];
                }
            }
            neighbor_terms.sort_unstable();
            let mut seq = Vec::with_capacity(2 + 2 * neighbor_terms.len());
            seq.push(radius as u64);
            seq.push(ids[a]);
            for &(order, id) in &neighbor_terms {
                seq.push(order);
                seq.push(id);
            }
            next_ids[a] = hash_sequence(&seq);
            round.push((next_ids[a], a));
        }
        round.sort_unstable();
        for &(id, a) in &round {
            if seen.insert(next_sets[a].clone()) {
                out.push(Environment {
                    identifier: id,
                    radius,
                    center: a,
                    atoms: bitset_members(&next_sets[a]),
                });
            }
        }
        ids = next_ids;
        sets = next_sets;
    }
    out
}

fn bitset_members(words: &[u64]) -> Vec<usize> {
    let mut members = Vec::new();
    for (w, &word) in words.iter().enumerate() {
        let mut bits = word;
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            members.push(w * 64 + b);
            bits &= bits - 1;
        }
    }
    members
}

/// Folds the circular environments of `mol` into a fixed-width vector.
pub fn morgan_fingerprint(mol: &MolGraph, cfg: &FingerprintConfig) -> Result<Fingerprint, FingerprintError> {
    cfg.validate()?;
    let mut values = vec![0u32; cfg.width];
    for env in morgan_environments(mol, cfg) {
        let slot = (env.identifier % cfg.width as u64) as usize;
        if cfg.counted {
            values[slot] += 1;
        } else {
            values[slot] = 1;
        }
    }
    Ok(Fingerprint::from_values(values))
}
