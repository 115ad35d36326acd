//! Molecular graphs parsed from SMILES.
//!
//! A [`MolGraph`] is an immutable, simple, undirected labeled graph. Atoms
//! carry element, charge, hydrogen counts, aromaticity and ring membership;
//! bonds carry an order. Every featurizer and distance in this crate reads
//! molecules through this type.

mod element;
mod parser;

pub use element::Element;
pub use parser::{parse_query_smiles, parse_smiles, SmilesError, SmilesErrorKind};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Chirality {
    None,
    Clockwise,
    CounterClockwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's bond-order sum; aromatic bonds count as one.
    pub fn valence_contribution(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    /// Small stable code used when hashing atom environments.
    pub fn code(self) -> u64 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    pub isotope: Option<u16>,
    /// Hydrogen count written inside brackets; `None` for organic-subset atoms.
    pub explicit_h_count: Option<u8>,
    pub implicit_h_count: u8,
    pub aromatic: bool,
    pub in_ring: bool,
    /// Number of incident bonds.
    pub degree: u8,
    pub chirality: Chirality,
}

impl Atom {
    /// Hydrogens attached without being graph atoms.
    pub fn attached_h(&self) -> u8 {
        self.explicit_h_count.unwrap_or(0) + self.implicit_h_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub endpoints: (usize, usize),
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.endpoints.0 == atom {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }
}

/// A validated molecular graph. Construct with [`parse_smiles`].
#[derive(Debug, Clone)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    bond_in_ring: Vec<bool>,
    source_smiles: String,
}

impl MolGraph {
    pub(crate) fn from_parts(
        atoms: Vec<Atom>,
        bonds: Vec<Bond>,
        bond_in_ring: Vec<bool>,
        source_smiles: String,
    ) -> MolGraph {
        let adjacency = adjacency_lists(atoms.len(), &bonds);
        MolGraph {
            atoms,
            bonds,
            adjacency,
            bond_in_ring,
            source_smiles,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, index: usize) -> &Atom {
        &self.atoms[index]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond(&self, index: usize) -> &Bond {
        &self.bonds[index]
    }

    pub fn bond_in_ring(&self, index: usize) -> bool {
        self.bond_in_ring[index]
    }

    pub fn source_smiles(&self) -> &str {
        &self.source_smiles
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// `(neighbor atom, bond index)` pairs incident to `atom`.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    /// Bond between two atoms, if any.
    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|(n, _)| *n == b)
            .map(|(_, bond)| &self.bonds[*bond])
    }

    pub fn heavy_atom_count(&self) -> usize {
        heavy_atom_count(self)
    }

    /// Indices of all non-hydrogen atoms in ascending order.
    pub fn heavy_atoms(&self) -> Vec<usize> {
        (0..self.atoms.len())
            .filter(|&i| !self.atoms[i].element.is_hydrogen())
            .collect()
    }

    /// Total hydrogens on an atom, counting explicit `[H]` neighbors.
    pub fn total_h(&self, atom: usize) -> u8 {
        let graph_h = self.adjacency[atom]
            .iter()
            .filter(|(n, _)| self.atoms[*n].element.is_hydrogen())
            .count() as u8;
        self.atoms[atom].attached_h() + graph_h
    }

    /// Number of non-hydrogen neighbors.
    pub fn heavy_degree(&self, atom: usize) -> usize {
        self.adjacency[atom]
            .iter()
            .filter(|(n, _)| !self.atoms[*n].element.is_hydrogen())
            .count()
    }
}

/// Count of non-hydrogen atoms.
pub fn heavy_atom_count(mol: &MolGraph) -> usize {
    mol.atoms.iter().filter(|a| !a.element.is_hydrogen()).count()
}

fn adjacency_lists(n: usize, bonds: &[Bond]) -> Vec<Vec<(usize, usize)>> {
    let mut adjacency = vec![Vec::new(); n];
    for (k, bond) in bonds.iter().enumerate() {
        let (a, b) = bond.endpoints;
        adjacency[a].push((b, k));
        adjacency[b].push((a, k));
    }
    adjacency
}

/// Marks bonds that lie on at least one cycle (i.e. are not bridges).
pub(crate) fn ring_bonds(n: usize, bonds: &[Bond]) -> Vec<bool> {
    let adjacency = adjacency_lists(n, bonds);
    let mut in_ring = vec![true; bonds.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0usize;

    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (vertex, bond used to enter it, next adjacency position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (v, parent_bond, ref mut pos)) = stack.last_mut() {
            if *pos < adjacency[v].len() {
                let (w, bond) = adjacency[v][*pos];
                *pos += 1;
                if bond == parent_bond {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, bond, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(u, _, _)) = stack.last() {
                    low[u] = low[u].min(low[v]);
                    if low[v] > disc[u] {
                        in_ring[parent_bond] = false;
                    }
                }
            }
        }
    }
    in_ring
}
