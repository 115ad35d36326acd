//! Substructure count vectors.
//!
//! Each library entry is a small query graph written as SMILES. The count
//! for an entry is the number of distinct target atom sets onto which the
//! query maps with matching atom labels (element and aromatic flag) and
//! matching bond orders. Extra target bonds between matched atoms are
//! allowed, as in ordinary substructure search.

use std::collections::{HashSet, VecDeque};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::FingerprintError;
use crate::molgraph::{parse_query_smiles, MolGraph};

const DEFAULT_LIBRARY: &str = include_str!("default_substructures.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("substructure search exceeded its time budget")]
pub struct BudgetExceeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchBudget {
    pub time: Duration,
}

impl Default for MatchBudget {
    fn default() -> Self {
        MatchBudget {
            time: Duration::from_secs(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubstructureLibrary {
    entries: Vec<(String, MolGraph)>,
}

impl SubstructureLibrary {
    /// Builds a library, rejecting duplicate names.
    pub fn new(entries: Vec<(String, MolGraph)>) -> Result<Self, FingerprintError> {
        let mut names = HashSet::new();
        for (k, (name, _)) in entries.iter().enumerate() {
            if !names.insert(name.as_str()) {
                return Err(FingerprintError::Library {
                    line: k + 1,
                    reason: format!("duplicate name {name:?}"),
                });
            }
        }
        Ok(SubstructureLibrary { entries })
    }

    /// Parses the `name<TAB>smiles` line format; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, FingerprintError> {
        let mut entries = Vec::new();
        let mut names = HashSet::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let Some((name, smiles)) = line.split_once('\t') else {
                return Err(FingerprintError::Library {
                    line: line_no,
                    reason: "expected name<TAB>smiles".into(),
                });
            };
            let name = name.trim();
            let smiles = smiles.trim();
            if name.is_empty() {
                return Err(FingerprintError::Library {
                    line: line_no,
                    reason: "empty name".into(),
                });
            }
            if !names.insert(name.to_string()) {
                return Err(FingerprintError::Library {
                    line: line_no,
                    reason: format!("duplicate name {name:?}"),
                });
            }
            let query = parse_query_smiles(smiles)
                .map_err(|source| FingerprintError::LibrarySmiles { line: line_no, source })?;
            entries.push((name.to_string(), query));
        }
        Ok(SubstructureLibrary { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self, FingerprintError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn entries(&self) -> &[(String, MolGraph)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }
}

/// The bundled library of common functional groups.
pub fn default_library() -> SubstructureLibrary {
    SubstructureLibrary::parse(DEFAULT_LIBRARY).expect("bundled substructure library is valid")
}

/// Per-entry match counts of `lib` in `mol`.
pub fn substructure_counts(
    mol: &MolGraph,
    lib: &SubstructureLibrary,
    budget: MatchBudget,
) -> Vec<Result<u32, BudgetExceeded>> {
    lib.entries
        .iter()
        .map(|(_, query)| substructure_matches(query, mol, budget).map(|m| m as u32))
        .collect()
}

struct Matcher<'a> {
    query: &'a MolGraph,
    target: &'a MolGraph,
    order: Vec<usize>,
    /// Already-placed query neighbor used to restrict candidates.
    anchor: Vec<Option<usize>>,
    mapping: Vec<usize>,
    used: Vec<bool>,
    found: HashSet<Vec<usize>>,
    steps: u64,
    deadline: Instant,
}

const UNMAPPED: usize = usize::MAX;

/// Number of distinct target atom sets matched by `query`.
pub fn substructure_matches(query: &MolGraph, target: &MolGraph, budget: MatchBudget) -> Result<usize, BudgetExceeded> {
    let query_heavy = query.heavy_atoms();
    if query_heavy.is_empty() || query_heavy.len() > target.heavy_atom_count() {
        return Ok(0);
    }

    // Breadth-first placement order so each atom after the first in a
    // component has an already-placed neighbor.
    let mut order = Vec::with_capacity(query_heavy.len());
    let mut anchor = vec![None; query.atom_count()];
    let mut placed = vec![false; query.atom_count()];
    for &start in &query_heavy {
        if placed[start] {
            continue;
        }
        placed[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(q) = queue.pop_front() {
            order.push(q);
            for &(nbr, _) in query.neighbors(q) {
                if !placed[nbr] && !query.atom(nbr).element.is_hydrogen() {
                    placed[nbr] = true;
                    anchor[nbr] = Some(q);
                    queue.push_back(nbr);
                }
            }
        }
    }

    let mut m = Matcher {
        query,
        target,
        order,
        anchor,
        mapping: vec![UNMAPPED; query.atom_count()],
        used: vec![false; target.atom_count()],
        found: HashSet::new(),
        steps: 0,
        deadline: Instant::now() + budget.time,
    };
    m.extend(0)?;
    Ok(m.found.len())
}

impl Matcher<'_> {
    fn compatible(&self, q: usize, t: usize) -> bool {
        let qa = self.query.atom(q);
        let ta = self.target.atom(t);
        if qa.element != ta.element || qa.aromatic != ta.aromatic || self.used[t] {
            return false;
        }
        for &(qn, qb) in self.query.neighbors(q) {
            let tn = self.mapping[qn];
            if tn == UNMAPPED {
                continue;
            }
            match self.target.bond_between(t, tn) {
                Some(tb) if tb.order == self.query.bond(qb).order => {}
                _ => return false,
            }
        }
        true
    }

    fn extend(&mut self, depth: usize) -> Result<(), BudgetExceeded> {
        self.steps += 1;
        if self.steps % 4096 == 1 && Instant::now() > self.deadline {
            return Err(BudgetExceeded);
        }
        if depth == self.order.len() {
            let mut set: Vec<usize> = self.order.iter().map(|&q| self.mapping[q]).collect();
            set.sort_unstable();
            self.found.insert(set);
            return Ok(());
        }
        let q = self.order[depth];
        let candidates: Vec<usize> = match self.anchor[q] {
            Some(parent) => self
                .target
                .neighbors(self.mapping[parent])
                .iter()
                .map(|&(n, _)| n)
                .collect(),
            None => (0..self.target.atom_count()).collect(),
        };
        for t in candidates {
            if !self.compatible(q, t) {
                continue;
            }
            self.mapping[q] = t;
            self.used[t] = true;
            let result = self.extend(depth + 1);
            self.used[t] = false;
            self.mapping[q] = UNMAPPED;
            result?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn count(query: &str, target: &str) -> usize {
        substructure_matches(
            &parse_query_smiles(query).unwrap(),
            &parse_smiles(target).unwrap(),
            MatchBudget::default(),
        )
        .unwrap()
    }

    #[test]
    fn tagged_examples() {
        assert_eq!(count("O", "CCO"), 1);
        assert_eq!(count("CC", "CCC"), 2);
        assert_eq!(count("N", "CCO"), 0);
    }

    #[test]
    fn labels_and_orders() {
        // aromatic carbon does not match aliphatic carbon
        assert_eq!(count("C", "c1ccccc1"), 0);
        assert_eq!(count("c", "c1ccccc1"), 6);
        assert_eq!(count("cc", "c1ccccc1"), 6);
        assert_eq!(count("c1ccccc1", "c1ccccc1"), 1);
        assert_eq!(count("C=O", "CC(=O)O"), 1);
        assert_eq!(count("CO", "CC(=O)O"), 1);
        assert_eq!(count("C(=O)O", "CC(=O)OCC(=O)O"), 2);
        // substructure search ignores extra target bonds
        assert_eq!(count("CCC", "C1CC1"), 1);
        assert_eq!(count("C.C", "CC"), 1);
    }

    #[test]
    fn library_file_format() {
        let lib = SubstructureLibrary::parse("# comment\nhydroxyl\tO\n\ncarbonyl\tC=O\n").unwrap();
        assert_eq!(lib.len(), 2);
        assert_eq!(lib.names().collect::<Vec<_>>(), vec!["hydroxyl", "carbonyl"]);
        let mol = parse_smiles("OCC=O").unwrap();
        let counts: Vec<u32> = substructure_counts(&mol, &lib, MatchBudget::default())
            .into_iter()
            .map(Result::unwrap)
            .collect();
        assert_eq!(counts, vec![2, 1]);

        assert!(matches!(
            SubstructureLibrary::parse("a\tO\na\tN\n"),
            Err(FingerprintError::Library { line: 2, .. })
        ));
        assert!(matches!(
            SubstructureLibrary::parse("a O\n"),
            Err(FingerprintError::Library { line: 1, .. })
        ));
        assert!(matches!(
            SubstructureLibrary::parse("x\tC(\n"),
            Err(FingerprintError::LibrarySmiles { line: 1, .. })
        ));
    }

    #[test]
    fn default_library_loads() {
        let lib = default_library();
        assert!(lib.len() >= 35);
        for (_, q) in lib.entries() {
            assert!(q.heavy_atom_count() >= 1);
        }
    }

    #[test]
    fn self_match_is_at_least_one() {
        for smiles in ["CCO", "c1ccccc1O", "CC(=O)Nc1ccc(O)cc1", "C1CCNCC1"] {
            assert!(count(smiles, smiles) >= 1, "{smiles}");
        }
    }

    #[test]
    fn zero_budget_reports_exceeded() {
        let q = parse_smiles("CCCCCC").unwrap();
        let t = parse_smiles("C1CCCCC1C1CCCCC1C1CCCCC1C1CCCCC1").unwrap();
        let budget = MatchBudget { time: Duration::ZERO };
        assert_eq!(substructure_matches(&q, &t, budget), Err(BudgetExceeded));
    }
}
