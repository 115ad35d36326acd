//! Maximum common connected induced subgraph by clique search on the
//! modular product graph.
//!
//! A product vertex is a pair of heavy atoms with equal element and
//! aromatic flag. Two product vertices are joined by a *c-edge* when both
//! atom pairs are bonded with the same order, and by a *d-edge* when
//! neither pair is bonded. Cliques whose c-edges span them correspond to
//! connected common induced subgraphs; the search grows such cliques
//! one c-adjacent vertex at a time with a branch-and-bound on the number
//! of atoms that could still be matched.

use std::time::{Duration, Instant};

use crate::molgraph::MolGraph;

/// Size of the best common subgraph found and whether the search finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McsResult {
    /// Heavy atoms in the common subgraph.
    pub size: usize,
    /// False when the time budget ran out; `size` is then a lower bound.
    pub exact: bool,
}

#[derive(Clone)]
struct BitSet(Vec<u64>);

impl BitSet {
    fn new(len: usize) -> BitSet {
        BitSet(vec![0; len.div_ceil(64)])
    }

    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn remove(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }

    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    fn and(&self, other: &BitSet) -> BitSet {
        BitSet(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn or_assign(&mut self, other: &BitSet) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + b)
            })
        })
    }
}

struct ProductGraph {
    /// (atom in A, atom in B), compact heavy-atom indices.
    pairs: Vec<(usize, usize)>,
    c_adj: Vec<BitSet>,
    d_adj: Vec<BitSet>,
    na: usize,
    nb: usize,
}

/// Heavy-atom adjacency matrix with bond-order codes (0 = no bond).
fn heavy_matrix(mol: &MolGraph) -> (Vec<usize>, Vec<Vec<u8>>) {
    let heavy = mol.heavy_atoms();
    let mut index = vec![usize::MAX; mol.atom_count()];
    for (k, &a) in heavy.iter().enumerate() {
        index[a] = k;
    }
    let mut m = vec![vec![0u8; heavy.len()]; heavy.len()];
    for bond in mol.bonds() {
        let (a, b) = bond.endpoints;
        if index[a] != usize::MAX && index[b] != usize::MAX {
            let code = bond.order.code() as u8;
            m[index[a]][index[b]] = code;
            m[index[b]][index[a]] = code;
        }
    }
    (heavy, m)
}

impl ProductGraph {
    fn build(a: &MolGraph, b: &MolGraph) -> ProductGraph {
        let (ha, ma) = heavy_matrix(a);
        let (hb, mb) = heavy_matrix(b);
        let mut pairs = Vec::new();
        for (i, &u) in ha.iter().enumerate() {
            for (j, &v) in hb.iter().enumerate() {
                let (x, y) = (a.atom(u), b.atom(v));
                if x.element == y.element && x.aromatic == y.aromatic {
                    pairs.push((i, j));
                }
            }
        }
        let n = pairs.len();
        let mut c_adj = vec![BitSet::new(n); n];
        let mut d_adj = vec![BitSet::new(n); n];
        for p in 0..n {
            let (u1, v1) = pairs[p];
            for q in (p + 1)..n {
                let (u2, v2) = pairs[q];
                if u1 == u2 || v1 == v2 {
                    continue;
                }
                let (ea, eb) = (ma[u1][u2], mb[v1][v2]);
                if ea != 0 && ea == eb {
                    c_adj[p].insert(q);
                    c_adj[q].insert(p);
                } else if ea == 0 && eb == 0 {
                    d_adj[p].insert(q);
                    d_adj[q].insert(p);
                }
            }
        }
        ProductGraph {
            pairs,
            c_adj,
            d_adj,
            na: ha.len(),
            nb: hb.len(),
        }
    }
}

struct Search<'g> {
    g: &'g ProductGraph,
    best: usize,
    nodes: u64,
    deadline: Option<Instant>,
    timed_out: bool,
    seen_a: Vec<bool>,
    seen_b: Vec<bool>,
}

impl Search<'_> {
    /// Upper bound on atoms still matchable from `cand`.
    fn bound(&mut self, cand: &BitSet) -> usize {
        self.seen_a.iter_mut().for_each(|x| *x = false);
        self.seen_b.iter_mut().for_each(|x| *x = false);
        let (mut ca, mut cb) = (0, 0);
        for p in cand.iter() {
            let (u, v) = self.g.pairs[p];
            if !self.seen_a[u] {
                self.seen_a[u] = true;
                ca += 1;
            }
            if !self.seen_b[v] {
                self.seen_b[v] = true;
                cb += 1;
            }
        }
        ca.min(cb)
    }

    fn expand(&mut self, size: usize, mut frontier: BitSet, mut detached: BitSet) {
        self.nodes += 1;
        if self.nodes % 1024 == 0 {
            if let Some(deadline) = self.deadline {
                if Instant::now() > deadline {
                    self.timed_out = true;
                }
            }
        }
        if self.timed_out {
            return;
        }
        if size > self.best {
            self.best = size;
        }
        loop {
            if frontier.is_empty() {
                return;
            }
            let mut cand = frontier.clone();
            cand.or_assign(&detached);
            if size + self.bound(&cand) <= self.best {
                return;
            }
            let v = frontier.iter().next().expect("non-empty frontier");
            frontier.remove(v);

            let mut next_frontier = frontier.and(&self.g.c_adj[v]);
            next_frontier.or_assign(&frontier.and(&self.g.d_adj[v]));
            next_frontier.or_assign(&detached.and(&self.g.c_adj[v]));
            let next_detached = detached.and(&self.g.d_adj[v]);
            self.expand(size + 1, next_frontier, next_detached);
            if self.timed_out {
                return;
            }
            // v is excluded from the remaining siblings: every clique
            // containing it was covered by the recursive call.
            detached.remove(v);
        }
    }
}

/// Size of the maximum common connected induced subgraph over heavy atoms.
///
/// `budget = None` runs to completion.
pub fn maximum_common_subgraph(a: &MolGraph, b: &MolGraph, budget: Option<Duration>) -> McsResult {
    let g = ProductGraph::build(a, b);
    let n = g.pairs.len();
    let mut search = Search {
        g: &g,
        best: 0,
        nodes: 0,
        deadline: budget.map(|d| Instant::now() + d),
        timed_out: false,
        seen_a: vec![false; g.na],
        seen_b: vec![false; g.nb],
    };
    let limit = g.na.min(g.nb);
    for seed in 0..n {
        if search.best >= limit {
            break;
        }
        // Seeds below `seed` are excluded; their cliques were enumerated.
        let mut frontier = g.c_adj[seed].clone();
        let mut detached = g.d_adj[seed].clone();
        for earlier in 0..seed {
            frontier.remove(earlier);
            detached.remove(earlier);
        }
        search.expand(1, frontier, detached);
        if search.timed_out {
            break;
        }
    }
    McsResult {
        size: search.best,
        exact: !search.timed_out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn mcs(a: &str, b: &str) -> usize {
        let r = maximum_common_subgraph(&parse_smiles(a).unwrap(), &parse_smiles(b).unwrap(), None);
        assert!(r.exact);
        r.size
    }

    #[test]
    fn small_cases() {
        assert_eq!(mcs("CC", "CCO"), 2);
        assert_eq!(mcs("CCO", "CCO"), 3);
        assert_eq!(mcs("C", "N"), 0);
        assert_eq!(mcs("c1ccccc1", "c1ccccc1O"), 6);
        assert_eq!(mcs("c1ccccc1", "C1CCCCC1"), 0);
        // induced: the ring closure bond prevents matching the whole chain
        assert_eq!(mcs("CCCC", "C1CCC1"), 3);
        // connected: the two carbons of C.C do not form one subgraph
        assert_eq!(mcs("C.C", "CC"), 1);
        assert_eq!(mcs("CC=O", "CCO"), 2);
    }

    #[test]
    fn symmetric() {
        let pairs = [
            ("CC(=O)Nc1ccc(O)cc1", "CC(=O)Nc1ccccc1"),
            ("c1ccc2ccccc2c1", "c1ccccc1CC"),
            ("OCCN(C)C", "NCCO"),
        ];
        for (a, b) in pairs {
            assert_eq!(mcs(a, b), mcs(b, a), "{a} / {b}");
        }
    }

    #[test]
    fn drug_like_pair_within_budget() {
        let a = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        let b = parse_smiles("CC(=O)Nc1ccc(OC)cc1").unwrap();
        let r = maximum_common_subgraph(&a, &b, Some(Duration::from_secs(1)));
        assert!(r.exact);
        assert_eq!(r.size, 11);
    }
}
