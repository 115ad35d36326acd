use std::collections::{HashMap, HashSet};
use std::time::Duration;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sqrl_core::distance::{DistanceMetric, MetricPoint, MoleculeRecord};
use sqrl_core::evaluation::{mae, spearman};
use sqrl_core::fingerprint::{
    morgan_environments, morgan_fingerprint, substructure_matches, FingerprintConfig, MatchBudget,
};
use sqrl_core::molgraph::{parse_query_smiles, parse_smiles};
use sqrl_core::pairing::{pairs_from_distances, CondensedDistances};
use sqrl_core::regressor::{Mlp, Trace};

/// A random acyclic molecule as element symbols and parent links.
#[derive(Debug, Clone)]
struct Tree {
    symbols: Vec<&'static str>,
    edges: Vec<(usize, usize)>,
}

fn random_tree(seed: u64, max_atoms: usize) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_atoms);
    let mut symbols = Vec::with_capacity(n);
    let mut degree = Vec::with_capacity(n);
    let mut edges = Vec::new();
    for k in 0..n {
        let symbol = *["C", "C", "C", "N", "O", "Cl"].choose(&mut rng).unwrap();
        if k > 0 {
            let open: Vec<usize> = (0..k).filter(|&p| degree[p] < capacity(symbols[p])).collect();
            if open.is_empty() || capacity(symbol) == 0 {
                break;
            }
            let parent = *open.choose(&mut rng).unwrap();
            degree[parent] += 1;
            edges.push((parent, k));
            degree.push(1);
        } else {
            degree.push(0);
        }
        symbols.push(symbol);
    }
    Tree { symbols, edges }
}

fn capacity(symbol: &str) -> usize {
    match symbol {
        "C" => 4,
        "N" => 3,
        "O" => 2,
        _ => 1,
    }
}

impl Tree {
    /// SMILES rooted at `root` with children visited in a shuffled order.
    fn write(&self, root: usize, rng: &mut ChaCha8Rng) -> String {
        let mut adj = vec![Vec::new(); self.symbols.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut out = String::new();
        self.emit(root, usize::MAX, &adj, rng, &mut out);
        out
    }

    fn emit(&self, atom: usize, parent: usize, adj: &[Vec<usize>], rng: &mut ChaCha8Rng, out: &mut String) {
        out.push_str(self.symbols[atom]);
        let mut children: Vec<usize> = adj[atom].iter().copied().filter(|&c| c != parent).collect();
        children.shuffle(rng);
        let last = children.len().saturating_sub(1);
        for (k, &c) in children.iter().enumerate() {
            if k < last {
                out.push('(');
                self.emit(c, atom, adj, rng, out);
                out.push(')');
            } else {
                self.emit(c, atom, adj, rng, out);
            }
        }
    }

    fn canonical(&self) -> String {
        self.write(0, &mut ChaCha8Rng::seed_from_u64(0))
    }
}

fn record(id: usize, smiles: &str) -> MoleculeRecord {
    MoleculeRecord::new(id.to_string(), parse_smiles(smiles).unwrap())
}

fn line_points(xs: &[f64]) -> Vec<MetricPoint> {
    xs.iter().map(|&x| MetricPoint::Vector(vec![x])).collect()
}

fn line_metric() -> DistanceMetric {
    use sqrl_core::distance::EmbeddingTable;
    let table = EmbeddingTable::new(1, vec![("x".into(), vec![0.0])]).unwrap();
    DistanceMetric::embedding_euclidean(std::sync::Arc::new(table))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fingerprint_ignores_atom_order(seed in any::<u64>(), radius in 0u32..4) {
        let tree = random_tree(seed, 14);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let root = rng.gen_range(0..tree.symbols.len());
        let a = tree.canonical();
        let b = tree.write(root, &mut rng);
        let cfg = FingerprintConfig { radius, ..FingerprintConfig::default() };
        let fa = morgan_fingerprint(&parse_smiles(&a).unwrap(), &cfg).unwrap();
        let fb = morgan_fingerprint(&parse_smiles(&b).unwrap(), &cfg).unwrap();
        prop_assert_eq!(fa, fb, "{} vs {}", a, b);
    }

    #[test]
    fn larger_radius_keeps_every_environment(seed in any::<u64>(), radius in 0u32..4) {
        let mol = parse_smiles(&random_tree(seed, 14).canonical()).unwrap();
        let ids = |r: u32| -> HashSet<u64> {
            let cfg = FingerprintConfig { radius: r, ..FingerprintConfig::default() };
            morgan_environments(&mol, &cfg).into_iter().map(|e| e.identifier).collect()
        };
        prop_assert!(ids(radius).is_subset(&ids(radius + 1)));
    }

    #[test]
    fn molecule_contains_itself(seed in any::<u64>()) {
        let smiles = random_tree(seed, 10).canonical();
        let query = parse_query_smiles(&smiles).unwrap();
        let target = parse_smiles(&smiles).unwrap();
        let n = substructure_matches(&query, &target, MatchBudget::default()).unwrap();
        prop_assert!(n >= 1);
    }

    #[test]
    fn jaccard_metrics_are_bounded_symmetric_and_triangular(seeds in prop::array::uniform3(any::<u64>())) {
        let recs: Vec<MoleculeRecord> =
            seeds.iter().enumerate().map(|(k, &s)| record(k, &random_tree(s, 12).canonical())).collect();
        let cfg = FingerprintConfig::default();
        for metric in [DistanceMetric::tanimoto_binary(cfg).unwrap(), DistanceMetric::tanimoto_count(cfg).unwrap()] {
            let p = metric.prepare_all(&recs).unwrap();
            let d = |i: usize, j: usize| metric.measure(&p[i], &p[j]).unwrap().value;
            for i in 0..3 {
                prop_assert_eq!(d(i, i), 0.0);
                for j in 0..3 {
                    prop_assert!((0.0..=1.0).contains(&d(i, j)));
                    prop_assert_eq!(d(i, j), d(j, i));
                    for k in 0..3 {
                        prop_assert!(d(i, k) <= d(i, j) + d(j, k) + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn mcs_distance_is_symmetric(a in any::<u64>(), b in any::<u64>()) {
        let metric = DistanceMetric::mcs(Some(Duration::from_secs(5)));
        let ra = record(0, &random_tree(a, 7).canonical());
        let rb = record(1, &random_tree(b, 7).canonical());
        let ab = metric.distance(&ra, &rb).unwrap();
        let ba = metric.distance(&rb, &ra).unwrap();
        prop_assert!(!ab.approximate && !ba.approximate);
        prop_assert_eq!(ab.value, ba.value);
        prop_assert!((0.0..=1.0).contains(&ab.value));
    }

    #[test]
    fn pairs_are_antisymmetric_and_grow_with_alpha(
        xs in prop::collection::vec(-5.0f64..5.0, 2..30),
        ys in prop::collection::vec(-10.0f64..10.0, 30),
        alpha in 0.01f64..4.0,
    ) {
        let n = xs.len();
        let y = &ys[..n];
        let metric = line_metric();
        let dist = CondensedDistances::compute(&metric, &line_points(&xs)).unwrap();
        let small = pairs_from_distances(&dist, y, alpha, "line").unwrap();
        let large = pairs_from_distances(&dist, y, alpha * 2.0, "line").unwrap();
        let lookup: HashMap<(usize, usize), (f64, f64)> =
            small.pairs.iter().map(|p| ((p.i, p.j), (p.dist, p.delta_y))).collect();
        for p in &small.pairs {
            prop_assert!(p.i != p.j);
            prop_assert!(p.dist <= alpha);
            let (dist_back, delta_back) = lookup[&(p.j, p.i)];
            prop_assert_eq!(dist_back, p.dist);
            prop_assert_eq!(delta_back, -p.delta_y);
        }
        let large_set: HashSet<(usize, usize)> = large.pairs.iter().map(|p| (p.i, p.j)).collect();
        prop_assert!(lookup.keys().all(|k| large_set.contains(k)));
        let everything = pairs_from_distances(&dist, y, 100.0, "line").unwrap();
        prop_assert_eq!(everything.len(), n * (n - 1));
    }

    #[test]
    fn spearman_ignores_monotone_transforms(
        t in prop::collection::vec(-100.0f64..100.0, 3..40),
        noise in prop::collection::vec(-50.0f64..50.0, 40),
    ) {
        let p: Vec<f64> = t.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let q: Vec<f64> = p.iter().map(|v| (v / 40.0).exp() * 3.0 + 1.0).collect();
        let a = spearman(&t, &p).unwrap();
        let b = spearman(&t, &q).unwrap();
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn mae_ignores_common_shift(
        t in prop::collection::vec(-100.0f64..100.0, 1..40),
        noise in prop::collection::vec(-5.0f64..5.0, 40),
        shift in -1e3f64..1e3,
    ) {
        let p: Vec<f64> = t.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let ts: Vec<f64> = t.iter().map(|v| v + shift).collect();
        let ps: Vec<f64> = p.iter().map(|v| v + shift).collect();
        prop_assert!((mae(&t, &p).unwrap() - mae(&ts, &ps).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn training_forward_without_dropout_matches_inference(seed in any::<u64>(), dim in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::new(dim, &[8, 4], &mut rng);
        let mut input = Vec::new();
        for k in 0..dim as u32 {
            if rng.gen_bool(0.5) {
                input.push((k, rng.gen_range(-2.0..2.0)));
            }
        }
        let mut trace = Trace::default();
        let trained = net.forward_train(&input, 0.0, &mut rng, &mut trace);
        prop_assert_eq!(trained, net.forward(&input));
    }
}
