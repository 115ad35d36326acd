//! Seeded synthetic benchmark: congeneric series built from scaffolds and
//! substituents, plus a tail of unrelated singletons.
//!
//! Activity is a smooth nonlinear function of substructure counts with a
//! per-series offset. A small fraction of molecules receive a large shift,
//! which creates activity cliffs against their close analogs.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sqrl_core::distance::jaccard_sets;
use sqrl_core::fingerprint::{
    default_library, morgan_fingerprint, substructure_counts, FingerprintConfig, MatchBudget,
};
use sqrl_core::molgraph::{parse_smiles, MolGraph};

const SCAFFOLDS: &[&str] = &[
    "c1cc{1}ccc1{2}",
    "c1nc{1}ccc1{2}",
    "C1CN{1}CCC1{2}",
    "c1sc{1}cc1{2}",
    "c1cc{1}ccc1-c1ccc{2}cc1",
    "O=C(Nc1ccc{1}cc1)c1ccc{2}cc1",
    "c1cnc{1}nc1{2}",
    "c1ccc2c{1}cccc2c1{2}",
    "C{1}C(=O)N1CCC{2}CC1",
    "c1ccc(cc1{1})S(=O)(=O)N{2}",
    "c1coc{1}c1C(=O)N{2}",
    "N1CCN{1}CC1c1ccc{2}cc1",
];

const SUBSTITUENTS: &[&str] = &[
    "",
    "C",
    "CC",
    "O",
    "OC",
    "N",
    "F",
    "Cl",
    "Br",
    "C(=O)O",
    "C(=O)N",
    "C#N",
    "C(F)(F)F",
    "N(C)C",
    "S(=O)(=O)N",
    "c9ccccc9",
    "C9CC9",
    "OCC",
    "NC(=O)C",
    "C(C)C",
];

const FRAGMENTS: &[&str] = &[
    "c1ccncc1",
    "C1CCOCC1",
    "C(=O)N",
    "S(=O)(=O)",
    "c1ccc2ccccc2c1",
    "C1CCNC1",
    "OCCO",
    "c1cocc1",
    "N1CCNCC1",
    "CC(C)C",
    "c1ccsc1",
    "C1CCCCC1",
    "C(=O)O",
    "c1cnccn1",
    "CCCC",
    "C#CC",
    "c1ccc2[nH]ccc2c1",
    "C1CC2CCC1C2",
    "OC(=O)CC",
    "c1nccs1",
    "N=C(N)N",
    "C1COC1",
    "c1ccoc1",
    "P(=O)(O)O",
    "C1CCC2(CC1)CC2",
    "CN(C)CC",
    "c1cc2OCOc2cc1",
    "C(Cl)(Cl)",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub molecules: usize,
    pub seed: u64,
    pub test_fraction: f64,
    /// Share of molecules assembled from random fragments instead of a scaffold.
    pub singleton_fraction: f64,
    /// Share of molecules whose activity is shifted by `cliff_shift`.
    pub cliff_fraction: f64,
    pub cliff_shift: f64,
    pub noise: f64,
    /// Correlation between the substituent effects of different series.
    pub sar_transfer: f64,
    /// A molecule is a cliff if some other molecule within this Tanimoto
    /// distance differs in activity by at least `cliff_gap`.
    pub cliff_distance: f64,
    pub cliff_gap: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            molecules: 500,
            seed: 0,
            test_fraction: 0.2,
            singleton_fraction: 0.2,
            cliff_fraction: 0.03,
            cliff_shift: 1.5,
            noise: 0.1,
            sar_transfer: 0.6,
            cliff_distance: 0.4,
            cliff_gap: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRow {
    pub id: String,
    pub smiles: String,
    pub y: f64,
    pub test: bool,
    pub is_cliff: bool,
}

fn decorate(template: &str, r1: &str, r2: &str) -> String {
    let slot = |s: &str| if s.is_empty() { String::new() } else { format!("({s})") };
    template.replace("{1}", &slot(r1)).replace("{2}", &slot(r2))
}

struct Candidate {
    smiles: String,
    graph: MolGraph,
    series: Option<usize>,
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; one draw per call keeps the stream layout simple.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generates the benchmark for `cfg`. Identical configs give identical rows.
pub fn synthesize(cfg: &SynthConfig) -> Vec<SynthRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fp_cfg = FingerprintConfig::default();
    let mut seen = HashSet::new();
    let mut pool = Vec::new();

    let keep = |smiles: String, series, seen: &mut HashSet<Vec<u32>>, pool: &mut Vec<Candidate>| {
        let Ok(graph) = parse_smiles(&smiles) else {
            return;
        };
        let key = morgan_fingerprint(&graph, &FingerprintConfig { radius: 3, ..fp_cfg })
            .expect("valid fingerprint config")
            .values()
            .to_vec();
        if seen.insert(key) {
            pool.push(Candidate { smiles, graph, series });
        }
    };

    let n_single = ((cfg.molecules as f64) * cfg.singleton_fraction).round() as usize;
    let n_series = cfg.molecules.saturating_sub(n_single);

    let mut combos: Vec<(usize, usize, usize)> = (0..SCAFFOLDS.len())
        .flat_map(|s| (0..SUBSTITUENTS.len()).flat_map(move |a| (0..SUBSTITUENTS.len()).map(move |b| (s, a, b))))
        .collect();
    combos.shuffle(&mut rng);
    for (s, a, b) in combos {
        if pool.len() >= n_series {
            break;
        }
        keep(
            decorate(SCAFFOLDS[s], SUBSTITUENTS[a], SUBSTITUENTS[b]),
            Some(s),
            &mut seen,
            &mut pool,
        );
    }

    let mut attempts = 0;
    while pool.len() < cfg.molecules && attempts < 100 * cfg.molecules.max(1) {
        attempts += 1;
        let parts = rng.gen_range(3..=5);
        let smiles: String = (0..parts).map(|_| *FRAGMENTS.choose(&mut rng).unwrap()).collect();
        keep(smiles, None, &mut seen, &mut pool);
    }

    let lib = default_library();
    let counts: Vec<Vec<f64>> = pool
        .iter()
        .map(|c| {
            substructure_counts(&c.graph, &lib, MatchBudget::default())
                .into_iter()
                .map(|r| r.unwrap_or(0) as f64)
                .collect()
        })
        .collect();

    // Each series s has its own projections W_s = ρ W + √(1 − ρ²) V_s, so
    // substituent effects transfer only partly between series; singletons
    // use W. With z = standardized projections of c:
    // y = 6 + offset(s) + Σ a_m tanh(z_m) + noise
    const PROJECTIONS: usize = 6;
    let dim = lib.len();
    let rho = cfg.sar_transfer;
    let offsets: Vec<f64> = (0..SCAFFOLDS.len()).map(|_| 0.8 * normal(&mut rng)).collect();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..PROJECTIONS)
            .map(|_| (0..dim).map(|_| normal(rng)).collect())
            .collect()
    };
    let shared = draw(&mut rng);
    let per_series: Vec<Vec<Vec<f64>>> = (0..SCAFFOLDS.len())
        .map(|_| {
            let own = draw(&mut rng);
            shared
                .iter()
                .zip(&own)
                .map(|(w, v)| {
                    w.iter()
                        .zip(v)
                        .map(|(a, b)| rho * a + (1.0 - rho * rho).sqrt() * b)
                        .collect()
                })
                .collect()
        })
        .collect();
    let amps: Vec<f64> = (0..PROJECTIONS).map(|_| 0.4 + 0.6 * rng.gen::<f64>()).collect();
    let mut z: Vec<Vec<f64>> = pool
        .iter()
        .zip(&counts)
        .map(|(cand, c)| {
            let w = cand.series.map_or(&shared, |s| &per_series[s]);
            w.iter().map(|w| w.iter().zip(c).map(|(a, b)| a * b).sum()).collect()
        })
        .collect();
    let rows = z.len().max(1) as f64;
    for m in 0..PROJECTIONS {
        let mean = z.iter().map(|p| p[m]).sum::<f64>() / rows;
        let sd = (z.iter().map(|p| (p[m] - mean).powi(2)).sum::<f64>() / rows)
            .sqrt()
            .max(1e-9);
        for p in z.iter_mut() {
            p[m] = (p[m] - mean) / sd;
        }
    }
    let mut y: Vec<f64> = pool
        .iter()
        .zip(&z)
        .map(|(c, p)| {
            let base = c.series.map_or(0.0, |s| offsets[s]);
            let smooth: f64 = (0..PROJECTIONS).map(|m| amps[m] * p[m].tanh()).sum();
            6.0 + base + smooth + cfg.noise * normal(&mut rng)
        })
        .collect();

    let n_cliff = ((pool.len() as f64) * cfg.cliff_fraction).round() as usize;
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng);
    for &m in order.iter().take(n_cliff) {
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        y[m] += sign * cfg.cliff_shift;
    }

    let bits: Vec<Vec<u32>> = pool
        .iter()
        .map(|c| {
            morgan_fingerprint(&c.graph, &fp_cfg)
                .expect("valid fingerprint config")
                .support()
                .to_vec()
        })
        .collect();
    let n = pool.len();
    let mut is_cliff = vec![false; n];
    for i in 0..n {
        for j in i + 1..n {
            if (y[i] - y[j]).abs() >= cfg.cliff_gap && jaccard_sets(&bits[i], &bits[j]) <= cfg.cliff_distance {
                is_cliff[i] = true;
                is_cliff[j] = true;
            }
        }
    }

    let n_test = ((n as f64) * cfg.test_fraction).round() as usize;
    order.shuffle(&mut rng);
    let mut test = vec![false; n];
    for &m in order.iter().take(n_test) {
        test[m] = true;
    }

    pool.into_iter()
        .enumerate()
        .map(|(k, c)| SynthRow {
            id: format!("syn{k:04}"),
            smiles: c.smiles,
            y: y[k],
            test: test[k],
            is_cliff: is_cliff[k],
        })
        .collect()
}

/// Writes rows in the ingest schema `id,smiles,y,split,is_cliff`.
pub fn write_csv<W: Write>(rows: &[SynthRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "smiles", "y", "split", "is_cliff"])?;
    for r in rows {
        w.write_record([
            r.id.as_str(),
            r.smiles.as_str(),
            &r.y.to_string(),
            if r.test { "test" } else { "train" },
            if r.is_cliff { "true" } else { "false" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_parse_and_are_unique() {
        let rows = synthesize(&SynthConfig {
            molecules: 120,
            ..SynthConfig::default()
        });
        assert_eq!(rows.len(), 120);
        let ids: HashSet<_> = rows.iter().map(|r| &r.id).collect();
        assert_eq!(ids.len(), rows.len());
        assert!(rows.iter().all(|r| parse_smiles(&r.smiles).is_ok() && r.y.is_finite()));
        assert_eq!(rows.iter().filter(|r| r.test).count(), 24);
    }

    #[test]
    fn seeded() {
        let cfg = SynthConfig {
            molecules: 60,
            seed: 9,
            ..SynthConfig::default()
        };
        assert_eq!(synthesize(&cfg), synthesize(&cfg));
        assert_ne!(
            synthesize(&cfg),
            synthesize(&SynthConfig {
                seed: 10,
                ..cfg.clone()
            })
        );
    }
}
