//! Fixtures shared by the benchmarks.

use sqrl_core::distance::MoleculeRecord;
use sqrl_core::molgraph::parse_smiles;

pub const DRUGS: [&str; 12] = [
    "CC(=O)Oc1ccccc1C(=O)O",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
    "CC(=O)Nc1ccc(O)cc1",
    "COc1ccc2[nH]cc(CCN(C)C)c2c1",
    "CN1CCC[C@H]1c1cccnc1",
    "O=C(O)c1ccccc1O",
    "Clc1ccc(cc1)C(c1ccccc1)N1CCNCC1",
    "CC1=C(C(=O)OC)C(c2ccccc2[N+](=O)[O-])C(C(=O)OC)=C(C)N1",
    "c1ccc2c(c1)ccc1ccccc12",
    "OC[C@H]1OC(O)[C@H](O)[C@@H](O)[C@@H]1O",
    "CCN(CC)C(=O)c1cccc(C)c1",
];

/// `n` molecules cycling through [`DRUGS`], each with a unique id.
pub fn records(n: usize) -> Vec<MoleculeRecord> {
    (0..n)
        .map(|k| {
            let smiles = DRUGS[k % DRUGS.len()];
            MoleculeRecord::new(format!("m{k}"), parse_smiles(smiles).expect("fixture parses"))
        })
        .collect()
}
