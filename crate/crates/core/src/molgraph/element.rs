use std::fmt;

use serde::{Deserialize, Serialize};

const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",
    "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce",
    "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir",
    "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc",
    "Lv", "Ts", "Og",
];

/// A periodic-table element, stored as its atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Element(u8);

impl Element {
    pub const H: Element = Element(1);
    pub const B: Element = Element(5);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);
    pub const F: Element = Element(9);
    pub const P: Element = Element(15);
    pub const S: Element = Element(16);
    pub const CL: Element = Element(17);
    pub const BR: Element = Element(35);
    pub const I: Element = Element(53);

    pub fn from_atomic_number(z: u8) -> Option<Element> {
        (1..=118).contains(&z).then_some(Element(z))
    }

    /// Looks up a case-sensitive element symbol such as `"Cl"`.
    pub fn from_symbol(symbol: &str) -> Option<Element> {
        SYMBOLS.iter().position(|s| *s == symbol).map(|i| Element(i as u8 + 1))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn symbol(self) -> &'static str {
        SYMBOLS[self.0 as usize - 1]
    }

    pub fn is_hydrogen(self) -> bool {
        self.0 == 1
    }

    /// Allowed valences used for the implicit-hydrogen and valence checks.
    ///
    /// Charged atoms are mapped onto their isoelectronic neutral neighbor
    /// (N+ behaves like C, O- like F). `None` means the element is not
    /// valence-checked.
    pub fn allowed_valences(self, charge: i8) -> Option<&'static [u8]> {
        match (self.0, charge) {
            (5, 0) => Some(&[3]),
            (5, -1) => Some(&[4]),
            (6, 0) => Some(&[4]),
            (6, -1) | (6, 1) => Some(&[3]),
            (7, 0) => Some(&[3, 5]),
            (7, 1) => Some(&[4]),
            (7, -1) => Some(&[2]),
            (8, 0) => Some(&[2]),
            (8, 1) => Some(&[3]),
            (8, -1) => Some(&[1]),
            (9, 0) | (17, 0) | (35, 0) | (53, 0) => Some(&[1]),
            (9, -1) | (17, -1) | (35, -1) | (53, -1) => Some(&[0]),
            (15, 0) => Some(&[3, 5]),
            (15, 1) => Some(&[4]),
            (15, -1) => Some(&[2, 4]),
            (16, 0) => Some(&[2, 4, 6]),
            (16, 1) => Some(&[3, 5]),
            (16, -1) => Some(&[1, 3, 5]),
            _ => None,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}
