//! SMILES reader.
//!
//! Supports the organic subset, bracket atoms (isotope, chirality, hydrogen
//! count, charge, atom class), branches, ring closures including `%nn`, the
//! bond symbols `- = # :` and the directional bonds `/ \` (read as single;
//! the stereo information is dropped), and `.` component separators.
//! Aromaticity is taken from the input as written.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{ring_bonds, Atom, Bond, BondOrder, Chirality, Element, MolGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmilesErrorKind {
    Empty,
    UnexpectedCharacter(char),
    UnknownElement(String),
    UnclosedBracket,
    MalformedBracketAtom,
    UnbalancedParenthesis,
    EmptyBranch,
    UnmatchedRingClosure(u32),
    ConflictingRingBond(u32),
    SelfBond,
    DuplicateBond,
    DanglingBond,
    UnsupportedChirality,
    AromaticOutsideRing,
    NoHeavyAtoms,
    Valence { element: Element, bond_sum: u8 },
}

impl fmt::Display for SmilesErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmilesErrorKind::Empty => write!(f, "empty SMILES"),
            SmilesErrorKind::UnexpectedCharacter(c) => write!(f, "unexpected character {c:?}"),
            SmilesErrorKind::UnknownElement(s) => write!(f, "unknown element {s:?}"),
            SmilesErrorKind::UnclosedBracket => write!(f, "unclosed bracket atom"),
            SmilesErrorKind::MalformedBracketAtom => write!(f, "malformed bracket atom"),
            SmilesErrorKind::UnbalancedParenthesis => write!(f, "unbalanced parenthesis"),
            SmilesErrorKind::EmptyBranch => write!(f, "empty branch"),
            SmilesErrorKind::UnmatchedRingClosure(n) => write!(f, "unmatched ring closure {n}"),
            SmilesErrorKind::ConflictingRingBond(n) => {
                write!(f, "conflicting bond orders on ring closure {n}")
            }
            SmilesErrorKind::SelfBond => write!(f, "ring closure bonds an atom to itself"),
            SmilesErrorKind::DuplicateBond => write!(f, "duplicate bond between the same atoms"),
            SmilesErrorKind::DanglingBond => write!(f, "bond symbol without a following atom"),
            SmilesErrorKind::UnsupportedChirality => write!(f, "unsupported chirality class"),
            SmilesErrorKind::AromaticOutsideRing => write!(f, "aromatic atom outside any ring"),
            SmilesErrorKind::NoHeavyAtoms => write!(f, "molecule has no heavy atoms"),
            SmilesErrorKind::Valence { element, bond_sum } => {
                write!(f, "valence exceeded on {element} (bond order sum {bond_sum})")
            }
        }
    }
}

/// A parse or validation failure, located at a byte offset into the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct SmilesError {
    pub kind: SmilesErrorKind,
    pub offset: usize,
}

impl SmilesError {
    fn new(kind: SmilesErrorKind, offset: usize) -> SmilesError {
        SmilesError { kind, offset }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSymbol {
    Single,
    Double,
    Triple,
    Aromatic,
    Directional,
}

impl BondSymbol {
    fn order(self) -> BondOrder {
        match self {
            BondSymbol::Single | BondSymbol::Directional => BondOrder::Single,
            BondSymbol::Double => BondOrder::Double,
            BondSymbol::Triple => BondOrder::Triple,
            BondSymbol::Aromatic => BondOrder::Aromatic,
        }
    }
}

struct RawAtom {
    atom: Atom,
    bracket: bool,
    offset: usize,
}

struct RawBond {
    a: usize,
    b: usize,
    order: BondOrder,
    /// Written without a bond symbol between two aromatic atoms.
    implicit_aromatic: bool,
}

struct OpenRing {
    atom: usize,
    symbol: Option<BondSymbol>,
    offset: usize,
}

struct Parser<'a> {
    fragment: bool,
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<RawAtom>,
    bonds: Vec<RawBond>,
    rings: BTreeMap<u32, OpenRing>,
}

/// Parses a SMILES string into a validated [`MolGraph`].
pub fn parse_smiles(smiles: &str) -> Result<MolGraph, SmilesError> {
    parse(smiles, false)
}

/// Parses a substructure query. Unlike [`parse_smiles`], aromatic atoms
/// need not close a ring (`cO` is a valid query for an aromatic hydroxyl)
/// and unmarked bonds between aromatic atoms stay aromatic.
pub fn parse_query_smiles(smiles: &str) -> Result<MolGraph, SmilesError> {
    parse(smiles, true)
}

fn parse(smiles: &str, fragment: bool) -> Result<MolGraph, SmilesError> {
    if smiles.trim().is_empty() {
        return Err(SmilesError::new(SmilesErrorKind::Empty, 0));
    }
    let mut parser = Parser {
        fragment,
        src: smiles,
        bytes: smiles.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        rings: BTreeMap::new(),
    };
    parser.read_chain()?;
    parser.finish()
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn err<T>(&self, kind: SmilesErrorKind, offset: usize) -> Result<T, SmilesError> {
        Err(SmilesError::new(kind, offset))
    }

    fn read_chain(&mut self) -> Result<(), SmilesError> {
        let mut prev: Option<usize> = None;
        let mut pending: Option<(BondSymbol, usize)> = None;
        // (atom index to resume from, offset of the '(')
        let mut branches: Vec<(usize, usize)> = Vec::new();
        // true once a branch has seen at least one atom or ring closure
        let mut branch_used: Vec<bool> = Vec::new();

        while let Some(c) = self.peek() {
            let offset = self.pos;
            match c {
                b'(' => {
                    let Some(p) = prev else {
                        return self.err(SmilesErrorKind::UnbalancedParenthesis, offset);
                    };
                    if let Some((_, at)) = pending {
                        return self.err(SmilesErrorKind::DanglingBond, at);
                    }
                    branches.push((p, offset));
                    branch_used.push(false);
                    self.pos += 1;
                }
                b')' => {
                    let Some((resume, _)) = branches.pop() else {
                        return self.err(SmilesErrorKind::UnbalancedParenthesis, offset);
                    };
                    if let Some((_, at)) = pending {
                        return self.err(SmilesErrorKind::DanglingBond, at);
                    }
                    if !branch_used.pop().unwrap_or(true) {
                        return self.err(SmilesErrorKind::EmptyBranch, offset);
                    }
                    prev = Some(resume);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if prev.is_none() || pending.is_some() {
                        return self.err(SmilesErrorKind::UnexpectedCharacter(c as char), offset);
                    }
                    let symbol = match c {
                        b'-' => BondSymbol::Single,
                        b'=' => BondSymbol::Double,
                        b'#' => BondSymbol::Triple,
                        b':' => BondSymbol::Aromatic,
                        _ => BondSymbol::Directional,
                    };
                    pending = Some((symbol, offset));
                    self.pos += 1;
                }
                b'.' => {
                    if prev.is_none() {
                        return self.err(SmilesErrorKind::UnexpectedCharacter('.'), offset);
                    }
                    if let Some((_, at)) = pending {
                        return self.err(SmilesErrorKind::DanglingBond, at);
                    }
                    if !branches.is_empty() {
                        return self.err(SmilesErrorKind::UnexpectedCharacter('.'), offset);
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(p) = prev else {
                        return self.err(SmilesErrorKind::UnexpectedCharacter(c as char), offset);
                    };
                    let number = self.read_ring_number()?;
                    self.ring_closure(p, number, pending.take().map(|(s, _)| s), offset)?;
                    if let Some(used) = branch_used.last_mut() {
                        *used = true;
                    }
                }
                _ => {
                    let atom = self.read_atom()?;
                    let index = self.atoms.len();
                    self.atoms.push(atom);
                    if let Some(p) = prev {
                        let symbol = pending.take().map(|(s, _)| s);
                        self.add_bond(p, index, symbol, offset)?;
                    }
                    prev = Some(index);
                    if let Some(used) = branch_used.last_mut() {
                        *used = true;
                    }
                }
            }
        }

        if let Some((_, at)) = pending {
            return self.err(SmilesErrorKind::DanglingBond, at);
        }
        if let Some(&(_, at)) = branches.last() {
            return self.err(SmilesErrorKind::UnbalancedParenthesis, at);
        }
        if let Some((&number, open)) = self.rings.iter().next() {
            return self.err(SmilesErrorKind::UnmatchedRingClosure(number), open.offset);
        }
        Ok(())
    }

    fn read_ring_number(&mut self) -> Result<u32, SmilesError> {
        let offset = self.pos;
        if self.peek() == Some(b'%') {
            self.pos += 1;
            let digits: Vec<u8> = self.bytes[self.pos..]
                .iter()
                .take(2)
                .copied()
                .take_while(u8::is_ascii_digit)
                .collect();
            if digits.len() != 2 {
                return self.err(SmilesErrorKind::UnexpectedCharacter('%'), offset);
            }
            self.pos += 2;
            Ok(((digits[0] - b'0') * 10 + (digits[1] - b'0')) as u32)
        } else {
            let d = self.bytes[self.pos] - b'0';
            self.pos += 1;
            Ok(d as u32)
        }
    }

    fn ring_closure(
        &mut self,
        atom: usize,
        number: u32,
        symbol: Option<BondSymbol>,
        offset: usize,
    ) -> Result<(), SmilesError> {
        match self.rings.remove(&number) {
            None => {
                self.rings.insert(number, OpenRing { atom, symbol, offset });
                Ok(())
            }
            Some(open) => {
                let resolved = match (open.symbol, symbol) {
                    (Some(a), Some(b)) if a.order() != b.order() => {
                        return self.err(SmilesErrorKind::ConflictingRingBond(number), offset);
                    }
                    (Some(a), _) => Some(a),
                    (None, b) => b,
                };
                if open.atom == atom {
                    return self.err(SmilesErrorKind::SelfBond, offset);
                }
                self.add_bond(open.atom, atom, resolved, offset)
            }
        }
    }

    fn add_bond(&mut self, a: usize, b: usize, symbol: Option<BondSymbol>, offset: usize) -> Result<(), SmilesError> {
        let duplicate = self
            .bonds
            .iter()
            .any(|bond| (bond.a == a && bond.b == b) || (bond.a == b && bond.b == a));
        if duplicate {
            return self.err(SmilesErrorKind::DuplicateBond, offset);
        }
        let both_aromatic = self.atoms[a].atom.aromatic && self.atoms[b].atom.aromatic;
        let (order, implicit_aromatic) = match symbol {
            Some(s) => (s.order(), false),
            None if both_aromatic => (BondOrder::Aromatic, true),
            None => (BondOrder::Single, false),
        };
        self.bonds.push(RawBond {
            a,
            b,
            order,
            implicit_aromatic,
        });
        Ok(())
    }

    fn read_atom(&mut self) -> Result<RawAtom, SmilesError> {
        let offset = self.pos;
        let c = self.bytes[self.pos];
        if c == b'[' {
            return self.read_bracket_atom();
        }
        let (element, aromatic, len) = match c {
            b'B' if self.bytes.get(self.pos + 1) == Some(&b'r') => (Element::BR, false, 2),
            b'C' if self.bytes.get(self.pos + 1) == Some(&b'l') => (Element::CL, false, 2),
            b'B' => (Element::B, false, 1),
            b'C' => (Element::C, false, 1),
            b'N' => (Element::N, false, 1),
            b'O' => (Element::O, false, 1),
            b'P' => (Element::P, false, 1),
            b'S' => (Element::S, false, 1),
            b'F' => (Element::F, false, 1),
            b'I' => (Element::I, false, 1),
            b'b' => (Element::B, true, 1),
            b'c' => (Element::C, true, 1),
            b'n' => (Element::N, true, 1),
            b'o' => (Element::O, true, 1),
            b'p' => (Element::P, true, 1),
            b's' => (Element::S, true, 1),
            b'A'..=b'Z' | b'a'..=b'z' => {
                let end = (self.pos + 2).min(self.bytes.len());
                let text = self.src.get(self.pos..end).unwrap_or("?").to_string();
                return self.err(SmilesErrorKind::UnknownElement(text), offset);
            }
            _ => {
                let ch = self.src[self.pos..].chars().next().unwrap_or('?');
                return self.err(SmilesErrorKind::UnexpectedCharacter(ch), offset);
            }
        };
        self.pos += len;
        Ok(RawAtom {
            atom: new_atom(element, aromatic),
            bracket: false,
            offset,
        })
    }

    fn read_bracket_atom(&mut self) -> Result<RawAtom, SmilesError> {
        let open = self.pos;
        let Some(close_rel) = self.bytes[open..].iter().position(|&b| b == b']') else {
            return self.err(SmilesErrorKind::UnclosedBracket, open);
        };
        let close = open + close_rel;
        let body = &self.src[open + 1..close];
        let base = open + 1;
        let b = body.as_bytes();
        let mut i = 0usize;

        let digits_at = |i: usize| b[i..].iter().take_while(|c| c.is_ascii_digit()).count();

        let n = digits_at(i);
        let isotope = if n > 0 {
            let v: u16 = body[i..i + n]
                .parse()
                .map_err(|_| SmilesError::new(SmilesErrorKind::MalformedBracketAtom, base + i))?;
            i += n;
            Some(v)
        } else {
            None
        };

        let (element, aromatic, len) = bracket_symbol(&body[i..]).ok_or_else(|| {
            let text: String = body[i..].chars().take_while(|c| c.is_ascii_alphabetic()).collect();
            SmilesError::new(SmilesErrorKind::UnknownElement(text), base + i)
        })?;
        i += len;

        let mut chirality = Chirality::None;
        if i < b.len() && b[i] == b'@' {
            let at = i;
            i += 1;
            if i < b.len() && b[i] == b'@' {
                chirality = Chirality::Clockwise;
                i += 1;
            } else if body[i..].starts_with("TH1") {
                chirality = Chirality::CounterClockwise;
                i += 3;
            } else if body[i..].starts_with("TH2") {
                chirality = Chirality::Clockwise;
                i += 3;
            } else if ["TH", "AL", "SP", "TB", "OH"]
                .iter()
                .any(|class| body[i..].starts_with(class))
            {
                return self.err(SmilesErrorKind::UnsupportedChirality, base + at);
            } else {
                chirality = Chirality::CounterClockwise;
            }
        }

        let mut h_count = 0u8;
        if i < b.len() && b[i] == b'H' {
            i += 1;
            let n = digits_at(i);
            h_count = if n > 0 {
                let v = body[i..i + n]
                    .parse()
                    .map_err(|_| SmilesError::new(SmilesErrorKind::MalformedBracketAtom, base + i))?;
                i += n;
                v
            } else {
                1
            };
        }

        let mut charge: i32 = 0;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            let sign = b[i];
            let unit = if sign == b'+' { 1 } else { -1 };
            i += 1;
            let n = digits_at(i);
            if n > 0 {
                let v: i32 = body[i..i + n]
                    .parse()
                    .map_err(|_| SmilesError::new(SmilesErrorKind::MalformedBracketAtom, base + i))?;
                charge = unit * v;
                i += n;
            } else {
                charge = unit;
                while i < b.len() && b[i] == sign {
                    charge += unit;
                    i += 1;
                }
            }
        }
        if !(-15..=15).contains(&charge) {
            return self.err(SmilesErrorKind::MalformedBracketAtom, base);
        }

        if i < b.len() && b[i] == b':' {
            i += 1;
            let n = digits_at(i);
            if n == 0 {
                return self.err(SmilesErrorKind::MalformedBracketAtom, base + i);
            }
            i += n;
        }

        if i != b.len() {
            return self.err(SmilesErrorKind::MalformedBracketAtom, base + i);
        }

        self.pos = close + 1;
        let mut atom = new_atom(element, aromatic);
        atom.isotope = isotope;
        atom.explicit_h_count = Some(h_count);
        atom.formal_charge = charge as i8;
        atom.chirality = chirality;
        Ok(RawAtom {
            atom,
            bracket: true,
            offset: open,
        })
    }

    fn finish(self) -> Result<MolGraph, SmilesError> {
        let Parser {
            fragment,
            src,
            atoms: raw_atoms,
            bonds: raw_bonds,
            ..
        } = self;

        let mut bonds: Vec<Bond> = raw_bonds
            .iter()
            .map(|rb| Bond {
                endpoints: (rb.a, rb.b),
                order: rb.order,
            })
            .collect();
        let in_ring = ring_bonds(raw_atoms.len(), &bonds);
        // An unmarked bond joining two aromatic atoms outside any ring
        // (e.g. the biaryl bond in c1ccccc1c1ccccc1) is single.
        for (k, rb) in raw_bonds.iter().enumerate() {
            if rb.implicit_aromatic && !in_ring[k] && !fragment {
                bonds[k].order = BondOrder::Single;
            }
        }

        let mut atoms: Vec<Atom> = raw_atoms.iter().map(|r| r.atom.clone()).collect();
        let mut bond_sum = vec![0u8; atoms.len()];
        for (k, bond) in bonds.iter().enumerate() {
            let (a, b) = bond.endpoints;
            let v = bond.order.valence_contribution();
            bond_sum[a] = bond_sum[a].saturating_add(v);
            bond_sum[b] = bond_sum[b].saturating_add(v);
            atoms[a].degree += 1;
            atoms[b].degree += 1;
            if in_ring[k] {
                atoms[a].in_ring = true;
                atoms[b].in_ring = true;
            }
        }

        for (index, raw) in raw_atoms.iter().enumerate() {
            let atom = &mut atoms[index];
            if atom.aromatic && !atom.in_ring && !fragment {
                return Err(SmilesError::new(SmilesErrorKind::AromaticOutsideRing, raw.offset));
            }
            let sum = bond_sum[index];
            let valence_error = || {
                SmilesError::new(
                    SmilesErrorKind::Valence {
                        element: atom.element,
                        bond_sum: sum,
                    },
                    raw.offset,
                )
            };
            if raw.bracket {
                let h = atom.explicit_h_count.unwrap_or(0);
                if let Some(allowed) = atom.element.allowed_valences(atom.formal_charge) {
                    let max = *allowed.last().expect("non-empty valence list");
                    if sum.saturating_add(h) > max {
                        return Err(valence_error());
                    }
                }
            } else {
                let allowed = atom
                    .element
                    .allowed_valences(0)
                    .expect("organic subset elements have valence rules");
                let Some(&target) = allowed.iter().find(|&&v| v >= sum) else {
                    return Err(valence_error());
                };
                let aromatic_adjust = u8::from(atom.aromatic);
                atom.implicit_h_count = target.saturating_sub(sum + aromatic_adjust);
            }
        }

        if !atoms.iter().any(|a| !a.element.is_hydrogen()) {
            return Err(SmilesError::new(SmilesErrorKind::NoHeavyAtoms, 0));
        }

        Ok(MolGraph::from_parts(atoms, bonds, in_ring, src.to_string()))
    }
}

fn new_atom(element: Element, aromatic: bool) -> Atom {
    Atom {
        element,
        formal_charge: 0,
        isotope: None,
        explicit_h_count: None,
        implicit_h_count: 0,
        aromatic,
        in_ring: false,
        degree: 0,
        chirality: Chirality::None,
    }
}

/// Element symbol at the start of a bracket body: `(element, aromatic, length)`.
fn bracket_symbol(text: &str) -> Option<(Element, bool, usize)> {
    for (sym, element) in [("se", "Se"), ("as", "As"), ("te", "Te")] {
        if text.starts_with(sym) {
            return Some((Element::from_symbol(element)?, true, 2));
        }
    }
    let b = text.as_bytes();
    let first = *b.first()?;
    if first.is_ascii_uppercase() {
        if let Some(&second) = b.get(1) {
            if second.is_ascii_lowercase() {
                if let Some(e) = Element::from_symbol(&text[..2]) {
                    return Some((e, false, 2));
                }
            }
        }
        return Element::from_symbol(&text[..1]).map(|e| (e, false, 1));
    }
    let upper = (first as char).to_ascii_uppercase().to_string();
    match first {
        b'b' | b'c' | b'n' | b'o' | b'p' | b's' => Element::from_symbol(&upper).map(|e| (e, true, 1)),
        _ => None,
    }
}
