//! SMILES reader.
//!
//! Supports the organic subset, bracket atoms (isotope, chirality, hydrogen
//! count, charge, atom class), branches, ring closures (`0`-`9` and `%nn`),
//! dot-disconnected fragments, aromatic lowercase atoms and the directional
//! bond markers. Chirality and bond direction are kept as annotations.

use std::collections::BTreeMap;

use thiserror::Error;

use super::element::Element;
use super::graph::{Atom, Bond, BondDirection, BondOrder, MolecularGraph, ValenceModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    Empty,
    #[error("unbalanced branch at byte {offset}")]
    UnbalancedBranch { offset: usize },
    #[error("ring closure opened at byte {offset} is never closed")]
    UnclosedRing { offset: usize },
    #[error("unknown element '{symbol}' at byte {offset}")]
    UnknownElement { offset: usize, symbol: String },
    #[error("atom at byte {offset} exceeds every allowed valence")]
    ValenceViolation { offset: usize },
    #[error("unexpected character {found:?} at byte {offset}")]
    UnexpectedCharacter { offset: usize, found: char },
    #[error("invalid ring bond at byte {offset}: {reason}")]
    InvalidRingBond { offset: usize, reason: &'static str },
    #[error("bond symbol at byte {offset} is not followed by an atom")]
    DanglingBond { offset: usize },
    #[error("aromatic bond at byte {offset} joins a non-aromatic atom")]
    AromaticBondMismatch { offset: usize },
}

impl SmilesError {
    /// Byte offset of the offending input, when the error has one.
    pub fn offset(&self) -> Option<usize> {
        match *self {
            SmilesError::Empty => None,
            SmilesError::UnbalancedBranch { offset }
            | SmilesError::UnclosedRing { offset }
            | SmilesError::UnknownElement { offset, .. }
            | SmilesError::ValenceViolation { offset }
            | SmilesError::UnexpectedCharacter { offset, .. }
            | SmilesError::InvalidRingBond { offset, .. }
            | SmilesError::DanglingBond { offset }
            | SmilesError::AromaticBondMismatch { offset } => Some(offset),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct BondSpec {
    order: BondOrder,
    direction: Option<BondDirection>,
    offset: usize,
}

struct OpenRing {
    atom: usize,
    bond: Option<BondSpec>,
    offset: usize,
}

/// Parses `text` using the default valence model.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, SmilesError> {
    parse_smiles_with(text, &ValenceModel::default())
}

pub fn parse_smiles_with(text: &str, model: &ValenceModel) -> Result<MolecularGraph, SmilesError> {
    Parser::new(text).run(model)
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    atom_offsets: Vec<usize>,
    bonds: Vec<Bond>,
    bond_offsets: Vec<usize>,
    prev: Option<usize>,
    branches: Vec<(Option<usize>, usize)>,
    pending: Option<BondSpec>,
    rings: BTreeMap<u16, OpenRing>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            text,
            bytes: text.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            atom_offsets: Vec::new(),
            bonds: Vec::new(),
            bond_offsets: Vec::new(),
            prev: None,
            branches: Vec::new(),
            pending: None,
            rings: BTreeMap::new(),
        }
    }

    fn unexpected(&self, offset: usize) -> SmilesError {
        let found = self.text[offset..].chars().next().unwrap_or('\0');
        SmilesError::UnexpectedCharacter { offset, found }
    }

    fn run(mut self, model: &ValenceModel) -> Result<MolecularGraph, SmilesError> {
        if self.text.trim().is_empty() {
            return Err(SmilesError::Empty);
        }
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            match c {
                b'(' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(self.unexpected(self.pos));
                    }
                    self.branches.push((self.prev, self.pos));
                    self.pos += 1;
                }
                b')' => {
                    let Some((prev, _)) = self.branches.pop() else {
                        return Err(SmilesError::UnbalancedBranch { offset: self.pos });
                    };
                    if let Some(b) = self.pending {
                        return Err(SmilesError::DanglingBond { offset: b.offset });
                    }
                    self.prev = prev;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return Err(self.unexpected(self.pos));
                    }
                    let (order, direction) = match c {
                        b'=' => (BondOrder::Double, None),
                        b'#' => (BondOrder::Triple, None),
                        b':' => (BondOrder::Aromatic, None),
                        b'/' => (BondOrder::Single, Some(BondDirection::Up)),
                        b'\\' => (BondOrder::Single, Some(BondDirection::Down)),
                        _ => (BondOrder::Single, None),
                    };
                    self.pending = Some(BondSpec {
                        order,
                        direction,
                        offset: self.pos,
                    });
                    self.pos += 1;
                }
                b'.' => {
                    if let Some(b) = self.pending {
                        return Err(SmilesError::DanglingBond { offset: b.offset });
                    }
                    if self.prev.is_none() {
                        return Err(self.unexpected(self.pos));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => self.bracket_atom()?,
                _ => self.organic_atom()?,
            }
        }
        if let Some(&(_, offset)) = self.branches.last() {
            return Err(SmilesError::UnbalancedBranch { offset });
        }
        if let Some(offset) = self.rings.values().map(|r| r.offset).min() {
            return Err(SmilesError::UnclosedRing { offset });
        }
        if let Some(b) = self.pending {
            return Err(SmilesError::DanglingBond { offset: b.offset });
        }
        self.finish(model)
    }

    fn add_atom(&mut self, atom: Atom, offset: usize) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        self.atom_offsets.push(offset);
        if let Some(prev) = self.prev {
            let spec = self.pending.take();
            let order = match spec {
                Some(s) => s.order,
                None => self.default_order(prev, idx),
            };
            if order == BondOrder::Aromatic && !(self.atoms[prev].aromatic && self.atoms[idx].aromatic) {
                return Err(SmilesError::AromaticBondMismatch {
                    offset: spec.map_or(offset, |s| s.offset),
                });
            }
            self.bonds.push(Bond {
                begin: prev,
                end: idx,
                order,
                direction: spec.and_then(|s| s.direction),
            });
            self.bond_offsets.push(spec.map_or(offset, |s| s.offset));
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let Some(atom) = self.prev else {
            return Err(self.unexpected(start));
        };
        let number = if self.bytes[start] == b'%' {
            let digits = self.bytes.get(start + 1..start + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    u16::from(d[0] - b'0') * 10 + u16::from(d[1] - b'0')
                }
                _ => return Err(self.unexpected(start)),
            }
        } else {
            self.pos += 1;
            u16::from(self.bytes[start] - b'0')
        };
        let spec = self.pending.take();
        match self.rings.remove(&number) {
            None => {
                self.rings.insert(
                    number,
                    OpenRing {
                        atom,
                        bond: spec,
                        offset: start,
                    },
                );
            }
            Some(open) => {
                if open.atom == atom {
                    return Err(SmilesError::InvalidRingBond {
                        offset: start,
                        reason: "ring closes on its own atom",
                    });
                }
                if self.bonds.iter().any(|b| {
                    (b.begin == atom && b.end == open.atom) || (b.begin == open.atom && b.end == atom)
                }) {
                    return Err(SmilesError::InvalidRingBond {
                        offset: start,
                        reason: "atoms are already bonded",
                    });
                }
                let chosen = match (open.bond, spec) {
                    (Some(a), Some(b)) if a.order != b.order => {
                        return Err(SmilesError::InvalidRingBond {
                            offset: start,
                            reason: "conflicting bond orders",
                        })
                    }
                    (Some(a), _) => Some(a),
                    (None, b) => b,
                };
                let order = chosen.map_or_else(|| self.default_order(open.atom, atom), |s| s.order);
                if order == BondOrder::Aromatic && !(self.atoms[open.atom].aromatic && self.atoms[atom].aromatic) {
                    return Err(SmilesError::AromaticBondMismatch { offset: start });
                }
                self.bonds.push(Bond {
                    begin: open.atom,
                    end: atom,
                    order,
                    direction: chosen.and_then(|s| s.direction),
                });
                self.bond_offsets.push(start);
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let c = self.bytes[start];
        let next = self.bytes.get(start + 1).copied();
        let (symbol, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => ("Cl", false, 2),
            (b'B', Some(b'r')) => ("Br", false, 2),
            (b'B', _) => ("B", false, 1),
            (b'C', _) => ("C", false, 1),
            (b'N', _) => ("N", false, 1),
            (b'O', _) => ("O", false, 1),
            (b'P', _) => ("P", false, 1),
            (b'S', _) => ("S", false, 1),
            (b'F', _) => ("F", false, 1),
            (b'I', _) => ("I", false, 1),
            (b'b', _) => ("B", true, 1),
            (b'c', _) => ("C", true, 1),
            (b'n', _) => ("N", true, 1),
            (b'o', _) => ("O", true, 1),
            (b'p', _) => ("P", true, 1),
            (b's', _) => ("S", true, 1),
            (c, _) if c.is_ascii_alphabetic() || c == b'*' => {
                let ch = self.text[start..].chars().next().unwrap_or('?');
                return Err(SmilesError::UnknownElement {
                    offset: start,
                    symbol: ch.to_string(),
                });
            }
            _ => return Err(self.unexpected(start)),
        };
        self.pos += len;
        let element = Element::from_symbol(symbol).expect("organic subset symbol");
        self.add_atom(Atom::organic(element, aromatic), start)
    }

    fn bracket_atom(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let close = self.text[start..]
            .find(']')
            .map(|i| start + i)
            .ok_or_else(|| self.unexpected(start))?;
        let body = &self.bytes[start + 1..close];
        let mut i = 0;

        let mut isotope: Option<u16> = None;
        while i < body.len() && body[i].is_ascii_digit() {
            let v = isotope.unwrap_or(0) as u32 * 10 + u32::from(body[i] - b'0');
            if v > u32::from(u16::MAX) {
                return Err(self.unexpected(start + 1 + i));
            }
            isotope = Some(v as u16);
            i += 1;
        }

        let sym_start = i;
        let (element, aromatic) = {
            let rest = &body[i..];
            let aromatic_two = ["se", "as", "te"];
            if let Some(s) = aromatic_two.iter().find(|s| rest.starts_with(s.as_bytes())) {
                i += 2;
                let mut upper = s.to_string();
                upper[..1].make_ascii_uppercase();
                (Element::from_symbol(&upper), true)
            } else if let Some(&c) = rest.first() {
                if matches!(c, b'b' | b'c' | b'n' | b'o' | b'p' | b's') {
                    i += 1;
                    let upper = (c as char).to_ascii_uppercase().to_string();
                    (Element::from_symbol(&upper), true)
                } else if c.is_ascii_uppercase() {
                    let two = rest
                        .get(..2)
                        .filter(|t| t[1].is_ascii_lowercase())
                        .and_then(|t| Element::from_symbol(std::str::from_utf8(t).ok()?));
                    if let Some(e) = two {
                        i += 2;
                        (Some(e), false)
                    } else {
                        i += 1;
                        (Element::from_symbol(&(c as char).to_string()), false)
                    }
                } else {
                    (None, false)
                }
            } else {
                (None, false)
            }
        };
        let Some(element) = element else {
            let symbol = String::from_utf8_lossy(&body[sym_start..i.max(sym_start + 1).min(body.len())]).into_owned();
            return Err(SmilesError::UnknownElement {
                offset: start + 1 + sym_start,
                symbol,
            });
        };

        let mut chirality = None;
        if body.get(i) == Some(&b'@') {
            let c0 = i;
            i += 1;
            if body.get(i) == Some(&b'@') {
                i += 1;
            } else {
                while i < body.len() && body[i].is_ascii_uppercase() && body[i] != b'H' {
                    i += 1;
                }
                while i < body.len() && body[i].is_ascii_digit() {
                    i += 1;
                }
            }
            chirality = Some(String::from_utf8_lossy(&body[c0..i]).into_owned());
        }

        let mut hcount = 0u8;
        if body.get(i) == Some(&b'H') {
            i += 1;
            hcount = 1;
            if let Some(d) = body.get(i).filter(|d| d.is_ascii_digit()) {
                hcount = d - b'0';
                i += 1;
            }
        }

        let mut charge: i32 = 0;
        if let Some(&sign) = body.get(i).filter(|c| **c == b'+' || **c == b'-') {
            let unit = if sign == b'+' { 1 } else { -1 };
            i += 1;
            if body.get(i).is_some_and(u8::is_ascii_digit) {
                let mut mag = 0i32;
                while let Some(d) = body.get(i).filter(|d| d.is_ascii_digit()) {
                    mag = mag * 10 + i32::from(d - b'0');
                    i += 1;
                    if mag > 15 {
                        return Err(self.unexpected(start + 1 + i - 1));
                    }
                }
                charge = unit * mag;
            } else {
                charge = unit;
                while body.get(i) == Some(&sign) {
                    charge += unit;
                    i += 1;
                }
            }
        }

        if body.get(i) == Some(&b':') {
            i += 1;
            let class_start = i;
            while i < body.len() && body[i].is_ascii_digit() {
                i += 1;
            }
            if i == class_start {
                return Err(self.unexpected(start + 1 + class_start));
            }
        }

        if i != body.len() {
            return Err(self.unexpected(start + 1 + i));
        }
        if aromatic && !element.can_be_aromatic() {
            return Err(SmilesError::UnknownElement {
                offset: start + 1 + sym_start,
                symbol: element.symbol().to_lowercase(),
            });
        }

        self.pos = close + 1;
        let atom = Atom {
            element,
            formal_charge: charge as i8,
            aromatic,
            explicit_h: Some(hcount),
            isotope,
            ring_member: false,
            chirality,
        };
        self.add_atom(atom, start)
    }

    fn finish(self, model: &ValenceModel) -> Result<MolecularGraph, SmilesError> {
        let mut sums = vec![0u32; self.atoms.len()];
        for b in &self.bonds {
            let u = u32::from(b.order.valence_units());
            sums[b.begin] += u;
            sums[b.end] += u;
        }
        let mut hydrogens = Vec::with_capacity(self.atoms.len());
        for (i, atom) in self.atoms.iter().enumerate() {
            let h = match atom.explicit_h {
                Some(h) => h,
                None => model
                    .implicit_hydrogens(atom.element, sums[i], atom.aromatic)
                    .ok_or(SmilesError::ValenceViolation {
                        offset: self.atom_offsets[i],
                    })?,
            };
            hydrogens.push(h);
        }
        let bond_offsets = self.bond_offsets;
        MolecularGraph::with_hydrogens(self.atoms, self.bonds, self.text.to_string(), hydrogens).map_err(|e| {
            use super::graph::GraphError;
            match e {
                GraphError::DuplicateBond { .. } | GraphError::SelfBond { .. } => SmilesError::InvalidRingBond {
                    offset: bond_offsets.last().copied().unwrap_or(0),
                    reason: "duplicate bond",
                },
                _ => SmilesError::InvalidRingBond {
                    offset: 0,
                    reason: "inconsistent graph",
                },
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(g: &MolecularGraph) -> Vec<u8> {
        g.hydrogen_counts().to_vec()
    }

    #[test]
    fn ethanol() {
        let g = parse_smiles("CCO").unwrap();
        assert_eq!(g.atom_count(), 3);
        assert_eq!(g.bonds().len(), 2);
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Single));
        assert_eq!(h(&g), vec![3, 2, 1]);
    }

    #[test]
    fn benzene() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.atom_count(), 6);
        assert!(g.atoms().iter().all(|a| a.aromatic && a.ring_member));
        assert_eq!(g.bonds().len(), 6);
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        assert_eq!(h(&g), vec![1; 6]);
    }

    #[test]
    fn unbalanced_branch_offset() {
        assert_eq!(parse_smiles("C(C"), Err(SmilesError::UnbalancedBranch { offset: 1 }));
        assert_eq!(parse_smiles("CC)C"), Err(SmilesError::UnbalancedBranch { offset: 2 }));
    }

    #[test]
    fn error_variants_carry_offsets() {
        assert_eq!(parse_smiles("C1CC"), Err(SmilesError::UnclosedRing { offset: 1 }));
        assert!(matches!(parse_smiles("CXC"), Err(SmilesError::UnknownElement { offset: 1, .. })));
        assert!(matches!(parse_smiles("C[Xx]"), Err(SmilesError::UnknownElement { offset: 2, .. })));
        assert_eq!(parse_smiles("CO(C)(C)C"), Err(SmilesError::ValenceViolation { offset: 1 }));
        assert_eq!(parse_smiles(""), Err(SmilesError::Empty));
        assert!(matches!(parse_smiles("C="), Err(SmilesError::DanglingBond { offset: 1 })));
        assert!(matches!(parse_smiles("C11"), Err(SmilesError::InvalidRingBond { .. })));
        assert!(matches!(parse_smiles("C1C1"), Err(SmilesError::InvalidRingBond { .. })));
    }

    #[test]
    fn two_digit_ring_closures() {
        let g = parse_smiles("C%10CCCCC%10").unwrap();
        assert_eq!(g.bonds().len(), 6);
        assert!(g.atoms().iter().all(|a| a.ring_member));
    }

    #[test]
    fn bracket_atoms() {
        let g = parse_smiles("[13CH3][N+](C)(C)C").unwrap();
        assert_eq!(g.atoms()[0].isotope, Some(13));
        assert_eq!(g.hydrogen_count(0), 3);
        assert_eq!(g.atoms()[1].formal_charge, 1);
        assert_eq!(g.hydrogen_count(1), 0);
        let g = parse_smiles("[O-]C(=O)C").unwrap();
        assert_eq!(g.atoms()[0].formal_charge, -1);
        let g = parse_smiles("[Fe++]").unwrap();
        assert_eq!(g.atoms()[0].formal_charge, 2);
        let g = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(h(&g), vec![1, 1, 1, 1, 1]);
        let g = parse_smiles("[se]1cccc1").unwrap();
        assert!(g.atoms()[0].aromatic);
    }

    #[test]
    fn stereo_markers_are_annotations() {
        let g = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(g.bonds()[0].direction, Some(BondDirection::Up));
        let g = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
        assert_eq!(g.atoms()[1].chirality.as_deref(), Some("@@"));
        assert_eq!(g.hydrogen_count(1), 1);
    }

    #[test]
    fn aromatic_heteroatoms_and_exocyclic_bonds() {
        let g = parse_smiles("c1ccncc1").unwrap();
        assert_eq!(g.hydrogen_count(3), 0);
        let g = parse_smiles("o1cccc1").unwrap();
        assert_eq!(g.hydrogen_count(0), 0);
        let g = parse_smiles("O=c1cc[nH]cc1").unwrap();
        assert_eq!(g.hydrogen_count(1), 0);
        let g = parse_smiles("Cc1ccccc1").unwrap();
        assert_eq!(g.hydrogen_count(1), 0);
        let g = parse_smiles("c1ccc2ccccc2c1").unwrap();
        assert_eq!(g.hydrogen_count(4), 1);
        assert_eq!(g.hydrogen_count(3), 0);
    }

    #[test]
    fn fragments_and_valence_levels() {
        let g = parse_smiles("[Na+].[Cl-]").unwrap();
        assert_eq!(g.connected_components().len(), 2);
        let g = parse_smiles("CS(=O)(=O)C").unwrap();
        assert_eq!(g.hydrogen_count(1), 0);
        let g = parse_smiles("C[N+](=O)[O-]").unwrap();
        assert_eq!(g.atom_count(), 4);
        let g = parse_smiles("ON(=O)=O").unwrap();
        assert_eq!(g.hydrogen_count(1), 0);
    }
}
