use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::element::Element;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the bond-order sum used by the valence model. Aromatic
    /// bonds count as one unit; the aromatic pi electron is handled per atom.
    pub fn valence_units(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

/// Directional single-bond marker (`/` or `\`). Kept as an annotation only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    pub aromatic: bool,
    /// Hydrogen count written inside a bracket atom. `None` means the atom was
    /// written in organic-subset form and its hydrogens are implicit.
    pub explicit_h: Option<u8>,
    pub isotope: Option<u16>,
    pub ring_member: bool,
    /// Tetrahedral/other chirality marker as written (`@`, `@@`, `@TH1`, ...).
    pub chirality: Option<String>,
}

impl Atom {
    pub fn organic(element: Element, aromatic: bool) -> Atom {
        Atom {
            element,
            formal_charge: 0,
            aromatic,
            explicit_h: None,
            isotope: None,
            ring_member: false,
            chirality: None,
        }
    }

    pub fn is_bracket(&self) -> bool {
        self.explicit_h.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub begin: usize,
    pub end: usize,
    pub order: BondOrder,
    pub direction: Option<BondDirection>,
}

impl Bond {
    pub fn new(begin: usize, end: usize, order: BondOrder) -> Bond {
        Bond {
            begin,
            end,
            order,
            direction: None,
        }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.begin == atom {
            self.end
        } else {
            self.begin
        }
    }
}

/// Allowed valences for elements whose hydrogens may be implicit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValenceModel {
    default_valences: BTreeMap<Element, Vec<u8>>,
}

impl Default for ValenceModel {
    fn default() -> Self {
        let table: [(Element, &[u8]); 10] = [
            (Element::B, &[3]),
            (Element::C, &[4]),
            (Element::N, &[3, 5]),
            (Element::O, &[2]),
            (Element::P, &[3, 5]),
            (Element::S, &[2, 4, 6]),
            (Element::F, &[1]),
            (Element::CL, &[1]),
            (Element::BR, &[1]),
            (Element::I, &[1]),
        ];
        ValenceModel {
            default_valences: table
                .iter()
                .map(|(e, v)| (*e, v.to_vec()))
                .collect(),
        }
    }
}

impl ValenceModel {
    pub fn valences(&self, element: Element) -> Option<&[u8]> {
        self.default_valences.get(&element).map(Vec::as_slice)
    }

    /// Implicit hydrogen count for an organic-subset atom with the given
    /// bond-order sum, or `None` if the sum exceeds every allowed valence.
    pub fn implicit_hydrogens(&self, element: Element, bond_sum: u32, aromatic: bool) -> Option<u8> {
        let allowed = self.valences(element)?;
        let target = allowed.iter().copied().find(|&v| u32::from(v) >= bond_sum)?;
        let mut h = target as u32 - bond_sum;
        if aromatic && h > 0 {
            h -= 1;
        }
        Some(h as u8)
    }

    /// Maximum number of bonds plus hydrogens an atom may carry. Charged atoms
    /// take the smallest valence of their isoelectronic neutral element.
    pub fn capacity(&self, element: Element, charge: i8) -> Option<u8> {
        if charge == 0 {
            return self.valences(element)?.last().copied();
        }
        let shifted = i16::from(element.atomic_number()) - i16::from(charge);
        let shifted = Element::from_atomic_number(u8::try_from(shifted).ok()?)?;
        self.valences(shifted)?.first().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("bond {bond} references atom {atom}, but the graph has {len} atoms")]
    InvalidAtomIndex { bond: usize, atom: usize, len: usize },
    #[error("bond {bond} joins atom {atom} to itself")]
    SelfBond { bond: usize, atom: usize },
    #[error("atoms {a} and {b} are joined by more than one bond")]
    DuplicateBond { a: usize, b: usize },
    #[error("aromatic bond {bond} joins a non-aromatic atom")]
    AromaticBondMismatch { bond: usize },
    #[error("atom {atom} exceeds every allowed valence")]
    ValenceViolation { atom: usize },
}

/// An immutable molecular graph with per-atom total hydrogen counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    source_text: String,
    hydrogens: Vec<u8>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolecularGraph {
    /// Builds a graph, computing implicit hydrogens from `model` for atoms
    /// without an explicit count. Ring membership flags are recomputed.
    pub fn from_parts(
        atoms: Vec<Atom>,
        bonds: Vec<Bond>,
        source_text: impl Into<String>,
        model: &ValenceModel,
    ) -> Result<MolecularGraph, GraphError> {
        let adjacency = build_adjacency(atoms.len(), &bonds)?;
        let mut hydrogens = Vec::with_capacity(atoms.len());
        for (i, atom) in atoms.iter().enumerate() {
            let h = match atom.explicit_h {
                Some(h) => h,
                None => {
                    let sum: u32 = adjacency[i]
                        .iter()
                        .map(|&(_, b)| u32::from(bonds[b].order.valence_units()))
                        .sum();
                    match model.implicit_hydrogens(atom.element, sum, atom.aromatic) {
                        Some(h) => h,
                        None if model.valences(atom.element).is_none() => 0,
                        None => return Err(GraphError::ValenceViolation { atom: i }),
                    }
                }
            };
            hydrogens.push(h);
        }
        let mut graph = MolecularGraph {
            atoms,
            bonds,
            source_text: source_text.into(),
            hydrogens,
            adjacency,
        };
        for (b, bond) in graph.bonds.iter().enumerate() {
            if bond.order == BondOrder::Aromatic
                && !(graph.atoms[bond.begin].aromatic && graph.atoms[bond.end].aromatic)
            {
                return Err(GraphError::AromaticBondMismatch { bond: b });
            }
        }
        graph.assign_ring_membership();
        Ok(graph)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Total hydrogens (explicit or implicit) attached to `atom`.
    pub fn hydrogen_count(&self, atom: usize) -> u8 {
        self.hydrogens[atom]
    }

    pub fn hydrogen_counts(&self) -> &[u8] {
        &self.hydrogens
    }

    /// `(neighbor, bond index)` pairs in bond insertion order.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    /// Sum of bond valence units at `atom`.
    pub fn bond_order_sum(&self, atom: usize) -> u32 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, b)| u32::from(self.bonds[b].order.valence_units()))
            .sum()
    }

    /// Connected components, each sorted ascending, ordered by smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.atoms.len()];
        let mut out = Vec::new();
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                let a = comp[i];
                for &(n, _) in &self.adjacency[a] {
                    if !seen[n] {
                        seen[n] = true;
                        comp.push(n);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Subgraph induced by `keep` (atom order preserved).
    pub fn induced_subgraph(&self, keep: &[usize]) -> MolecularGraph {
        let mut map = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let atoms: Vec<Atom> = keep.iter().map(|&i| self.atoms[i].clone()).collect();
        let bonds: Vec<Bond> = self
            .bonds
            .iter()
            .filter(|b| map[b.begin] != usize::MAX && map[b.end] != usize::MAX)
            .map(|b| Bond {
                begin: map[b.begin],
                end: map[b.end],
                ..b.clone()
            })
            .collect();
        let hydrogens = keep.iter().map(|&i| self.hydrogens[i]).collect();
        MolecularGraph::with_hydrogens(atoms, bonds, self.source_text.clone(), hydrogens)
            .expect("induced subgraph of a valid graph is valid")
    }

    /// The same molecule with atoms reordered: atom `i` of the result is atom
    /// `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> MolecularGraph {
        assert_eq!(order.len(), self.atoms.len(), "permutation length mismatch");
        let mut sub = self.induced_subgraph(order);
        sub.bonds.sort_by_key(|b| (b.begin.min(b.end), b.begin.max(b.end)));
        sub.adjacency = build_adjacency(sub.atoms.len(), &sub.bonds).expect("valid bonds");
        sub
    }

    /// Builds a graph with caller-supplied hydrogen counts (no valence model).
    pub(crate) fn with_hydrogens(
        atoms: Vec<Atom>,
        bonds: Vec<Bond>,
        source_text: String,
        hydrogens: Vec<u8>,
    ) -> Result<MolecularGraph, GraphError> {
        let adjacency = build_adjacency(atoms.len(), &bonds)?;
        let mut graph = MolecularGraph {
            atoms,
            bonds,
            source_text,
            hydrogens,
            adjacency,
        };
        graph.assign_ring_membership();
        Ok(graph)
    }

    /// True when no atom carries more bonds plus hydrogens than its capacity
    /// under `model`. Atoms of elements outside the model are not checked.
    pub fn is_valence_valid(&self, model: &ValenceModel) -> bool {
        (0..self.atoms.len()).all(|i| {
            let atom = &self.atoms[i];
            match model.capacity(atom.element, atom.formal_charge) {
                Some(cap) => self.bond_order_sum(i) + u32::from(self.hydrogens[i]) <= u32::from(cap),
                None => true,
            }
        })
    }

    fn assign_ring_membership(&mut self) {
        let bridges = self.bridges();
        for atom in &mut self.atoms {
            atom.ring_member = false;
        }
        for (b, bond) in self.bonds.iter().enumerate() {
            if !bridges.contains(&b) {
                self.atoms[bond.begin].ring_member = true;
                self.atoms[bond.end].ring_member = true;
            }
        }
    }

    /// Indices of bonds whose removal disconnects the graph.
    pub fn bridges(&self) -> HashSet<usize> {
        let n = self.atoms.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut bridges = HashSet::new();
        let mut timer = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // (atom, parent bond, next neighbor cursor)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (v, pb, ref mut cursor)) = stack.last_mut() {
                if *cursor < self.adjacency[v].len() {
                    let (w, b) = self.adjacency[v][*cursor];
                    *cursor += 1;
                    if b == pb {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, b, 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(parent, _, _)) = stack.last() {
                        low[parent] = low[parent].min(low[v]);
                        if low[v] > disc[parent] {
                            bridges.insert(pb);
                        }
                    }
                }
            }
        }
        bridges
    }
}

fn build_adjacency(n: usize, bonds: &[Bond]) -> Result<Vec<Vec<(usize, usize)>>, GraphError> {
    let mut adjacency = vec![Vec::new(); n];
    let mut seen = HashSet::new();
    for (b, bond) in bonds.iter().enumerate() {
        for atom in [bond.begin, bond.end] {
            if atom >= n {
                return Err(GraphError::InvalidAtomIndex { bond: b, atom, len: n });
            }
        }
        if bond.begin == bond.end {
            return Err(GraphError::SelfBond { bond: b, atom: bond.begin });
        }
        let key = (bond.begin.min(bond.end), bond.begin.max(bond.end));
        if !seen.insert(key) {
            return Err(GraphError::DuplicateBond { a: key.0, b: key.1 });
        }
        adjacency[bond.begin].push((bond.end, b));
        adjacency[bond.end].push((bond.begin, b));
    }
    Ok(adjacency)
}
