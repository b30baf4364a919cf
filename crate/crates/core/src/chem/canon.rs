//! Internal canonical form: Morgan-style iterative rank refinement followed
//! by a depth-first SMILES writer driven by the refined ranks.
//!
//! The output is stable across atom input orders but is not claimed to match
//! any external toolkit's canonical SMILES.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::graph::{BondOrder, MolecularGraph, ValenceModel};

type Invariant = (u8, u16, i8, usize, u8, bool, bool);

fn initial_invariants(graph: &MolecularGraph) -> Vec<Invariant> {
    graph
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            (
                a.element.atomic_number(),
                a.isotope.unwrap_or(0),
                a.formal_charge,
                graph.degree(i),
                graph.hydrogen_count(i),
                a.aromatic,
                a.ring_member,
            )
        })
        .collect()
}

/// Dense ranks (0-based) of `keys` in ascending key order.
fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    let mut current = 0;
    for w in 0..order.len() {
        if w > 0 && keys[order[w]] != keys[order[w - 1]] {
            current += 1;
        }
        ranks[order[w]] = current;
    }
    ranks
}

fn class_count(ranks: &[usize]) -> usize {
    ranks.iter().copied().max().map_or(0, |m| m + 1)
}

fn refine(graph: &MolecularGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    let mut classes = class_count(&ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..ranks.len())
            .map(|i| {
                let mut env: Vec<(usize, u8)> = graph
                    .neighbors(i)
                    .iter()
                    .map(|&(n, b)| (ranks[n], graph.bonds()[b].order.code()))
                    .collect();
                env.sort_unstable();
                (ranks[i], env)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_classes = class_count(&next);
        ranks = next;
        if next_classes == classes {
            return ranks;
        }
        classes = next_classes;
    }
}

/// Symmetry-class ranks: atoms that refinement cannot distinguish share a
/// rank. Independent of the input atom order.
pub fn canonical_ranks(graph: &MolecularGraph) -> Vec<usize> {
    if graph.is_empty() {
        return Vec::new();
    }
    refine(graph, dense_ranks(&initial_invariants(graph)))
}

/// A total canonical order: symmetry classes are split one atom at a time
/// (lowest input index first) with refinement after each split.
pub fn canonical_labels(graph: &MolecularGraph) -> Vec<usize> {
    let n = graph.atom_count();
    let mut ranks = canonical_ranks(graph);
    while class_count(&ranks) < n {
        let mut counts = vec![0usize; n];
        for &r in &ranks {
            counts[r] += 1;
        }
        let tied = (0..n).find(|&r| counts[r] > 1).expect("a tied class exists");
        let chosen = (0..n).find(|&i| ranks[i] == tied).expect("class has members");
        let keys: Vec<(usize, bool)> = (0..n).map(|i| (ranks[i], i != chosen)).collect();
        ranks = refine(graph, dense_ranks(&keys));
    }
    ranks
}

/// Canonical SMILES for `graph`.
pub fn write_canonical_smiles(graph: &MolecularGraph) -> String {
    canonical_smiles_with_order(graph).0
}

/// Canonical SMILES plus the input atom index written at each output
/// position (the order in which re-parsing the string numbers its atoms).
pub fn canonical_smiles_with_order(graph: &MolecularGraph) -> (String, Vec<usize>) {
    let labels = canonical_labels(graph);
    let writer = Writer::new(graph, &labels);
    writer.write()
}

struct Writer<'g> {
    graph: &'g MolecularGraph,
    labels: &'g [usize],
    model: ValenceModel,
    visited: Vec<bool>,
    children: Vec<Vec<(usize, usize)>>,
    ring_bonds: Vec<Vec<(usize, usize)>>,
    closure_set: HashSet<usize>,
}

impl<'g> Writer<'g> {
    fn new(graph: &'g MolecularGraph, labels: &'g [usize]) -> Self {
        let n = graph.atom_count();
        Writer {
            graph,
            labels,
            model: ValenceModel::default(),
            visited: vec![false; n],
            children: vec![Vec::new(); n],
            ring_bonds: vec![Vec::new(); n],
            closure_set: HashSet::new(),
        }
    }

    fn sorted_neighbors(&self, atom: usize) -> Vec<(usize, usize)> {
        let mut nbrs = self.graph.neighbors(atom).to_vec();
        nbrs.sort_by_key(|&(n, _)| self.labels[n]);
        nbrs
    }

    fn write(mut self) -> (String, Vec<usize>) {
        let n = self.graph.atom_count();
        let mut roots: Vec<usize> = self
            .graph
            .connected_components()
            .into_iter()
            .map(|c| *c.iter().min_by_key(|&&a| self.labels[a]).expect("non-empty component"))
            .collect();
        roots.sort_by_key(|&r| self.labels[r]);

        for &root in &roots {
            self.plan(root);
        }

        let mut out = String::new();
        let mut order = Vec::with_capacity(n);
        let mut digits: Vec<Option<usize>> = Vec::new();
        let mut bond_digit = vec![usize::MAX; self.graph.bonds().len()];
        for (ci, &root) in roots.iter().enumerate() {
            if ci > 0 {
                out.push('.');
            }
            self.emit(root, &mut out, &mut order, &mut digits, &mut bond_digit);
        }
        (out, order)
    }

    // Depth-first pass that fixes the spanning tree and ring-closure bonds.
    fn plan(&mut self, root: usize) {
        let mut stack: Vec<(usize, usize, Vec<(usize, usize)>, usize)> = Vec::new();
        self.visited[root] = true;
        stack.push((root, usize::MAX, self.sorted_neighbors(root), 0));
        while let Some(frame) = stack.last_mut() {
            let (atom, parent_bond) = (frame.0, frame.1);
            if frame.3 >= frame.2.len() {
                stack.pop();
                continue;
            }
            let (nbr, bond) = frame.2[frame.3];
            frame.3 += 1;
            if bond == parent_bond {
                continue;
            }
            if self.visited[nbr] {
                if self.closure_set.insert(bond) {
                    self.ring_bonds[nbr].push((atom, bond));
                    self.ring_bonds[atom].push((nbr, bond));
                }
            } else {
                self.visited[nbr] = true;
                self.children[atom].push((nbr, bond));
                let nbrs = self.sorted_neighbors(nbr);
                stack.push((nbr, bond, nbrs, 0));
            }
        }
    }

    fn emit(
        &self,
        root: usize,
        out: &mut String,
        order: &mut Vec<usize>,
        digits: &mut Vec<Option<usize>>,
        bond_digit: &mut [usize],
    ) {
        enum Step {
            Atom(usize, Option<usize>),
            Open,
            Close,
        }
        let mut stack = vec![Step::Atom(root, None)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Open => out.push('('),
                Step::Close => out.push(')'),
                Step::Atom(atom, via) => {
                    if let Some(b) = via {
                        out.push_str(self.bond_symbol(b));
                    }
                    self.write_atom(atom, out);
                    order.push(atom);
                    self.write_ring_digits(atom, out, digits, bond_digit);
                    let kids = &self.children[atom];
                    // Pushed in reverse so the first child is emitted first.
                    for (k, &(child, bond)) in kids.iter().enumerate().rev() {
                        let last = k + 1 == kids.len();
                        if !last {
                            stack.push(Step::Close);
                        }
                        stack.push(Step::Atom(child, Some(bond)));
                        if !last {
                            stack.push(Step::Open);
                        }
                    }
                }
            }
        }
    }

    fn write_ring_digits(
        &self,
        atom: usize,
        out: &mut String,
        digits: &mut Vec<Option<usize>>,
        bond_digit: &mut [usize],
    ) {
        let mut rings = self.ring_bonds[atom].clone();
        rings.sort_by_key(|&(other, _)| self.labels[other]);
        let mut freed = Vec::new();
        for &(_, bond) in &rings {
            if bond_digit[bond] == usize::MAX {
                let d = match digits.iter().position(Option::is_none) {
                    Some(d) => d,
                    None => {
                        digits.push(None);
                        digits.len() - 1
                    }
                };
                digits[d] = Some(bond);
                bond_digit[bond] = d;
                out.push_str(self.bond_symbol(bond));
                push_ring_number(out, d + 1);
            } else {
                let d = bond_digit[bond];
                push_ring_number(out, d + 1);
                freed.push(d);
            }
        }
        for d in freed {
            digits[d] = None;
        }
    }

    fn bond_symbol(&self, bond: usize) -> &'static str {
        let b = &self.graph.bonds()[bond];
        let both_aromatic = self.graph.atoms()[b.begin].aromatic && self.graph.atoms()[b.end].aromatic;
        match b.order {
            BondOrder::Single if both_aromatic => "-",
            BondOrder::Single => "",
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
            BondOrder::Aromatic if both_aromatic => "",
            BondOrder::Aromatic => ":",
        }
    }

    fn write_atom(&self, i: usize, out: &mut String) {
        let atom = &self.graph.atoms()[i];
        let h = self.graph.hydrogen_count(i);
        let organic_ok = atom.element.is_organic_subset()
            && atom.formal_charge == 0
            && atom.isotope.is_none()
            && (!atom.aromatic || matches!(atom.element.atomic_number(), 5 | 6 | 7 | 8 | 15 | 16))
            && self
                .model
                .implicit_hydrogens(atom.element, self.graph.bond_order_sum(i), atom.aromatic)
                == Some(h);
        let symbol = if atom.aromatic {
            atom.element.symbol().to_lowercase()
        } else {
            atom.element.symbol().to_string()
        };
        if organic_ok {
            out.push_str(&symbol);
            return;
        }
        out.push('[');
        if let Some(iso) = atom.isotope {
            let _ = write!(out, "{iso}");
        }
        out.push_str(&symbol);
        match h {
            0 => {}
            1 => out.push('H'),
            _ => {
                let _ = write!(out, "H{h}");
            }
        }
        match atom.formal_charge {
            0 => {}
            1 => out.push('+'),
            -1 => out.push('-'),
            q if q > 0 => {
                let _ = write!(out, "+{q}");
            }
            q => {
                let _ = write!(out, "-{}", -q);
            }
        }
        out.push(']');
    }
}

fn push_ring_number(out: &mut String, n: usize) {
    if n < 10 {
        let _ = write!(out, "{n}");
    } else {
        let _ = write!(out, "%{n:02}");
    }
}
