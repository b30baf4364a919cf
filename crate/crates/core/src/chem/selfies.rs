//! SELFIES codec (atom, bond-order, ring and branch tokens).
//!
//! Decoding follows the SELFIES derivation rules: every bond request is
//! clamped to the remaining bonding capacity of both atoms, so any sequence
//! of known tokens yields a valence-valid graph. Aromatic input is written in
//! a Kekulé form before encoding.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use thiserror::Error;

use super::element::Element;
use super::graph::{Atom, Bond, BondOrder, MolecularGraph, ValenceModel};

const TOKEN_TABLE: &str = include_str!("../../assets/selfies_tokens_v1.txt");

/// Capacity assumed for elements the valence model does not cover.
const DEFAULT_CAPACITY: u8 = 8;

/// Bonding capacity used by the derivation rules. Neutral nitrogen is held
/// to three bonds as in the reference SELFIES constraints; everything else
/// follows the valence model.
fn selfies_capacity(model: &ValenceModel, element: Element, charge: i8) -> u8 {
    if element == Element::N && charge == 0 {
        return 3;
    }
    model.capacity(element, charge).unwrap_or(DEFAULT_CAPACITY)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelfiesError {
    #[error("empty SELFIES string")]
    Empty,
    #[error("unknown SELFIES token {token:?} at token {position}")]
    UnknownToken { position: usize, token: String },
    #[error("unsupported for SELFIES encoding: {0}")]
    UnsupportedFeature(String),
}

struct TokenTable {
    version: u32,
    index: HashMap<String, u16>,
    index_symbols: Vec<String>,
    alphabet: Vec<String>,
}

fn table() -> &'static TokenTable {
    static TABLE: OnceLock<TokenTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut version = 0;
        let mut index_symbols = Vec::new();
        let mut alphabet = Vec::new();
        for line in TOKEN_TABLE.lines().map(str::trim) {
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "version" => version = rest.trim().parse().expect("token table version"),
                "index" => index_symbols = rest.split_whitespace().map(String::from).collect(),
                "alphabet" => alphabet = rest.split_whitespace().map(String::from).collect(),
                other => panic!("unknown token table key {other}"),
            }
        }
        assert_eq!(index_symbols.len(), 16, "index alphabet must have 16 symbols");
        let index = index_symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u16))
            .collect();
        TokenTable {
            version,
            index,
            index_symbols,
            alphabet,
        }
    })
}

/// Version of the bundled token table.
pub fn token_table_version() -> u32 {
    table().version
}

/// Tokens commonly produced by the encoder; handy for sampling.
pub fn common_alphabet() -> &'static [String] {
    &table().alphabet
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Atom(AtomToken),
    Branch { order: u8, len: usize },
    Ring { order: u8, len: usize },
    Nop,
    Dot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct AtomToken {
    bond: u8,
    isotope: Option<u16>,
    element: Element,
    hydrogens: Option<u8>,
    charge: i8,
}

/// Splits a SELFIES string into bracketed symbols (and `.` separators).
pub fn split_tokens(text: &str) -> Result<Vec<String>, SelfiesError> {
    let mut out = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix('.') {
            out.push(".".to_string());
            rest = r;
            continue;
        }
        if !rest.starts_with('[') {
            return Err(SelfiesError::UnknownToken {
                position: out.len(),
                token: rest.chars().next().map(String::from).unwrap_or_default(),
            });
        }
        let Some(end) = rest.find(']') else {
            return Err(SelfiesError::UnknownToken {
                position: out.len(),
                token: rest.to_string(),
            });
        };
        out.push(rest[..=end].to_string());
        rest = &rest[end + 1..];
    }
    Ok(out)
}

fn parse_token(raw: &str) -> Option<Token> {
    if raw == "." {
        return Some(Token::Dot);
    }
    let inner = raw.strip_prefix('[')?.strip_suffix(']')?;
    if inner == "nop" {
        return Some(Token::Nop);
    }
    let (order, body) = match inner.as_bytes().first()? {
        b'=' => (2u8, &inner[1..]),
        b'#' => (3u8, &inner[1..]),
        b'/' | b'\\' | b'-' => (1u8, &inner[1..]),
        _ => (1u8, inner),
    };
    for (prefix, is_branch) in [("Branch", true), ("Ring", false)] {
        if let Some(n) = body.strip_prefix(prefix) {
            let len = match n {
                "1" => 1,
                "2" => 2,
                "3" => 3,
                _ => return None,
            };
            return Some(if is_branch {
                Token::Branch { order, len }
            } else {
                Token::Ring { order, len }
            });
        }
    }
    parse_atom_body(order, body).map(Token::Atom)
}

fn parse_atom_body(bond: u8, body: &str) -> Option<AtomToken> {
    let b = body.as_bytes();
    let mut i = 0;
    let mut isotope = None;
    while i < b.len() && b[i].is_ascii_digit() {
        isotope = Some(isotope.unwrap_or(0u32) * 10 + u32::from(b[i] - b'0'));
        i += 1;
        if isotope? > u32::from(u16::MAX) {
            return None;
        }
    }
    if !b.get(i)?.is_ascii_uppercase() {
        return None;
    }
    let two = b
        .get(i + 1)
        .filter(|c| c.is_ascii_lowercase())
        .and_then(|_| Element::from_symbol(&body[i..i + 2]));
    let element = match two {
        Some(e) => {
            i += 2;
            e
        }
        None => {
            i += 1;
            Element::from_symbol(&body[i - 1..i])?
        }
    };
    // chirality markers are accepted and dropped
    while b.get(i) == Some(&b'@') {
        i += 1;
    }
    let mut hydrogens = None;
    if b.get(i) == Some(&b'H') {
        i += 1;
        let start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        hydrogens = Some(if start == i { 1 } else { body[start..i].parse().ok()? });
    }
    let mut charge = 0i8;
    if let Some(&sign) = b.get(i).filter(|c| **c == b'+' || **c == b'-') {
        i += 1;
        let start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        let mag: i8 = if start == i { 1 } else { body[start..i].parse().ok()? };
        charge = if sign == b'+' { mag } else { -mag };
    }
    (i == b.len()).then_some(AtomToken {
        bond,
        isotope: isotope.map(|v| v as u16),
        element,
        hydrogens,
        charge,
    })
}

struct DecodedAtom {
    atom: Atom,
    capacity: u8,
    used: u8,
}

struct Decoder<'t> {
    tokens: &'t [Token],
    pos: usize,
    atoms: Vec<DecodedAtom>,
    bonds: Vec<Bond>,
    bond_index: HashMap<(usize, usize), usize>,
    rings: Vec<(usize, usize, u8)>,
    model: ValenceModel,
}

impl<'t> Decoder<'t> {
    fn next(&mut self) -> Option<&'t Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn read_index(&mut self, len: usize, raw: &[String]) -> usize {
        let table = table();
        let mut q = 0usize;
        for _ in 0..len {
            let at = self.pos;
            if self.next().is_none() {
                break;
            }
            q = q * 16 + usize::from(*table.index.get(&raw[at]).unwrap_or(&0));
        }
        q
    }

    fn add_atom(&mut self, t: &AtomToken) -> usize {
        let full = selfies_capacity(&self.model, t.element, t.charge);
        let organic = t.hydrogens.is_none() && t.charge == 0 && self.model.valences(t.element).is_some();
        let explicit_h = if organic {
            None
        } else {
            Some(t.hydrogens.unwrap_or(0).min(full))
        };
        let capacity = full - explicit_h.unwrap_or(0);
        self.atoms.push(DecodedAtom {
            atom: Atom {
                element: t.element,
                formal_charge: t.charge,
                aromatic: false,
                explicit_h,
                isotope: t.isotope,
                ring_member: false,
                chirality: None,
            },
            capacity,
            used: 0,
        });
        self.atoms.len() - 1
    }

    fn bond(&mut self, a: usize, b: usize, order: u8) {
        let key = (a.min(b), a.max(b));
        self.atoms[a].used += order;
        self.atoms[b].used += order;
        if let Some(&bi) = self.bond_index.get(&key) {
            let cur = self.bonds[bi].order.valence_units();
            self.bonds[bi].order = order_from_units(cur + order);
        } else {
            self.bond_index.insert(key, self.bonds.len());
            self.bonds.push(Bond::new(a, b, order_from_units(order)));
        }
    }

    /// Derives at most `max_derive` tokens starting from `state` bonds
    /// available on `root`. Returns the number of tokens consumed.
    fn derive(&mut self, raw: &[String], max_derive: usize, init_state: Option<u8>, root: Option<usize>) -> usize {
        let mut derived = 0;
        let mut state = init_state;
        let mut prev = root;
        while state.is_none_or(|s| s > 0) && derived < max_derive {
            let Some(token) = self.next() else { break };
            derived += 1;
            match token {
                Token::Branch { order, len } => {
                    match state {
                        Some(s) if s > 1 => {
                            let binit = (s - 1).min(*order);
                            let q = self.read_index(*len, raw);
                            derived += len + self.derive(raw, q + 1, Some(binit), prev);
                            state = Some(s - binit);
                        }
                        _ => {}
                    }
                }
                Token::Ring { order, len } => {
                    if let (Some(s), Some(p)) = (state, prev) {
                        if s > 0 {
                            let ring_order = s.min(*order);
                            let q = self.read_index(*len, raw);
                            derived += len;
                            let target = p.saturating_sub(q + 1);
                            self.rings.push((target, p, ring_order));
                            state = Some(s - ring_order);
                        }
                    }
                }
                Token::Nop => {}
                Token::Dot => {
                    // Fragment boundaries are split out before derivation.
                    break;
                }
                Token::Atom(t) => {
                    let idx = self.add_atom(t);
                    let cap = self.atoms[idx].capacity;
                    let order = match (state, prev) {
                        (Some(s), Some(_)) => t.bond.min(s).min(cap),
                        _ => 0,
                    };
                    if order > 0 {
                        self.bond(prev.expect("previous atom"), idx, order);
                    }
                    state = Some(cap - order);
                    prev = Some(idx);
                }
            }
        }
        while derived < max_derive {
            if self.next().is_none() {
                break;
            }
            derived += 1;
        }
        derived
    }

    fn close_rings(&mut self) {
        for (a, b, order) in std::mem::take(&mut self.rings) {
            if a == b {
                continue;
            }
            let free_a = self.atoms[a].capacity - self.atoms[a].used;
            let free_b = self.atoms[b].capacity - self.atoms[b].used;
            let mut order = order.min(free_a).min(free_b);
            if let Some(&bi) = self.bond_index.get(&(a.min(b), a.max(b))) {
                let cur = self.bonds[bi].order.valence_units();
                order = order.min(3 - cur);
            }
            if order > 0 {
                self.bond(a, b, order);
            }
        }
    }
}

fn order_from_units(units: u8) -> BondOrder {
    match units {
        1 => BondOrder::Single,
        2 => BondOrder::Double,
        _ => BondOrder::Triple,
    }
}

/// Decodes a SELFIES string into a valence-valid molecular graph.
pub fn decode_selfies(text: &str) -> Result<MolecularGraph, SelfiesError> {
    let raw = split_tokens(text)?;
    if raw.is_empty() {
        return Err(SelfiesError::Empty);
    }
    let tokens = raw
        .iter()
        .enumerate()
        .map(|(position, r)| {
            parse_token(r).ok_or_else(|| SelfiesError::UnknownToken {
                position,
                token: r.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut decoder = Decoder {
        tokens: &tokens,
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        bond_index: HashMap::new(),
        rings: Vec::new(),
        model: ValenceModel::default(),
    };
    // Each dot-separated fragment derives independently; rings never cross
    // fragments.
    let mut start = 0;
    for end in tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| matches!(t, Token::Dot))
        .map(|(i, _)| i)
        .chain(std::iter::once(tokens.len()))
    {
        decoder.tokens = &tokens[..end];
        decoder.pos = start;
        decoder.derive(&raw, usize::MAX, None, None);
        decoder.close_rings();
        start = end + 1;
    }
    if decoder.atoms.is_empty() {
        return Err(SelfiesError::Empty);
    }

    let atoms: Vec<Atom> = decoder.atoms.into_iter().map(|d| d.atom).collect();
    MolecularGraph::from_parts(atoms, decoder.bonds, text, &decoder.model)
        .map_err(|e| SelfiesError::UnsupportedFeature(format!("decoder produced an invalid graph: {e}")))
}

/// Encodes `graph` as SELFIES, traversing atoms in input order.
pub fn encode_selfies(graph: &MolecularGraph) -> Result<String, SelfiesError> {
    if graph.is_empty() {
        return Err(SelfiesError::Empty);
    }
    let model = ValenceModel::default();
    let kekule = kekulize(graph, &model)?;
    let g = &kekule;
    for (i, atom) in g.atoms().iter().enumerate() {
        let cap = selfies_capacity(&model, atom.element, atom.formal_charge);
        if g.bond_order_sum(i) + u32::from(g.hydrogen_count(i)) > u32::from(cap) {
            return Err(SelfiesError::UnsupportedFeature(format!(
                "atom {i} ({}) exceeds the bonding capacity SELFIES can express",
                atom.element
            )));
        }
    }

    let n = g.atom_count();
    let mut visited = vec![false; n];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut ring_closures: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut position = vec![0usize; n];
    let mut counter = 0;
    let mut roots = Vec::new();
    for root in 0..n {
        if visited[root] {
            continue;
        }
        roots.push(root);
        plan_tree(g, root, &mut visited, &mut children, &mut ring_closures, &mut position, &mut counter);
    }

    let mut fragments = Vec::new();
    for root in roots {
        let tokens = encode_subtree(g, &model, root, None, &children, &ring_closures, &position)?;
        fragments.push(tokens.concat());
    }
    Ok(fragments.join("."))
}

fn plan_tree(
    g: &MolecularGraph,
    root: usize,
    visited: &mut [bool],
    children: &mut [Vec<(usize, usize)>],
    ring_closures: &mut [Vec<(usize, usize)>],
    position: &mut [usize],
    counter: &mut usize,
) {
    let mut seen_closure = std::collections::HashSet::new();
    let mut stack = vec![(root, usize::MAX, 0usize)];
    visited[root] = true;
    position[root] = *counter;
    *counter += 1;
    while let Some(frame) = stack.last_mut() {
        let (atom, parent_bond, cursor) = *frame;
        let nbrs = g.neighbors(atom);
        if cursor >= nbrs.len() {
            stack.pop();
            continue;
        }
        frame.2 += 1;
        let (nbr, bond) = nbrs[cursor];
        if bond == parent_bond {
            continue;
        }
        if visited[nbr] {
            if seen_closure.insert(bond) {
                // closes at the later atom, which is the current one
                ring_closures[atom].push((nbr, bond));
            }
        } else {
            visited[nbr] = true;
            position[nbr] = *counter;
            *counter += 1;
            children[atom].push((nbr, bond));
            stack.push((nbr, bond, 0));
        }
    }
}

fn bond_prefix(order: BondOrder) -> &'static str {
    match order {
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        _ => "",
    }
}

fn index_tokens(q: usize) -> Result<(usize, Vec<String>), SelfiesError> {
    let len = match q {
        0..=15 => 1,
        16..=255 => 2,
        256..=4095 => 3,
        _ => {
            return Err(SelfiesError::UnsupportedFeature(format!(
                "branch or ring span {q} exceeds three index symbols"
            )))
        }
    };
    let symbols = &table().index_symbols;
    let digits = (0..len)
        .rev()
        .map(|k| symbols[(q >> (4 * k)) & 0xF].clone())
        .collect();
    Ok((len, digits))
}

fn atom_token(g: &MolecularGraph, model: &ValenceModel, i: usize, via: Option<BondOrder>) -> String {
    let atom = &g.atoms()[i];
    let mut s = String::from("[");
    if let Some(order) = via {
        s.push_str(bond_prefix(order));
    }
    if let Some(iso) = atom.isotope {
        let _ = write!(s, "{iso}");
    }
    s.push_str(atom.element.symbol());
    let h = g.hydrogen_count(i);
    let implicit = (atom.formal_charge == 0)
        .then(|| model.implicit_hydrogens(atom.element, g.bond_order_sum(i), false))
        .flatten();
    let needs_h = match implicit {
        Some(ih) => ih != h,
        None => h > 0,
    };
    if needs_h {
        let _ = write!(s, "H{h}");
    }
    if atom.formal_charge != 0 {
        let _ = write!(s, "{:+}", atom.formal_charge);
    }
    s.push(']');
    s
}

fn encode_subtree(
    g: &MolecularGraph,
    model: &ValenceModel,
    atom: usize,
    via: Option<usize>,
    children: &[Vec<(usize, usize)>],
    ring_closures: &[Vec<(usize, usize)>],
    position: &[usize],
) -> Result<Vec<String>, SelfiesError> {
    let mut tokens = vec![atom_token(g, model, atom, via.map(|b| g.bonds()[b].order))];
    for &(other, bond) in &ring_closures[atom] {
        let q = position[atom] - position[other] - 1;
        let (len, idx) = index_tokens(q)?;
        tokens.push(format!("[{}Ring{len}]", bond_prefix(g.bonds()[bond].order)));
        tokens.extend(idx);
    }
    let kids = &children[atom];
    for (k, &(child, bond)) in kids.iter().enumerate() {
        let sub = encode_subtree(g, model, child, Some(bond), children, ring_closures, position)?;
        if k + 1 == kids.len() {
            tokens.extend(sub);
        } else {
            let (len, idx) = index_tokens(sub.len() - 1)?;
            tokens.push(format!("[{}Branch{len}]", bond_prefix(g.bonds()[bond].order)));
            tokens.extend(idx);
            tokens.extend(sub);
        }
    }
    Ok(tokens)
}

/// Kekulé form of `graph`: aromatic bonds become alternating single/double
/// bonds and aromatic flags are cleared. Hydrogen counts are preserved.
pub fn kekulize(graph: &MolecularGraph, model: &ValenceModel) -> Result<MolecularGraph, SelfiesError> {
    if !graph.atoms().iter().any(|a| a.aromatic) {
        return Ok(graph.clone());
    }
    let n = graph.atom_count();
    let needs_pi: Vec<bool> = (0..n)
        .map(|i| {
            let atom = &graph.atoms()[i];
            if !atom.aromatic {
                return false;
            }
            let base = graph.bond_order_sum(i) + u32::from(graph.hydrogen_count(i));
            let shifted = i16::from(atom.element.atomic_number()) - i16::from(atom.formal_charge);
            let valences = u8::try_from(shifted)
                .ok()
                .and_then(Element::from_atomic_number)
                .and_then(|e| model.valences(e));
            match valences.and_then(|v| v.iter().copied().find(|&v| u32::from(v) >= base)) {
                Some(target) => u32::from(target) > base,
                None => false,
            }
        })
        .collect();

    let candidates: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|i| {
            graph
                .neighbors(i)
                .iter()
                .copied()
                .filter(|&(nb, b)| graph.bonds()[b].order == BondOrder::Aromatic && needs_pi[nb])
                .collect()
        })
        .collect();

    let mut mate = vec![usize::MAX; n];
    let mut budget = 200_000usize;
    if !match_pi(&needs_pi, &candidates, &mut mate, &mut budget) {
        return Err(SelfiesError::UnsupportedFeature(
            "aromatic system has no Kekulé structure".into(),
        ));
    }

    let bonds: Vec<Bond> = graph
        .bonds()
        .iter()
        .map(|b| {
            let order = match b.order {
                BondOrder::Aromatic if mate[b.begin] == b.end => BondOrder::Double,
                BondOrder::Aromatic => BondOrder::Single,
                o => o,
            };
            Bond { order, ..b.clone() }
        })
        .collect();
    let atoms: Vec<Atom> = graph
        .atoms()
        .iter()
        .map(|a| Atom {
            aromatic: false,
            ..a.clone()
        })
        .collect();
    MolecularGraph::with_hydrogens(atoms, bonds, graph.source_text().to_string(), graph.hydrogen_counts().to_vec())
        .map_err(|e| SelfiesError::UnsupportedFeature(e.to_string()))
}

// Backtracking perfect matching over atoms that need a pi bond; always
// expands the most constrained unmatched atom.
fn match_pi(needs: &[bool], cand: &[Vec<(usize, usize)>], mate: &mut [usize], budget: &mut usize) -> bool {
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    let mut best: Option<(usize, usize)> = None;
    for i in 0..needs.len() {
        if !needs[i] || mate[i] != usize::MAX {
            continue;
        }
        let free = cand[i].iter().filter(|&&(nb, _)| mate[nb] == usize::MAX).count();
        if free == 0 {
            return false;
        }
        if best.is_none_or(|(_, f)| free < f) {
            best = Some((i, free));
        }
    }
    let Some((atom, _)) = best else {
        return true;
    };
    for &(nb, _) in &cand[atom] {
        if mate[nb] != usize::MAX {
            continue;
        }
        mate[atom] = nb;
        mate[nb] = atom;
        if match_pi(needs, cand, mate, budget) {
            return true;
        }
        mate[atom] = usize::MAX;
        mate[nb] = usize::MAX;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::canon::write_canonical_smiles;
    use crate::chem::smiles::parse_smiles;

    fn enc(s: &str) -> String {
        encode_selfies(&parse_smiles(s).unwrap()).unwrap()
    }

    fn dec_canon(s: &str) -> String {
        write_canonical_smiles(&decode_selfies(s).unwrap())
    }

    fn canon(s: &str) -> String {
        write_canonical_smiles(&parse_smiles(s).unwrap())
    }

    #[test]
    fn table_is_pinned() {
        assert_eq!(token_table_version(), 1);
        assert!(common_alphabet().iter().any(|t| t == "[Branch1]"));
    }

    #[test]
    fn encodes_simple_chains() {
        assert_eq!(enc("CCO"), "[C][C][O]");
        assert_eq!(enc("C"), "[C]");
        assert_eq!(enc("C=C"), "[C][=C]");
        assert_eq!(enc("CC(=O)O"), "[C][C][=Branch1][C][=O][O]");
    }

    #[test]
    fn decodes_reference_strings() {
        assert_eq!(dec_canon("[C][C][O]"), canon("CCO"));
        assert_eq!(dec_canon("[C][#C][#C]"), canon("C#CC"));
        assert_eq!(dec_canon("[C][C][=Branch1][C][=O][O]"), canon("CC(=O)O"));
        assert_eq!(dec_canon("[C][C][C][C][C][C][Ring1][=Branch1]"), canon("C1CCCCC1"));
        assert_eq!(dec_canon("[C][=C][C][=C][C][=C][Ring1][=Branch1]"), canon("C1=CC=CC=C1"));
    }

    #[test]
    fn saturated_atom_stops_derivation() {
        assert_eq!(dec_canon("[C][F][C]"), canon("CF"));
        // branch after a nearly saturated atom is ignored
        assert_eq!(dec_canon("[F][Branch1][C][C]"), canon("FCC"));
    }

    #[test]
    fn empty_and_unknown() {
        assert_eq!(decode_selfies(""), Err(SelfiesError::Empty));
        assert!(matches!(decode_selfies("[C][Xy]"), Err(SelfiesError::UnknownToken { position: 1, .. })));
        assert!(matches!(decode_selfies("C"), Err(SelfiesError::UnknownToken { .. })));
    }

    #[test]
    fn charged_and_hydrogen_tokens() {
        let g = decode_selfies("[C][N+1][Branch1][C][C][C]").unwrap();
        assert_eq!(g.atoms()[1].formal_charge, 1);
        // bracket tokens state hydrogens explicitly; none here
        assert_eq!(g.hydrogen_count(1), 0);
        assert_eq!(g.degree(1), 3);
        assert_eq!(enc("C[O-]"), "[C][O-1]");
        assert_eq!(dec_canon(&enc("[CH2]C")), canon("[CH2]C"));
    }

    #[test]
    fn aromatic_round_trip_via_kekule_form() {
        let model = ValenceModel::default();
        for s in ["c1ccccc1", "c1ccncc1", "c1cc[nH]c1", "c1ccc2ccccc2c1", "Cc1ccc(O)cc1", "o1cccc1"] {
            let g = parse_smiles(s).unwrap();
            let k = kekulize(&g, &model).unwrap();
            let back = decode_selfies(&encode_selfies(&g).unwrap()).unwrap();
            assert_eq!(write_canonical_smiles(&back), write_canonical_smiles(&k), "{s}");
        }
    }

    #[test]
    fn fragments_round_trip() {
        let s = "CC(=O)[O-].[Na+]";
        assert_eq!(dec_canon(&enc(s)), canon(s));
    }
}
