//! Circular fingerprints, Tanimoto similarity and an exact-scan similarity
//! index used for few-shot example selection and positive-pair mining.

use std::collections::BTreeSet;
use std::io::{self, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::MolecularGraph;

pub const DEFAULT_WIDTH: usize = 2048;
pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_MINING_THRESHOLD: f64 = 0.85;
pub const DEFAULT_POSITIVES_PER_ANCHOR: usize = 3;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

const INDEX_MAGIC: &[u8; 8] = b"MBFPIDX\0";
const INDEX_VERSION: u32 = 1;

/// FNV-1a, 64 bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error("fingerprint widths differ ({0} vs {1})")]
    WidthMismatch(usize, usize),
    #[error("duplicate molecule id {0} in index")]
    DuplicateId(u64),
    #[error("malformed index file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Fixed-width bitset fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    words: Vec<u64>,
    width: usize,
    radius: u32,
}

impl Fingerprint {
    pub fn empty(width: usize, radius: u32) -> Fingerprint {
        Fingerprint {
            words: vec![0; width.div_ceil(64)],
            width,
            radius,
        }
    }

    pub fn from_bits(width: usize, radius: u32, bits: impl IntoIterator<Item = usize>) -> Fingerprint {
        let mut fp = Fingerprint::empty(width, radius);
        for b in bits {
            fp.set(b);
        }
        fp
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.width, "bit {bit} outside width {}", self.width);
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn popcount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|&b| self.get(b))
    }
}

/// Morgan/ECFP-style fingerprint. The initial atom invariant is
/// (atomic number, charge, degree, H count, ring flag); each iteration hashes
/// an atom's previous identifier with its sorted (bond code, neighbor
/// identifier) pairs. Every identifier from iterations 0..=radius sets one bit.
pub fn morgan_fingerprint(graph: &MolecularGraph, radius: u32, width: usize) -> Fingerprint {
    assert!(width > 0, "fingerprint width must be positive");
    let mut fp = Fingerprint::empty(width, radius);
    let n = graph.atom_count();
    let mut ids: Vec<u64> = (0..n)
        .map(|i| {
            let a = &graph.atoms()[i];
            let mut buf = Vec::with_capacity(5);
            buf.push(a.element.atomic_number());
            buf.push(a.formal_charge as u8);
            buf.push(u8::try_from(graph.degree(i)).unwrap_or(u8::MAX));
            buf.push(graph.hydrogen_count(i));
            buf.push(u8::from(a.ring_member));
            fnv1a64(&buf)
        })
        .collect();
    for &id in &ids {
        fp.set((id % width as u64) as usize);
    }
    for iteration in 1..=radius {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                let mut env: Vec<(u8, u64)> = graph
                    .neighbors(i)
                    .iter()
                    .map(|&(nb, b)| (graph.bonds()[b].order.code(), ids[nb]))
                    .collect();
                env.sort_unstable();
                let mut buf = Vec::with_capacity(12 + env.len() * 9);
                buf.extend_from_slice(&iteration.to_le_bytes());
                buf.extend_from_slice(&ids[i].to_le_bytes());
                for (code, id) in env {
                    buf.push(code);
                    buf.extend_from_slice(&id.to_le_bytes());
                }
                fnv1a64(&buf)
            })
            .collect();
        ids = next;
        for &id in &ids {
            fp.set((id % width as u64) as usize);
        }
    }
    fp
}

/// Fingerprint with the default radius and width.
pub fn default_fingerprint(graph: &MolecularGraph) -> Fingerprint {
    morgan_fingerprint(graph, DEFAULT_RADIUS, DEFAULT_WIDTH)
}

/// |a ∧ b| / |a ∨ b|, with 0 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.width != b.width {
        return Err(FingerprintError::WidthMismatch(a.width, b.width));
    }
    Ok(tanimoto_words(&a.words, &b.words))
}

fn tanimoto_words(a: &[u64], b: &[u64]) -> f64 {
    let (mut both, mut either) = (0u32, 0u32);
    for (x, y) in a.iter().zip(b) {
        both += (x & y).count_ones();
        either += (x | y).count_ones();
    }
    if either == 0 {
        0.0
    } else {
        f64::from(both) / f64::from(either)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairStrategy {
    #[serde(rename = "Aug")]
    Aug,
    #[serde(rename = "T-Aug")]
    TAug,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivePair {
    pub anchor_id: u64,
    pub positive_id: u64,
    pub similarity: f64,
    pub strategy: PairStrategy,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MinedPairs {
    pub pairs: Vec<PositivePair>,
    /// Anchors with no partner above the threshold.
    pub skipped: BTreeSet<u64>,
}

/// Immutable exact-scan index. Entries keep insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityIndex {
    width: usize,
    radius: u32,
    ids: Vec<u64>,
    fingerprints: Vec<Fingerprint>,
}

impl SimilarityIndex {
    pub fn new(
        width: usize,
        radius: u32,
        entries: impl IntoIterator<Item = (u64, Fingerprint)>,
    ) -> Result<SimilarityIndex, FingerprintError> {
        let mut seen = BTreeSet::new();
        let mut index = SimilarityIndex {
            width,
            radius,
            ids: Vec::new(),
            fingerprints: Vec::new(),
        };
        for (id, fp) in entries {
            if fp.width != width {
                return Err(FingerprintError::WidthMismatch(width, fp.width));
            }
            if !seen.insert(id) {
                return Err(FingerprintError::DuplicateId(id));
            }
            index.ids.push(id);
            index.fingerprints.push(fp);
        }
        Ok(index)
    }

    /// Fingerprints every graph in parallel with the given parameters.
    pub fn build(
        graphs: &[(u64, MolecularGraph)],
        radius: u32,
        width: usize,
    ) -> Result<SimilarityIndex, FingerprintError> {
        let fps: Vec<Fingerprint> = graphs
            .par_iter()
            .map(|(_, g)| morgan_fingerprint(g, radius, width))
            .collect();
        SimilarityIndex::new(width, radius, graphs.iter().map(|(id, _)| *id).zip(fps))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn entries(&self) -> impl Iterator<Item = (u64, &Fingerprint)> {
        self.ids.iter().copied().zip(&self.fingerprints)
    }

    pub fn get(&self, id: u64) -> Option<&Fingerprint> {
        self.ids.iter().position(|&i| i == id).map(|p| &self.fingerprints[p])
    }

    /// The `k` most similar entries to `query`, excluding `query_id`.
    pub fn top_k(
        &self,
        query: &Fingerprint,
        query_id: Option<u64>,
        k: usize,
    ) -> Result<Vec<(u64, f64)>, FingerprintError> {
        if query.width != self.width {
            return Err(FingerprintError::WidthMismatch(self.width, query.width));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut scored: Vec<(u64, f64)> = self
            .entries()
            .filter(|(id, _)| Some(*id) != query_id)
            .map(|(id, fp)| (id, tanimoto_words(&query.words, &fp.words)))
            .collect();
        let by_rank = |a: &(u64, f64), b: &(u64, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, by_rank);
            scored.truncate(k);
        }
        scored.sort_by(by_rank);
        Ok(scored)
    }

    /// For each anchor, up to `m` partners scoring strictly above
    /// `threshold`, best first. Anchors without partners are skipped.
    pub fn mine_positives(&self, threshold: f64, m: usize) -> MinedPairs {
        assert!(threshold > 0.0 && threshold <= 1.0, "threshold must lie in (0, 1]");
        let per_anchor: Vec<Vec<(u64, f64)>> = (0..self.len())
            .into_par_iter()
            .map(|a| {
                let mut hits: Vec<(u64, f64)> = (0..self.len())
                    .filter(|&b| b != a)
                    .map(|b| (self.ids[b], tanimoto_words(&self.fingerprints[a].words, &self.fingerprints[b].words)))
                    .filter(|&(_, s)| s > threshold)
                    .collect();
                hits.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
                hits.truncate(m);
                hits
            })
            .collect();
        let mut out = MinedPairs::default();
        for (a, hits) in per_anchor.into_iter().enumerate() {
            if hits.is_empty() {
                out.skipped.insert(self.ids[a]);
            }
            out.pairs.extend(hits.into_iter().map(|(positive_id, similarity)| PositivePair {
                anchor_id: self.ids[a],
                positive_id,
                similarity,
                strategy: PairStrategy::TAug,
            }));
        }
        out
    }

    /// Binary layout, little endian:
    /// magic `MBFPIDX\0`, u32 version, u32 width, u32 radius, u64 count, then
    /// `count` records of (u64 id, ceil(width/64) u64 words).
    pub fn write_to(&self, mut w: impl Write) -> Result<(), FingerprintError> {
        w.write_all(INDEX_MAGIC)?;
        w.write_all(&INDEX_VERSION.to_le_bytes())?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&self.radius.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for (id, fp) in self.entries() {
            w.write_all(&id.to_le_bytes())?;
            for word in &fp.words {
                w.write_all(&word.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<SimilarityIndex, FingerprintError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(FingerprintError::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != INDEX_VERSION {
            return Err(FingerprintError::Format(format!("unsupported version {version}")));
        }
        let width = read_u32(&mut r)? as usize;
        let radius = read_u32(&mut r)?;
        let count = read_u64(&mut r)?;
        if width == 0 {
            return Err(FingerprintError::Format("zero width".into()));
        }
        let words = width.div_ceil(64);
        let mut entries = Vec::new();
        for _ in 0..count {
            let id = read_u64(&mut r)?;
            let mut fp = Fingerprint::empty(width, radius);
            for w in fp.words.iter_mut() {
                *w = read_u64(&mut r)?;
            }
            if width % 64 != 0 && fp.words[words - 1] >> (width % 64) != 0 {
                return Err(FingerprintError::Format(format!("record {id} has bits beyond width")));
            }
            entries.push((id, fp));
        }
        SimilarityIndex::new(width, radius, entries)
    }
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn fp(s: &str) -> Fingerprint {
        default_fingerprint(&parse_smiles(s).unwrap())
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn single_carbon_sets_at_most_three_bits() {
        let f = fp("C");
        assert!((1..=3).contains(&f.popcount()));
    }

    #[test]
    fn tanimoto_basics() {
        let a = Fingerprint::from_bits(64, 2, 0..12);
        let b = Fingerprint::from_bits(64, 2, [0, 1, 2]);
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.25);
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        let c = Fingerprint::from_bits(64, 2, [40]);
        assert_eq!(tanimoto(&b, &c).unwrap(), 0.0);
        let e = Fingerprint::empty(64, 2);
        assert_eq!(tanimoto(&e, &e).unwrap(), 0.0);
        assert!(matches!(
            tanimoto(&a, &Fingerprint::empty(128, 2)),
            Err(FingerprintError::WidthMismatch(64, 128))
        ));
    }

    #[test]
    fn top_k_excludes_self() {
        let idx = SimilarityIndex::new(
            2048,
            2,
            ["CCO", "CCCO", "c1ccccc1"].iter().enumerate().map(|(i, s)| (i as u64, fp(s))),
        )
        .unwrap();
        let hits = idx.top_k(&fp("CCO"), Some(0), 1).unwrap();
        assert_eq!(hits[0].0, 1);
        assert!(idx.top_k(&fp("CCO"), Some(0), 0).unwrap().is_empty());
        assert_eq!(idx.top_k(&fp("CCO"), None, 10).unwrap().len(), 3);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let r = SimilarityIndex::new(2048, 2, [(1, fp("C")), (1, fp("CC"))]);
        assert!(matches!(r, Err(FingerprintError::DuplicateId(1))));
    }
}
