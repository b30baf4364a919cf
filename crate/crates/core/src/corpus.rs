//! Bundled reference molecules and seeded random molecule generation for
//! fixtures.

use std::collections::HashSet;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::chem::selfies::common_alphabet;
use crate::chem::{decode_selfies, write_canonical_smiles};

const REFERENCE_TSV: &str = include_str!("../assets/corpus/reference_smiles.tsv");

/// `(name, smiles)` pairs from the bundled corpus, in file order.
pub fn reference_corpus() -> Vec<(&'static str, &'static str)> {
    REFERENCE_TSV
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .filter_map(|l| l.split_once('\t'))
        .collect()
}

fn uniform_below(rng: &mut impl RngCore, n: usize) -> usize {
    ((u128::from(rng.next_u64()) * n as u128) >> 64) as usize
}

/// A random token string over the common SELFIES alphabet with `len` tokens.
pub fn random_selfies(rng: &mut impl RngCore, len: usize) -> String {
    let alphabet = common_alphabet();
    (0..len).map(|_| alphabet[uniform_below(rng, alphabet.len())].as_str()).collect()
}

/// `n` distinct canonical SMILES, each decoded from a random SELFIES string
/// of `min_len..=max_len` tokens. Decodes to fewer than two atoms or to
/// several fragments are rejected. Deterministic in `seed`.
pub fn random_molecules(seed: u64, n: usize, min_len: usize, max_len: usize) -> Vec<String> {
    assert!(min_len >= 1 && min_len <= max_len);
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        assert!(attempts < 1000 * n + 10_000, "random molecule generator stalled");
        let len = min_len + uniform_below(&mut rng, max_len - min_len + 1);
        let text = random_selfies(&mut rng, len);
        let Ok(graph) = decode_selfies(&text) else { continue };
        if graph.atom_count() < 2 || graph.connected_components().len() != 1 {
            continue;
        }
        let canonical = write_canonical_smiles(&graph);
        if seen.insert(canonical.clone()) {
            out.push(canonical);
        }
    }
    out
}

/// `n` SMILES for similarity fixtures: each reference molecule followed by
/// its hydrochloride and methyl analogues (near neighbours above typical mining
/// thresholds), then random molecules. Truncated to `n`.
pub fn similarity_fixture(seed: u64, n: usize) -> Vec<String> {
    let corpus = reference_corpus();
    let mut out = Vec::new();
    for (_, s) in &corpus {
        out.push(s.to_string());
        out.push(format!("{s}.Cl"));
        let methyl = format!("C{s}");
        if crate::chem::parse_smiles(&methyl).is_ok() {
            out.push(methyl);
        }
    }
    if out.len() < n {
        out.extend(random_molecules(seed, n - out.len(), 4, 30));
    }
    out.truncate(n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_loads() {
        let c = reference_corpus();
        assert!(c.len() >= 200);
        assert_eq!(c[0], ("methane", "C"));
    }

    #[test]
    fn random_molecules_are_deterministic_and_distinct() {
        let a = random_molecules(3, 50, 4, 20);
        assert_eq!(a, random_molecules(3, 50, 4, 20));
        assert_eq!(a.iter().collect::<HashSet<_>>().len(), 50);
    }
}
