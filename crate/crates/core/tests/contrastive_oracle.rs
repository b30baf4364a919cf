use molbench_core::chem::parse_smiles;
use molbench_core::contrastive::{
    batch_from_export, build_pair_manifest, ntxent_loss, read_embedding_export, write_embedding_export,
    write_pair_manifest, EmbeddingBatch, EmbeddingRecord,
};
use molbench_core::corpus::similarity_fixture;
use molbench_core::dataset::{image_path_for, Label, MoleculeRecord};
use molbench_core::fingerprint::{default_fingerprint, tanimoto, PairStrategy, SimilarityIndex, DEFAULT_RADIUS, DEFAULT_WIDTH};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

fn uniform(rng: &mut Xoshiro256StarStar) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn random_pairs(rng: &mut Xoshiro256StarStar, n: usize, d: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..n)
        .map(|_| {
            let a: Vec<f64> = (0..d).map(|_| uniform(rng)).collect();
            let b: Vec<f64> = (0..d).map(|_| uniform(rng)).collect();
            (a, b)
        })
        .collect()
}

/// The loss written out term by term: explicit cosine, explicit exponentials,
/// no log-sum-exp shift.
fn brute_force(pairs: &[(Vec<f64>, Vec<f64>)], tau: f64) -> f64 {
    let mut z: Vec<&Vec<f64>> = pairs.iter().map(|p| &p.0).collect();
    z.extend(pairs.iter().map(|p| &p.1));
    let n = pairs.len();
    let cos = |a: &Vec<f64>, b: &Vec<f64>| {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        d / (na * nb)
    };
    let mut sum = 0.0;
    for i in 0..2 * n {
        let j = if i < n { i + n } else { i - n };
        let num = (cos(z[i], z[j]) / tau).exp();
        let den: f64 = (0..2 * n).filter(|&k| k != i).map(|k| (cos(z[i], z[k]) / tau).exp()).sum();
        sum += (num / den).ln();
    }
    -sum / (2 * n) as f64
}

#[test]
fn matches_brute_force_on_random_batches() {
    let mut rng = Xoshiro256StarStar::seed_from_u64(77);
    for t in 0..100 {
        let n = 1 + t % 8;
        let d = 2 + (t * 7) % 15;
        let tau = 0.1 + (t % 10) as f64 * 0.1;
        let pairs = random_pairs(&mut rng, n, d);
        let batch = EmbeddingBatch::from_pairs(&pairs).unwrap();
        let got = ntxent_loss(&batch, tau).unwrap();
        let want = brute_force(&pairs, tau);
        assert!((got - want).abs() <= 1e-9, "batch {t}: {got} vs {want}");
        assert!(got >= 0.0);
        if n == 1 {
            assert_eq!(got, 0.0);
        }
    }
}

#[test]
fn two_pair_closed_form() {
    // each anchor sees its positive at cosine 1 and two orthogonal negatives
    let pairs = vec![(vec![1.0, 0.0], vec![1.0, 0.0]), (vec![0.0, 1.0], vec![0.0, 1.0])];
    let loss = ntxent_loss(&EmbeddingBatch::from_pairs(&pairs).unwrap(), 1.0).unwrap();
    let expected = (2.0 + 1.0f64.exp()).ln() - 1.0;
    assert!((loss - expected).abs() < 1e-15);
}

#[test]
fn large_temperature_limit() {
    let mut rng = Xoshiro256StarStar::seed_from_u64(3);
    for n in 2..=6 {
        let batch = EmbeddingBatch::from_pairs(&random_pairs(&mut rng, n, 8)).unwrap();
        let loss = ntxent_loss(&batch, 1e6).unwrap();
        assert!((loss - ((2 * n - 1) as f64).ln()).abs() < 1e-3);
    }
}

#[test]
fn pair_order_does_not_matter() {
    let mut rng = Xoshiro256StarStar::seed_from_u64(5);
    let pairs = random_pairs(&mut rng, 7, 9);
    let a = ntxent_loss(&EmbeddingBatch::from_pairs(&pairs).unwrap(), 0.5).unwrap();
    let mut rev = pairs.clone();
    rev.reverse();
    rev.swap(0, 3);
    let b = ntxent_loss(&EmbeddingBatch::from_pairs(&rev).unwrap(), 0.5).unwrap();
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn closer_positive_lowers_loss() {
    let e = |i: usize| {
        let mut v = vec![0.0; 4];
        v[i] = 1.0;
        v
    };
    let mut last = f64::INFINITY;
    for step in 0..=12 {
        let theta = 1.2 - 0.1 * step as f64;
        let b1 = vec![theta.cos(), 0.0, 0.0, theta.sin()];
        let pairs = vec![(e(0), b1), (e(1), e(1)), (e(2), e(2))];
        let loss = ntxent_loss(&EmbeddingBatch::from_pairs(&pairs).unwrap(), 0.5).unwrap();
        assert!(loss < last);
        last = loss;
    }
}

#[test]
fn f32_agrees_with_f64() {
    let mut rng = Xoshiro256StarStar::seed_from_u64(8);
    let pairs = random_pairs(&mut rng, 4, 6);
    let p32: Vec<(Vec<f32>, Vec<f32>)> = pairs
        .iter()
        .map(|(a, b)| (a.iter().map(|&x| x as f32).collect(), b.iter().map(|&x| x as f32).collect()))
        .collect();
    let l64 = ntxent_loss(&EmbeddingBatch::from_pairs(&pairs).unwrap(), 0.5).unwrap();
    let l32 = ntxent_loss(&EmbeddingBatch::from_pairs(&p32).unwrap(), 0.5f32).unwrap();
    assert!((f64::from(l32) - l64).abs() < 1e-4);
}

#[test]
fn export_round_trip_reproduces_loss() {
    let mut rng = Xoshiro256StarStar::seed_from_u64(21);
    let pairs = random_pairs(&mut rng, 5, 7);
    let records: Vec<EmbeddingRecord> = pairs
        .iter()
        .enumerate()
        .flat_map(|(p, (a, b))| {
            [
                EmbeddingRecord { pair: p, view: 1, id: p as u64, vector: b.clone() },
                EmbeddingRecord { pair: p, view: 0, id: p as u64, vector: a.clone() },
            ]
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.jsonl");
    write_embedding_export(&path, &records).unwrap();
    let batch: EmbeddingBatch<f64> = batch_from_export(&read_embedding_export(&path).unwrap()).unwrap();
    assert_eq!(batch, EmbeddingBatch::from_pairs(&pairs).unwrap());
    assert!(batch_from_export::<f64>(&records[..3]).is_err());
}

fn records(smiles: &[String]) -> Vec<MoleculeRecord> {
    smiles
        .iter()
        .enumerate()
        .map(|(i, s)| MoleculeRecord {
            schema_version: 1,
            id: i as u64,
            smiles: s.clone(),
            selfies: None,
            canonical: s.clone(),
            label: Label::Binary(i % 2 == 0),
            image_path: image_path_for("fx", s),
            label_conflict: false,
        })
        .collect()
}

fn index_of(recs: &[MoleculeRecord]) -> SimilarityIndex {
    SimilarityIndex::new(
        DEFAULT_WIDTH,
        DEFAULT_RADIUS,
        recs.iter().map(|r| (r.id, default_fingerprint(&parse_smiles(&r.canonical).unwrap()))),
    )
    .unwrap()
}

#[test]
fn aug_manifest_single_molecule() {
    let recs = records(&["CCO".to_string()]);
    let m = build_pair_manifest(&recs, &index_of(&recs), PairStrategy::Aug, 1);
    assert_eq!(m.entries.len(), 1);
    let t = m.entries[0].transforms.unwrap();
    assert_ne!(t[0], t[1]);
    assert_eq!(m.entries[0].anchor_image, m.entries[0].positive_image);
}

#[test]
fn taug_on_dissimilar_fixture_skips_everything() {
    let recs = records(&["C".into(), "c1ccccc1".into(), "O=C=O".into(), "N#N".into()]);
    let m = build_pair_manifest(&recs, &index_of(&recs), PairStrategy::TAug, 1);
    assert!(m.entries.is_empty());
    assert_eq!(m.skipped, vec![0, 1, 2, 3]);
}

#[test]
fn taug_matches_brute_force_pairs() {
    let smiles: Vec<String> = similarity_fixture(31, 100);
    let recs = records(&smiles);
    let index = index_of(&recs);
    let m = build_pair_manifest(&recs, &index, PairStrategy::TAug, 9);
    let fps: Vec<_> = recs.iter().map(|r| default_fingerprint(&parse_smiles(&r.canonical).unwrap())).collect();
    let mut expected = Vec::new();
    for i in 0..recs.len() {
        let mut cands: Vec<(u64, f64)> = (0..recs.len())
            .filter(|&j| j != i)
            .map(|j| (j as u64, tanimoto(&fps[i], &fps[j]).unwrap()))
            .filter(|(_, s)| *s > 0.85)
            .collect();
        cands.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        cands.truncate(3);
        expected.extend(cands.into_iter().map(|(j, s)| (i as u64, j, s)));
    }
    let got: Vec<_> = m.entries.iter().map(|e| (e.anchor, e.positive, e.score.unwrap())).collect();
    assert!(!expected.is_empty());
    assert_eq!(got, expected);

    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    write_pair_manifest(&a, &m).unwrap();
    write_pair_manifest(&b, &build_pair_manifest(&recs, &index, PairStrategy::TAug, 9)).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}
