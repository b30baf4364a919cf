use molbench_core::eval::{
    bleu_n, classification_metrics, corpus_bleu, meteor, meteor_detail, regression_metrics, rouge, tokenize,
    RougeVariant,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use proptest::prelude::*;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

#[test]
fn tokenizer_rule() {
    assert_eq!(tokenize("  Hello, World!  the  END. "), ["hello", "world", "the", "end"]);
    assert_eq!(tokenize("a-b (c)"), ["a-b", "(c"]);
}

// Counts worked by hand: candidate "the cat is on the mat" against reference
// "the cat sat on the mat" has unigram matches 5/6, bigram 3/5, trigram 1/4
// and no 4-gram match.
#[test]
fn bleu_hand_counts() {
    let cand = "the cat is on the mat";
    let refr = "the cat sat on the mat";
    assert!(close(bleu_n(cand, &[refr], 2), (5.0f64 / 6.0 * 3.0 / 5.0).sqrt()));
    assert_eq!(bleu_n(cand, &[refr], 4), 0.0);
    // short candidate: both precisions 1, brevity penalty exp(1 - 6/2)
    assert!(close(bleu_n("the cat", &[refr], 2), (-2.0f64).exp()));
    // closest reference length wins
    assert!(close(bleu_n("the cat", &["the cat", refr], 2), 1.0));
    // corpus pooling: (2+5)/(2+6) unigrams, (1+3)/(1+5) bigrams, lengths 8 vs 12
    let segs = vec![
        ("the cat".to_string(), vec![refr.to_string()]),
        (cand.to_string(), vec![refr.to_string()]),
    ];
    let expected = (1.0f64 - 12.0 / 8.0).exp() * (7.0f64 / 8.0 * 4.0 / 6.0).sqrt();
    assert!(close(corpus_bleu(&segs, 2), expected));
}

#[test]
fn rouge_hand_counts() {
    assert!(close(rouge("the cat sat", "the cat ran", RougeVariant::One), 2.0 / 3.0));
    assert!(close(rouge("the cat sat", "the cat ran", RougeVariant::Two), 0.5));
    assert!(close(rouge("the cat sat", "the cat ran", RougeVariant::L), 2.0 / 3.0));
    assert!(close(rouge("a b c d", "a c", RougeVariant::L), 2.0 / 3.0));
    for v in [RougeVariant::One, RougeVariant::Two, RougeVariant::L] {
        assert_eq!(rouge("x y z", "x y z", v), 1.0);
        assert_eq!(rouge("a b", "c d", v), 0.0);
    }
}

#[test]
fn meteor_hand_counts() {
    // 5 identical tokens: one chunk, penalty 0.5 * (1/5)^3
    let d = meteor_detail("the molecule is an alcohol", "the molecule is an alcohol");
    assert_eq!((d.matches, d.chunks), (5, 1));
    assert!(close(d.score, 1.0 - 0.5 / 125.0));
    // asymmetric pair: P=1/2, R=1 gives F_mean 10/11; swapped gives 10/19;
    // both align as two chunks out of two matches (penalty 0.5)
    assert!(close(meteor("a b c d", "a c"), 5.0 / 11.0));
    assert!(close(meteor("a c", "a b c d"), 5.0 / 19.0));
    assert_eq!(meteor("word", "word"), 0.5);
}

fn confusion_oracle(preds: &[Option<bool>], golds: &[bool]) -> (f64, f64) {
    let mut m = [[0u32; 2]; 2];
    for (p, g) in preds.iter().zip(golds) {
        m[usize::from(p.unwrap_or(false))][usize::from(*g)] += 1;
    }
    let correct = preds.iter().zip(golds).filter(|(p, g)| **p == Some(**g)).count();
    let (tp, fp, fneg) = (m[1][1] as f64, m[1][0] as f64, m[0][1] as f64);
    let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fneg) };
    (correct as f64 / golds.len() as f64, f1)
}

#[test]
fn classification_matches_confusion_oracle() {
    let mut rng = Xoshiro256StarStar::seed_from_u64(4);
    for _ in 0..50 {
        let golds: Vec<bool> = (0..100).map(|_| rng.next_u32() % 3 == 0).collect();
        let preds: Vec<Option<bool>> = (0..100)
            .map(|_| match rng.next_u32() % 5 {
                0 => None,
                1 | 2 => Some(true),
                _ => Some(false),
            })
            .collect();
        let m = classification_metrics::<f64>(&preds, &golds).unwrap();
        let (acc, f1) = confusion_oracle(&preds, &golds);
        assert!(close(m.accuracy, acc) && close(m.f1, f1));
        // permuting pairs changes nothing
        let mut idx: Vec<usize> = (0..100).collect();
        idx.reverse();
        let p2: Vec<_> = idx.iter().map(|&i| preds[i]).collect();
        let g2: Vec<_> = idx.iter().map(|&i| golds[i]).collect();
        assert_eq!(classification_metrics::<f64>(&p2, &g2).unwrap().f1, m.f1);
    }
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap()
}

#[test]
fn regression_matches_exact_rational_reference() {
    let mut rng = Xoshiro256StarStar::seed_from_u64(12);
    let preds: Vec<Option<f64>> = (0..1000).map(|_| Some((rng.next_u64() % 2_000_000) as f64 / 1e4 - 100.0)).collect();
    let golds: Vec<f64> = (0..1000).map(|_| (rng.next_u64() % 2_000_000) as f64 / 1e4 - 100.0).collect();
    let m = regression_metrics::<f64>(&preds, &golds).unwrap();
    let n = BigRational::from_integer(BigInt::from(1000));
    let mut abs_sum = BigRational::zero();
    let mut sq_sum = BigRational::zero();
    for (p, g) in preds.iter().zip(&golds) {
        let e = exact(p.unwrap()) - exact(*g);
        abs_sum += e.abs();
        sq_sum += &e * &e;
    }
    let mae = (abs_sum / &n).to_f64().unwrap();
    let mse = (sq_sum / &n).to_f64().unwrap();
    assert!(close(m.mae, mae), "{} vs {mae}", m.mae);
    assert!(close(m.rmse, mse.sqrt()), "{} vs {}", m.rmse, mse.sqrt());
    let m32 = regression_metrics::<f32>(
        &preds.iter().map(|p| p.map(|v| v as f32)).collect::<Vec<_>>(),
        &golds.iter().map(|&v| v as f32).collect::<Vec<_>>(),
    )
    .unwrap();
    assert!((f64::from(m32.mae) - mae).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]
    #[test]
    fn rmse_never_below_mae(pairs in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..20)) {
        let preds: Vec<Option<f64>> = pairs.iter().map(|p| Some(p.0)).collect();
        let golds: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let m = regression_metrics::<f64>(&preds, &golds).unwrap();
        prop_assert!(m.rmse >= m.mae, "rmse {} < mae {}", m.rmse, m.mae);
    }

    #[test]
    fn text_metrics_in_unit_interval(a in "[a-d ]{0,30}", b in "[a-d ]{0,30}") {
        for v in [bleu_n(&a, &[&b], 2), bleu_n(&a, &[&b], 4), rouge(&a, &b, RougeVariant::One),
                  rouge(&a, &b, RougeVariant::Two), rouge(&a, &b, RougeVariant::L), meteor(&a, &b)] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
