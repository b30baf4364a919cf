use std::collections::HashMap;

use molbench_core::dataset::{Label, TaskSpec};
use molbench_core::eval::{evaluate, EvalError};
use molbench_core::prompt::{PromptMode, Representation};
use molbench_core::transcript::{read_transcripts, write_transcripts, Transcript, TRANSCRIPT_SCHEMA_VERSION};

fn t(dataset: &str, id: u64, response: Option<&str>) -> Transcript {
    Transcript {
        schema_version: TRANSCRIPT_SCHEMA_VERSION,
        prompt_id: format!("{dataset}:{id}:icl2:smiles"),
        dataset: dataset.into(),
        target_id: id,
        model: "m".into(),
        mode: PromptMode::Icl(2),
        representation: Representation::Smiles,
        request_hash: "0".repeat(64),
        response: response.map(String::from),
        error: response.is_none().then(|| "timeout".to_string()),
        latency_ms: 5,
        attempts: 1,
        temperature: Some(0.0),
        max_tokens: Some(64),
    }
}

#[test]
fn classification_from_transcript_file() {
    let task = TaskSpec::builtin("bace").unwrap();
    let golds: HashMap<u64, Label> = (0..5).map(|i| (i, Label::Binary(i % 2 == 0))).collect();
    let ts = vec![
        t("bace", 0, Some("Yes")),
        t("bace", 1, Some("Answer: No")),
        t("bace", 2, Some("no")),
        t("bace", 3, Some("I cannot tell.")),
        t("bace", 4, None),
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    write_transcripts(&path, &ts).unwrap();
    let back = read_transcripts(&path).unwrap();
    assert_eq!(back, ts);
    let r = evaluate(&task, "m", "icl2", &back, &golds).unwrap();
    // 0 and 1 correct; 2 wrong; 3 and 4 unparsed count as wrong
    assert_eq!(r.accuracy, Some(0.4));
    // tp 1 (id 0), fn 2 (ids 2, 4), fp 0 -> f1 = 2/(2+2)
    assert_eq!(r.f1, Some(0.5));
    assert_eq!((r.n_total, r.n_unparsed, r.n_scored), (5, 2, 3));
    assert_eq!(r.parse_failure_rate, 0.4);
}

#[test]
fn regression_excludes_unparsed() {
    let task = TaskSpec::builtin("esol").unwrap();
    let golds: HashMap<u64, Label> = [(0, -1.0), (1, 2.0), (2, 0.5)].into_iter().map(|(i, v)| (i, Label::Number(v))).collect();
    let ts = vec![t("esol", 0, Some("-2.0")), t("esol", 1, Some("about 4")), t("esol", 2, Some("unknown"))];
    let r = evaluate(&task, "m", "icl2", &ts, &golds).unwrap();
    assert_eq!(r.mae, Some(1.5));
    assert_eq!(r.rmse, Some(2.5f64.sqrt()));
    assert_eq!(r.n_unparsed, 1);
}

#[test]
fn unknown_target_is_an_error() {
    let task = TaskSpec::builtin("bace").unwrap();
    let golds = HashMap::new();
    assert!(matches!(
        evaluate(&task, "m", "icl2", &[t("bace", 9, Some("yes"))], &golds),
        Err(EvalError::UnknownTarget(9))
    ));
}

#[test]
fn description_exact_match_scores_one() {
    let task = TaskSpec::builtin("chebi").unwrap();
    let text = "The molecule is a monocarboxylic acid anion that is the conjugate base of acetic acid.";
    let golds: HashMap<u64, Label> = [(0, Label::Text(text.into()))].into();
    let r = evaluate(&task, "m", "icl2", &[t("chebi", 0, Some(text))], &golds).unwrap();
    for (name, v) in r.metrics() {
        assert!(v > 0.99, "{name} {v}");
    }
}

#[test]
fn digest_ignores_latency_only() {
    use molbench_core::transcript::transcript_digest;
    let a = vec![t("bace", 0, Some("Yes")), t("bace", 1, None)];
    let mut b = a.clone();
    b[0].latency_ms = 999;
    assert_eq!(transcript_digest(&a), transcript_digest(&b));
    b[1].attempts = 3;
    assert_ne!(transcript_digest(&a), transcript_digest(&b));
    let swapped = vec![a[1].clone(), a[0].clone()];
    assert_ne!(transcript_digest(&a), transcript_digest(&swapped));
}
