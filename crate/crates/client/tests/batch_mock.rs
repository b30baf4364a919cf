use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use molbench_client::mock::ANY_PROMPT;
use molbench_client::{run_batch, Backoff, BatchOptions, Client, EndpointConfig, MockScript, MockServer};
use molbench_core::prompt::{prompt_id, ExpectedFormat, PromptMode, PromptRecord, Representation};
use molbench_core::transcript::{read_transcripts, transcript_digest};

fn prompts(dir: &Path, n: u64) -> Vec<PromptRecord> {
    std::fs::create_dir_all(dir.join("bace")).unwrap();
    (0..n)
        .map(|i| {
            let image_path = format!("bace/{i}.png");
            std::fs::write(dir.join(&image_path), format!("\u{89}PNG fake {i}")).unwrap();
            PromptRecord {
                schema_version: 1,
                prompt_id: prompt_id("bace", i, PromptMode::Icl(2), Representation::Smiles),
                dataset: "bace".into(),
                target_id: i,
                text: format!("Question {i}: is it active?"),
                image_path,
                mode: PromptMode::Icl(2),
                representation: Representation::Smiles,
                example_ids: vec![],
                expected_format: ExpectedFormat::YesNo,
            }
        })
        .collect()
}

fn answers(ps: &[PromptRecord]) -> BTreeMap<String, String> {
    ps.iter()
        .map(|p| (p.prompt_id.clone(), if p.target_id % 3 == 0 { "Yes" } else { "No" }.to_string()))
        .collect()
}

fn fast(base_url: &str, limit: usize) -> EndpointConfig {
    let mut cfg = EndpointConfig::new(base_url, "mock-vlm");
    cfg.concurrency_limit = limit;
    cfg.max_retries = 3;
    cfg.timeout_ms = 5_000;
    cfg.backoff = Backoff {
        base_ms: 5,
        factor: 2.0,
        jitter: 0.2,
        cap_ms: 50,
    };
    cfg
}

#[tokio::test]
async fn scripted_answer_is_recorded_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let ps = prompts(dir.path(), 1);
    let server = MockServer::start(MockScript {
        default_response: Some("Yes, it binds.".into()),
        ..Default::default()
    })
    .await
    .unwrap();
    let client = Client::new(fast(&server.base_url(), 1), dir.path()).unwrap();
    let t = client.complete(&ps[0]).await;
    assert_eq!(t.response.as_deref(), Some("Yes, it binds."));
    assert_eq!((t.attempts, t.error.is_none()), (1, true));
    assert_eq!(t.temperature, Some(0.0));
    let out = run_batch(&client, &ps, &BatchOptions::default()).await.unwrap();
    assert_eq!(out.transcripts.len(), 1);
    assert_eq!(out.transcripts[0].request_hash, t.request_hash);
}

#[tokio::test]
async fn rate_limit_then_success() {
    let dir = tempfile::tempdir().unwrap();
    let ps = prompts(dir.path(), 1);
    let server = MockScript {
        default_response: Some("No".into()),
        fail_first: [(ANY_PROMPT.to_string(), vec![429])].into(),
        ..Default::default()
    };
    let server = MockServer::start(server).await.unwrap();
    let client = Client::new(fast(&server.base_url(), 1), dir.path()).unwrap();
    let t = client.complete(&ps[0]).await;
    assert_eq!(t.attempts, 2);
    assert_eq!(t.response.as_deref(), Some("No"));
    assert_eq!(server.stats().requests, 2);
}

#[tokio::test]
async fn server_errors_exhaust_retries() {
    let dir = tempfile::tempdir().unwrap();
    let ps = prompts(dir.path(), 1);
    let server = MockServer::start(MockScript {
        default_response: Some("No".into()),
        fail_first: [(ANY_PROMPT.to_string(), vec![503; 10])].into(),
        ..Default::default()
    })
    .await
    .unwrap();
    let client = Client::new(fast(&server.base_url(), 1), dir.path()).unwrap();
    let t = client.complete(&ps[0]).await;
    assert_eq!(t.attempts, 4);
    assert_eq!(t.error.as_deref(), Some("HTTP status 503"));
    assert!(t.response.is_none());
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let dir = tempfile::tempdir().unwrap();
    let ps = prompts(dir.path(), 1);
    let server = MockServer::start(MockScript::default()).await.unwrap();
    let client = Client::new(fast(&server.base_url(), 1), dir.path()).unwrap();
    let t = client.complete(&ps[0]).await;
    assert_eq!((t.attempts, t.error.as_deref()), (1, Some("HTTP status 404")));
}

#[tokio::test]
async fn unreachable_host() {
    let dir = tempfile::tempdir().unwrap();
    let ps = prompts(dir.path(), 1);
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let client = Client::new(fast(&format!("http://127.0.0.1:{port}/v1"), 1), dir.path()).unwrap();
    let t = client.complete(&ps[0]).await;
    assert_eq!(t.attempts, 4);
    assert!(t.response.is_none());
    assert!(t.error.unwrap().starts_with("transport"));
}

#[tokio::test]
async fn slow_server_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let ps = prompts(dir.path(), 1);
    let server = MockServer::start(MockScript {
        default_response: Some("Yes".into()),
        latency_ms: 400,
        ..Default::default()
    })
    .await
    .unwrap();
    let mut cfg = fast(&server.base_url(), 1);
    cfg.timeout_ms = 50;
    cfg.max_retries = 1;
    let t = Client::new(cfg, dir.path()).unwrap().complete(&ps[0]).await;
    assert_eq!((t.attempts, t.error.as_deref()), (2, Some("request timed out")));
}

#[tokio::test]
async fn missing_image_is_never_sent() {
    let dir = tempfile::tempdir().unwrap();
    let mut ps = prompts(dir.path(), 1);
    ps[0].image_path = "bace/absent.png".into();
    let server = MockServer::start(MockScript::default()).await.unwrap();
    let client = Client::new(fast(&server.base_url(), 1), dir.path()).unwrap();
    let t = client.complete(&ps[0]).await;
    assert_eq!(t.attempts, 0);
    assert!(t.error.unwrap().starts_with("image"));
    assert_eq!(server.stats().requests, 0);
}

#[tokio::test]
async fn concurrency_limit_and_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let ps = prompts(dir.path(), 10);
    let server = MockServer::start(MockScript {
        responses: answers(&ps),
        latency_ms: 20,
        latency_spread_ms: 40,
        ..Default::default()
    })
    .await
    .unwrap();
    let client = Client::new(fast(&server.base_url(), 3), dir.path()).unwrap();
    let out = run_batch(&client, &ps, &BatchOptions::default()).await.unwrap();
    let stats = server.stats();
    assert_eq!(stats.high_water, 3);
    assert_eq!(stats.requests, 10);
    let want = answers(&ps);
    for (p, t) in ps.iter().zip(&out.transcripts) {
        assert_eq!(t.prompt_id, p.prompt_id);
        assert_eq!(t.response.as_ref(), Some(&want[&p.prompt_id]));
    }
    assert_eq!((out.fetched, out.reused, out.failed), (10, 0, 0));
}

#[tokio::test]
async fn identical_runs_send_identical_payloads() {
    let dir = tempfile::tempdir().unwrap();
    let ps = prompts(dir.path(), 5);
    let server = MockServer::start(MockScript {
        responses: answers(&ps),
        ..Default::default()
    })
    .await
    .unwrap();
    let client = Client::new(fast(&server.base_url(), 2), dir.path()).unwrap();
    let a = run_batch(&client, &ps, &BatchOptions::default()).await.unwrap();
    let b = run_batch(&client, &ps, &BatchOptions::default()).await.unwrap();
    assert_eq!(transcript_digest(&a.transcripts), transcript_digest(&b.transcripts));

    let mut cfg = fast(&server.base_url(), 2);
    cfg.temperature = 0.2;
    let c = run_batch(&Client::new(cfg, dir.path()).unwrap(), &ps, &BatchOptions::default()).await.unwrap();
    assert_ne!(a.transcripts[0].request_hash, c.transcripts[0].request_hash);
    assert_eq!(c.transcripts[0].temperature, Some(0.2));
}

#[tokio::test]
async fn resume_after_interruption() {
    let dir = tempfile::tempdir().unwrap();
    let ps = prompts(dir.path(), 10);
    let server = MockServer::start(MockScript {
        responses: answers(&ps),
        latency_ms: 30,
        ..Default::default()
    })
    .await
    .unwrap();
    let client = Client::new(fast(&server.base_url(), 1), dir.path()).unwrap();
    let ckpt = dir.path().join("transcripts.jsonl");
    let opts = BatchOptions {
        checkpoint: Some(ckpt.clone()),
    };

    // interrupt once five transcripts are on disk
    let watcher = {
        let ckpt = ckpt.clone();
        async move {
            loop {
                let lines = std::fs::read_to_string(&ckpt).map_or(0, |s| s.lines().count());
                if lines >= 5 {
                    return;
                }
                tokio::time::sleep(Duration::from_millis(2)).await;
            }
        }
    };
    tokio::select! {
        _ = run_batch(&client, &ps, &opts) => panic!("batch finished before interruption"),
        _ = watcher => {}
    }
    let first = read_transcripts(&ckpt).unwrap();
    assert!(first.len() >= 5);
    // simulate a write cut off mid-line
    std::fs::write(&ckpt, format!("{}{{\"schema_version\":1,\"prom", std::fs::read_to_string(&ckpt).unwrap())).unwrap();

    let out = run_batch(&client, &ps, &opts).await.unwrap();
    assert_eq!(out.reused, first.len());
    assert_eq!(out.fetched, 10 - first.len());
    let stats = server.stats();
    for t in &first {
        assert_eq!(stats.per_prompt[&t.prompt_id], 1, "{} re-queried", t.prompt_id);
    }
    let on_disk = read_transcripts(&ckpt).unwrap();
    assert_eq!(on_disk.len(), 10);

    let fresh = run_batch(&client, &ps, &BatchOptions::default()).await.unwrap();
    assert_eq!(transcript_digest(&out.transcripts), transcript_digest(&fresh.transcripts));
}

#[tokio::test]
async fn failed_items_are_retried_on_resume() {
    let dir = tempfile::tempdir().unwrap();
    let ps = prompts(dir.path(), 3);
    let ckpt = dir.path().join("t.jsonl");
    let opts = BatchOptions {
        checkpoint: Some(ckpt.clone()),
    };
    let mut responses = answers(&ps);
    let missing = responses.remove(&ps[1].prompt_id).unwrap();
    let server = MockServer::start(MockScript {
        responses: responses.clone(),
        ..Default::default()
    })
    .await
    .unwrap();
    let out = run_batch(&Client::new(fast(&server.base_url(), 2), dir.path()).unwrap(), &ps, &opts)
        .await
        .unwrap();
    assert_eq!(out.failed, 1);
    assert!(out.transcripts[1].error.is_some());

    responses.insert(ps[1].prompt_id.clone(), missing);
    let server = MockServer::start(MockScript {
        responses,
        ..Default::default()
    })
    .await
    .unwrap();
    let out = run_batch(&Client::new(fast(&server.base_url(), 2), dir.path()).unwrap(), &ps, &opts)
        .await
        .unwrap();
    assert_eq!((out.reused, out.fetched, out.failed), (2, 1, 0));
    assert_eq!(server.stats().requests, 1);
}

#[tokio::test]
async fn batch_preconditions() {
    let dir = tempfile::tempdir().unwrap();
    let ps = prompts(dir.path(), 2);
    let client = Client::new(fast("http://127.0.0.1:9/v1", 1), dir.path()).unwrap();
    assert!(run_batch(&client, &[], &BatchOptions::default()).await.is_err());
    let dup = vec![ps[0].clone(), ps[0].clone()];
    assert!(run_batch(&client, &dup, &BatchOptions::default()).await.is_err());
}
