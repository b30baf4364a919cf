use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use molbench_client::{run_batch, BatchOptions, Client, EndpointConfig, MockScript};
use molbench_core::contrastive::{
    batch_from_export, build_pair_manifest, ntxent_loss, read_embedding_export, write_pair_manifest, LoraConfig,
    LossParams, TrainJob,
};
use molbench_core::dataset::{
    check_source_count, curate, ingest_csv, read_records_jsonl, render_images, seeded_shuffle, split,
    write_records_jsonl, CurateOptions, Label, MoleculeRecord, SplitConfig, SplitManifest, TaskKind, TaskSpec,
};
use molbench_core::depict::DepictStyle;
use molbench_core::eval::{evaluate, gold_map, MetricReport};
use molbench_core::fingerprint::PairStrategy;
use molbench_core::prompt::{
    build_prompts, format_answer, read_prompts_jsonl, write_prompts_jsonl, ExamplePool, PromptMode, Representation,
    TemplateStore,
};
use molbench_core::report::{
    grid_from_csv, grid_to_csv, rank_models, render_rank_table, render_table, ResultsGrid, TaskFamily,
};
use molbench_core::transcript::{read_transcripts, write_transcripts};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::error::{CliError, Context};

/// What a finished subcommand reports: files written, a machine-readable
/// summary, a human one, and where its run record goes.
pub struct Outcome {
    pub config: Value,
    pub outputs: Vec<PathBuf>,
    pub summary: Value,
    pub text: String,
    pub record: PathBuf,
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("arguments serialize")
}

/// Run record next to a file output: `<file>.run.json`.
fn record_for_file(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    path.with_file_name(name)
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p).runtime(format!("creating {}", p.display())),
        _ => Ok(()),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).runtime(format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).runtime(format!("reading {}", path.display()))?;
    serde_json::from_str(&text).runtime(format!("parsing {}", path.display()))
}

/// A builtin task name or a path to a task TOML.
pub fn resolve_task(spec: &str) -> Result<TaskSpec, CliError> {
    let path = Path::new(spec);
    if spec.ends_with(".toml") || path.exists() {
        let text = std::fs::read_to_string(path).config(format!("reading task {spec}"))?;
        TaskSpec::from_toml(&text).config(format!("task {spec}"))
    } else {
        TaskSpec::builtin(spec).config("task")
    }
}

fn load_records(path: &Path) -> Result<Vec<MoleculeRecord>, CliError> {
    read_records_jsonl(path).runtime(format!("reading {}", path.display()))
}

pub fn curate_cmd(a: &CurateArgs) -> Result<Outcome, CliError> {
    let task = resolve_task(&a.task)?;
    let (raw, ingest) = ingest_csv(&a.dataset, &task, a.limit).runtime(format!("reading {}", a.dataset.display()))?;
    let (records, mut report) = curate(
        &raw,
        &task,
        CurateOptions {
            attach_selfies: !a.no_selfies,
        },
    );
    if a.limit.is_none() {
        check_source_count(&task, &ingest, &mut report);
    }
    std::fs::create_dir_all(&a.out).runtime(format!("creating {}", a.out.display()))?;
    let records_path = a.out.join("records.jsonl");
    write_records_jsonl(&records_path, &records).runtime("writing records")?;
    let render_failures = if a.no_images {
        Vec::new()
    } else {
        render_images(&records, &a.out, &DepictStyle::default()).runtime("rendering images")?
    };
    let report_path = a.out.join("curation.json");
    write_json(
        &report_path,
        &json!({"ingest": ingest, "curation": report, "render_failures": render_failures}),
    )?;
    let text = format!(
        "{}: {} rows read, {} curated, {} unparseable, {} duplicates merged, {} label conflicts{}",
        task.name,
        ingest.rows,
        report.curated,
        report.unparseable.len(),
        report.duplicates_merged,
        report.label_conflicts.len(),
        report
            .source_count_mismatch
            .as_ref()
            .map_or(String::new(), |m| format!("\nwarning: {m}"))
    );
    Ok(Outcome {
        config: json!({"args": to_value(a), "task": task}),
        outputs: vec![records_path, report_path],
        summary: json!({
            "rows": ingest.rows,
            "curated": report.curated,
            "unparseable": report.unparseable.len(),
            "duplicates_merged": report.duplicates_merged,
            "label_conflicts": report.label_conflicts.len(),
            "render_failures": render_failures.len(),
        }),
        text,
        record: a.out.join("run.json"),
    })
}

pub fn split_cmd(a: &SplitArgs) -> Result<Outcome, CliError> {
    let task = resolve_task(&a.task)?;
    let records = load_records(&a.records)?;
    let cfg = SplitConfig {
        ratio: a.ratio,
        seed: a.seed,
    };
    let manifest = split(&records, &task.name, cfg).config("split")?;
    write_json(&a.out, &manifest)?;
    Ok(Outcome {
        config: to_value(a),
        outputs: vec![a.out.clone()],
        summary: json!({"train": manifest.train.len(), "test": manifest.test.len()}),
        text: format!("{}: {} train / {} test", task.name, manifest.train.len(), manifest.test.len()),
        record: record_for_file(&a.out),
    })
}

pub fn prompt_cmd(a: &PromptArgs) -> Result<Outcome, CliError> {
    let task = resolve_task(&a.task)?;
    let mode: PromptMode = a.mode.parse().map_err(CliError::Config)?;
    let repr: Representation = a.repr.parse().map_err(CliError::Config)?;
    let templates = match &a.templates {
        Some(dir) => TemplateStore::from_dir(dir).config(format!("templates {}", dir.display()))?,
        None => TemplateStore::builtin().config("bundled templates")?,
    };
    let records = load_records(&a.records)?;
    let manifest: SplitManifest = read_json(&a.split)?;
    let by_id: HashMap<u64, &MoleculeRecord> = records.iter().map(|r| (r.id, r)).collect();
    let pick = |ids: &[u64]| -> Result<Vec<MoleculeRecord>, CliError> {
        ids.iter()
            .map(|id| {
                by_id
                    .get(id)
                    .map(|r| (*r).clone())
                    .ok_or_else(|| CliError::Runtime(format!("split id {id} not in records")))
            })
            .collect()
    };
    let train = pick(&manifest.train)?;
    let targets = match a.targets {
        Targets::Test => pick(&manifest.test)?,
        Targets::Train => train.clone(),
        Targets::All => records.clone(),
    };
    let pool = ExamplePool::build(&train).runtime("building example pool")?;
    let prompts = build_prompts(&targets, &task, mode, repr, &pool, &templates).runtime("assembling prompts")?;
    ensure_parent(&a.out)?;
    write_prompts_jsonl(&a.out, &prompts).runtime("writing prompts")?;
    Ok(Outcome {
        config: to_value(a),
        outputs: vec![a.out.clone()],
        summary: json!({"prompts": prompts.len(), "pool": pool.len()}),
        text: format!("{} prompts ({mode}, {repr}) from a pool of {}", prompts.len(), pool.len()),
        record: record_for_file(&a.out),
    })
}

fn endpoint_config(a: &RunArgs) -> Result<EndpointConfig, CliError> {
    let text = std::fs::read_to_string(&a.endpoint).config(format!("reading {}", a.endpoint.display()))?;
    let mut cfg: EndpointConfig = EndpointConfig::from_toml(&text).config(format!("endpoint {}", a.endpoint.display()))?;
    if let Some(v) = &a.base_url {
        cfg.base_url = v.clone();
    }
    if let Some(v) = &a.model {
        cfg.model_name = v.clone();
    }
    if let Some(v) = &a.api_key_env {
        cfg.api_key_env = Some(v.clone());
    }
    if let Some(v) = a.temperature {
        cfg.temperature = v;
    }
    if let Some(v) = a.max_tokens {
        cfg.max_tokens = v;
    }
    if let Some(v) = a.timeout_ms {
        cfg.timeout_ms = v;
    }
    if let Some(v) = a.max_retries {
        cfg.max_retries = v;
    }
    if let Some(v) = a.concurrency {
        cfg.concurrency_limit = v;
    }
    cfg.validate().config("endpoint")?;
    Ok(cfg)
}

pub fn run_cmd(a: &RunArgs, runtime: &tokio::runtime::Runtime) -> Result<Outcome, CliError> {
    let cfg = endpoint_config(a)?;
    let prompts = read_prompts_jsonl(&a.prompts).runtime(format!("reading {}", a.prompts.display()))?;
    let images = a.images.clone().unwrap_or_else(|| {
        a.prompts
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    });
    let checkpoint = a.checkpoint.clone().unwrap_or_else(|| {
        let mut name = a.out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".checkpoint");
        a.out.with_file_name(name)
    });
    ensure_parent(&a.out)?;
    ensure_parent(&checkpoint)?;
    let client = Client::new(cfg.clone(), &images).config("endpoint")?;
    let outcome = runtime
        .block_on(run_batch(
            &client,
            &prompts,
            &BatchOptions {
                checkpoint: Some(checkpoint.clone()),
            },
        ))
        .runtime("batch")?;

    let mut tmp = a.out.clone().into_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    write_transcripts(&tmp, &outcome.transcripts).runtime("writing transcripts")?;
    std::fs::rename(&tmp, &a.out).runtime(format!("writing {}", a.out.display()))?;

    let text = format!(
        "{} transcripts: {} fetched, {} from checkpoint, {} failed",
        outcome.transcripts.len(),
        outcome.fetched,
        outcome.reused,
        outcome.failed
    );
    if a.strict && outcome.failed > 0 {
        return Err(CliError::Runtime(format!("{} prompts failed; see {}", outcome.failed, a.out.display())));
    }
    Ok(Outcome {
        config: json!({"args": to_value(a), "endpoint": cfg, "images": images, "checkpoint": checkpoint}),
        outputs: vec![a.out.clone(), checkpoint],
        summary: json!({
            "transcripts": outcome.transcripts.len(),
            "fetched": outcome.fetched,
            "reused": outcome.reused,
            "failed": outcome.failed,
        }),
        text,
        record: record_for_file(&a.out),
    })
}

pub fn eval_cmd(a: &EvalArgs) -> Result<Outcome, CliError> {
    let task = resolve_task(&a.task)?;
    let transcripts = read_transcripts(&a.transcripts).runtime(format!("reading {}", a.transcripts.display()))?;
    let first = transcripts
        .first()
        .ok_or_else(|| CliError::Runtime(format!("{} has no transcripts", a.transcripts.display())))?;
    if let Some(other) = transcripts.iter().find(|t| t.dataset != task.name) {
        return Err(CliError::Runtime(format!(
            "transcript {} belongs to dataset {}, not {}",
            other.prompt_id, other.dataset, task.name
        )));
    }
    let modes: BTreeSet<String> = transcripts.iter().map(|t| t.mode.to_string()).collect();
    if modes.len() > 1 {
        return Err(CliError::Runtime(format!("transcripts mix prompt modes {modes:?}")));
    }
    let model = a.model.clone().unwrap_or_else(|| first.model.clone());
    let mode = first.mode.to_string();
    let records = load_records(&a.records)?;
    let golds = gold_map(&records);
    let report = evaluate(&task, &model, &mode, &transcripts, &golds).runtime("evaluating")?;
    write_json(&a.out, &report)?;
    let metrics: Vec<String> = report.metrics().into_iter().map(|(n, v)| format!("{n} {v:.4}")).collect();
    Ok(Outcome {
        config: to_value(a),
        outputs: vec![a.out.clone()],
        summary: to_value(&report),
        text: format!(
            "{} {} {}: {} ({} of {} unparsed)",
            task.name,
            model,
            mode,
            metrics.join(", "),
            report.n_unparsed,
            report.n_total
        ),
        record: record_for_file(&a.out),
    })
}

pub fn mine_pairs_cmd(a: &MinePairsArgs) -> Result<Outcome, CliError> {
    let mut records = load_records(&a.records)?;
    if let Some(path) = &a.split {
        let manifest: SplitManifest = read_json(path)?;
        let train: HashSet<u64> = manifest.train.into_iter().collect();
        records.retain(|r| train.contains(&r.id));
    }
    let strategy = match a.strategy {
        StrategyArg::Aug => PairStrategy::Aug,
        StrategyArg::TAug => PairStrategy::TAug,
    };
    let pool = ExamplePool::build(&records).runtime("fingerprinting records")?;
    let manifest = build_pair_manifest(&records, pool.index(), strategy, a.seed);
    ensure_parent(&a.out)?;
    write_pair_manifest(&a.out, &manifest).runtime(format!("writing {}", a.out.display()))?;
    Ok(Outcome {
        config: to_value(a),
        outputs: vec![a.out.clone()],
        summary: json!({"pairs": manifest.entries.len(), "skipped": manifest.skipped}),
        text: format!(
            "{} pairs from {} molecules; {} anchors without a partner",
            manifest.entries.len(),
            records.len(),
            manifest.skipped.len()
        ),
        record: record_for_file(&a.out),
    })
}

/// Kind of a report's dataset: the builtin task when there is one, otherwise
/// whichever metric block is filled.
fn report_kind(r: &MetricReport) -> Option<TaskKind> {
    if let Ok(t) = TaskSpec::builtin(&r.dataset) {
        return Some(t.kind);
    }
    if r.accuracy.is_some() {
        Some(TaskKind::Classification)
    } else if r.mae.is_some() || r.rmse.is_some() {
        Some(TaskKind::Regression)
    } else if r.bleu2.is_some() || r.meteor.is_some() {
        Some(TaskKind::Description)
    } else {
        None
    }
}

pub fn report_cmd(a: &ReportArgs) -> Result<Outcome, CliError> {
    if a.reports.is_empty() && a.grid.is_none() {
        return Err(CliError::Usage("report needs --reports and/or --grid".to_string()));
    }
    let mut grid = match &a.grid {
        Some(path) => {
            let text = std::fs::read_to_string(path).runtime(format!("reading {}", path.display()))?;
            grid_from_csv(&text).runtime(format!("parsing {}", path.display()))?
        }
        None => ResultsGrid::new(),
    };
    for path in &a.reports {
        let r: MetricReport = read_json(path)?;
        let kind = report_kind(&r)
            .ok_or_else(|| CliError::Runtime(format!("{}: no metrics to tabulate", path.display())))?;
        grid.insert(kind, r).runtime(path.display())?;
    }
    let modes: Vec<String> = match &a.mode {
        Some(m) => vec![m.clone()],
        None => grid.modes().into_iter().map(str::to_string).collect(),
    };
    std::fs::create_dir_all(&a.out).runtime(format!("creating {}", a.out.display()))?;
    let grid_path = a.out.join("grid.csv");
    std::fs::write(&grid_path, grid_to_csv(&grid)).runtime("writing grid")?;

    let mut md = String::new();
    let mut warnings = Vec::new();
    let mut ranks = Vec::new();
    for mode in &modes {
        for family in TaskFamily::ALL {
            if grid.datasets_in(family).is_empty() {
                continue;
            }
            let t = render_table(&grid, family, mode);
            md.push_str(&format!("## {family:?} ({mode})\n\n{}\n", t.markdown));
            warnings.extend(t.warnings.into_iter().map(|w| format!("{mode} {family:?}: {w}")));
        }
        match rank_models(&grid, mode) {
            Ok(r) => {
                md.push_str(&format!("## Ranks ({mode})\n\n{}\n", render_rank_table(&r, grid.models())));
                ranks.push(r);
            }
            Err(e) => warnings.push(format!("{mode}: {e}")),
        }
    }
    let tables_path = a.out.join("tables.md");
    std::fs::write(&tables_path, &md).runtime("writing tables")?;
    let ranks_path = a.out.join("ranks.json");
    write_json(&ranks_path, &ranks)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Outcome {
        config: to_value(a),
        outputs: vec![grid_path, tables_path, ranks_path],
        summary: json!({"models": grid.models().len(), "cells": grid.cells().count(), "warnings": warnings}),
        text: md,
        record: a.out.join("run.json"),
    })
}

pub fn train_job_cmd(a: &TrainJobArgs) -> Result<Outcome, CliError> {
    let defaults = LossParams::default();
    let contrastive = a.pairs.is_some();
    let mut frozen = vec!["projector".to_string()];
    if !contrastive {
        frozen.insert(0, "vision_encoder".to_string());
    }
    let job = TrainJob {
        base_model: a.base_model.clone(),
        lora: LoraConfig::default(),
        frozen,
        contrastive,
        lambda: a.lambda.unwrap_or(defaults.lambda),
        tau: a.tau.unwrap_or(defaults.tau),
        epochs: a.epochs,
        finetune_fraction: a.fraction,
        seed: a.seed,
        dataset_manifest: a.records.display().to_string(),
        pair_manifest: a.pairs.as_ref().map(|p| p.display().to_string()),
        output_dir: a.output_dir.display().to_string(),
    };
    job.validate().map_err(|e| CliError::Config(format!("train job: {e}")))?;
    ensure_parent(&a.out)?;
    std::fs::write(&a.out, job.to_toml()).runtime(format!("writing {}", a.out.display()))?;
    Ok(Outcome {
        config: to_value(a),
        outputs: vec![a.out.clone()],
        summary: to_value(&job),
        text: format!("wrote {}", a.out.display()),
        record: record_for_file(&a.out),
    })
}

pub fn ntxent_cmd(a: &NtxentArgs) -> Result<Outcome, CliError> {
    let tau = a.tau.unwrap_or(LossParams::default().tau);
    let records = read_embedding_export(&a.embeddings).runtime(format!("reading {}", a.embeddings.display()))?;
    let batch = batch_from_export::<f64>(&records).runtime("embeddings")?;
    let loss = ntxent_loss(&batch, tau).runtime("loss")?;
    if let Some(expect) = a.expect {
        if (loss - expect).abs() > a.tol {
            return Err(CliError::Runtime(format!(
                "loss {loss} differs from expected {expect} by more than {}",
                a.tol
            )));
        }
    }
    Ok(Outcome {
        config: to_value(a),
        outputs: vec![],
        summary: json!({"loss": loss, "pairs": batch.len() / 2, "tau": tau}),
        text: format!("{loss}"),
        record: record_for_file(&a.embeddings.with_extension("ntxent")),
    })
}

fn flipped(label: &Label) -> Result<Label, CliError> {
    Ok(match label {
        Label::Binary(b) => Label::Binary(!b),
        Label::Number(v) => Label::Number(v + 1.0),
        Label::Vector(vs) => Label::Vector(vs.iter().map(|v| v + 1.0).collect()),
        Label::Text(_) => return Err(CliError::Config("cannot flip free-text answers".to_string())),
    })
}

pub fn mock_script_cmd(a: &MockScriptArgs) -> Result<Outcome, CliError> {
    if !(0.0..=1.0).contains(&a.flip_fraction) {
        return Err(CliError::Config(format!("flip fraction {} outside [0, 1]", a.flip_fraction)));
    }
    let prompts = read_prompts_jsonl(&a.prompts).runtime(format!("reading {}", a.prompts.display()))?;
    let records = load_records(&a.records)?;
    let golds = gold_map(&records);
    let mut order: Vec<usize> = (0..prompts.len()).collect();
    seeded_shuffle(&mut order, a.seed);
    let n_flip = (a.flip_fraction * prompts.len() as f64).round() as usize;
    let flip: HashSet<usize> = order[..n_flip].iter().copied().collect();
    let mut script = MockScript {
        latency_ms: a.latency_ms,
        latency_spread_ms: a.latency_spread_ms,
        ..Default::default()
    };
    for (i, p) in prompts.iter().enumerate() {
        let gold = golds
            .get(&p.target_id)
            .ok_or_else(|| CliError::Runtime(format!("prompt {} has no gold record", p.prompt_id)))?;
        let answer = if flip.contains(&i) { flipped(gold)? } else { gold.clone() };
        script.responses.insert(p.prompt_id.clone(), format_answer(&answer));
    }
    write_json(&a.out, &script)?;
    Ok(Outcome {
        config: to_value(a),
        outputs: vec![a.out.clone()],
        summary: json!({"responses": script.responses.len(), "flipped": n_flip}),
        text: format!("{} scripted answers, {} flipped", script.responses.len(), n_flip),
        record: record_for_file(&a.out),
    })
}

/// Blocks serving until the process is stopped.
pub fn mock_serve_cmd(a: &MockServeArgs, runtime: &tokio::runtime::Runtime) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.script).config(format!("reading {}", a.script.display()))?;
    let script = MockScript::from_json(&text).config(format!("script {}", a.script.display()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.addr).await.config(format!("binding {}", a.addr))?;
        let addr = listener.local_addr().runtime("local address")?;
        println!("listening on {addr}");
        use std::io::Write as _;
        let _ = std::io::stdout().flush();
        molbench_client::mock::serve(listener, script).await.runtime("serving")
    })
}
