#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_molbench"))
}

pub fn molbench(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("molbench runs")
}

/// Runs molbench and panics with its stderr unless it exits 0.
pub fn ok(args: &[&str]) -> String {
    let out = molbench(args);
    assert!(
        out.status.success(),
        "molbench {args:?} exited {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// `n` labelled reference molecules in the BACE source layout. Labels
/// alternate so both classes are present.
pub fn write_bace_source(path: &Path, n: usize) {
    let corpus = molbench_core::corpus::reference_corpus();
    assert!(corpus.len() >= n);
    let mut text = String::from("mol,Class\n");
    for (i, (_, smiles)) in corpus.iter().skip(10).take(n).enumerate() {
        text.push_str(&format!("{smiles},{}\n", i % 2));
    }
    std::fs::write(path, text).unwrap();
}

/// A `molbench mock-serve` child process, killed on drop.
pub struct MockProcess {
    child: Child,
    pub addr: String,
}

impl MockProcess {
    pub fn spawn(script: &Path) -> MockProcess {
        let mut child = Command::new(bin())
            .args(["mock-serve", "--script", p(script)])
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("mock-serve starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected mock-serve output {line:?}"))
            .to_string();
        MockProcess { child, addr }
    }

    pub fn write_endpoint(&self, path: &Path, concurrency: usize) {
        std::fs::write(
            path,
            format!(
                "base_url = \"http://{}/v1\"\nmodel_name = \"mock\"\nconcurrency_limit = {concurrency}\nmax_retries = 2\n\n[backoff]\nbase_ms = 5\ncap_ms = 50\n",
                self.addr
            ),
        )
        .unwrap();
    }
}

impl Drop for MockProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Paths of one curated 50-molecule BACE workspace.
pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// curate, split, prompt (ICL k=2, every molecule a target).
pub fn prepared_workspace(n: usize) -> Workspace {
    let ws = Workspace {
        dir: tempfile::tempdir().unwrap(),
    };
    write_bace_source(&ws.path("bace.csv"), n);
    let out = ws.path("out");
    ok(&["curate", "--dataset", p(&ws.path("bace.csv")), "--task", "bace", "--out", p(&out)]);
    ok(&[
        "split",
        "--records",
        p(&out.join("records.jsonl")),
        "--task",
        "bace",
        "--out",
        p(&out.join("split.json")),
    ]);
    ok(&[
        "prompt",
        "--records",
        p(&out.join("records.jsonl")),
        "--split",
        p(&out.join("split.json")),
        "--task",
        "bace",
        "--mode",
        "icl2",
        "--targets",
        "all",
        "--out",
        p(&out.join("prompts.jsonl")),
    ]);
    ws
}
