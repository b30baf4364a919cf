use std::collections::HashSet;
use std::io::Write;

use molbench_core::corpus::random_molecules;
use molbench_core::dataset::{
    curate, ingest_csv, read_records_jsonl, render_images, split, train_count, write_records_jsonl, CurateOptions,
    DatasetError, Label, SplitConfig, TaskSpec,
};
use molbench_core::depict::DepictStyle;

fn write_source(dir: &std::path::Path, task: &TaskSpec, smiles: &[String]) -> std::path::PathBuf {
    let path = dir.join(&task.source_file);
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "{},{}", task.smiles_column, task.label_columns[0]).unwrap();
    for (i, s) in smiles.iter().enumerate() {
        writeln!(f, "{s},{}", i % 2).unwrap();
    }
    path
}

// (dataset, total, train, test) as published for the molecule benchmarks
const TABLE: [(&str, usize, usize, usize); 6] = [
    ("bace", 1513, 1210, 303),
    ("bbbp", 2050, 1640, 410),
    ("clintox", 1491, 1193, 298),
    ("tox21", 7831, 6265, 1566),
    ("esol", 1128, 902, 226),
    ("ld50", 7385, 5908, 1477),
];

#[test]
fn published_split_sizes_follow_from_the_ratio() {
    for (name, total, train, test) in TABLE {
        assert_eq!(train_count(total, 0.8), train, "{name}");
        assert_eq!(total - train_count(total, 0.8), test, "{name}");
    }
    assert_eq!(train_count(41127, 0.8), 32902);
}

#[test]
fn curate_and_split_synthetic_sources() {
    let dir = tempfile::tempdir().unwrap();
    for (name, total, train, test) in TABLE.into_iter().filter(|t| t.1 < 2100) {
        let task = TaskSpec::builtin(name).unwrap();
        let smiles = random_molecules(total as u64, total, 3, 40);
        let path = write_source(dir.path(), &task, &smiles);
        let (raw, ingest) = ingest_csv(&path, &task, None).unwrap();
        assert_eq!(ingest.rows, total);
        let (records, report) = curate(&raw, &task, CurateOptions::default());
        assert_eq!(report.curated, total, "{name}");
        let m = split(&records, name, SplitConfig::default()).unwrap();
        assert_eq!((m.train.len(), m.test.len()), (train, test), "{name}");
        let a: HashSet<_> = m.train.iter().collect();
        let b: HashSet<_> = m.test.iter().collect();
        assert!(a.is_disjoint(&b));
        assert_eq!(a.len() + b.len(), total);
        assert_eq!(split(&records, name, SplitConfig::default()).unwrap(), m);
        assert_ne!(split(&records, name, SplitConfig { ratio: 0.8, seed: 7 }).unwrap().train, m.train);
    }
}

#[test]
fn split_preconditions() {
    let task = TaskSpec::builtin("bace").unwrap();
    let raw = vec![molbench_core::dataset::RawRecord { row: 0, smiles: "C".into(), label: Label::Binary(true) }];
    let (records, _) = curate(&raw, &task, CurateOptions::default());
    assert!(matches!(split(&records, "bace", SplitConfig::default()), Err(DatasetError::TooFewRecords(1))));
    assert!(matches!(
        split(&records, "bace", SplitConfig { ratio: 1.0, seed: 0 }),
        Err(DatasetError::BadRatio(_))
    ));
}

#[test]
fn tab_separated_description_source() {
    let dir = tempfile::tempdir().unwrap();
    let task = TaskSpec::builtin("chebi").unwrap();
    let path = dir.path().join("chebi.tsv");
    std::fs::write(
        &path,
        format!(
            "CID\t{}\t{}\n1\tCCO\tThe molecule is a primary alcohol.\n2\tC(\tBroken.\n3\tCC\t\n",
            task.smiles_column, task.label_columns[0]
        ),
    )
    .unwrap();
    let (raw, ingest) = ingest_csv(&path, &task, None).unwrap();
    assert_eq!((raw.len(), ingest.dropped_missing_label), (2, 1));
    let (records, report) = curate(&raw, &task, CurateOptions::default());
    assert_eq!(records.len(), 1);
    assert_eq!(report.unparseable[0].smiles, "C(");
    assert_eq!(records[0].label, Label::Text("The molecule is a primary alcohol.".into()));
}

#[test]
fn multi_target_labels() {
    let dir = tempfile::tempdir().unwrap();
    let task = TaskSpec::builtin("qm9").unwrap();
    let header = std::iter::once(task.smiles_column.clone()).chain(task.label_columns.clone()).collect::<Vec<_>>().join(",");
    let row = std::iter::once("CO".to_string()).chain((0..12).map(|i| format!("{i}.5"))).collect::<Vec<_>>().join(",");
    let path = dir.path().join("qm9.csv");
    std::fs::write(&path, format!("{header}\n{row}\n")).unwrap();
    let (raw, _) = ingest_csv(&path, &task, None).unwrap();
    assert_eq!(raw[0].label, Label::Vector((0..12).map(|i| i as f64 + 0.5).collect()));
}

#[test]
fn records_and_images_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let task = TaskSpec::builtin("bbbp").unwrap();
    let smiles: Vec<String> = ["CCO", "c1ccccc1O", "CC(=O)Nc1ccc(O)cc1"].map(String::from).to_vec();
    let path = write_source(dir.path(), &task, &smiles);
    let (raw, _) = ingest_csv(&path, &task, None).unwrap();
    let (records, _) = curate(&raw, &task, CurateOptions::default());
    let failures = render_images(&records, dir.path(), &DepictStyle::default()).unwrap();
    assert!(failures.is_empty());
    for r in &records {
        let png = std::fs::read(dir.path().join(&r.image_path)).unwrap();
        assert_eq!(&png[1..4], b"PNG");
    }
    let out = dir.path().join("records.jsonl");
    write_records_jsonl(&out, &records).unwrap();
    assert_eq!(read_records_jsonl(&out).unwrap(), records);
}
