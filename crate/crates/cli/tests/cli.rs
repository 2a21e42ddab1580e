//! End-to-end runs of the `hetlp` binary: artifact layout, exit codes, and
//! deterministic-mode stability across parallelism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hetlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetlp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn gen_data(dir: &Path, drugs: usize, seed: u64) -> Vec<String> {
    let out = hetlp(&[
        "gen",
        "--drugs",
        &drugs.to_string(),
        "--diseases",
        &drugs.to_string(),
        "--targets",
        &drugs.to_string(),
        "--homo-density",
        "0.25",
        "--hetero-density",
        "0.12",
        "--blocks",
        "2",
        "--seed",
        &seed.to_string(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    [
        "drug-sim",
        "disease-sim",
        "target-sim",
        "drug-disease",
        "drug-target",
        "disease-target",
    ]
    .iter()
    .flat_map(|name| {
        vec![
            format!("--{name}"),
            dir.join(format!("{name}.tsv")).display().to_string(),
        ]
    })
    .collect()
}

fn ingest(data_args: &[String], out: &Path) -> Output {
    let mut args: Vec<String> = vec!["ingest".into()];
    args.extend(data_args.iter().cloned());
    args.push("--out".into());
    args.push(out.display().to_string());
    Command::new(env!("CARGO_BIN_EXE_hetlp"))
        .args(&args)
        .output()
        .expect("binary runs")
}

#[test]
fn ingest_writes_artifacts_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen_data(&tmp.path().join("data"), 12, 1);
    let out = ingest(&data, &tmp.path().join("ingest"));
    assert!(out.status.success());
    assert!(tmp.path().join("ingest/graph.tsv").exists());
    assert!(tmp.path().join("ingest/registry.tsv").exists());
    assert!(tmp.path().join("ingest/validation-report.tsv").exists());
}

#[test]
fn fractional_association_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let mut data = gen_data(&tmp.path().join("data"), 6, 2);
    // corrupt the drug-target association with a fractional value
    let dt = PathBuf::from(&data[9]);
    assert!(dt.ends_with("drug-target.tsv"));
    let text = fs::read_to_string(&dt).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let mut fields: Vec<String> = lines[1].split('\t').map(str::to_owned).collect();
    fields[1] = "0.5".into();
    lines[1] = fields.join("\t");
    fs::write(&dt, lines.join("\n")).unwrap();
    data[9] = dt.display().to_string();

    let out = ingest(&data, &tmp.path().join("ingest"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let mut data = gen_data(&tmp.path().join("data"), 6, 3);
    data[1] = tmp.path().join("nope.tsv").display().to_string();
    let out = ingest(&data, &tmp.path().join("ingest"));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn superstep_cap_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen_data(&tmp.path().join("data"), 10, 4);
    let ingest_dir = tmp.path().join("ingest");
    assert!(ingest(&data, &ingest_dir).status.success());
    let out = hetlp(&[
        "run",
        "--input",
        ingest_dir.to_str().unwrap(),
        "--max-supersteps",
        "1",
        "--out",
        tmp.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn deterministic_runs_are_bitwise_stable_across_parallelism() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen_data(&tmp.path().join("data"), 12, 5);
    let ingest_dir = tmp.path().join("ingest");
    assert!(ingest(&data, &ingest_dir).status.success());
    let mut reference: Option<Vec<u8>> = None;
    for par in ["1", "4"] {
        let run_dir = tmp.path().join(format!("run{par}"));
        let out = hetlp(&[
            "run",
            "--input",
            ingest_dir.to_str().unwrap(),
            "--algo",
            "dhlp1",
            "--sigma",
            "0.05",
            "--partitions",
            "8",
            "--parallelism",
            par,
            "--deterministic",
            "true",
            "--out",
            run_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let bytes = fs::read(run_dir.join("drug-target.tsv")).unwrap();
        match &reference {
            None => reference = Some(bytes),
            Some(r) => assert_eq!(r, &bytes, "parallelism {par} changed the output"),
        }
    }
}

#[test]
fn topk_lists_k_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen_data(&tmp.path().join("data"), 25, 6);
    let ingest_dir = tmp.path().join("ingest");
    assert!(ingest(&data, &ingest_dir).status.success());
    let run_dir = tmp.path().join("run");
    let out = hetlp(&[
        "run",
        "--input",
        ingest_dir.to_str().unwrap(),
        "--sigma",
        "0.05",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = hetlp(&[
        "topk",
        "--run",
        run_dir.to_str().unwrap(),
        "--entity",
        "drug000",
        "--concept",
        "target",
        "--k",
        "20",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 21, "header plus 20 rows");
    assert!(lines[0].starts_with("rank\tname\tscore\tknown"));
    assert!(lines[1].split('\t').count() == 4);
}

#[test]
fn eval_writes_cv_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen_data(&tmp.path().join("data"), 10, 7);
    let mut args: Vec<String> = vec!["eval".into()];
    args.extend(data.iter().cloned());
    args.extend(
        [
            "--folds",
            "2",
            "--seed",
            "9",
            "--sigma",
            "0.2",
            "--out",
            tmp.path().join("eval").to_str().unwrap(),
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let out = Command::new(env!("CARGO_BIN_EXE_hetlp"))
        .args(&args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(tmp.path().join("eval/cv-report.tsv")).unwrap();
    assert!(report.starts_with("relation\talgorithm\tfold\tauc\taupr\tbest_acc"));
    // 3 relations x (2 folds + mean)
    assert_eq!(report.lines().count(), 1 + 9);
}

#[test]
fn bench_reports_speedup_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out_file = tmp.path().join("bench.tsv");
    let out = hetlp(&[
        "bench",
        "--edges",
        "3000",
        "--parallelism",
        "1,2",
        "--supersteps",
        "4",
        "--out",
        out_file.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_file).unwrap();
    assert!(table.starts_with("edges\trealized_edges\tparallelism\twall_ms\tspeedup_vs_first"));
    assert_eq!(table.lines().count(), 3);
}
