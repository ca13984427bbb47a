use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn formbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_formbench")).args(args).output().expect("spawn formbench")
}

fn ok(args: &[&str]) -> Output {
    let out = formbench(args);
    assert!(
        out.status.success(),
        "formbench {args:?} exited with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn read_lines(p: &Path) -> Vec<Value> {
    fs::read_to_string(p).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn write_predictions(path: &Path, records: &[(String, String)]) {
    let body: String = records
        .iter()
        .map(|(id, raw)| format!("{}\n", json!({"doc_id": id, "modality": "spatial", "raw_output": raw})))
        .collect();
    fs::write(path, body).unwrap();
}

/// Replace widget ids in a canned discovery instance with their placeholders.
fn substitute(v: &Value, seed: &[Value]) -> Value {
    match v {
        Value::String(w) => seed
            .iter()
            .find(|e| e["widget_id"] == *w)
            .map_or_else(|| v.clone(), |e| e["placeholder"].clone()),
        Value::Array(a) => Value::Array(a.iter().map(|x| substitute(x, seed)).collect()),
        Value::Object(m) => Value::Object(m.iter().map(|(k, x)| (k.clone(), substitute(x, seed))).collect()),
        other => other.clone(),
    }
}

const TEMPLATES: [&str; 4] = ["permit_request", "library_card", "lease_addendum", "expense_report"];

/// Build a small corpus through the command line, one document at a time.
fn generate_corpus(work: &Path) -> PathBuf {
    let corpus = work.join("corpus");
    for id in TEMPLATES {
        let doc = fixtures().join(format!("templates/{id}.docmodel.json"));
        let seed_file = work.join(format!("{id}.seed.json"));
        ok(&["seed", "--in", s(&doc), "--out", s(&seed_file)]);
        let seed = read_json(&seed_file);
        let canned = read_json(&fixtures().join(format!("templates/{id}.discovery.json")));
        let reply = json!({"schema": canned["schema"], "instance": substitute(&canned["instance"], seed.as_array().unwrap())});
        let reply_file = work.join(format!("{id}.reply.txt"));
        fs::write(&reply_file, format!("```json\n{reply:#}\n```")).unwrap();

        ok(&["discover", "--in", s(&doc), "--response", s(&reply_file), "--out", s(&corpus)]);
        ok(&[
            "reskin",
            "--in",
            s(&doc),
            "--schema",
            s(&corpus.join(format!("{id}.schema.json"))),
            "--mapping",
            s(&corpus.join(format!("{id}.mapping.json"))),
            "--seed",
            "11",
            "--out",
            s(&corpus),
        ]);
        ok(&["export", "--in", s(&corpus.join(format!("{id}.filled.docmodel.json"))), "--out", s(&corpus)]);
    }
    ok(&["screen", "--dir", s(&corpus)]);
    corpus
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn identity_predictions_score_perfectly() {
    let work = tempfile::tempdir().unwrap();
    let gt = fixtures().join("golden/housing_terms.gt.json");
    let schema = fixtures().join("golden/housing_terms.schema.json");
    let pred = work.path().join("pred.jsonl");
    write_predictions(&pred, &[("housing_terms".into(), fs::read_to_string(&gt).unwrap())]);
    let scores = work.path().join("scores.jsonl");
    ok(&["score", "--gt", s(&gt), "--schema", s(&schema), "--pred", s(&pred), "--out", s(&scores)]);
    let rows = read_lines(&scores);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["doc_id"], "housing_terms");
    assert_eq!(rows[0]["em"], 1.0);
    assert_eq!(rows[0]["perfect"], true);
    assert_eq!(rows[0]["compliance"], "compliant");
}

#[test]
fn missing_prediction_scores_zero() {
    let work = tempfile::tempdir().unwrap();
    let gt = fixtures().join("golden/housing_terms.gt.json");
    let pred = work.path().join("pred.jsonl");
    write_predictions(&pred, &[("someone_else".into(), "{}".into())]);
    let out = ok(&["score", "--gt", s(&gt), "--pred", s(&pred)]);
    let row: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(row["em"], 0.0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 without a prediction"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(formbench(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(formbench(&["score", "--pred", "x.jsonl"]).status.code(), Some(2));
    assert_eq!(formbench(&["export", "--in", "/nonexistent/doc.json"]).status.code(), Some(2));
    assert_eq!(formbench(&["run", "--dir", "/nonexistent", "--out", "p.jsonl", "--model", "m"]).status.code(), Some(2));
    assert_eq!(formbench(&["--help"]).status.code(), Some(0));
}

#[test]
fn operational_errors_exit_one() {
    let work = tempfile::tempdir().unwrap();
    let bad = work.path().join("bad.docmodel.json");
    fs::write(&bad, "{not json").unwrap();
    let out = formbench(&["export", "--in", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn export_writes_text_and_manifest() {
    let work = tempfile::tempdir().unwrap();
    let doc = fixtures().join("templates/permit_request.docmodel.json");
    ok(&["export", "--in", s(&doc), "--out", s(work.path()), "--image", "200=permit_request.200.png"]);
    let plain = fs::read_to_string(work.path().join("permit_request.plain.txt")).unwrap();
    let spatial = fs::read_to_string(work.path().join("permit_request.spatial.txt")).unwrap();
    assert!(!plain.trim().is_empty());
    assert!(!spatial.trim().is_empty());
    let manifest = read_json(&work.path().join("permit_request.manifest.json"));
    assert_eq!(manifest["images"]["200"], "permit_request.200.png");
}

#[test]
fn inline_defs_removes_references() {
    let work = tempfile::tempdir().unwrap();
    let canned = read_json(&fixtures().join("templates/expense_report.discovery.json"));
    let schema = json!({
        "type": "object",
        "properties": {"rows": {"type": "array", "items": {"$ref": "#/$defs/row"}}},
        "$defs": {"row": canned["schema"]["properties"]["expenses"]["items"].clone()}
    });
    let input = work.path().join("s.json");
    fs::write(&input, schema.to_string()).unwrap();
    let out = ok(&["inline-defs", "--in", s(&input)]);
    let inlined: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!inlined.to_string().contains("$ref"));
    assert!(inlined.get("$defs").is_none());
    assert_eq!(inlined["properties"]["rows"]["items"], canned["schema"]["properties"]["expenses"]["items"]);
}

#[test]
fn full_flow_from_template_to_report() {
    let work = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(work.path());

    let ledger = read_json(&corpus.join("ledger.json"));
    assert_eq!(ledger["removed_docs"], json!([]));

    let mut records = Vec::new();
    for id in TEMPLATES {
        let gt = read_json(&corpus.join(format!("{id}.gt.json")));
        records.push((id.to_string(), gt["values"].to_string()));
    }
    // One document answered with its schema instead of values.
    let echoed = read_json(&corpus.join("expense_report.schema.json"));
    records[3].1 = echoed.to_string();
    let pred = work.path().join("pred.jsonl");
    write_predictions(&pred, &records);

    let scores = work.path().join("scores.jsonl");
    ok(&[
        "score",
        "--gt",
        s(&corpus),
        "--pred",
        s(&pred),
        "--ledger",
        s(&corpus.join("ledger.json")),
        "--out",
        s(&scores),
    ]);
    let rows = read_lines(&scores);
    assert_eq!(rows.len(), TEMPLATES.len());
    for row in &rows[..] {
        let id = row["doc_id"].as_str().unwrap();
        if id == "expense_report" {
            assert_eq!(row["compliance"], "schema_reproduction");
            assert_eq!(row["perfect"], false);
        } else {
            assert_eq!(row["em"], 1.0, "{id}");
        }
    }

    let report_dir = work.path().join("report");
    ok(&["report", "--scores", s(&scores), "--out", s(&report_dir), "--resamples", "500"]);
    let md = fs::read_to_string(report_dir.join("report.md")).unwrap();
    let csv = fs::read_to_string(report_dir.join("report.csv")).unwrap();
    assert!(md.contains("| Input | Docs |"), "{md}");
    assert!(md.lines().any(|l| l.starts_with("| S | 4 |")), "{md}");
    assert!(csv.starts_with("label,metric,scope,value,ci_low,ci_high"));
}

#[test]
fn same_inputs_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = snapshot(&generate_corpus(a.path()));
    let second = snapshot(&generate_corpus(b.path()));
    assert_eq!(first.len(), second.len());
    for ((na, ba), (nb, bb)) in first.iter().zip(&second) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs between runs");
    }
}

#[test]
fn config_file_supplies_defaults() {
    let work = tempfile::tempdir().unwrap();
    let gt = fixtures().join("golden/housing_terms.gt.json");
    let pred = work.path().join("pred.jsonl");
    write_predictions(&pred, &[("housing_terms".into(), fs::read_to_string(&gt).unwrap())]);
    let scores = work.path().join("scores.jsonl");
    ok(&["score", "--gt", s(&gt), "--pred", s(&pred), "--out", s(&scores)]);

    let cfg = work.path().join("bench.toml");
    fs::write(&cfg, "seed = 3\nresamples = 200\nlevel = 0.9\n").unwrap();
    let (one, two) = (work.path().join("r1"), work.path().join("r2"));
    ok(&["--config", s(&cfg), "report", "--scores", s(&scores), "--out", s(&one)]);
    ok(&["report", "--scores", s(&scores), "--out", s(&two), "--seed", "3", "--resamples", "200", "--level", "0.9"]);
    assert_eq!(fs::read(one.join("report.csv")).unwrap(), fs::read(two.join("report.csv")).unwrap());

    fs::write(&cfg, "sede = 3\n").unwrap();
    assert_eq!(formbench(&["--config", s(&cfg), "report", "--scores", s(&scores), "--out", s(&one)]).status.code(), Some(1));
}

#[test]
fn run_records_unreachable_documents_as_empty() {
    let work = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(work.path());
    let cfg = work.path().join("run.toml");
    fs::write(&cfg, "[run]\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\nmax_attempts = 1\ntimeout_secs = 2\n").unwrap();
    let pred = work.path().join("pred.jsonl");
    let out = ok(&["--config", s(&cfg), "run", "--dir", s(&corpus), "--out", s(&pred), "--model", "m", "--modality", "plain"]);
    let rows = read_lines(&pred);
    let ids: Vec<_> = rows.iter().map(|r| r["doc_id"].as_str().unwrap()).collect();
    let mut expected = TEMPLATES.to_vec();
    expected.sort();
    assert_eq!(ids, expected);
    assert!(rows.iter().all(|r| r["raw_output"] == "" && r["modality"] == "plain"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("4 failed"));
}
