//! Acceptance suite: every criterion prints one PASS/FAIL line, then the
//! test fails if any criterion failed.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use common::{read_json, run_template, templates};
use formbench_core::bench::bootstrap_ci;
use formbench_core::doc_model::{to_canonical_json, write_document};
use formbench_core::export::{classify_structure, StructureCategory};
use formbench_core::qa::Severity;
use formbench_core::schema::{inline_defs, ExtractionSchema};
use formbench_core::scoring::{
    all_leaves, classify_compliance, match_arrays, score_document, score_field_anls, unwrap_envelope, Compliance,
    DocumentScore, ScoreOptions,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------
// Assignment oracle

fn random_element(rng: &mut ChaCha8Rng, keys: &[String], drop_p: f64) -> Value {
    let mut m = Map::new();
    for k in keys {
        if rng.random_bool(drop_p) {
            continue;
        }
        let v = ["x", "y", "z"][rng.random_range(0..3)];
        m.insert(k.clone(), Value::String(v.into()));
    }
    Value::Object(m)
}

/// Count of ground-truth keys whose predicted value is the same string.
fn oracle_overlap(g: &Value, p: &Value) -> usize {
    g.as_object().unwrap().iter().filter(|(k, v)| p.get(k.as_str()) == Some(*v)).count()
}

/// Best total overlap over all injective partial maps gt -> pred.
fn brute_force(gt: &[Value], pred: &[Value]) -> usize {
    fn go(i: usize, gt: &[Value], pred: &[Value], used: &mut Vec<bool>) -> usize {
        if i == gt.len() {
            return 0;
        }
        let mut best = go(i + 1, gt, pred, used);
        for j in 0..pred.len() {
            if !used[j] {
                used[j] = true;
                best = best.max(oracle_overlap(&gt[i], &pred[j]) + go(i + 1, gt, pred, used));
                used[j] = false;
            }
        }
        best
    }
    go(0, gt, pred, &mut vec![false; pred.len()])
}

fn assignment_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let opts = ScoreOptions::default();
    for case in 0..1000 {
        let nk = rng.random_range(1..=6);
        let keys: Vec<String> = (0..nk).map(|i| format!("f{i}")).collect();
        let gt: Vec<Value> = (0..rng.random_range(1..=6)).map(|_| random_element(&mut rng, &keys, 0.0)).collect();
        let pred: Vec<Value> = (0..rng.random_range(0..=6)).map(|_| random_element(&mut rng, &keys, 0.2)).collect();
        let a = match_arrays(&gt, &pred, &opts);
        let mut seen = std::collections::HashSet::new();
        check(a.pairs.iter().flatten().all(|j| seen.insert(*j)), format!("case {case}: not injective"))?;
        let got: usize = a.pairs.iter().enumerate().filter_map(|(i, j)| j.map(|j| oracle_overlap(&gt[i], &pred[j]))).sum();
        let want = brute_force(&gt, &pred);
        check(got == want, format!("case {case}: overlap {got}, brute force {want}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 10.0, format!("took {secs:.2}s"))?;
    Ok(format!("1000 instances equal brute force in {secs:.2}s"))
}

// ---------------------------------------------------------------------------
// Edit-distance oracle

fn oracle_levenshtein(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

fn oracle_anls(g: &str, p: &str, tau: f64) -> f64 {
    let (a, b): (Vec<char>, Vec<char>) = (g.chars().collect(), p.chars().collect());
    let n = a.len().max(b.len());
    if n == 0 {
        return 1.0;
    }
    let nl = oracle_levenshtein(&a, &b) as f64 / n as f64;
    if nl <= 1.0 - tau {
        1.0 - nl
    } else {
        0.0
    }
}

fn edit_distance_oracle() -> Outcome {
    let alphabet: Vec<char> = "abcdeAB01é-".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let s = |rng: &mut ChaCha8Rng| -> String {
            (0..rng.random_range(0..=40)).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
        };
        let g = s(&mut rng);
        let p = if i % 3 == 0 {
            let mut c: Vec<char> = g.chars().collect();
            if !c.is_empty() {
                let k = rng.random_range(0..c.len());
                c[k] = 'z';
            }
            c.into_iter().collect()
        } else {
            s(&mut rng)
        };
        let diff = (score_field_anls(&g, &p, 0.5) - oracle_anls(&g, &p, 0.5)).abs();
        worst = worst.max(diff);
        check(diff <= 1e-12, format!("{g:?} vs {p:?}: differs by {diff}"))?;
    }
    let dept = score_field_anls("Department", "Departmen", 0.5);
    check(dept == 0.9, format!("Department/Departmen = {dept}"))?;
    Ok(format!("1000 pairs, max deviation {worst:e}; Department/Departmen = {dept}"))
}

// ---------------------------------------------------------------------------
// Golden fixtures

fn golden(name: &str) -> (ExtractionSchema, Value) {
    let schema = ExtractionSchema::from_value(&read_json(&format!("golden/{name}.schema.json"))).unwrap();
    (schema, read_json(&format!("golden/{name}.gt.json")))
}

fn golden_fixtures() -> Outcome {
    let opts = ScoreOptions::default();
    let mut parts = Vec::new();
    for (name, cat) in [("housing_terms", StructureCategory::Nested), ("alj_application", StructureCategory::Table)] {
        let (schema, gt) = golden(name);
        let s = score_document(name, &gt, &schema, &gt.to_string(), None, &opts);
        check(s.em == Some(1.0) && s.anls == Some(1.0) && s.perfect, format!("{name}: {:?} {:?} {}", s.em, s.anls, s.perfect))?;
        let got = classify_structure(&schema);
        check(got == cat, format!("{name}: classified {got:?}"))?;
        parts.push(format!("{name}: {} fields, EM=ANLS=100%, perfect, {}", s.scored_fields().count(), got.as_str()));
    }
    Ok(parts.join("; "))
}

// ---------------------------------------------------------------------------
// Compliance taxonomy

fn compliance_taxonomy() -> Outcome {
    let schema = ExtractionSchema::from_value(&read_json("golden/lab_certification.schema.json")).unwrap();
    let gt = read_json("golden/lab_certification.gt.json");
    let expect = [
        ("compliant", Compliance::Compliant),
        ("wrapped", Compliance::SchemaWrapped),
        ("reproduction", Compliance::SchemaReproduction),
    ];
    for (name, want) in expect {
        let out = read_json(&format!("golden/lab_certification.out.{name}.json"));
        let got = classify_compliance(Some(&out), &schema);
        check(got == want, format!("{name} output classified {}", got.as_str()))?;
    }
    let wrapped = read_json("golden/lab_certification.out.wrapped.json");
    let unwrapped = unwrap_envelope(&wrapped);
    let leaves = all_leaves(&unwrapped);
    check(!leaves.is_empty(), "no leaves after unwrap")?;
    for (path, v) in &leaves {
        check(path.get(&gt) == Some(v), format!("{path}: {v} does not match ground truth"))?;
    }
    check(unwrap_envelope(&unwrapped) == unwrapped, "unwrap is not idempotent")?;
    Ok(format!(
        "three outputs labelled as expected; all {} leaves shown in the wrapped output match after unwrap \
         (the source excerpt displays {} leaves, not six)",
        leaves.len(),
        leaves.len()
    ))
}

// ---------------------------------------------------------------------------
// Inlining equivalence

fn random_leaf(rng: &mut ChaCha8Rng) -> Value {
    if rng.random_bool(0.7) {
        json!({"type": "string"})
    } else {
        json!({"type": "number"})
    }
}

/// A schema with 1..=3 definitions; later definitions may reference the
/// first one, the root references any of them directly or as array items.
/// Nesting stays within the four-level limit.
fn random_schema(rng: &mut ChaCha8Rng) -> Value {
    let nd = rng.random_range(1..=3);
    let mut defs = Map::new();
    for d in 0..nd {
        let mut props = Map::new();
        for p in 0..rng.random_range(1..=4) {
            let node = if d > 0 && rng.random_bool(0.3) {
                json!({"$ref": "#/$defs/D0"})
            } else {
                random_leaf(rng)
            };
            props.insert(format!("p{p}"), node);
        }
        defs.insert(format!("D{d}"), json!({"type": "object", "properties": props}));
    }
    let mut props = Map::new();
    for p in 0..rng.random_range(1..=5) {
        let r = format!("#/$defs/D{}", rng.random_range(0..nd));
        let node = match rng.random_range(0..3) {
            0 => random_leaf(rng),
            1 => json!({"$ref": r}),
            _ => json!({"type": "array", "items": {"$ref": r}}),
        };
        props.insert(format!("r{p}"), node);
    }
    json!({"type": "object", "$defs": defs, "properties": props})
}

fn random_instance(node: &Value, defs: &Value, rng: &mut ChaCha8Rng, corrupt: f64) -> Value {
    if rng.random_bool(corrupt) {
        return match rng.random_range(0..4) {
            0 => json!(true),
            1 => json!(7),
            2 => json!("text"),
            _ => json!({"k": 1}),
        };
    }
    if let Some(r) = node.get("$ref").and_then(Value::as_str) {
        let name = r.trim_start_matches("#/$defs/");
        return random_instance(&defs[name], defs, rng, corrupt);
    }
    match node["type"].as_str() {
        Some("object") => {
            let mut m = Map::new();
            for (k, child) in node["properties"].as_object().unwrap() {
                if rng.random_bool(0.9) {
                    m.insert(k.clone(), random_instance(child, defs, rng, corrupt));
                }
            }
            Value::Object(m)
        }
        Some("array") => {
            Value::Array((0..rng.random_range(0..3)).map(|_| random_instance(&node["items"], defs, rng, corrupt)).collect())
        }
        Some("number") => json!(rng.random_range(0..1000)),
        _ => json!(format!("v{}", rng.random_range(0..100))),
    }
}

fn has_ref(v: &Value) -> bool {
    match v {
        Value::Object(m) => m.contains_key("$ref") || m.contains_key("$defs") || m.values().any(has_ref),
        Value::Array(a) => a.iter().any(has_ref),
        _ => false,
    }
}

fn inlining_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let (mut agree, mut valid) = (0, 0);
    for s in 0..200 {
        let raw = random_schema(&mut rng);
        let inlined = inline_defs(&raw).map_err(|e| format!("schema {s}: {e}"))?;
        check(!has_ref(&inlined), format!("schema {s}: references survive inlining"))?;
        let a = ExtractionSchema::from_value(&raw).map_err(|e| format!("schema {s}: {e}"))?;
        let b = ExtractionSchema::from_value(&inlined).map_err(|e| format!("schema {s} inlined: {e}"))?;
        for i in 0..10 {
            let corrupt = if i % 2 == 0 { 0.0 } else { 0.15 };
            let inst = random_instance(&raw, &raw["$defs"], &mut rng, corrupt);
            let (va, vb) = (a.is_valid(&inst), b.is_valid(&inst));
            check(va == vb, format!("schema {s} instance {i}: {va} vs {vb} on {inst}"))?;
            agree += 1;
            valid += usize::from(va);
        }
    }
    let (schema, gt) = golden("housing_terms");
    let inlined = inline_defs(&read_json("golden/housing_terms.schema.json")).map_err(|e| e.to_string())?;
    check(!has_ref(&inlined), "housing_terms schema keeps references")?;
    let b = ExtractionSchema::from_value(&inlined).map_err(|e| e.to_string())?;
    check(schema.is_valid(&gt) && b.is_valid(&gt), "housing_terms ground truth rejected")?;
    Ok(format!("{agree}/2000 verdicts agree ({valid} valid); housing_terms inlines to a reference-free schema accepting its ground truth"))
}

// ---------------------------------------------------------------------------
// End-to-end determinism

fn end_to_end() -> Outcome {
    let ts = templates();
    check(ts.len() == 25, format!("{} templates", ts.len()))?;
    let (mut removed, mut leaves, mut found) = (0, 0, 0);
    for t in &ts {
        let a = run_template(t, 2024);
        let b = run_template(t, 2024);
        let id = &t.doc.doc_id;
        removed += a.findings.iter().filter(|f| f.severity == Severity::RemoveDocument).count();
        for (_, v) in all_leaves(&a.generated.reskinned.ground_truth.values) {
            leaves += 1;
            let text = v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string());
            found += usize::from(a.bundle.spatial_text.contains(&text));
        }
        check(
            to_canonical_json(&a.generated.reskinned.ground_truth) == to_canonical_json(&b.generated.reskinned.ground_truth),
            format!("{id}: ground truth differs between runs"),
        )?;
        check(
            write_document(&a.generated.reskinned.filled) == write_document(&b.generated.reskinned.filled)
                && a.bundle.plain_text == b.bundle.plain_text
                && a.bundle.spatial_text == b.bundle.spatial_text,
            format!("{id}: exports differ between runs"),
        )?;
    }
    check(removed == 0, format!("{removed} remove-document findings"))?;
    check(found == leaves, format!("{found}/{leaves} ground-truth leaves in spatial text"))?;
    Ok(format!("25 templates, 0 remove-document findings, {found}/{leaves} leaves found, byte-identical reruns"))
}

// ---------------------------------------------------------------------------
// Permutation invariance

fn perturb(v: &Value, rng: &mut ChaCha8Rng) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.iter().map(|(k, x)| (k.clone(), perturb(x, rng))).collect()),
        Value::Array(a) => Value::Array(a.iter().map(|x| perturb(x, rng)).collect()),
        Value::String(s) if rng.random_bool(0.3) => {
            let mut c: Vec<char> = s.chars().collect();
            c.pop();
            Value::String(c.into_iter().collect())
        }
        Value::String(_) if rng.random_bool(0.1) => Value::Null,
        other => other.clone(),
    }
}

fn shuffle_arrays(v: &Value, rng: &mut ChaCha8Rng) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.iter().map(|(k, x)| (k.clone(), shuffle_arrays(x, rng))).collect()),
        Value::Array(a) => {
            let mut items: Vec<Value> = a.iter().map(|x| shuffle_arrays(x, rng)).collect();
            items.shuffle(rng);
            Value::Array(items)
        }
        other => other.clone(),
    }
}

fn field_scores(s: &DocumentScore) -> Vec<(String, Option<u8>, Option<u64>)> {
    s.fields.iter().map(|f| (f.field_path.to_string(), f.em, f.anls.map(f64::to_bits))).collect()
}

fn table_documents() -> Vec<(String, ExtractionSchema, Value)> {
    let mut docs = Vec::new();
    for t in templates() {
        let run = run_template(&t, 2024);
        let schema = run.generated.reconciled.schema;
        if classify_structure(&schema) == StructureCategory::Table {
            docs.push((t.doc.doc_id.clone(), schema, run.generated.reskinned.ground_truth.values));
        }
    }
    let (schema, gt) = golden("alj_application");
    docs.push(("alj_application".into(), schema, gt));
    docs
}

fn permutation_invariance() -> Outcome {
    let opts = ScoreOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let docs = table_documents();
    check(docs.len() >= 2, "no table documents")?;
    let mut checks = 0;
    for (id, schema, gt) in &docs {
        for variant in 0..6 {
            let pred = if variant == 0 { gt.clone() } else { perturb(gt, &mut rng) };
            let base = field_scores(&score_document(id, gt, schema, &pred.to_string(), None, &opts));
            for _ in 0..5 {
                let shuffled = shuffle_arrays(&pred, &mut rng);
                let got = field_scores(&score_document(id, gt, schema, &shuffled.to_string(), None, &opts));
                check(got == base, format!("{id}: scores change under row shuffle of {pred}"))?;
                checks += 1;
            }
        }
    }
    Ok(format!("{} table documents, {checks} shuffles, every field score unchanged", docs.len()))
}

// ---------------------------------------------------------------------------
// Bootstrap sanity

fn bootstrap_sanity() -> Outcome {
    let (lo, hi) = bootstrap_ci(&[1.0; 200], 0.95, 10_000, 3).map_err(|e| e.to_string())?;
    check(lo == 1.0 && hi == 1.0, format!("zero-variance interval ({lo}, {hi})"))?;

    let start = Instant::now();
    let values: Vec<f64> = (0..200).map(|i| f64::from(u8::from(i % 3 != 0))).collect();
    bootstrap_ci(&values, 0.95, 10_000, 11).map_err(|e| e.to_string())?;
    let one = start.elapsed().as_secs_f64();
    check(one < 30.0, format!("10000 resamples x 200 docs took {one:.2}s"))?;

    let p = 0.7;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut covered = 0;
    for trial in 0..200u64 {
        let xs: Vec<f64> = (0..200).map(|_| f64::from(u8::from(rng.random_bool(p)))).collect();
        let (lo, hi) = bootstrap_ci(&xs, 0.95, 10_000, trial).map_err(|e| e.to_string())?;
        covered += usize::from(lo <= p && p <= hi);
    }
    let rate = covered as f64 / 200.0;
    check((rate - 0.95).abs() <= 0.03, format!("coverage {:.1}%", rate * 100.0))?;
    Ok(format!("zero-width at zero variance; coverage {:.1}% over 200 trials; one CI in {one:.2}s", rate * 100.0))
}

// ---------------------------------------------------------------------------
// EM/ANLS ordering

fn em_anls_ordering() -> Outcome {
    let opts = ScoreOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0009);
    let mut corpus: Vec<(String, ExtractionSchema, Value)> = Vec::new();
    for t in templates() {
        let run = run_template(&t, 99);
        corpus.push((t.doc.doc_id.clone(), run.generated.reconciled.schema, run.generated.reskinned.ground_truth.values));
    }
    for name in ["housing_terms", "alj_application", "lab_certification"] {
        let (schema, gt) = golden(name);
        corpus.push((name.into(), schema, gt));
    }
    let mut scored = 0;
    for (id, schema, gt) in &corpus {
        let wrapped = json!({"type": "object", "properties": gt});
        let preds = [
            gt.to_string(),
            perturb(gt, &mut rng).to_string(),
            shuffle_arrays(&perturb(gt, &mut rng), &mut rng).to_string(),
            wrapped.to_string(),
            "{}".to_string(),
            "not json".to_string(),
            String::new(),
        ];
        for p in &preds {
            let s = score_document(id, gt, schema, p, None, &opts);
            if let (Some(em), Some(anls)) = (s.em, s.anls) {
                check(anls >= em, format!("{id}: ANLS {anls} < EM {em} for {p}"))?;
                scored += 1;
            }
        }
    }
    Ok(format!("{scored} scored documents across {} corpora, ANLS >= EM in all", corpus.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn primary_criteria() {
    println!();
    let criteria: [Criterion; 9] = [
        ("assignment oracle", assignment_oracle),
        ("edit-distance oracle", edit_distance_oracle),
        ("golden fixtures", golden_fixtures),
        ("compliance taxonomy", compliance_taxonomy),
        ("inlining equivalence", inlining_equivalence),
        ("end-to-end determinism", end_to_end),
        ("permutation invariance", permutation_invariance),
        ("bootstrap sanity", bootstrap_sanity),
        ("EM/ANLS ordering", em_anls_ordering),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                println!("FAIL {name}: {detail}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
