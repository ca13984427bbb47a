#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use formbench_core::client::{ChatRequest, ClientError};
use formbench_core::doc_model::{read_document, DocumentModel};
use formbench_core::export::{export_bundle, ModalityBundle};
use formbench_core::genpipe::{
    generate_document, BuiltinTextGenerator, Generated, PersonaConfig, SeedMap, ValueGenerator,
};
use formbench_core::qa::{screen_document, Finding};
use formbench_core::scoring::ScoreOptions;
use serde_json::Value;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn read_json(rel: &str) -> Value {
    let path = fixtures().join(rel);
    serde_json::from_slice(&fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

pub struct Template {
    pub doc: DocumentModel,
    /// Canned discovery answer whose leaves name widget ids.
    pub canned: Value,
}

pub fn templates() -> Vec<Template> {
    let dir = fixtures().join("templates");
    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter_map(|n| n.strip_suffix(".docmodel.json").map(str::to_string))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| Template {
            doc: read_document(&fs::read(dir.join(format!("{n}.docmodel.json"))).unwrap()).unwrap(),
            canned: read_json(&format!("templates/{n}.discovery.json")),
        })
        .collect()
}

fn substitute(v: &Value, seed: &SeedMap) -> Value {
    match v {
        Value::String(s) => match seed.placeholder_for(s) {
            Some(p) => Value::String(p.to_string()),
            None => v.clone(),
        },
        Value::Array(a) => Value::Array(a.iter().map(|x| substitute(x, seed)).collect()),
        Value::Object(m) => Value::Object(m.iter().map(|(k, x)| (k.clone(), substitute(x, seed))).collect()),
        other => other.clone(),
    }
}

/// A discovery model stand-in: answers with the canned schema and the
/// canned instance, widget ids replaced by their placeholders. The reply
/// is wrapped in a code fence the way chat models often do.
pub fn mock_discovery(canned: &Value, seed: &SeedMap) -> impl Fn(&ChatRequest) -> Result<String, ClientError> {
    let answer = serde_json::json!({
        "schema": canned["schema"].clone(),
        "instance": substitute(&canned["instance"], seed),
    });
    move |req: &ChatRequest| {
        assert!(req.all_text().contains("TXT_001") || req.all_text().contains("2099-") || req.all_text().contains("900001"));
        Ok(format!("```json\n{}\n```", serde_json::to_string_pretty(&answer).unwrap()))
    }
}

pub struct PipelineRun {
    pub generated: Generated,
    pub bundle: ModalityBundle,
    pub findings: Vec<Finding>,
}

pub fn run_template(t: &Template, seed: u64) -> PipelineRun {
    let persona = PersonaConfig::default();
    let text = BuiltinTextGenerator;
    let generator = ValueGenerator { persona: &persona, text: &text };
    let seed_map = formbench_core::genpipe::seed_fill(&t.doc).unwrap();
    let client = mock_discovery(&t.canned, &seed_map);
    let generated = generate_document(&t.doc, &client, seed, &generator)
        .unwrap_or_else(|e| panic!("{}: {e}", t.doc.doc_id));
    let bundle = export_bundle(&generated.reskinned.filled);
    let findings = screen_document(
        &generated.reskinned.ground_truth,
        &generated.reconciled.schema,
        &bundle,
        &ScoreOptions::default(),
    );
    PipelineRun { generated, bundle, findings }
}
