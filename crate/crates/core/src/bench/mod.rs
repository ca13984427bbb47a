//! Evaluation requests, prediction records and aggregate reporting.

mod report;
mod stats;

use std::collections::HashSet;
use std::io::{self, BufRead, Write};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::client::{ChatMessage, ChatRequest, ContentPart, Role};
use crate::doc_model::ModalityKind;
use crate::export::{ModalityBundle, IMAGE_DPI};
use crate::schema::{inline_defs, SchemaError};

pub use report::{aggregate, emit_report, AggregateReport, CategorySummary, Interval, ReportOptions};
pub use stats::{bootstrap_ci, empty_field_rate, percentile, quartile_decay, QuartileDecay};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{modality} input needs {artifact}, which the bundle for {doc_id} does not have")]
    MissingArtifact { doc_id: String, modality: ModalityKind, artifact: String },
    #[error("no documents scored")]
    NoDocuments,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// The evaluation instruction. `{schema}` is replaced by the compact
/// serialization of the document's schema.
pub const PROMPT_TEMPLATE: &str = "Extract structured data from this document. Return a JSON object matching this schema: {schema}\nReturn null for fields you cannot find.\nReturn ONLY valid JSON.\nReturn an instance of the JSON with extracted values, not the schema itself.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub endpoint: String,
    pub model: String,
    pub modality: ModalityKind,
    pub dpi: u32,
    /// Ask the provider for a JSON-object response.
    pub json_response: bool,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub parallelism: usize,
    pub timeout_secs: u64,
    pub inline_defs: bool,
    /// Replaces [`PROMPT_TEMPLATE`] for models with their own format.
    pub prompt_template: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: String::new(),
            modality: ModalityKind::SpatialText,
            dpi: IMAGE_DPI,
            json_response: true,
            max_attempts: 5,
            backoff_base_ms: 1000,
            parallelism: 4,
            timeout_secs: 120,
            inline_defs: false,
            prompt_template: None,
            api_key_env: "OPENAI_API_KEY".into(),
        }
    }
}

impl RunConfig {
    pub fn temperature(&self) -> f64 {
        0.0
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.parallelism == 0 {
            return Err(BenchError::Config("parallelism must be at least 1".into()));
        }
        if self.max_attempts == 0 {
            return Err(BenchError::Config("max_attempts must be at least 1".into()));
        }
        if self.endpoint.trim().is_empty() {
            return Err(BenchError::Config("endpoint is empty".into()));
        }
        if self.dpi == 0 {
            return Err(BenchError::Config("dpi must be positive".into()));
        }
        Ok(())
    }

    /// Delay before retry number `attempt` (0-based): base · 2^attempt plus
    /// up to one base of jitter.
    pub fn backoff(&self, attempt: u32, rng: &mut impl Rng) -> Duration {
        let base = self.backoff_base_ms;
        let exp = base.saturating_mul(1u64 << attempt.min(20));
        let jitter = if base == 0 { 0 } else { rng.random_range(0..=base) };
        Duration::from_millis(exp + jitter)
    }
}

/// Schema as sent to the model, optionally with definitions inlined.
pub fn prepare_schema(schema: &Value, inline: bool) -> Result<Value, BenchError> {
    if inline {
        Ok(inline_defs(schema)?)
    } else {
        Ok(schema.clone())
    }
}

pub fn build_prompt(schema: &Value, template: Option<&str>) -> String {
    let compact = serde_json::to_string(schema).unwrap_or_default();
    template.unwrap_or(PROMPT_TEMPLATE).replace("{schema}", &compact)
}

/// Content parts carrying the document in the requested modality.
pub fn assemble_input(bundle: &ModalityBundle, modality: ModalityKind, dpi: u32) -> Result<Vec<ContentPart>, BenchError> {
    let mut parts = Vec::new();
    match modality {
        ModalityKind::PlainText => parts.push(ContentPart::Text { text: bundle.plain_text.clone() }),
        ModalityKind::SpatialText | ModalityKind::SpatialPlusImage => {
            parts.push(ContentPart::Text { text: bundle.spatial_text.clone() })
        }
        ModalityKind::Image => {}
    }
    if modality.needs_image() {
        let path = bundle.image_paths.get(&dpi).ok_or_else(|| BenchError::MissingArtifact {
            doc_id: bundle.doc_id.clone(),
            modality,
            artifact: format!("a {dpi} DPI image"),
        })?;
        parts.push(ContentPart::Image { path: path.clone(), dpi });
    }
    Ok(parts)
}

/// The full evaluation request for one document.
pub fn build_request(config: &RunConfig, schema: &Value, bundle: &ModalityBundle) -> Result<ChatRequest, BenchError> {
    let schema = prepare_schema(schema, config.inline_defs)?;
    let prompt = build_prompt(&schema, config.prompt_template.as_deref());
    let parts = assemble_input(bundle, config.modality, config.dpi)?;
    let mut req = ChatRequest::new(vec![ChatMessage::text(Role::System, prompt), ChatMessage { role: Role::User, parts }]);
    req.json_response = config.json_response;
    Ok(req)
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub modality: String,
    pub raw_output: String,
}

pub fn read_predictions<R: BufRead>(r: R) -> io::Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_prediction<W: Write>(mut w: W, rec: &PredictionRecord) -> io::Result<()> {
    serde_json::to_writer(&mut w, rec)?;
    w.write_all(b"\n")
}

/// Documents still to be requested, given the ids already present.
pub fn pending<'a, T>(corpus: &'a [T], done: &HashSet<String>, id: impl Fn(&T) -> &str) -> Vec<&'a T> {
    corpus.iter().filter(|d| !done.contains(id(d))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;
    use std::collections::BTreeMap;

    fn bundle(with_image: bool) -> ModalityBundle {
        let mut image_paths = BTreeMap::new();
        if with_image {
            image_paths.insert(200, "d.200.png".into());
        }
        ModalityBundle { doc_id: "d".into(), plain_text: "p".into(), spatial_text: "s".into(), image_paths }
    }

    #[test]
    fn prompt_is_stable_and_complete() {
        let schema = json!({"type":"object","$defs":{"A":{"type":"object","properties":{"x":{"type":"string"}}}},
                            "properties":{"a":{"$ref":"#/$defs/A"}}});
        let p = build_prompt(&schema, None);
        assert!(p.contains("Return null for fields you cannot find."));
        assert!(p.contains("Return ONLY valid JSON."));
        assert!(p.contains(r##""$ref":"#/$defs/A""##));
        assert_eq!(p, build_prompt(&schema, None));
        let inlined = prepare_schema(&schema, true).unwrap();
        assert!(!build_prompt(&inlined, None).contains("$defs"));
        assert_eq!(build_prompt(&schema, Some("S={schema}")), format!("S={}", serde_json::to_string(&schema).unwrap()));
    }

    #[test]
    fn modality_parts() {
        let b = bundle(true);
        assert_eq!(assemble_input(&b, ModalityKind::SpatialText, 200).unwrap().len(), 1);
        let sv = assemble_input(&b, ModalityKind::SpatialPlusImage, 200).unwrap();
        assert!(matches!(sv[0], ContentPart::Text { .. }));
        assert!(matches!(sv[1], ContentPart::Image { dpi: 200, .. }));
        assert!(matches!(
            assemble_input(&bundle(false), ModalityKind::Image, 200),
            Err(BenchError::MissingArtifact { .. })
        ));
        assert!(assemble_input(&b, ModalityKind::Image, 50).is_err());
    }

    #[test]
    fn config_checks() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.temperature(), 0.0);
        c.parallelism = 0;
        assert!(c.validate().is_err());
    }
}
