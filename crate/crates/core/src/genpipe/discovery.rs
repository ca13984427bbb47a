//! Schema discovery: the request sent to the discovery model and the
//! response it must return.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::client::{ChatClient, ChatMessage, ChatRequest, ContentPart, Role};
use crate::doc_model::{DocumentModel, FieldKind};
use crate::export::{export_spatial_text, IMAGE_DPI};
use crate::json_util::parse_lenient;

use super::fill::render_fills;
use super::seed::{reading_order, SeedMap};
use super::GenError;

const DISCOVERY_INSTRUCTIONS: &str = "\
You are given a fillable form whose input fields have been filled with unique placeholder tokens \
(TXT_001, TXT_002, ... for text, dates from 2099-01-01 onward, numbers from 900001 onward).
Design a JSON Schema that an information-extraction system could use for this form:
- Give every field a short snake_case name that states what the field holds, taken from its label.
- Put fields that belong to the same section or party into nested objects.
- Model repeated rows and tabular sections as arrays of objects, one element per row.
- Use only the types object, array, string and number. References to \"#/$defs/Name\" are allowed.
- Do not nest objects or arrays more than four levels deep.
Then give an instance of that schema whose leaves are the placeholder tokens, copied exactly, \
each placed under the field it fills. Use every placeholder at most once and never invent one.
Reply with a single JSON object of the form {\"schema\": <JSON Schema>, \"instance\": <instance>}.";

/// Build the discovery request for a seeded document. `image` optionally
/// points at a rendering of the seeded page.
pub fn build_discovery_request(
    doc: &DocumentModel,
    seed: &SeedMap,
    image: Option<PathBuf>,
) -> Result<ChatRequest, GenError> {
    if doc.widgets.is_empty() || seed.is_empty() {
        return Err(GenError::NothingToDiscover);
    }
    let seeded = render_fills(doc, &seed.fills())?;
    let mut user = format!("Form layout:\n```\n{}\n```\n", export_spatial_text(&seeded));

    let choice_lines: Vec<String> = reading_order(&doc.widgets)
        .into_iter()
        .filter(|w| w.field_kind == FieldKind::Choice)
        .filter_map(|w| {
            let ph = seed.placeholder_for(&w.id)?;
            let opts = w.choice_options.as_deref().unwrap_or_default();
            Some(format!("{ph}: {}", opts.join(" | ")))
        })
        .collect();
    if !choice_lines.is_empty() {
        user.push_str("\nChoice fields and their options:\n");
        for l in choice_lines {
            user.push_str(&l);
            user.push('\n');
        }
    }

    let mut parts = vec![ContentPart::Text { text: user }];
    if let Some(path) = image {
        parts.push(ContentPart::Image { path, dpi: IMAGE_DPI });
    }
    Ok(ChatRequest::new(vec![
        ChatMessage::text(Role::System, DISCOVERY_INSTRUCTIONS),
        ChatMessage { role: Role::User, parts },
    ]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryResponse {
    pub schema: Value,
    pub instance: Value,
}

/// Recover `{"schema": …, "instance": …}` from raw model text.
pub fn parse_discovery_response(text: &str) -> Result<DiscoveryResponse, GenError> {
    let v = parse_lenient(text).ok_or_else(|| GenError::BadResponse("no JSON value found".into()))?;
    serde_json::from_value(v).map_err(|e| GenError::BadResponse(e.to_string()))
}

/// Send the discovery request through `client` and parse the reply.
pub fn discover(
    client: &dyn ChatClient,
    doc: &DocumentModel,
    seed: &SeedMap,
    image: Option<PathBuf>,
) -> Result<DiscoveryResponse, GenError> {
    let request = build_discovery_request(doc, seed, image)?;
    let text = client.complete(&request).map_err(|e| GenError::Client(e.to_string()))?;
    parse_discovery_response(&text)
}
