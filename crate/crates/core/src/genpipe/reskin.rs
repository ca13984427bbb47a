//! Filling mapped widgets with synthetic values and assembling ground truth.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::doc_model::{DocumentModel, FieldKind};
use crate::schema::{ExtractionSchema, LeafType, SchemaNode};

use super::fill::render_fills;
use super::persona::{infer_semantic_category, rng_stream, Constraints, SemanticCategory, ValueGenerator};
use super::reconcile::FieldMapping;
use super::seed::estimate_max_chars;
use super::GenError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub doc_id: String,
    pub generation_seed: u64,
    pub values: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reskinned {
    pub filled: DocumentModel,
    pub ground_truth: GroundTruthRecord,
    /// (widget id, rendered fill text) in mapping order.
    pub fills: Vec<(String, String)>,
}

pub fn reskin_document(
    doc: &DocumentModel,
    schema: &ExtractionSchema,
    mapping: &FieldMapping,
    seed: u64,
    generator: &ValueGenerator<'_>,
) -> Result<Reskinned, GenError> {
    if mapping.entries.is_empty() {
        return Err(GenError::ZeroMappings);
    }
    let mut values = Value::Object(Map::new());
    let mut fills = Vec::with_capacity(mapping.entries.len());
    for entry in &mapping.entries {
        let widget = doc.widget(&entry.widget_id).ok_or_else(|| GenError::UnresolvedWidget(entry.widget_id.clone()))?;
        let leaf = match schema.node_at(&entry.schema_path) {
            Some(SchemaNode::Leaf(l)) => Some(l),
            _ => None,
        };
        let widget_max = estimate_max_chars(widget);
        let max = leaf.and_then(|l| l.max_visual_chars).map_or(widget_max, |m| m.min(widget_max));
        let choices = leaf.and_then(|l| l.choices.clone()).or_else(|| widget.choice_options.clone());
        let schema_type = leaf.map_or(LeafType::String, |l| l.kind);
        let field_name = entry.schema_path.leaf_name().unwrap_or_default();
        let constraints = Constraints {
            max_visual_chars: max,
            choices,
            schema_type,
            field_hint: entry.schema_path.wildcard().to_string(),
        };
        let mut rng = rng_stream(seed, &doc.doc_id, &widget.id);
        let category = match widget.field_kind {
            FieldKind::Date => SemanticCategory::Date,
            _ => infer_semantic_category(field_name),
        };
        let generated = generator.generate_value(category, &constraints, &mut rng)?;
        entry
            .schema_path
            .set(&mut values, generated.value)
            .map_err(|e| GenError::AssemblyConflict(e.0))?;
        fills.push((widget.id.clone(), generated.text));
    }
    let filled = render_fills(doc, &fills)?;
    Ok(Reskinned {
        filled,
        ground_truth: GroundTruthRecord { doc_id: doc.doc_id.clone(), generation_seed: seed, values },
        fills,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc_model::{BBox, Widget};
    use crate::genpipe::{BuiltinTextGenerator, MappingEntry, PersonaConfig};
    use serde_json::json;

    fn doc() -> DocumentModel {
        let w = |id: &str, width: f64, y: f64| Widget {
            array_group: None,
            bbox: BBox::new(40.0, y, 40.0 + width, y + 12.0),
            choice_options: None,
            field_kind: FieldKind::Text,
            font_name: "Helvetica".into(),
            font_size: 10.0,
            id: id.into(),
        };
        DocumentModel {
            doc_id: "form-1".into(),
            language: "en".into(),
            page_height: 792.0,
            page_width: 612.0,
            spans: vec![],
            widgets: vec![w("w3", 150.0, 100.0), w("w5", 78.0, 130.0)],
        }
    }

    #[test]
    fn ground_truth_is_visible_fill_text() {
        let d = doc();
        let schema = ExtractionSchema::from_value(&json!({"type":"object","properties":{
            "housing_provider":{"type":"object","properties":{"name":{"type":"string"}}},
            "unit_type":{"type":"string"}}}))
        .unwrap();
        let mapping = FieldMapping {
            entries: vec![
                MappingEntry { schema_path: "housing_provider/name".into(), placeholder: "TXT_001".into(), widget_id: "w3".into() },
                MappingEntry { schema_path: "unit_type".into(), placeholder: "TXT_002".into(), widget_id: "w5".into() },
            ],
        };
        let persona = PersonaConfig::default();
        let g = ValueGenerator { persona: &persona, text: &BuiltinTextGenerator };
        let a = reskin_document(&d, &schema, &mapping, 42, &g).unwrap();
        let b = reskin_document(&d, &schema, &mapping, 42, &g).unwrap();
        assert_eq!(a, b);
        assert!(schema.is_valid(&a.ground_truth.values));
        for (wid, text) in &a.fills {
            let e = mapping.for_widget(wid).unwrap();
            assert_eq!(e.schema_path.get(&a.ground_truth.values).unwrap(), &json!(text));
            assert!(text.chars().count() <= estimate_max_chars(d.widget(wid).unwrap()) as usize);
            assert!(a.filled.spans.iter().any(|s| &s.text == text));
        }
        assert!(matches!(
            reskin_document(&d, &schema, &FieldMapping::default(), 1, &g),
            Err(GenError::ZeroMappings)
        ));
    }
}
