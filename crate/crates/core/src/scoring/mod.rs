//! Field-level evaluation of model predictions against ground truth.
//!
//! Objects are compared key by key. Arrays are aligned with a
//! maximum-weight assignment whose primary weight is the number of
//! exactly matching leaves of an element pair and whose secondary weight
//! is the pair's ANLS sum. Predicted elements are put in a canonical
//! content order first, so reordering a prediction cannot change scores.

mod anls;
mod assign;
mod compliance;
mod normalize;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::export::{classify_structure, StructureCategory};
use crate::json_util::parse_lenient;
use crate::path::FieldPath;
use crate::qa::ExclusionLedger;
use crate::schema::ExtractionSchema;

pub use crate::schema::inline_defs;
pub use anls::{levenshtein, score_field_anls};
pub use assign::{assignment_weight, lexicographic_assignment, max_weight_assignment, TIE_BREAK_LIMIT};
pub use compliance::{classify_compliance, unwrap_envelope, Compliance};
pub(crate) use compliance::untyped_arrays;
pub use normalize::{normalize_text, normalize_value, number_text, Normalized, ScoreOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldStatus {
    Matched,
    Missing,
    Mismatched,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldScore {
    pub field_path: FieldPath,
    pub em: Option<u8>,
    pub anls: Option<f64>,
    pub gt_value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_value: Option<Value>,
    pub status: FieldStatus,
}

impl FieldScore {
    pub fn is_scored(&self) -> bool {
        self.status != FieldStatus::Excluded
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScore {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<String>,
    pub category: StructureCategory,
    pub compliance: Compliance,
    pub fields: Vec<FieldScore>,
    /// Mean leaf EM over scored fields; absent when nothing is scorable.
    pub em: Option<f64>,
    pub anls: Option<f64>,
    pub perfect: bool,
    /// Predicted array elements left without a ground-truth partner.
    pub surplus: usize,
    /// The document is in the ledger's removed set and is not scored.
    pub removed: bool,
}

impl DocumentScore {
    pub fn scored_fields(&self) -> impl Iterator<Item = &FieldScore> {
        self.fields.iter().filter(|f| f.is_scored())
    }
}

/// Leaves outside arrays plus whole array nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Flattened {
    pub leaves: Vec<(FieldPath, Value)>,
    pub arrays: Vec<(FieldPath, Vec<Value>)>,
}

pub fn flatten(instance: &Value) -> Flattened {
    fn walk(v: &Value, at: FieldPath, out: &mut Flattened) {
        match v {
            Value::Object(m) => {
                for (k, c) in m {
                    walk(c, at.key(k), out);
                }
            }
            Value::Array(a) => out.arrays.push((at, a.clone())),
            other => out.leaves.push((at, other.clone())),
        }
    }
    let mut out = Flattened::default();
    walk(instance, FieldPath::root(), &mut out);
    out
}

/// Every scalar of an instance with its concrete path, arrays included.
pub fn all_leaves(instance: &Value) -> Vec<(FieldPath, Value)> {
    fn walk(v: &Value, at: FieldPath, out: &mut Vec<(FieldPath, Value)>) {
        match v {
            Value::Object(m) => {
                for (k, c) in m {
                    walk(c, at.key(k), out);
                }
            }
            Value::Array(a) => {
                for (i, c) in a.iter().enumerate() {
                    walk(c, at.index(i), out);
                }
            }
            other => out.push((at, other.clone())),
        }
    }
    let mut out = Vec::new();
    walk(instance, FieldPath::root(), &mut out);
    out
}

/// Result of aligning predicted array elements with ground-truth ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayAssignment {
    /// For each ground-truth element, the index of its predicted partner.
    pub pairs: Vec<Option<usize>>,
    pub surplus: usize,
}

const EM_SCALE: f64 = (1u64 << 40) as f64;
const ANLS_SCALE: f64 = (1u64 << 20) as f64;

struct Scorer<'a> {
    opts: &'a ScoreOptions,
    excluded: &'a dyn Fn(&FieldPath) -> bool,
}

impl Scorer<'_> {
    fn score(&self, gt: &Value, pred: Option<&Value>, at: FieldPath, out: &mut Vec<FieldScore>, surplus: &mut usize) {
        match gt {
            Value::Object(m) => {
                let pm = pred.and_then(Value::as_object);
                for (k, g) in m {
                    self.score(g, pm.and_then(|p| p.get(k)), at.key(k), out, surplus);
                }
            }
            Value::Array(ga) => {
                let pa: Vec<Value> = match pred {
                    Some(Value::Array(p)) => p.clone(),
                    None | Some(Value::Null) => Vec::new(),
                    Some(single) => vec![single.clone()],
                };
                let assignment = match_arrays(ga, &pa, self.opts);
                *surplus += assignment.surplus;
                for (i, g) in ga.iter().enumerate() {
                    let p = assignment.pairs[i].map(|j| &pa[j]);
                    self.score(g, p, at.index(i), out, surplus);
                }
            }
            scalar => out.push(self.leaf(scalar, pred, at)),
        }
    }

    fn leaf(&self, gt: &Value, pred: Option<&Value>, at: FieldPath) -> FieldScore {
        let pred_value = pred.cloned();
        if (self.excluded)(&at) {
            return FieldScore {
                field_path: at,
                em: None,
                anls: None,
                gt_value: gt.clone(),
                pred_value,
                status: FieldStatus::Excluded,
            };
        }
        let pred_scalar = pred.filter(|p| !p.is_object() && !p.is_array());
        let g = normalize_value(Some(gt), self.opts);
        let p = match pred {
            Some(v) if pred_scalar.is_none() => Normalized::Text(v.to_string()),
            other => normalize_value(other, self.opts),
        };
        let em = u8::from(g == p);
        let anls = if em == 1 { 1.0 } else { anls::anls_normalized(&g, &p, self.opts.tau) };
        let status = if em == 1 {
            FieldStatus::Matched
        } else if p.is_empty() {
            FieldStatus::Missing
        } else {
            FieldStatus::Mismatched
        };
        FieldScore { field_path: at, em: Some(em), anls: Some(anls), gt_value: gt.clone(), pred_value, status }
    }
}

fn pair_weight(gt: &Value, pred: &Value, opts: &ScoreOptions) -> i64 {
    let none = |_: &FieldPath| false;
    let scorer = Scorer { opts, excluded: &none };
    let mut fields = Vec::new();
    let mut surplus = 0;
    scorer.score(gt, Some(pred), FieldPath::root(), &mut fields, &mut surplus);
    let em: u32 = fields.iter().filter_map(|f| f.em).map(u32::from).sum();
    let anls: f64 = fields.iter().filter_map(|f| f.anls).sum();
    (em as f64 * EM_SCALE + (anls * ANLS_SCALE).round()) as i64
}

/// Align predicted elements to ground-truth elements, maximising exact
/// leaf overlap first and ANLS second.
pub fn match_arrays(gt: &[Value], pred: &[Value], opts: &ScoreOptions) -> ArrayAssignment {
    if gt.is_empty() || pred.is_empty() {
        return ArrayAssignment { pairs: vec![None; gt.len()], surplus: pred.len() };
    }
    let mut order: Vec<usize> = (0..pred.len()).collect();
    let keys: Vec<String> = pred.iter().map(|p| p.to_string()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(a.cmp(&b)));
    let w: Vec<Vec<i64>> = gt.iter().map(|g| order.iter().map(|&j| pair_weight(g, &pred[j], opts)).collect()).collect();
    let a = lexicographic_assignment(&w);
    let pairs: Vec<Option<usize>> = a.into_iter().map(|c| c.map(|c| order[c])).collect();
    let matched = pairs.iter().flatten().count();
    ArrayAssignment { pairs, surplus: pred.len() - matched }
}

/// Score one prediction. `ledger` supplies removed documents and field
/// exclusions.
pub fn score_document(
    doc_id: &str,
    gt: &Value,
    schema: &ExtractionSchema,
    prediction: &str,
    ledger: Option<&ExclusionLedger>,
    opts: &ScoreOptions,
) -> DocumentScore {
    let category = classify_structure(schema);
    let parsed = parse_lenient(prediction);
    let compliance = classify_compliance(parsed.as_ref(), schema);
    let removed = ledger.is_some_and(|l| l.is_removed(doc_id));
    if removed {
        return DocumentScore {
            doc_id: doc_id.to_string(),
            modality: None,
            category,
            compliance,
            fields: Vec::new(),
            em: None,
            anls: None,
            perfect: false,
            surplus: 0,
            removed: true,
        };
    }
    let pred = match (&parsed, compliance) {
        (Some(v), Compliance::SchemaWrapped) => Some(unwrap_envelope(v)),
        (Some(v), _) => Some(v.clone()),
        (None, _) => None,
    };
    let excluded = |p: &FieldPath| ledger.is_some_and(|l| l.is_excluded(doc_id, p));
    let scorer = Scorer { opts, excluded: &excluded };
    let mut fields = Vec::new();
    let mut surplus = 0;
    scorer.score(gt, pred.as_ref(), FieldPath::root(), &mut fields, &mut surplus);
    if pred.is_none() {
        for f in fields.iter_mut().filter(|f| f.is_scored()) {
            f.em = Some(0);
            f.anls = Some(0.0);
            f.status = FieldStatus::Missing;
        }
    }
    let scored: Vec<&FieldScore> = fields.iter().filter(|f| f.is_scored()).collect();
    let n = scored.len();
    let (em, anls) = if n == 0 {
        (None, None)
    } else {
        let em_sum: f64 = scored.iter().filter_map(|f| f.em).map(f64::from).sum();
        let anls_sum: f64 = scored.iter().filter_map(|f| f.anls).sum();
        (Some(em_sum / n as f64), Some(anls_sum / n as f64))
    };
    let perfect = n > 0 && scored.iter().all(|f| f.em == Some(1));
    DocumentScore {
        doc_id: doc_id.to_string(),
        modality: None,
        category,
        compliance,
        fields,
        em,
        anls,
        perfect,
        surplus,
        removed: false,
    }
}
