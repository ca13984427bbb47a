//! Automated ground-truth screening and the exclusion ledger applied at
//! scoring time.

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::export::ModalityBundle;
use crate::genpipe::{contains_placeholder, find_placeholders, GroundTruthRecord};
use crate::path::FieldPath;
use crate::schema::{ExtractionSchema, LeafType, SchemaNode};
use crate::scoring::{all_leaves, normalize_text, number_text, untyped_arrays, ScoreOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    RemoveDocument,
    ExcludeField,
    Warn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    ValueNotFound,
    PlaceholderResidue,
    EmptyGroundTruth,
    TypeMismatch,
    AmbiguousEmptyItems,
    /// A ledger exclusion that matches no ground-truth leaf.
    UnknownExclusionPath,
}

impl FindingKind {
    pub fn severity(self) -> Severity {
        match self {
            FindingKind::ValueNotFound | FindingKind::PlaceholderResidue | FindingKind::EmptyGroundTruth => {
                Severity::RemoveDocument
            }
            FindingKind::TypeMismatch | FindingKind::AmbiguousEmptyItems => Severity::ExcludeField,
            FindingKind::UnknownExclusionPath => Severity::Warn,
        }
    }

    /// Kinds tied to one field rather than the whole document.
    pub fn is_field_level(self) -> bool {
        matches!(
            self,
            FindingKind::ValueNotFound
                | FindingKind::TypeMismatch
                | FindingKind::AmbiguousEmptyItems
                | FindingKind::UnknownExclusionPath
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub doc_id: String,
    pub severity: Severity,
    pub kind: FindingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_path: Option<FieldPath>,
    pub detail: String,
}

impl Finding {
    fn new(doc_id: &str, kind: FindingKind, field_path: Option<FieldPath>, detail: String) -> Self {
        debug_assert_eq!(kind.is_field_level(), field_path.is_some());
        Self { doc_id: doc_id.to_string(), severity: kind.severity(), kind, field_path, detail }
    }
}

fn renderings(v: &Value) -> Vec<String> {
    match v {
        Value::String(s) => vec![s.clone()],
        Value::Number(n) => {
            let canonical = number_text(n);
            let mut out = vec![canonical.clone()];
            if let Some(f) = n.as_f64() {
                let fixed = format!("{f:.2}");
                let grouped = group_thousands(&canonical);
                let grouped_fixed = group_thousands(&fixed);
                for r in [fixed, grouped, grouped_fixed.clone(), format!("${grouped_fixed}"), format!("${}", group_thousands(&canonical))] {
                    if !out.contains(&r) {
                        out.push(r);
                    }
                }
            }
            out
        }
        Value::Bool(b) => vec![b.to_string()],
        _ => Vec::new(),
    }
}

fn group_thousands(s: &str) -> String {
    let (sign, rest) = s.strip_prefix('-').map_or(("", s), |r| ("-", r));
    let (int, frac) = rest.split_once('.').map_or((rest, None), |(i, f)| (i, Some(f)));
    let mut grouped = String::new();
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    match frac {
        Some(f) => format!("{sign}{grouped}.{f}"),
        None => format!("{sign}{grouped}"),
    }
}

fn type_problem(node: &SchemaNode, v: &Value) -> Option<String> {
    let SchemaNode::Leaf(l) = node else {
        return Some("scalar value where the schema expects a container".into());
    };
    let ok = match l.kind {
        LeafType::String => v.is_string(),
        LeafType::Number => v.is_number(),
        LeafType::Boolean => v.is_boolean(),
    };
    if !ok {
        return Some(format!("value {v} does not have schema type {}", l.kind.as_str()));
    }
    if let (Some(choices), Some(s)) = (&l.choices, v.as_str()) {
        if !choices.iter().any(|c| c == s) {
            return Some(format!("value {s:?} is not one of the listed choices"));
        }
    }
    None
}

/// Screen one reskinned document against its exported text modalities.
pub fn screen_document(
    gt: &GroundTruthRecord,
    schema: &ExtractionSchema,
    bundle: &ModalityBundle,
    opts: &ScoreOptions,
) -> Vec<Finding> {
    let doc = gt.doc_id.as_str();
    let mut out = Vec::new();
    let leaves = all_leaves(&gt.values);
    let present: Vec<&(FieldPath, Value)> =
        leaves.iter().filter(|(_, v)| !v.is_null() && v.as_str().is_none_or(|s| !s.trim().is_empty())).collect();
    if present.is_empty() {
        out.push(Finding::new(doc, FindingKind::EmptyGroundTruth, None, "ground truth has no values".into()));
    }

    let mut residue: Vec<String> = Vec::new();
    for (path, v) in &leaves {
        if let Some(s) = v.as_str() {
            for p in find_placeholders(s) {
                residue.push(format!("{p} in ground truth at {path}"));
            }
        }
    }
    for (name, text) in [("plain text", &bundle.plain_text), ("spatial text", &bundle.spatial_text)] {
        for p in find_placeholders(text) {
            residue.push(format!("{p} in {name}"));
        }
    }
    if !residue.is_empty() {
        out.push(Finding::new(doc, FindingKind::PlaceholderResidue, None, residue.join("; ")));
    }

    let plain = normalize_text(&bundle.plain_text, opts);
    let spatial = normalize_text(&bundle.spatial_text, opts);
    for (path, v) in present {
        if let Some(node) = schema.node_at(path) {
            if let Some(problem) = type_problem(node, v) {
                out.push(Finding::new(doc, FindingKind::TypeMismatch, Some(path.clone()), problem));
            }
        }
        if v.as_str().is_some_and(contains_placeholder) {
            continue;
        }
        let needles: Vec<String> = renderings(v).iter().map(|r| normalize_text(r, opts)).collect();
        let found = needles.iter().any(|n| !n.is_empty() && (plain.contains(n.as_str()) || spatial.contains(n.as_str())));
        if !found {
            out.push(Finding::new(
                doc,
                FindingKind::ValueNotFound,
                Some(path.clone()),
                format!("value {v} not found in exported text"),
            ));
        }
    }

    for path in untyped_arrays(schema) {
        out.push(Finding::new(
            doc,
            FindingKind::AmbiguousEmptyItems,
            Some(path),
            "array has no items definition".into(),
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExcludedField {
    pub doc_id: String,
    pub field_path: FieldPath,
    pub reason: String,
}

/// Documents removed from the benchmark and fields excluded from scoring.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExclusionLedger {
    #[serde(default)]
    pub removed_docs: BTreeSet<String>,
    #[serde(default)]
    pub excluded_fields: Vec<ExcludedField>,
}

impl ExclusionLedger {
    pub fn from_findings<'a>(findings: impl IntoIterator<Item = &'a Finding>) -> Self {
        let mut ledger = Self::default();
        for f in findings {
            match (f.severity, &f.field_path) {
                (Severity::RemoveDocument, _) => {
                    ledger.removed_docs.insert(f.doc_id.clone());
                }
                (Severity::ExcludeField, Some(p)) => ledger.excluded_fields.push(ExcludedField {
                    doc_id: f.doc_id.clone(),
                    field_path: p.clone(),
                    reason: serde_json::to_value(f.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
                }),
                _ => {}
            }
        }
        ledger.tidy();
        ledger
    }

    /// Union with another ledger, keeping the invariants.
    pub fn merge(&mut self, other: &ExclusionLedger) {
        self.removed_docs.extend(other.removed_docs.iter().cloned());
        self.excluded_fields.extend(other.excluded_fields.iter().cloned());
        self.tidy();
    }

    fn tidy(&mut self) {
        let removed = &self.removed_docs;
        self.excluded_fields.retain(|e| !removed.contains(&e.doc_id));
        let mut seen = BTreeSet::new();
        self.excluded_fields.retain(|e| seen.insert((e.doc_id.clone(), e.field_path.clone())));
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for e in &self.excluded_fields {
            if self.removed_docs.contains(&e.doc_id) {
                return Err(format!("field {} excluded in removed document {}", e.field_path, e.doc_id));
            }
            if !seen.insert((&e.doc_id, &e.field_path)) {
                return Err(format!("duplicate exclusion {} in {}", e.field_path, e.doc_id));
            }
        }
        Ok(())
    }

    pub fn is_removed(&self, doc_id: &str) -> bool {
        self.removed_docs.contains(doc_id)
    }

    /// True when an exclusion for `doc_id` equals or contains `path`.
    pub fn is_excluded(&self, doc_id: &str, path: &FieldPath) -> bool {
        self.excluded_fields.iter().any(|e| e.doc_id == doc_id && e.field_path.covers(path))
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    pub fn to_json(&self) -> Vec<u8> {
        crate::doc_model::to_canonical_json(self)
    }
}

/// Ground-truth leaves that remain scorable under a ledger.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoringView {
    pub doc_id: String,
    pub removed: bool,
    pub leaves: Vec<(FieldPath, Value)>,
    pub excluded: Vec<FieldPath>,
    pub warnings: Vec<Finding>,
}

pub fn apply_ledger(gt: &GroundTruthRecord, ledger: &ExclusionLedger) -> ScoringView {
    let doc = gt.doc_id.as_str();
    if ledger.is_removed(doc) {
        return ScoringView { doc_id: doc.to_string(), removed: true, ..Default::default() };
    }
    let mut view = ScoringView { doc_id: doc.to_string(), ..Default::default() };
    let leaves = all_leaves(&gt.values);
    for (path, v) in leaves.iter() {
        if ledger.is_excluded(doc, path) {
            view.excluded.push(path.clone());
        } else {
            view.leaves.push((path.clone(), v.clone()));
        }
    }
    for e in ledger.excluded_fields.iter().filter(|e| e.doc_id == doc) {
        if !leaves.iter().any(|(p, _)| e.field_path.covers(p)) {
            view.warnings.push(Finding::new(
                doc,
                FindingKind::UnknownExclusionPath,
                Some(e.field_path.clone()),
                format!("excluded path {} matches no ground-truth field", e.field_path),
            ));
        }
    }
    view
}

pub fn write_findings_jsonl<W: Write>(mut w: W, findings: &[Finding]) -> io::Result<()> {
    for f in findings {
        serde_json::to_writer(&mut w, f)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_findings_jsonl<R: BufRead>(r: R) -> io::Result<Vec<Finding>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(io::Error::other)?);
    }
    Ok(out)
}
