//! Turning a discovery response into a checked schema and a one-to-one
//! field-to-widget mapping.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::doc_model::DocumentModel;
use crate::path::FieldPath;
use crate::schema::{reachable_defs, ExtractionSchema, LeafType, SchemaNode};

use super::discovery::DiscoveryResponse;
use super::seed::{estimate_max_chars, is_placeholder, SeedMap};
use super::GenError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub schema_path: FieldPath,
    pub placeholder: String,
    pub widget_id: String,
}

/// Leaf paths of the ground-truth instance and the widget that fills each.
/// Paths carry concrete array indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldMapping {
    pub entries: Vec<MappingEntry>,
}

impl FieldMapping {
    /// Check the one-to-one invariants against a seed map.
    pub fn check(&self, seed: &SeedMap) -> Result<(), String> {
        let mut widgets = HashSet::new();
        let mut placeholders = HashSet::new();
        for e in &self.entries {
            if !widgets.insert(e.widget_id.as_str()) {
                return Err(format!("widget {} mapped twice", e.widget_id));
            }
            if !placeholders.insert(e.placeholder.as_str()) {
                return Err(format!("placeholder {} mapped twice", e.placeholder));
            }
            if seed.widget_for(&e.placeholder) != Some(e.widget_id.as_str()) {
                return Err(format!("placeholder {} does not belong to widget {}", e.placeholder, e.widget_id));
            }
        }
        Ok(())
    }

    pub fn for_widget(&self, widget_id: &str) -> Option<&MappingEntry> {
        self.entries.iter().find(|e| e.widget_id == widget_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateAssignment {
    pub path: FieldPath,
    pub placeholder: String,
    pub kept_path: FieldPath,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathValue {
    pub path: FieldPath,
    pub value: String,
}

/// Everything reconciliation dropped or changed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReconcileReport {
    pub duplicates: Vec<DuplicateAssignment>,
    pub hallucinations: Vec<PathValue>,
    pub non_placeholders: Vec<PathValue>,
    pub removed_booleans: Vec<FieldPath>,
    pub unknown_keys: Vec<FieldPath>,
    pub pruned: Vec<String>,
    pub unmapped_widgets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconciled {
    pub schema: ExtractionSchema,
    pub mapping: FieldMapping,
    pub report: ReconcileReport,
}

/// Position of a node inside the schema document: the root object or a
/// named definition, followed by property names and `[*]` steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Loc {
    owner: Option<String>,
    inner: Vec<String>,
}

impl Loc {
    fn root() -> Self {
        Self { owner: None, inner: Vec::new() }
    }

    fn def(name: &str) -> Self {
        Self { owner: Some(name.to_string()), inner: Vec::new() }
    }

    fn child(&self, piece: &str) -> Self {
        let mut inner = self.inner.clone();
        inner.push(piece.to_string());
        Self { owner: self.owner.clone(), inner }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(o) = &self.owner {
            write!(f, "$defs/{o}")?;
        }
        for (i, p) in self.inner.iter().enumerate() {
            if p == "[*]" {
                f.write_str(p)?;
            } else {
                if i > 0 || self.owner.is_some() {
                    f.write_str("/")?;
                }
                f.write_str(p)?;
            }
        }
        Ok(())
    }
}

const ITEMS: &str = "[*]";

struct Walker<'a> {
    schema: &'a ExtractionSchema,
    seed: &'a SeedMap,
    first_use: HashMap<String, FieldPath>,
    entries: Vec<MappingEntry>,
    used: HashSet<Loc>,
    leaf_widgets: HashMap<Loc, Vec<String>>,
    report: ReconcileReport,
}

impl Walker<'_> {
    fn walk(&mut self, node: &SchemaNode, loc: Loc, v: &Value, path: FieldPath) -> Result<usize, GenError> {
        match node {
            SchemaNode::Ref(r) => {
                let target = self.schema.defs.get(&r.name).ok_or_else(|| GenError::ShapeMismatch {
                    path: path.to_string(),
                    message: format!("unresolved reference {}", r.name),
                })?;
                self.walk(target, Loc::def(&r.name), v, path)
            }
            SchemaNode::Object(o) => match v {
                Value::Null => Ok(0),
                Value::Object(m) => {
                    let mut n = 0;
                    for (k, child) in &o.properties {
                        if let Some(cv) = m.get(k) {
                            n += self.walk(child, loc.child(k), cv, path.key(k))?;
                        }
                    }
                    for k in m.keys().filter(|k| !o.properties.contains_key(*k)) {
                        self.report.unknown_keys.push(path.key(k));
                    }
                    Ok(n)
                }
                _ => Err(mismatch(&path, "object", v)),
            },
            SchemaNode::Array(a) => match v {
                Value::Null => Ok(0),
                Value::Array(elems) => {
                    let mut next = 0;
                    let mut total = 0;
                    for e in elems {
                        let at = path.index(next);
                        let n = match a.items.as_deref() {
                            Some(items) => self.walk(items, loc.child(ITEMS), e, at)?,
                            None => self.walk_untyped(e, at)?,
                        };
                        if n > 0 {
                            next += 1;
                            total += n;
                        }
                    }
                    if total > 0 && a.items.is_none() {
                        self.used.insert(loc);
                    }
                    Ok(total)
                }
                _ => Err(mismatch(&path, "array", v)),
            },
            SchemaNode::Leaf(l) => {
                if l.kind == LeafType::Boolean {
                    self.report.removed_booleans.push(path);
                    return Ok(0);
                }
                Ok(self.map_leaf(Some(loc), v, path)? as usize)
            }
        }
    }

    fn walk_untyped(&mut self, v: &Value, path: FieldPath) -> Result<usize, GenError> {
        match v {
            Value::Object(m) => {
                let mut n = 0;
                for (k, cv) in m {
                    n += self.walk_untyped(cv, path.key(k))?;
                }
                Ok(n)
            }
            Value::Array(a) => {
                let mut next = 0;
                let mut total = 0;
                for e in a {
                    let n = self.walk_untyped(e, path.index(next))?;
                    if n > 0 {
                        next += 1;
                        total += n;
                    }
                }
                Ok(total)
            }
            _ => Ok(self.map_leaf(None, v, path)? as usize),
        }
    }

    fn map_leaf(&mut self, loc: Option<Loc>, v: &Value, path: FieldPath) -> Result<bool, GenError> {
        let token = match v {
            Value::Null => return Ok(false),
            Value::String(s) => s.trim().to_string(),
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => {
                self.report.non_placeholders.push(PathValue { path, value: b.to_string() });
                return Ok(false);
            }
            Value::Object(_) | Value::Array(_) => return Err(mismatch(&path, "scalar", v)),
        };
        if token.is_empty() {
            return Ok(false);
        }
        if !is_placeholder(&token) {
            self.report.non_placeholders.push(PathValue { path, value: token });
            return Ok(false);
        }
        let Some(widget) = self.seed.widget_for(&token) else {
            self.report.hallucinations.push(PathValue { path, value: token });
            return Ok(false);
        };
        if let Some(kept) = self.first_use.get(&token) {
            self.report.duplicates.push(DuplicateAssignment { path, placeholder: token, kept_path: kept.clone() });
            return Ok(false);
        }
        self.first_use.insert(token.clone(), path.clone());
        if let Some(loc) = loc {
            self.leaf_widgets.entry(loc.clone()).or_default().push(widget.to_string());
            self.used.insert(loc);
        }
        self.entries.push(MappingEntry { schema_path: path, placeholder: token, widget_id: widget.to_string() });
        Ok(true)
    }
}

fn mismatch(path: &FieldPath, expected: &str, got: &Value) -> GenError {
    let kind = match got {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    };
    GenError::ShapeMismatch { path: path.to_string(), message: format!("expected {expected}, found {kind}") }
}

fn node_mut<'a>(schema: &'a mut ExtractionSchema, loc: &Loc) -> Option<&'a mut SchemaNode> {
    let (mut cur, rest): (&mut SchemaNode, &[String]) = match &loc.owner {
        Some(name) => (schema.defs.get_mut(name)?, &loc.inner[..]),
        None => {
            let (first, rest) = loc.inner.split_first()?;
            (schema.root.properties.get_mut(first)?, rest)
        }
    };
    for piece in rest {
        cur = match cur {
            SchemaNode::Object(o) => o.properties.get_mut(piece)?,
            SchemaNode::Array(a) if piece == ITEMS => a.items.as_deref_mut()?,
            _ => return None,
        };
    }
    Some(cur)
}

fn prune(
    node: &mut SchemaNode,
    loc: &Loc,
    used: &HashSet<Loc>,
    alive_defs: &HashMap<String, bool>,
    pruned: &mut Vec<String>,
) -> bool {
    match node {
        SchemaNode::Leaf(_) => used.contains(loc),
        SchemaNode::Ref(r) => alive_defs.get(&r.name).copied().unwrap_or(false),
        SchemaNode::Array(a) => match a.items.as_deref_mut() {
            Some(items) => prune(items, &loc.child(ITEMS), used, alive_defs, pruned),
            None => used.contains(loc),
        },
        SchemaNode::Object(o) => {
            let mut dropped = Vec::new();
            for (k, child) in o.properties.iter_mut() {
                if !prune(child, &loc.child(k), used, alive_defs, pruned) {
                    dropped.push(k.clone());
                }
            }
            for k in dropped {
                o.properties.shift_remove(&k);
                pruned.push(loc.child(&k).to_string());
            }
            !o.properties.is_empty()
        }
    }
}

fn refs_in(node: &SchemaNode, out: &mut Vec<String>) {
    match node {
        SchemaNode::Ref(r) => out.push(r.name.clone()),
        SchemaNode::Object(o) => o.properties.values().for_each(|c| refs_in(c, out)),
        SchemaNode::Array(a) => {
            if let Some(i) = a.items.as_deref() {
                refs_in(i, out);
            }
        }
        SchemaNode::Leaf(_) => {}
    }
}

/// Definitions ordered so that every definition follows the ones it uses.
fn dependency_order(schema: &ExtractionSchema) -> Vec<String> {
    fn visit(name: &str, schema: &ExtractionSchema, seen: &mut HashSet<String>, out: &mut Vec<String>) {
        if !seen.insert(name.to_string()) {
            return;
        }
        if let Some(node) = schema.defs.get(name) {
            let mut deps = Vec::new();
            refs_in(node, &mut deps);
            for d in deps {
                visit(&d, schema, seen, out);
            }
            out.push(name.to_string());
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for name in schema.defs.keys() {
        visit(name, schema, &mut seen, &mut out);
    }
    out
}

pub fn reconcile_mapping(
    resp: &DiscoveryResponse,
    seed: &SeedMap,
    doc: &DocumentModel,
) -> Result<Reconciled, GenError> {
    let parsed = ExtractionSchema::from_value(&resp.schema)?;
    let mut walker = Walker {
        schema: &parsed,
        seed,
        first_use: HashMap::new(),
        entries: Vec::new(),
        used: HashSet::new(),
        leaf_widgets: HashMap::new(),
        report: ReconcileReport::default(),
    };
    match &resp.instance {
        Value::Object(m) => {
            for (k, child) in &parsed.root.properties {
                if let Some(cv) = m.get(k) {
                    walker.walk(child, Loc::root().child(k), cv, FieldPath::root().key(k))?;
                }
            }
            for k in m.keys().filter(|k| !parsed.root.properties.contains_key(*k)) {
                walker.report.unknown_keys.push(FieldPath::root().key(k));
            }
        }
        other => return Err(mismatch(&FieldPath::root(), "object", other)),
    }
    let Walker { entries, used, leaf_widgets, mut report, .. } = walker;
    if entries.is_empty() {
        return Err(GenError::ZeroMappings);
    }

    let mut schema = parsed.clone();
    for (loc, widgets) in &leaf_widgets {
        let ws: Vec<_> = widgets.iter().filter_map(|id| doc.widget(id)).collect();
        if let Some(SchemaNode::Leaf(leaf)) = node_mut(&mut schema, loc) {
            leaf.max_visual_chars = ws.iter().map(|w| estimate_max_chars(w)).min();
            let mut choices: Vec<String> = Vec::new();
            for opt in ws.iter().filter_map(|w| w.choice_options.as_ref()).flatten() {
                if !choices.contains(opt) {
                    choices.push(opt.clone());
                }
            }
            leaf.choices = (!choices.is_empty()).then_some(choices);
        }
    }

    let mut alive = HashMap::new();
    for name in dependency_order(&schema) {
        let loc = Loc::def(&name);
        let mut node = schema.defs[&name].clone();
        let keep = prune(&mut node, &loc, &used, &alive, &mut report.pruned);
        schema.defs.insert(name.clone(), node);
        alive.insert(name, keep);
    }
    let mut root = SchemaNode::Object(std::mem::take(&mut schema.root));
    prune(&mut root, &Loc::root(), &used, &alive, &mut report.pruned);
    let SchemaNode::Object(root) = root else { unreachable!("root stays an object") };
    schema.root = root;
    let reachable = reachable_defs(&schema);
    let dead: Vec<String> = schema.defs.keys().filter(|k| !reachable.contains(*k)).cloned().collect();
    for name in dead {
        schema.defs.shift_remove(&name);
        report.pruned.push(format!("$defs/{name}"));
    }

    let mapped: HashSet<&str> = entries.iter().map(|e| e.widget_id.as_str()).collect();
    report.unmapped_widgets =
        seed.entries.iter().filter(|e| !mapped.contains(e.widget_id.as_str())).map(|e| e.widget_id.clone()).collect();

    Ok(Reconciled { schema, mapping: FieldMapping { entries }, report })
}
