//! Output-format compliance labels and envelope unwrapping.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::path::{FieldPath, Segment};
use crate::schema::{is_schema_type_name, ExtractionSchema, SchemaNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compliance {
    Compliant,
    InvalidJson,
    SchemaReproduction,
    SchemaWrapped,
    OtherNoncompliant,
}

impl Compliance {
    pub const ALL: [Compliance; 5] = [
        Compliance::Compliant,
        Compliance::InvalidJson,
        Compliance::SchemaReproduction,
        Compliance::SchemaWrapped,
        Compliance::OtherNoncompliant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Compliance::Compliant => "compliant",
            Compliance::InvalidJson => "invalid_json",
            Compliance::SchemaReproduction => "schema_reproduction",
            Compliance::SchemaWrapped => "schema_wrapped",
            Compliance::OtherNoncompliant => "other_noncompliant",
        }
    }
}

fn is_type_node(v: &Value) -> bool {
    match v {
        Value::Object(m) => match m.get("type") {
            Some(Value::String(t)) => is_schema_type_name(t),
            Some(Value::Array(ts)) => !ts.is_empty() && ts.iter().all(|t| t.as_str().is_some_and(is_schema_type_name)),
            _ => false,
        },
        _ => false,
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Object(_) | Value::Array(_))
}

/// Schema positions checked for echoes: scalar leaves, with every array
/// counted once at the array's own path.
fn echo_positions(schema: &ExtractionSchema) -> Vec<FieldPath> {
    let mut out: Vec<FieldPath> = Vec::new();
    for p in schema.leaf_paths() {
        let cut: Vec<Segment> =
            p.segments().iter().take_while(|s| !matches!(s, Segment::AnyIndex)).cloned().collect();
        let mut fp = FieldPath::root();
        for s in cut {
            if let Segment::Key(k) = s {
                fp = fp.key(&k);
            }
        }
        if !out.contains(&fp) {
            out.push(fp);
        }
    }
    out
}

/// Follow object keys, stepping through an interposed `properties` map
/// where the key itself is missing.
fn lookup_through_properties<'a>(v: &'a Value, path: &FieldPath) -> Option<&'a Value> {
    let mut cur = v;
    for seg in path.segments() {
        let Segment::Key(k) = seg else { return None };
        let m = cur.as_object()?;
        cur = match m.get(k) {
            Some(next) => next,
            None => m.get("properties")?.as_object()?.get(k)?,
        };
    }
    Some(cur)
}

fn leaf_patterns(v: &Value, at: FieldPath, out: &mut Vec<FieldPath>) {
    match v {
        Value::Object(m) => {
            for (k, c) in m {
                leaf_patterns(c, at.key(k), out);
            }
        }
        Value::Array(a) => {
            if a.is_empty() {
                out.push(at.clone());
            }
            for c in a {
                leaf_patterns(c, at.any_index(), out);
            }
        }
        _ => out.push(at),
    }
}

fn has_wrapper(v: &Value) -> bool {
    match v.as_object() {
        Some(m) => {
            matches!(m.get("properties"), Some(Value::Object(_))) && m.get("type").is_some_and(Value::is_string)
        }
        None => false,
    }
}

/// Root `properties` map holding extracted scalars, possibly under further
/// `properties` levels.
fn wrapped_root(m: &Map<String, Value>) -> bool {
    fn has_scalar_values(props: &Value) -> bool {
        props.as_object().is_some_and(|p| {
            p.values().any(|c| match c {
                Value::Object(cm) => cm.get("properties").is_some_and(has_scalar_values),
                Value::Array(_) | Value::Null => false,
                _ => true,
            })
        })
    }
    m.get("properties").is_some_and(has_scalar_values)
}

/// Label a parsed prediction (or `None` when nothing could be parsed).
///
/// Schema reproduction is decided over the schema positions the output
/// actually contains: at least half of them must hold a type node.
pub fn classify_compliance(parsed: Option<&Value>, schema: &ExtractionSchema) -> Compliance {
    let Some(v) = parsed else { return Compliance::InvalidJson };
    let positions = echo_positions(schema);
    let present: Vec<&Value> = positions.iter().filter_map(|p| lookup_through_properties(v, p)).collect();
    let echoed = present.iter().filter(|n| is_type_node(n) && !has_value_key(n)).count();
    if echoed > 0 && echoed * 2 >= present.len() {
        return Compliance::SchemaReproduction;
    }
    if let Value::Object(m) = v {
        if wrapped_root(m) {
            return Compliance::SchemaWrapped;
        }
        let schema_paths = schema.leaf_paths();
        let mut pred_paths = Vec::new();
        leaf_patterns(v, FieldPath::root(), &mut pred_paths);
        let overlap = pred_paths.iter().any(|p| schema_paths.contains(p) || positions.contains(p));
        if overlap && !contains_wrapper(v) {
            return Compliance::Compliant;
        }
    }
    Compliance::OtherNoncompliant
}

fn contains_wrapper(v: &Value) -> bool {
    match v {
        Value::Object(m) => has_wrapper(v) || m.values().any(contains_wrapper),
        Value::Array(a) => a.iter().any(contains_wrapper),
        _ => false,
    }
}

const VALUE_KEYS: [&str; 4] = ["value", "const", "default", "example"];

fn has_value_key(v: &Value) -> bool {
    v.as_object().is_some_and(|m| VALUE_KEYS.iter().any(|k| m.get(*k).is_some_and(is_scalar)))
}

fn unwrap_once(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            if m.get("type").is_some_and(Value::is_string) {
                if let Some(props @ Value::Object(_)) = m.get("properties") {
                    return unwrap_once(props);
                }
                if m.get("type").and_then(Value::as_str) == Some("array") {
                    if let Some(items @ Value::Array(_)) = m.get("items") {
                        return unwrap_once(items);
                    }
                }
                if let Some(scalar) = VALUE_KEYS.iter().find_map(|k| m.get(*k).filter(|x| is_scalar(x))) {
                    return scalar.clone();
                }
            }
            Value::Object(m.iter().map(|(k, c)| (k.clone(), unwrap_once(c))).collect())
        }
        Value::Array(a) => Value::Array(a.iter().map(unwrap_once).collect()),
        other => other.clone(),
    }
}

/// Strip schema metadata wrapped around extracted values. Applied until
/// nothing changes, so the result is a fixed point.
pub fn unwrap_envelope(v: &Value) -> Value {
    let mut cur = v.clone();
    loop {
        let next = unwrap_once(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// Paths of schema arrays that have no items definition.
pub(crate) fn untyped_arrays(schema: &ExtractionSchema) -> Vec<FieldPath> {
    fn walk(schema: &ExtractionSchema, node: &SchemaNode, at: FieldPath, depth: usize, out: &mut Vec<FieldPath>) {
        if depth > 64 {
            return;
        }
        match schema.resolve(node) {
            SchemaNode::Object(o) => {
                for (k, c) in &o.properties {
                    walk(schema, c, at.key(k), depth + 1, out);
                }
            }
            SchemaNode::Array(a) => match a.items.as_deref() {
                Some(items) => walk(schema, items, at.any_index(), depth + 1, out),
                None => out.push(at),
            },
            _ => {}
        }
    }
    let mut out = Vec::new();
    for (k, c) in &schema.root.properties {
        walk(schema, c, FieldPath::root().key(k), 1, &mut out);
    }
    out
}
