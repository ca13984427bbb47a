//! The restricted JSON-Schema dialect used for extraction targets.
//!
//! Supported node kinds are objects with `properties`, arrays with `items`,
//! and `string` / `number` leaves (plus `boolean`, which is only recognised
//! so that it can be pruned). Reusable definitions live under `$defs` and
//! are referenced as `#/$defs/Name`. Leaves may carry a `description`, an
//! `enum` choice list and a `max_visual_chars` width budget.

use std::collections::HashSet;

use indexmap::IndexMap;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::path::FieldPath;

/// Deepest allowed nesting of container nodes, counting the root object.
pub const MAX_DEPTH: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("schema root must be an object node")]
    RootNotObject,
    #[error("unresolved reference {0}")]
    UnresolvedRef(String),
    #[error("unsupported reference {0:?}; only #/$defs/<name> is allowed")]
    UnsupportedRef(String),
    #[error("reference cycle through {0}")]
    Cycle(String),
    #[error("nesting depth {0} exceeds {MAX_DEPTH}")]
    TooDeep(usize),
    #[error("malformed schema at {path}: {message}")]
    Malformed { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LeafType {
    String,
    Number,
    Boolean,
}

impl LeafType {
    pub fn as_str(self) -> &'static str {
        match self {
            LeafType::String => "string",
            LeafType::Number => "number",
            LeafType::Boolean => "boolean",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafNode {
    pub kind: LeafType,
    pub description: Option<String>,
    pub max_visual_chars: Option<u32>,
    pub choices: Option<Vec<String>>,
    pub extra: Map<String, Value>,
}

impl LeafNode {
    pub fn new(kind: LeafType) -> Self {
        Self { kind, description: None, max_visual_chars: None, choices: None, extra: Map::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectNode {
    pub properties: IndexMap<String, SchemaNode>,
    pub description: Option<String>,
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayNode {
    /// `None` when the schema leaves `items` missing or empty.
    pub items: Option<Box<SchemaNode>>,
    pub description: Option<String>,
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefNode {
    pub name: String,
    /// Keywords written next to `$ref` (usually a description).
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemaNode {
    Object(ObjectNode),
    Array(ArrayNode),
    Leaf(LeafNode),
    Ref(RefNode),
}

/// A parsed, reference-checked extraction schema.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionSchema {
    pub root: ObjectNode,
    pub defs: IndexMap<String, SchemaNode>,
}

const TYPE_NAMES: [&str; 7] = ["string", "number", "integer", "boolean", "object", "array", "null"];

/// True for the seven JSON-Schema primitive type names.
pub fn is_schema_type_name(s: &str) -> bool {
    TYPE_NAMES.contains(&s)
}

fn ref_name(r: &str) -> Result<&str, SchemaError> {
    r.strip_prefix("#/$defs/")
        .filter(|n| !n.is_empty() && !n.contains('/'))
        .ok_or_else(|| SchemaError::UnsupportedRef(r.to_string()))
}

fn type_names(v: &Map<String, Value>) -> Vec<String> {
    match v.get("type") {
        Some(Value::String(s)) => vec![s.clone()],
        Some(Value::Array(a)) => a.iter().filter_map(|t| t.as_str().map(str::to_string)).collect(),
        _ => Vec::new(),
    }
}

fn take_description(m: &mut Map<String, Value>) -> Option<String> {
    match m.remove("description") {
        Some(Value::String(s)) => Some(s),
        Some(other) => {
            m.insert("description".into(), other);
            None
        }
        None => None,
    }
}

fn parse_node(v: &Value, at: &str) -> Result<SchemaNode, SchemaError> {
    let Value::Object(map) = v else {
        return Err(SchemaError::Malformed { path: at.into(), message: "node is not an object".into() });
    };
    let mut m = map.clone();
    if let Some(r) = m.remove("$ref") {
        let r = r.as_str().ok_or_else(|| SchemaError::Malformed {
            path: at.into(),
            message: "$ref is not a string".into(),
        })?;
        let name = ref_name(r)?.to_string();
        return Ok(SchemaNode::Ref(RefNode { name, extra: m }));
    }
    let types = type_names(&m);
    let has = |t: &str| types.iter().any(|x| x == t);
    let is_object = has("object") || (types.is_empty() && m.contains_key("properties"));
    let is_array = has("array") || (types.is_empty() && m.contains_key("items"));
    if is_object {
        m.remove("type");
        let description = take_description(&mut m);
        let mut properties = IndexMap::new();
        match m.remove("properties") {
            Some(Value::Object(props)) => {
                for (k, pv) in props {
                    let child = parse_node(&pv, &format!("{at}/{k}"))?;
                    properties.insert(k, child);
                }
            }
            Some(_) => {
                return Err(SchemaError::Malformed { path: at.into(), message: "properties is not an object".into() })
            }
            None => {}
        }
        return Ok(SchemaNode::Object(ObjectNode { properties, description, extra: m }));
    }
    if is_array {
        m.remove("type");
        let description = take_description(&mut m);
        let items = match m.remove("items") {
            Some(Value::Object(o)) if o.is_empty() => None,
            Some(iv @ Value::Object(_)) => Some(Box::new(parse_node(&iv, &format!("{at}[*]"))?)),
            Some(Value::Null) | None => None,
            Some(_) => {
                return Err(SchemaError::Malformed { path: at.into(), message: "items is not an object".into() })
            }
        };
        return Ok(SchemaNode::Array(ArrayNode { items, description, extra: m }));
    }
    let kind = if has("number") || has("integer") {
        LeafType::Number
    } else if has("boolean") {
        LeafType::Boolean
    } else {
        LeafType::String
    };
    m.remove("type");
    let description = take_description(&mut m);
    let max_visual_chars = m.remove("max_visual_chars").and_then(|v| v.as_u64()).map(|n| n as u32);
    let choices = match m.remove("enum") {
        Some(Value::Array(a)) => Some(
            a.into_iter()
                .map(|c| match c {
                    Value::String(s) => s,
                    other => other.to_string(),
                })
                .collect(),
        ),
        Some(other) => {
            m.insert("enum".into(), other);
            None
        }
        None => None,
    };
    Ok(SchemaNode::Leaf(LeafNode { kind, description, max_visual_chars, choices, extra: m }))
}

fn leaf_to_value(l: &LeafNode) -> Value {
    let mut m = Map::new();
    m.insert("type".into(), Value::String(l.kind.as_str().into()));
    if let Some(d) = &l.description {
        m.insert("description".into(), Value::String(d.clone()));
    }
    if let Some(c) = &l.choices {
        m.insert("enum".into(), Value::Array(c.iter().cloned().map(Value::String).collect()));
    }
    if let Some(n) = l.max_visual_chars {
        m.insert("max_visual_chars".into(), Value::from(n));
    }
    m.extend(l.extra.clone());
    Value::Object(m)
}

impl SchemaNode {
    pub fn to_value(&self) -> Value {
        match self {
            SchemaNode::Object(o) => object_to_value(o, None),
            SchemaNode::Array(a) => {
                let mut m = Map::new();
                m.insert("type".into(), Value::String("array".into()));
                if let Some(d) = &a.description {
                    m.insert("description".into(), Value::String(d.clone()));
                }
                m.insert(
                    "items".into(),
                    a.items.as_ref().map(|i| i.to_value()).unwrap_or_else(|| Value::Object(Map::new())),
                );
                m.extend(a.extra.clone());
                Value::Object(m)
            }
            SchemaNode::Leaf(l) => leaf_to_value(l),
            SchemaNode::Ref(r) => {
                let mut m = Map::new();
                m.insert("$ref".into(), Value::String(format!("#/$defs/{}", r.name)));
                m.extend(r.extra.clone());
                Value::Object(m)
            }
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, SchemaNode::Leaf(_))
    }
}

fn object_to_value(o: &ObjectNode, defs: Option<&IndexMap<String, SchemaNode>>) -> Value {
    let mut m = Map::new();
    m.insert("type".into(), Value::String("object".into()));
    if let Some(d) = &o.description {
        m.insert("description".into(), Value::String(d.clone()));
    }
    if let Some(defs) = defs.filter(|d| !d.is_empty()) {
        let dm: Map<String, Value> = defs.iter().map(|(k, v)| (k.clone(), v.to_value())).collect();
        m.insert("$defs".into(), Value::Object(dm));
    }
    let props: Map<String, Value> = o.properties.iter().map(|(k, v)| (k.clone(), v.to_value())).collect();
    m.insert("properties".into(), Value::Object(props));
    m.extend(o.extra.clone());
    Value::Object(m)
}

impl ExtractionSchema {
    /// Parse and check a schema: root is an object, every `$ref` resolves,
    /// there are no reference cycles and nesting stays within [`MAX_DEPTH`].
    pub fn from_value(v: &Value) -> Result<Self, SchemaError> {
        let mut top = v.as_object().cloned().ok_or(SchemaError::RootNotObject)?;
        let defs_value = top.remove("$defs");
        let mut defs = IndexMap::new();
        if let Some(dv) = defs_value {
            let Value::Object(dm) = dv else {
                return Err(SchemaError::Malformed { path: "$defs".into(), message: "$defs is not an object".into() });
            };
            for (k, d) in dm {
                let node = parse_node(&d, &format!("$defs/{k}"))?;
                defs.insert(k, node);
            }
        }
        let root = match parse_node(&Value::Object(top), "")? {
            SchemaNode::Object(o) => o,
            _ => return Err(SchemaError::RootNotObject),
        };
        let schema = Self { root, defs };
        schema.check()?;
        Ok(schema)
    }

    pub fn from_json_str(s: &str) -> Result<Self, SchemaError> {
        let v: Value = serde_json::from_str(s)
            .map_err(|e| SchemaError::Malformed { path: String::new(), message: e.to_string() })?;
        Self::from_value(&v)
    }

    /// JSON form with `type`, `$defs`, `properties` ordering at the root.
    pub fn to_value(&self) -> Value {
        object_to_value(&self.root, Some(&self.defs))
    }

    fn check(&self) -> Result<(), SchemaError> {
        // cycles and dangling refs
        for name in self.defs.keys() {
            let mut stack = Vec::new();
            self.check_def(name, &mut stack)?;
        }
        let mut refs = Vec::new();
        collect_refs(&SchemaNode::Object(self.root.clone()), &mut refs);
        for r in refs {
            if !self.defs.contains_key(&r) {
                return Err(SchemaError::UnresolvedRef(format!("#/$defs/{r}")));
            }
        }
        let depth = self.depth_of(&SchemaNode::Object(self.root.clone()));
        if depth > MAX_DEPTH {
            return Err(SchemaError::TooDeep(depth));
        }
        Ok(())
    }

    fn check_def(&self, name: &str, stack: &mut Vec<String>) -> Result<(), SchemaError> {
        if stack.iter().any(|s| s == name) {
            return Err(SchemaError::Cycle(name.to_string()));
        }
        let node = self.defs.get(name).ok_or_else(|| SchemaError::UnresolvedRef(format!("#/$defs/{name}")))?;
        stack.push(name.to_string());
        let mut refs = Vec::new();
        collect_refs(node, &mut refs);
        for r in refs {
            self.check_def(&r, stack)?;
        }
        stack.pop();
        Ok(())
    }

    fn depth_of(&self, node: &SchemaNode) -> usize {
        match self.resolve(node) {
            SchemaNode::Object(o) => 1 + o.properties.values().map(|c| self.depth_of(c)).max().unwrap_or(0),
            SchemaNode::Array(a) => 1 + a.items.as_deref().map(|c| self.depth_of(c)).unwrap_or(0),
            _ => 0,
        }
    }

    /// Follow `$ref` chains to a concrete node. Only valid on checked schemas.
    pub fn resolve<'a>(&'a self, mut node: &'a SchemaNode) -> &'a SchemaNode {
        let mut hops = 0;
        while let SchemaNode::Ref(r) = node {
            match self.defs.get(&r.name) {
                Some(n) if hops <= self.defs.len() => node = n,
                _ => break,
            }
            hops += 1;
        }
        node
    }

    /// Schema node governing `path` (indices select the array's `items`).
    /// The root path has no node of its own and yields `None`.
    pub fn node_at(&self, path: &FieldPath) -> Option<&SchemaNode> {
        use crate::path::Segment;
        let (first, rest) = path.segments().split_first()?;
        let Segment::Key(k) = first else { return None };
        let mut cur = self.root.properties.get(k)?;
        for seg in rest {
            cur = match (seg, self.resolve(cur)) {
                (Segment::Key(k), SchemaNode::Object(o)) => o.properties.get(k)?,
                (Segment::Index(_) | Segment::AnyIndex, SchemaNode::Array(a)) => a.items.as_deref()?,
                _ => return None,
            };
        }
        Some(self.resolve(cur))
    }

    /// Leaf paths in depth-first schema order, arrays written with `[*]`.
    /// An array whose `items` is missing is reported as a single leaf.
    pub fn leaf_paths(&self) -> Vec<FieldPath> {
        let mut out = Vec::new();
        for (k, child) in &self.root.properties {
            self.collect_leaves(child, FieldPath::root().key(k), &mut out);
        }
        out
    }

    fn collect_leaves(&self, node: &SchemaNode, at: FieldPath, out: &mut Vec<FieldPath>) {
        match self.resolve(node) {
            SchemaNode::Object(o) => {
                for (k, c) in &o.properties {
                    self.collect_leaves(c, at.key(k), out);
                }
            }
            SchemaNode::Array(a) => match a.items.as_deref() {
                Some(items) => self.collect_leaves(items, at.any_index(), out),
                None => out.push(at),
            },
            _ => out.push(at),
        }
    }

    /// Strict validation of `instance` against this schema: types must match,
    /// `enum` membership is enforced, extra object keys are allowed and
    /// missing keys are allowed.
    pub fn validate(&self, instance: &Value) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        self.validate_object(&self.root, instance, &FieldPath::root(), &mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn is_valid(&self, instance: &Value) -> bool {
        self.validate(instance).is_ok()
    }

    fn validate_object(&self, o: &ObjectNode, v: &Value, at: &FieldPath, errors: &mut Vec<String>) {
        let Value::Object(m) = v else {
            errors.push(format!("{at}: expected object"));
            return;
        };
        for (k, child) in &o.properties {
            if let Some(cv) = m.get(k) {
                self.validate_node(child, cv, &at.key(k), errors);
            }
        }
    }

    fn validate_node(&self, node: &SchemaNode, v: &Value, at: &FieldPath, errors: &mut Vec<String>) {
        match self.resolve(node) {
            SchemaNode::Object(o) => self.validate_object(o, v, at, errors),
            SchemaNode::Array(a) => {
                let Value::Array(items) = v else {
                    errors.push(format!("{at}: expected array"));
                    return;
                };
                if let Some(item_schema) = a.items.as_deref() {
                    for (i, iv) in items.iter().enumerate() {
                        self.validate_node(item_schema, iv, &at.index(i), errors);
                    }
                }
            }
            SchemaNode::Leaf(l) => {
                let ok = match l.kind {
                    LeafType::String => v.is_string(),
                    LeafType::Number => v.is_number(),
                    LeafType::Boolean => v.is_boolean(),
                };
                if !ok {
                    errors.push(format!("{at}: expected {}", l.kind.as_str()));
                } else if let (Some(choices), Some(s)) = (&l.choices, v.as_str()) {
                    if !choices.iter().any(|c| c == s) {
                        errors.push(format!("{at}: {s:?} is not one of the allowed choices"));
                    }
                }
            }
            SchemaNode::Ref(r) => errors.push(format!("{at}: unresolved reference {}", r.name)),
        }
    }

    /// Build a schema describing the shape of `instance`: objects, arrays of
    /// the first element's shape, and string/number leaves.
    pub fn infer_from_instance(instance: &Value) -> Result<Self, SchemaError> {
        fn infer(v: &Value) -> SchemaNode {
            match v {
                Value::Object(m) => SchemaNode::Object(ObjectNode {
                    properties: m.iter().map(|(k, c)| (k.clone(), infer(c))).collect(),
                    ..Default::default()
                }),
                Value::Array(a) => SchemaNode::Array(ArrayNode {
                    items: a.first().map(|f| Box::new(infer(f))),
                    description: None,
                    extra: Map::new(),
                }),
                Value::Number(_) => SchemaNode::Leaf(LeafNode::new(LeafType::Number)),
                Value::Bool(_) => SchemaNode::Leaf(LeafNode::new(LeafType::Boolean)),
                _ => SchemaNode::Leaf(LeafNode::new(LeafType::String)),
            }
        }
        match infer(instance) {
            SchemaNode::Object(root) => Ok(Self { root, defs: IndexMap::new() }),
            _ => Err(SchemaError::RootNotObject),
        }
    }
}

fn collect_refs(node: &SchemaNode, out: &mut Vec<String>) {
    match node {
        SchemaNode::Object(o) => o.properties.values().for_each(|c| collect_refs(c, out)),
        SchemaNode::Array(a) => {
            if let Some(i) = a.items.as_deref() {
                collect_refs(i, out)
            }
        }
        SchemaNode::Leaf(_) => {}
        SchemaNode::Ref(r) => out.push(r.name.clone()),
    }
}

/// Replace every `$ref` with a deep copy of its (recursively inlined)
/// definition and drop `$defs`. Keywords written beside a `$ref` are kept
/// when the definition does not already set them.
pub fn inline_defs(schema: &Value) -> Result<Value, SchemaError> {
    let Value::Object(top) = schema else {
        return Err(SchemaError::RootNotObject);
    };
    let defs = match top.get("$defs") {
        Some(Value::Object(d)) => d.clone(),
        Some(_) => {
            return Err(SchemaError::Malformed { path: "$defs".into(), message: "$defs is not an object".into() })
        }
        None => Map::new(),
    };
    let mut body = top.clone();
    body.remove("$defs");
    let mut stack = Vec::new();
    inline_value(&Value::Object(body), &defs, &mut stack)
}

fn inline_value(v: &Value, defs: &Map<String, Value>, stack: &mut Vec<String>) -> Result<Value, SchemaError> {
    match v {
        Value::Object(m) => {
            if let Some(r) = m.get("$ref") {
                let r = r.as_str().ok_or_else(|| SchemaError::Malformed {
                    path: stack.join("/"),
                    message: "$ref is not a string".into(),
                })?;
                let name = ref_name(r)?;
                if stack.iter().any(|s| s == name) {
                    return Err(SchemaError::Cycle(name.to_string()));
                }
                let def = defs.get(name).ok_or_else(|| SchemaError::UnresolvedRef(r.to_string()))?;
                stack.push(name.to_string());
                let mut expanded = inline_value(def, defs, stack)?;
                stack.pop();
                if let Value::Object(em) = &mut expanded {
                    for (k, sv) in m {
                        if k != "$ref" && !em.contains_key(k) {
                            em.insert(k.clone(), inline_value(sv, defs, stack)?);
                        }
                    }
                }
                return Ok(expanded);
            }
            let mut out = Map::new();
            for (k, c) in m {
                out.insert(k.clone(), inline_value(c, defs, stack)?);
            }
            Ok(Value::Object(out))
        }
        Value::Array(a) => Ok(Value::Array(a.iter().map(|c| inline_value(c, defs, stack)).collect::<Result<_, _>>()?)),
        other => Ok(other.clone()),
    }
}

/// Names of definitions reachable from the schema body.
pub(crate) fn reachable_defs(schema: &ExtractionSchema) -> HashSet<String> {
    let mut seen = HashSet::new();
    let mut todo = Vec::new();
    collect_refs(&SchemaNode::Object(schema.root.clone()), &mut todo);
    while let Some(n) = todo.pop() {
        if seen.insert(n.clone()) {
            if let Some(d) = schema.defs.get(&n) {
                collect_refs(d, &mut todo);
            }
        }
    }
    seen
}
