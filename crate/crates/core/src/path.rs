//! Field paths into nested instances.
//!
//! Object keys are joined with `/`; array positions are written as `[i]`
//! after the array's key, so the third row's agency in a table reads
//! `alj_experience[2]/agency` and a scalar list element reads `tags[0]`.
//! Patterns may use `[*]` to stand for any index.

use std::fmt;

use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Segment {
    Key(String),
    Index(usize),
    AnyIndex,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FieldPath(Vec<Segment>);

impl FieldPath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn parse(s: &str) -> Self {
        let mut segs = Vec::new();
        for part in s.split('/').filter(|p| !p.is_empty()) {
            let (key, mut rest) = match part.find('[') {
                Some(i) => (&part[..i], &part[i..]),
                None => (part, ""),
            };
            if !key.is_empty() {
                segs.push(Segment::Key(key.to_string()));
            }
            while let Some(stripped) = rest.strip_prefix('[') {
                let Some(end) = stripped.find(']') else { break };
                let idx = &stripped[..end];
                segs.push(if idx == "*" {
                    Segment::AnyIndex
                } else {
                    match idx.parse() {
                        Ok(i) => Segment::Index(i),
                        Err(_) => Segment::Key(idx.to_string()),
                    }
                });
                rest = &stripped[end + 1..];
            }
        }
        Self(segs)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn key(&self, k: &str) -> Self {
        let mut v = self.0.clone();
        v.push(Segment::Key(k.to_string()));
        Self(v)
    }

    pub fn index(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(Segment::Index(i));
        Self(v)
    }

    pub fn any_index(&self) -> Self {
        let mut v = self.0.clone();
        v.push(Segment::AnyIndex);
        Self(v)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// The last object key on the path, used as the field's name.
    pub fn leaf_name(&self) -> Option<&str> {
        self.0.iter().rev().find_map(|s| match s {
            Segment::Key(k) => Some(k.as_str()),
            _ => None,
        })
    }

    /// Replace every concrete index with `[*]`.
    pub fn wildcard(&self) -> Self {
        Self(
            self.0
                .iter()
                .map(|s| match s {
                    Segment::Index(_) => Segment::AnyIndex,
                    other => other.clone(),
                })
                .collect(),
        )
    }

    /// True when `self` (a pattern) equals `path` or is an ancestor of it.
    /// `[*]` in the pattern matches any index.
    pub fn covers(&self, path: &FieldPath) -> bool {
        if self.0.len() > path.0.len() {
            return false;
        }
        self.0.iter().zip(&path.0).all(|(p, s)| match (p, s) {
            (Segment::AnyIndex, Segment::Index(_)) | (Segment::AnyIndex, Segment::AnyIndex) => true,
            (a, b) => a == b,
        })
    }

    pub fn get<'a>(&self, value: &'a Value) -> Option<&'a Value> {
        let mut cur = value;
        for seg in &self.0 {
            cur = match (seg, cur) {
                (Segment::Key(k), Value::Object(m)) => m.get(k)?,
                (Segment::Index(i), Value::Array(a)) => a.get(*i)?,
                _ => return None,
            };
        }
        Some(cur)
    }

    /// Write `leaf` at this path, creating intermediate objects and arrays.
    /// Array gaps are padded with `null`. Fails when an existing value has
    /// the wrong shape or the slot is already occupied.
    pub fn set(&self, target: &mut Value, leaf: Value) -> Result<(), PathConflict> {
        let mut cur = target;
        for (depth, seg) in self.0.iter().enumerate() {
            let last = depth + 1 == self.0.len();
            let next_is_index = matches!(self.0.get(depth + 1), Some(Segment::Index(_)));
            let fresh = || {
                if next_is_index {
                    Value::Array(Vec::new())
                } else {
                    Value::Object(Map::new())
                }
            };
            if cur.is_null() {
                *cur = match seg {
                    Segment::Index(_) => Value::Array(Vec::new()),
                    _ => Value::Object(Map::new()),
                };
            }
            cur = match (seg, cur) {
                (Segment::Key(k), Value::Object(m)) => {
                    if last {
                        if m.contains_key(k) {
                            return Err(PathConflict(self.to_string()));
                        }
                        m.insert(k.clone(), leaf);
                        return Ok(());
                    }
                    m.entry(k.clone()).or_insert_with(fresh)
                }
                (Segment::Index(i), Value::Array(a)) => {
                    while a.len() <= *i {
                        a.push(Value::Null);
                    }
                    if last {
                        if !a[*i].is_null() {
                            return Err(PathConflict(self.to_string()));
                        }
                        a[*i] = leaf;
                        return Ok(());
                    }
                    if a[*i].is_null() {
                        a[*i] = fresh();
                    }
                    &mut a[*i]
                }
                _ => return Err(PathConflict(self.to_string())),
            };
        }
        Err(PathConflict(self.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("conflicting value at path {0}")]
pub struct PathConflict(pub String);

impl fmt::Display for FieldPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for seg in &self.0 {
            match seg {
                Segment::Key(k) => {
                    if !first {
                        f.write_str("/")?;
                    }
                    f.write_str(k)?;
                }
                Segment::Index(i) => write!(f, "[{i}]")?,
                Segment::AnyIndex => f.write_str("[*]")?,
            }
            first = false;
        }
        Ok(())
    }
}

impl From<&str> for FieldPath {
    fn from(s: &str) -> Self {
        FieldPath::parse(s)
    }
}

impl serde::Serialize for FieldPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for FieldPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(FieldPath::parse(&s))
    }
}
