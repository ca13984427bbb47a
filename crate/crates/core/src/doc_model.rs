//! Neutral single-page document representation shared by every pipeline stage.
//!
//! Coordinates are PDF points with the origin at the top-left corner of the
//! page and `y` growing downward. The on-disk form (`.docmodel.json`) is
//! canonical: keys sorted, floats rounded to at most three decimals with no
//! trailing zeros, two-space indentation and a trailing newline.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Kind of a fillable widget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Text,
    Date,
    Numeric,
    Choice,
    /// Accepted by the reader so that validation can report it; boolean
    /// widgets are never part of a benchmark document.
    Checkbox,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FieldKind::Text => "text",
            FieldKind::Date => "date",
            FieldKind::Numeric => "numeric",
            FieldKind::Choice => "choice",
            FieldKind::Checkbox => "checkbox",
        };
        f.write_str(s)
    }
}

/// Axis-aligned rectangle `(x0, y0)`–`(x1, y1)` in page points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [
            canonical_number(self.x0),
            canonical_number(self.y0),
            canonical_number(self.x1),
            canonical_number(self.y1),
        ]
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x0, y0, x1, y1] = <[f64; 4]>::deserialize(d)?;
        Ok(BBox { x0, y0, x1, y1 })
    }
}

/// A fillable form field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Widget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub array_group: Option<String>,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice_options: Option<Vec<String>>,
    pub field_kind: FieldKind,
    pub font_name: String,
    #[serde(serialize_with = "ser_canonical")]
    pub font_size: f64,
    pub id: String,
}

/// A run of rendered text on a single baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextSpan {
    #[serde(serialize_with = "ser_canonical")]
    pub baseline_y: f64,
    #[serde(serialize_with = "ser_canonical")]
    pub height: f64,
    pub text: String,
    #[serde(serialize_with = "ser_canonical")]
    pub width: f64,
    #[serde(serialize_with = "ser_canonical")]
    pub x: f64,
}

impl TextSpan {
    pub fn right(&self) -> f64 {
        self.x + self.width
    }
}

/// One form page: its widgets and its positioned text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentModel {
    pub doc_id: String,
    pub language: String,
    #[serde(serialize_with = "ser_canonical")]
    pub page_height: f64,
    #[serde(serialize_with = "ser_canonical")]
    pub page_width: f64,
    pub spans: Vec<TextSpan>,
    pub widgets: Vec<Widget>,
}

impl DocumentModel {
    pub fn widget(&self, id: &str) -> Option<&Widget> {
        self.widgets.iter().find(|w| w.id == id)
    }
}

/// The four input representations a document is exported to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModalityKind {
    #[serde(rename = "plain")]
    PlainText,
    #[serde(rename = "spatial")]
    SpatialText,
    #[serde(rename = "image")]
    Image,
    #[serde(rename = "spatial+image")]
    SpatialPlusImage,
}

impl ModalityKind {
    pub const ALL: [ModalityKind; 4] = [
        ModalityKind::PlainText,
        ModalityKind::SpatialText,
        ModalityKind::Image,
        ModalityKind::SpatialPlusImage,
    ];

    /// Short symbol used in reports: P, S, V, S+V.
    pub fn symbol(self) -> &'static str {
        match self {
            ModalityKind::PlainText => "P",
            ModalityKind::SpatialText => "S",
            ModalityKind::Image => "V",
            ModalityKind::SpatialPlusImage => "S+V",
        }
    }

    /// Name used on the command line and in prediction records.
    pub fn cli_name(self) -> &'static str {
        match self {
            ModalityKind::PlainText => "plain",
            ModalityKind::SpatialText => "spatial",
            ModalityKind::Image => "image",
            ModalityKind::SpatialPlusImage => "spatial+image",
        }
    }

    pub fn from_cli_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.cli_name() == s)
    }

    pub fn needs_text(self) -> bool {
        !matches!(self, ModalityKind::Image)
    }

    pub fn needs_image(self) -> bool {
        matches!(self, ModalityKind::Image | ModalityKind::SpatialPlusImage)
    }
}

impl fmt::Display for ModalityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

/// Which invariant a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    EmptyDocId,
    NonPositivePage,
    InvertedBBox,
    NonPositiveFontSize,
    DuplicateWidgetId,
    ChoiceOptions,
    CheckboxUnsupported,
    OutsidePage,
    EmptySpanText,
    NegativeSpanWidth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// `document`, `widget <id>` or `span <index>`.
    pub subject: String,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// Check every structural invariant of `doc`. An empty result means the
/// document is valid.
pub fn validate_document(doc: &DocumentModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |subject: String, rule: Rule, message: String| {
        out.push(Violation { subject, rule, message })
    };

    if doc.doc_id.trim().is_empty() {
        push("document".into(), Rule::EmptyDocId, "doc_id is empty".into());
    }
    let page_ok = doc.page_width > 0.0 && doc.page_height > 0.0;
    if !page_ok {
        push(
            "document".into(),
            Rule::NonPositivePage,
            format!("page size {}x{} is not positive", doc.page_width, doc.page_height),
        );
    }
    let inside_x = |x: f64| page_ok && (0.0..=doc.page_width).contains(&x);
    let inside_y = |y: f64| page_ok && (0.0..=doc.page_height).contains(&y);

    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for w in &doc.widgets {
        *seen.entry(w.id.as_str()).or_default() += 1;
    }
    for (id, n) in &seen {
        if *n > 1 {
            push(
                format!("widget {id}"),
                Rule::DuplicateWidgetId,
                format!("widget id {id:?} used {n} times"),
            );
        }
    }

    for w in &doc.widgets {
        let subject = format!("widget {}", w.id);
        let b = &w.bbox;
        if !(b.x0 < b.x1 && b.y0 < b.y1) {
            push(
                subject.clone(),
                Rule::InvertedBBox,
                format!("bbox [{}, {}, {}, {}] is empty or inverted", b.x0, b.y0, b.x1, b.y1),
            );
        }
        if w.font_size.is_nan() || w.font_size <= 0.0 {
            push(subject.clone(), Rule::NonPositiveFontSize, format!("font_size {} is not positive", w.font_size));
        }
        match (w.field_kind, &w.choice_options) {
            (FieldKind::Choice, None) => {
                push(subject.clone(), Rule::ChoiceOptions, "choice widget without choice_options".into())
            }
            (FieldKind::Choice, Some(opts)) if opts.is_empty() => {
                push(subject.clone(), Rule::ChoiceOptions, "choice widget with empty choice_options".into())
            }
            (k, Some(_)) if k != FieldKind::Choice => push(
                subject.clone(),
                Rule::ChoiceOptions,
                format!("{k} widget carries choice_options"),
            ),
            _ => {}
        }
        if w.field_kind == FieldKind::Checkbox {
            push(subject.clone(), Rule::CheckboxUnsupported, "checkbox widgets are not supported".into());
        }
        if page_ok && !(inside_x(b.x0) && inside_x(b.x1) && inside_y(b.y0) && inside_y(b.y1)) {
            push(subject, Rule::OutsidePage, "bbox extends outside the page".into());
        }
    }

    for (i, s) in doc.spans.iter().enumerate() {
        let subject = format!("span {i}");
        if s.text.is_empty() {
            push(subject.clone(), Rule::EmptySpanText, "span text is empty".into());
        }
        if s.width.is_nan() || s.width < 0.0 {
            push(subject.clone(), Rule::NegativeSpanWidth, format!("span width {} is negative", s.width));
        }
        if page_ok && !(inside_x(s.x) && inside_y(s.baseline_y)) {
            push(subject, Rule::OutsidePage, format!("span origin ({}, {}) is outside the page", s.x, s.baseline_y));
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum DocModelError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("invalid document: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Parse a `.docmodel.json` payload and validate it.
pub fn read_document(bytes: &[u8]) -> Result<DocumentModel, DocModelError> {
    let doc: DocumentModel = serde_json::from_slice(bytes).map_err(|e| DocModelError::Parse {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let violations = validate_document(&doc);
    if violations.is_empty() {
        Ok(doc)
    } else {
        Err(DocModelError::Invalid(violations))
    }
}

/// Serialize `doc` to its canonical byte form.
pub fn write_document(doc: &DocumentModel) -> Vec<u8> {
    to_canonical_json(doc)
}

/// Pretty JSON with a trailing newline, the layout shared by every file the
/// toolkit writes.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("in-memory serialization cannot fail");
    out.push(b'\n');
    out
}

/// Round to three decimals and drop a zero fraction.
pub fn canonical_number(v: f64) -> serde_json::Number {
    let r = (v * 1000.0).round() / 1000.0;
    if r.fract() == 0.0 && r.abs() < 1e15 {
        serde_json::Number::from(r as i64)
    } else {
        serde_json::Number::from_f64(r).unwrap_or_else(|| serde_json::Number::from(0))
    }
}

fn ser_canonical<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    canonical_number(*v).serialize(s)
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in bytes.split(|b| *b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(bytes.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}
