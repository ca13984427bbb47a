//! Deterministic placeholder seeding.

use std::sync::OnceLock;

use chrono::{Duration, NaiveDate};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::doc_model::{DocumentModel, FieldKind, Widget};

use super::GenError;

/// First value of the date placeholder series.
pub const DATE_BASE: (i32, u32, u32) = (2099, 1, 1);
/// First value of the numeric placeholder series.
pub const NUMERIC_BASE: u64 = 900_001;

const MAX_DATE_PLACEHOLDERS: usize = 365;
const MAX_NUMERIC_PLACEHOLDERS: usize = 9_999;

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"TXT_\d{3,}|2099-\d{2}-\d{2}|90\d{4}").expect("static regex"))
}

fn exact_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:TXT_\d{3,}|2099-\d{2}-\d{2}|90\d{4})$").expect("static regex"))
}

/// True when `s` is, in its entirety, a placeholder token.
pub fn is_placeholder(s: &str) -> bool {
    exact_re().is_match(s)
}

/// True when `s` contains anything that looks like a placeholder.
pub fn contains_placeholder(s: &str) -> bool {
    placeholder_re().is_match(s)
}

/// Every placeholder-shaped substring of `text`, in order.
pub fn find_placeholders(text: &str) -> Vec<&str> {
    placeholder_re().find_iter(text).map(|m| m.as_str()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub widget_id: String,
    pub placeholder: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeedMap {
    pub entries: Vec<SeedEntry>,
}

impl SeedMap {
    pub fn widget_for(&self, placeholder: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.placeholder == placeholder).map(|e| e.widget_id.as_str())
    }

    pub fn placeholder_for(&self, widget_id: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.widget_id == widget_id).map(|e| e.placeholder.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// (widget_id, fill text) pairs for rendering the seeded document.
    pub fn fills(&self) -> Vec<(String, String)> {
        self.entries.iter().map(|e| (e.widget_id.clone(), e.placeholder.clone())).collect()
    }
}

/// Widgets in reading order: rows top to bottom, then left to right.
/// Two widgets share a row when their top edges differ by less than half
/// the height of the row's first widget.
pub fn reading_order(widgets: &[Widget]) -> Vec<&Widget> {
    let mut sorted: Vec<&Widget> = widgets.iter().collect();
    sorted.sort_by(|a, b| a.bbox.y0.total_cmp(&b.bbox.y0).then(a.bbox.x0.total_cmp(&b.bbox.x0)));
    let mut rows: Vec<Vec<&Widget>> = Vec::new();
    for w in sorted {
        match rows.last_mut() {
            Some(row) if (w.bbox.y0 - row[0].bbox.y0).abs() < 0.5 * row[0].bbox.height().max(1e-6) => row.push(w),
            _ => rows.push(vec![w]),
        }
    }
    rows.into_iter()
        .flat_map(|mut row| {
            row.sort_by(|a, b| a.bbox.x0.total_cmp(&b.bbox.x0).then_with(|| a.id.cmp(&b.id)));
            row
        })
        .collect()
}

pub fn seed_fill(doc: &DocumentModel) -> Result<SeedMap, GenError> {
    let base = NaiveDate::from_ymd_opt(DATE_BASE.0, DATE_BASE.1, DATE_BASE.2).expect("valid base date");
    let (mut text, mut date, mut num) = (0usize, 0usize, 0usize);
    let mut entries = Vec::with_capacity(doc.widgets.len());
    for w in reading_order(&doc.widgets) {
        let placeholder = match w.field_kind {
            FieldKind::Text | FieldKind::Choice => {
                text += 1;
                format!("TXT_{text:03}")
            }
            FieldKind::Date => {
                if date == MAX_DATE_PLACEHOLDERS {
                    return Err(GenError::TooManyWidgets { kind: w.field_kind, limit: MAX_DATE_PLACEHOLDERS });
                }
                let d = base + Duration::days(date as i64);
                date += 1;
                d.format("%Y-%m-%d").to_string()
            }
            FieldKind::Numeric => {
                if num == MAX_NUMERIC_PLACEHOLDERS {
                    return Err(GenError::TooManyWidgets { kind: w.field_kind, limit: MAX_NUMERIC_PLACEHOLDERS });
                }
                let n = NUMERIC_BASE + num as u64;
                num += 1;
                n.to_string()
            }
            FieldKind::Checkbox => {
                return Err(GenError::UnsupportedFieldKind { widget_id: w.id.clone(), kind: w.field_kind })
            }
        };
        entries.push(SeedEntry { widget_id: w.id.clone(), placeholder });
    }
    Ok(SeedMap { entries })
}

/// Largest number of characters that fit inside the widget at its font size.
pub fn estimate_max_chars(w: &Widget) -> u32 {
    let advance = 0.6 * w.font_size;
    if advance <= 0.0 {
        return 1;
    }
    ((w.bbox.width() / advance + 1e-9).floor() as u32).max(1)
}
