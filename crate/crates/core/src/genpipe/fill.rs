//! Rendering of fill text into a document's span list.

use crate::doc_model::{DocumentModel, TextSpan, Widget};

use super::GenError;

/// Horizontal advance per character assumed for fill text, in em.
pub const FILL_ADVANCE_EM: f64 = 0.6;

/// A span placing `text` at the left edge of the widget, on a baseline
/// just above the widget's bottom edge.
pub fn fill_span(w: &Widget, text: &str) -> TextSpan {
    let chars = text.chars().count() as f64;
    TextSpan {
        baseline_y: (w.bbox.y1 - 0.2 * w.font_size).max(w.bbox.y0),
        height: w.font_size,
        text: text.to_string(),
        width: chars * FILL_ADVANCE_EM * w.font_size,
        x: w.bbox.x0,
    }
}

/// Copy of `doc` with one extra span per (widget id, text) pair. Pairs with
/// empty text add nothing.
pub fn render_fills(doc: &DocumentModel, fills: &[(String, String)]) -> Result<DocumentModel, GenError> {
    let mut out = doc.clone();
    for (id, text) in fills {
        let w = doc.widget(id).ok_or_else(|| GenError::UnresolvedWidget(id.clone()))?;
        if !text.is_empty() {
            out.spans.push(fill_span(w, text));
        }
    }
    Ok(out)
}
