//! Text modalities and the per-document modality manifest.
//!
//! Both serializations start from the same line clustering: spans share a
//! line when their baselines differ by at most half the median span height.
//!
//! * Plain text imitates a content-order text dump. Spans that sit on
//!   consecutive lines with overlapping horizontal extent form a block, and
//!   blocks are emitted one after another, so a table column comes out as a
//!   vertical run of cells. Single-span blocks that share a line are joined
//!   with a space.
//! * Spatial text lays every line onto a monospace grid whose cell width is
//!   the median glyph advance of the document. Overlapping spans are pushed
//!   right so that no text is lost and tokens never fuse.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::doc_model::{to_canonical_json, DocumentModel, TextSpan};
use crate::schema::{ExtractionSchema, SchemaError, SchemaNode};

/// Cell width used when a document has no measurable spans.
pub const FALLBACK_CELL_WIDTH: f64 = 6.0;
/// Span height assumed when a document has no measurable spans.
pub const FALLBACK_SPAN_HEIGHT: f64 = 6.0;

pub const IMAGE_DPI: u32 = 200;
pub const LOW_IMAGE_DPI: u32 = 50;

fn median(mut v: Vec<f64>) -> Option<f64> {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

fn median_height(spans: &[TextSpan]) -> f64 {
    median(spans.iter().map(|s| s.height).filter(|h| *h > 0.0).collect()).unwrap_or(FALLBACK_SPAN_HEIGHT)
}

/// Median of `width / character count` over all spans, or
/// [`FALLBACK_CELL_WIDTH`].
pub fn cell_width(doc: &DocumentModel) -> f64 {
    median(
        doc.spans
            .iter()
            .filter_map(|s| {
                let n = s.text.chars().count();
                (n > 0 && s.width > 0.0).then(|| s.width / n as f64)
            })
            .collect(),
    )
    .filter(|w| *w > 0.0)
    .unwrap_or(FALLBACK_CELL_WIDTH)
}

/// Group spans into lines, top to bottom; each line is sorted by `x`.
pub fn cluster_lines(spans: &[TextSpan]) -> Vec<Vec<&TextSpan>> {
    let tolerance = 0.5 * median_height(spans);
    let mut order: Vec<&TextSpan> = spans.iter().collect();
    order.sort_by(|a, b| a.baseline_y.total_cmp(&b.baseline_y).then(a.x.total_cmp(&b.x)));

    let mut lines: Vec<(f64, Vec<&TextSpan>)> = Vec::new();
    for s in order {
        match lines.last_mut() {
            Some((anchor, line)) if (s.baseline_y - *anchor).abs() <= tolerance => line.push(s),
            _ => lines.push((s.baseline_y, vec![s])),
        }
    }
    lines
        .into_iter()
        .map(|(_, mut l)| {
            l.sort_by(|a, b| a.x.total_cmp(&b.x));
            l
        })
        .collect()
}

fn overlaps(a: &TextSpan, b: &TextSpan) -> bool {
    let (a0, a1) = (a.x, a.x + a.width.max(1.0));
    let (b0, b1) = (b.x, b.x + b.width.max(1.0));
    a0 < b1 && b0 < a1
}

/// Reading-order text without alignment padding.
pub fn export_plain_text(doc: &DocumentModel) -> String {
    let lines = cluster_lines(&doc.spans);
    let max_gap = 2.0 * median_height(&doc.spans);

    struct Block<'a> {
        first_line: usize,
        last_line: usize,
        spans: Vec<&'a TextSpan>,
    }
    let mut blocks: Vec<Block> = Vec::new();
    for (li, line) in lines.iter().enumerate() {
        let mut claimed = vec![false; blocks.len()];
        for &s in line {
            let hit = blocks.iter().enumerate().position(|(bi, b)| {
                let last = b.spans.last().expect("blocks are never empty");
                !claimed[bi]
                    && b.last_line + 1 == li
                    && s.baseline_y - last.baseline_y <= max_gap
                    && overlaps(last, s)
            });
            match hit {
                Some(bi) => {
                    claimed[bi] = true;
                    blocks[bi].spans.push(s);
                    blocks[bi].last_line = li;
                }
                None => {
                    blocks.push(Block { first_line: li, last_line: li, spans: vec![s] });
                    claimed.push(true);
                }
            }
        }
    }
    blocks.sort_by(|a, b| a.first_line.cmp(&b.first_line).then(a.spans[0].x.total_cmp(&b.spans[0].x)));

    let mut out = String::new();
    let mut prev: Option<&Block> = None;
    for b in &blocks {
        if let Some(p) = prev {
            let same_line = p.spans.len() == 1 && b.spans.len() == 1 && p.first_line == b.first_line;
            out.push(if same_line { ' ' } else { '\n' });
        }
        let text: Vec<&str> = b.spans.iter().map(|s| s.text.as_str()).collect();
        out.push_str(&text.join("\n"));
        prev = Some(b);
    }
    out
}

/// Whitespace-aligned text on a monospace grid.
pub fn export_spatial_text(doc: &DocumentModel) -> String {
    let cw = cell_width(doc);
    let lines = cluster_lines(&doc.spans);
    let mut rows = Vec::with_capacity(lines.len());
    for line in lines {
        let mut row = String::new();
        let mut col = 0usize;
        for (i, s) in line.iter().enumerate() {
            let desired = (s.x / cw).round().max(0.0) as usize;
            let start = if i == 0 { desired } else { desired.max(col + 1) };
            row.extend(std::iter::repeat_n(' ', start - col));
            row.push_str(&s.text);
            col = start + s.text.chars().count();
        }
        rows.push(row.trim_end().to_string());
    }
    rows.join("\n")
}

/// Structural category of an extraction schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StructureCategory {
    Flat,
    Nested,
    Table,
}

impl StructureCategory {
    pub const ALL: [StructureCategory; 3] = [StructureCategory::Flat, StructureCategory::Nested, StructureCategory::Table];

    pub fn as_str(self) -> &'static str {
        match self {
            StructureCategory::Flat => "Flat",
            StructureCategory::Nested => "Nested",
            StructureCategory::Table => "Table",
        }
    }
}

/// Table when any array is present (object or scalar items), Nested when an
/// object sits inside another object, Flat otherwise.
pub fn classify_structure(schema: &ExtractionSchema) -> StructureCategory {
    fn visit(schema: &ExtractionSchema, node: &SchemaNode, has_array: &mut bool, has_nested: &mut bool) {
        match schema.resolve(node) {
            SchemaNode::Array(a) => {
                *has_array = true;
                if let Some(items) = a.items.as_deref() {
                    visit(schema, items, has_array, has_nested);
                }
            }
            SchemaNode::Object(o) => {
                *has_nested = true;
                for c in o.properties.values() {
                    visit(schema, c, has_array, has_nested);
                }
            }
            _ => {}
        }
    }
    let (mut has_array, mut has_nested) = (false, false);
    for child in schema.root.properties.values() {
        visit(schema, child, &mut has_array, &mut has_nested);
    }
    if has_array {
        StructureCategory::Table
    } else if has_nested {
        StructureCategory::Nested
    } else {
        StructureCategory::Flat
    }
}

/// Parse a raw schema and classify it.
pub fn classify_schema_value(v: &serde_json::Value) -> Result<StructureCategory, SchemaError> {
    ExtractionSchema::from_value(v).map(|s| classify_structure(&s))
}

/// Every representation of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityBundle {
    pub doc_id: String,
    pub plain_text: String,
    pub spatial_text: String,
    /// Rendered page images keyed by DPI; filled in by the PDF adapter.
    pub image_paths: BTreeMap<u32, PathBuf>,
}

pub fn export_bundle(doc: &DocumentModel) -> ModalityBundle {
    ModalityBundle {
        doc_id: doc.doc_id.clone(),
        plain_text: export_plain_text(doc),
        spatial_text: export_spatial_text(doc),
        image_paths: BTreeMap::new(),
    }
}

/// `.manifest.json` contents. Paths are relative to the manifest's directory
/// unless absolute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub doc_id: String,
    pub plain_text_path: String,
    pub spatial_text_path: String,
    #[serde(default)]
    pub images: BTreeMap<String, String>,
}

pub fn manifest_path(dir: &Path, doc_id: &str) -> PathBuf {
    dir.join(format!("{doc_id}.manifest.json"))
}

/// Write the text files and manifest for `bundle` into `dir`.
pub fn write_bundle(dir: &Path, bundle: &ModalityBundle) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let plain = format!("{}.plain.txt", bundle.doc_id);
    let spatial = format!("{}.spatial.txt", bundle.doc_id);
    fs::write(dir.join(&plain), &bundle.plain_text)?;
    fs::write(dir.join(&spatial), &bundle.spatial_text)?;
    let manifest = Manifest {
        doc_id: bundle.doc_id.clone(),
        plain_text_path: plain,
        spatial_text_path: spatial,
        images: bundle
            .image_paths
            .iter()
            .map(|(dpi, p)| (dpi.to_string(), p.to_string_lossy().into_owned()))
            .collect(),
    };
    let path = manifest_path(dir, &bundle.doc_id);
    fs::write(&path, to_canonical_json(&manifest))?;
    Ok(path)
}

/// Load a bundle from its manifest.
pub fn read_bundle(manifest_file: &Path) -> io::Result<ModalityBundle> {
    let base = manifest_file.parent().unwrap_or(Path::new("."));
    let manifest: Manifest = serde_json::from_slice(&fs::read(manifest_file)?)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let resolve = |p: &str| {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let mut image_paths = BTreeMap::new();
    for (dpi, p) in &manifest.images {
        let dpi: u32 = dpi
            .parse()
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, format!("bad DPI key {dpi:?}")))?;
        image_paths.insert(dpi, resolve(p));
    }
    Ok(ModalityBundle {
        doc_id: manifest.doc_id.clone(),
        plain_text: fs::read_to_string(resolve(&manifest.plain_text_path))?,
        spatial_text: fs::read_to_string(resolve(&manifest.spatial_text_path))?,
        image_paths,
    })
}
