//! Reverse annotation: seed every widget with a placeholder, let a model
//! name and structure the placeholders, then refill the widgets with
//! synthetic values that become the ground truth.

mod discovery;
mod fill;
mod persona;
mod pipeline;
mod reconcile;
mod reskin;
mod seed;

use thiserror::Error;

use crate::doc_model::FieldKind;
use crate::schema::SchemaError;

pub use discovery::{build_discovery_request, discover, parse_discovery_response, DiscoveryResponse};
pub use fill::{fill_span, render_fills, FILL_ADVANCE_EM};
pub use persona::{
    infer_semantic_category, rng_stream, BuiltinTextGenerator, Constraints, GeneratedValue, Locale, LocaleWeight,
    PersonaConfig, SemanticCategory, TextGenerator, ValueGenerator, MAX_REGENERATIONS,
};
pub use pipeline::{generate_document, Generated};
pub use reconcile::{
    reconcile_mapping, DuplicateAssignment, FieldMapping, MappingEntry, PathValue, ReconcileReport, Reconciled,
};
pub use reskin::{reskin_document, GroundTruthRecord, Reskinned};
pub use seed::{
    contains_placeholder, estimate_max_chars, find_placeholders, is_placeholder, reading_order, seed_fill, SeedEntry,
    SeedMap, DATE_BASE, NUMERIC_BASE,
};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("unsupported field kind {kind} on widget {widget_id}")]
    UnsupportedFieldKind { widget_id: String, kind: FieldKind },
    #[error("too many {kind} widgets; at most {limit} can be seeded")]
    TooManyWidgets { kind: FieldKind, limit: usize },
    #[error("nothing to discover")]
    NothingToDiscover,
    #[error("discovery call failed: {0}")]
    Client(String),
    #[error("unusable discovery response: {0}")]
    BadResponse(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("instance does not match schema at {path}: {message}")]
    ShapeMismatch { path: String, message: String },
    #[error("zero surviving mappings")]
    ZeroMappings,
    #[error("unresolved widget id {0}")]
    UnresolvedWidget(String),
    #[error("empty choices list for {0}")]
    EmptyChoices(String),
    #[error("ground-truth assembly conflict at {0}")]
    AssemblyConflict(String),
}
