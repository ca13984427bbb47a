pub mod bench;
pub mod client;
pub mod doc_model;
pub mod export;
pub mod genpipe;
pub mod json_util;
pub mod path;
pub mod qa;
pub mod schema;
pub mod scoring;
