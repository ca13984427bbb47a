//! Runs evaluation requests against an OpenAI-compatible endpoint and
//! records one prediction per document.

mod openai;

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use formbench_core::bench::{read_predictions, write_prediction, BenchError, PredictionRecord, RunConfig};
use formbench_core::client::ChatRequest;
use futures::stream::{self, StreamExt};
use thiserror::Error;

pub use openai::{request_body, BlockingClient, OpenAiClient};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] BenchError),
    #[error("HTTP client: {0}")]
    Http(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One document's prepared request.
#[derive(Debug, Clone)]
pub struct RunItem {
    pub doc_id: String,
    pub request: ChatRequest,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub requested: usize,
    pub skipped: usize,
    /// Documents recorded with an empty output after exhausting retries.
    pub failed: Vec<String>,
}

fn existing_ids(out: &Path) -> io::Result<HashSet<String>> {
    if !out.exists() {
        return Ok(HashSet::new());
    }
    let recs = read_predictions(BufReader::new(File::open(out)?))?;
    Ok(recs.into_iter().map(|r| r.doc_id).collect())
}

/// Rewrite the predictions file sorted by document id, keeping the first
/// record of each id.
fn canonicalize(out: &Path) -> io::Result<()> {
    let mut recs = read_predictions(BufReader::new(File::open(out)?))?;
    recs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    recs.dedup_by(|b, a| a.doc_id == b.doc_id);
    let tmp = out.with_extension("jsonl.tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        for r in &recs {
            write_prediction(&mut w, r)?;
        }
        w.flush()?;
    }
    fs::rename(tmp, out)
}

/// Send every item not already present in `out` (when `resume` is set)
/// with at most `config.parallelism` requests in flight. Records are
/// appended as they complete; the file is sorted by id at the end.
pub async fn run_benchmark(
    client: &OpenAiClient,
    config: &RunConfig,
    items: Vec<RunItem>,
    out: &Path,
    resume: bool,
) -> Result<RunSummary, RunnerError> {
    config.validate()?;
    let done = if resume { existing_ids(out)? } else { HashSet::new() };
    let total = items.len();
    let todo: Vec<RunItem> = items.into_iter().filter(|it| !done.contains(&it.doc_id)).collect();
    let mut summary = RunSummary { requested: todo.len(), skipped: total - todo.len(), failed: Vec::new() };

    let file = OpenOptions::new().create(true).append(resume).write(true).truncate(!resume).open(out)?;
    let mut sink = BufWriter::new(file);
    let modality = config.modality.cli_name();

    let mut results = stream::iter(todo)
        .map(|item| async move {
            let outcome = client.complete_with_retries(&item.request, config).await;
            (item.doc_id, outcome)
        })
        .buffer_unordered(config.parallelism);

    while let Some((doc_id, outcome)) = results.next().await {
        let raw_output = match outcome {
            Ok(text) => text,
            Err(e) => {
                eprintln!("{doc_id}: {e}");
                summary.failed.push(doc_id.clone());
                String::new()
            }
        };
        write_prediction(&mut sink, &PredictionRecord { doc_id, modality: modality.to_string(), raw_output })?;
        sink.flush()?;
    }
    drop(sink);
    canonicalize(out)?;
    summary.failed.sort();
    Ok(summary)
}
