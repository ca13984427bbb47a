use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use formbench_core::bench::{aggregate, build_request, emit_report, read_predictions, ReportOptions, RunConfig};
use formbench_core::doc_model::{read_document, validate_document, write_document, DocumentModel, ModalityKind};
use formbench_core::export::{export_bundle, manifest_path, read_bundle, write_bundle};
use formbench_core::genpipe::{
    discover, parse_discovery_response, reconcile_mapping, render_fills, reskin_document, seed_fill,
    BuiltinTextGenerator, DiscoveryResponse, FieldMapping, GroundTruthRecord, PersonaConfig, ValueGenerator,
};
use formbench_core::qa::{screen_document, write_findings_jsonl, ExclusionLedger};
use formbench_core::schema::{inline_defs, ExtractionSchema};
use formbench_core::scoring::{score_document, DocumentScore, ScoreOptions};
use formbench_runner::{run_benchmark, BlockingClient, OpenAiClient, RunItem};
use serde_json::Value;

use crate::config::FileConfig;
use crate::corpus::{self, GT_SUFFIX, MANIFEST_SUFFIX, SCHEMA_SUFFIX};
use crate::{
    Cli, Command, DiscoverArgs, ExportArgs, InlineArgs, ReportArgs, ReskinArgs, RunArgs, ScoreArgs, ScreenArgs,
    SeedArgs, UsageError,
};

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = FileConfig::load(cli.config.as_deref().map(corpus::require).transpose()?)?;
    match cli.command {
        Command::Seed(a) => seed(a),
        Command::Discover(a) => discover_cmd(a, &config),
        Command::Reskin(a) => reskin(a, &config),
        Command::Export(a) => export(a),
        Command::Screen(a) => screen(a),
        Command::Run(a) => run_cmd(a, &config),
        Command::Score(a) => score(a, &config),
        Command::Report(a) => report(a, &config),
        Command::InlineDefs(a) => inline(a),
    }
}

fn load_document(path: &Path) -> anyhow::Result<DocumentModel> {
    let doc = read_document(&corpus::read_bytes(path)?).with_context(|| format!("reading {}", path.display()))?;
    let violations = validate_document(&doc);
    if let Some(v) = violations.first() {
        bail!("{}: {} invariant violation(s), first: {v}", path.display(), violations.len());
    }
    Ok(doc)
}

fn load_schema(path: &Path) -> anyhow::Result<(Value, ExtractionSchema)> {
    let value: Value = corpus::read_json(path)?;
    let schema = ExtractionSchema::from_value(&value).with_context(|| format!("schema {}", path.display()))?;
    Ok((value, schema))
}

fn load_ledger(path: Option<&Path>) -> anyhow::Result<Option<ExclusionLedger>> {
    let Some(path) = path else { return Ok(None) };
    let ledger = ExclusionLedger::from_json(&corpus::read_bytes(path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    ledger.validate().map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(Some(ledger))
}

fn seed(a: SeedArgs) -> anyhow::Result<()> {
    let doc = load_document(&a.input)?;
    let map = seed_fill(&doc)?;
    match &a.out {
        Some(p) => corpus::write_json(p, &map)?,
        None => corpus::write_pretty(None, &map)?,
    }
    if let Some(p) = &a.seeded_doc {
        let seeded = render_fills(&doc, &map.fills())?;
        corpus::write_bytes(p, &write_document(&seeded))?;
    }
    eprintln!("{}: {} placeholders", doc.doc_id, map.len());
    Ok(())
}

fn discover_cmd(a: DiscoverArgs, config: &FileConfig) -> anyhow::Result<()> {
    let doc = load_document(&a.input)?;
    let seed = seed_fill(&doc)?;
    let response: DiscoveryResponse = match &a.response {
        Some(p) => {
            let text = String::from_utf8(corpus::read_bytes(p)?).with_context(|| format!("{} is not UTF-8", p.display()))?;
            parse_discovery_response(&text)?
        }
        None => {
            let mut run = config.run.clone();
            if let Some(e) = &a.endpoint {
                run.endpoint = e.clone();
            }
            if let Some(m) = &a.model {
                run.model = m.clone();
            }
            if run.model.is_empty() {
                return Err(UsageError("discover needs --response or a model (--model or [run] model)".into()).into());
            }
            if let Some(img) = &a.image {
                corpus::require(img)?;
            }
            let client = BlockingClient::new(&run)?;
            discover(&client, &doc, &seed, a.image.clone())?
        }
    };
    let reconciled = reconcile_mapping(&response, &seed, &doc)?;
    let id = &doc.doc_id;
    corpus::write_pretty(Some(&a.out.join(format!("{id}{SCHEMA_SUFFIX}"))), &reconciled.schema.to_value())?;
    corpus::write_json(&a.out.join(format!("{id}.mapping.json")), &reconciled.mapping)?;
    corpus::write_json(&a.out.join(format!("{id}.reconcile.json")), &reconciled.report)?;
    let r = &reconciled.report;
    eprintln!(
        "{id}: {} mapped, {} duplicates, {} hallucinated, {} non-placeholder, {} booleans removed, {} unmapped widgets",
        reconciled.mapping.entries.len(),
        r.duplicates.len(),
        r.hallucinations.len(),
        r.non_placeholders.len(),
        r.removed_booleans.len(),
        r.unmapped_widgets.len()
    );
    Ok(())
}

fn reskin(a: ReskinArgs, config: &FileConfig) -> anyhow::Result<()> {
    let doc = load_document(&a.input)?;
    let (_, schema) = load_schema(&a.schema)?;
    let mapping: FieldMapping = corpus::read_json(&a.mapping)?;
    let seed_map = seed_fill(&doc)?;
    mapping.check(&seed_map).map_err(|e| anyhow::anyhow!("{}: {e}", a.mapping.display()))?;
    let persona = PersonaConfig::default();
    let generator = ValueGenerator { persona: &persona, text: &BuiltinTextGenerator };
    let seed = a.seed.or(config.seed).unwrap_or(0);
    let out = reskin_document(&doc, &schema, &mapping, seed, &generator)?;
    let id = &doc.doc_id;
    corpus::write_bytes(&a.out.join(format!("{id}.filled.docmodel.json")), &write_document(&out.filled))?;
    corpus::write_json(&a.out.join(format!("{id}{GT_SUFFIX}")), &out.ground_truth)?;
    let fills: BTreeMap<&str, &str> = out.fills.iter().map(|(w, t)| (w.as_str(), t.as_str())).collect();
    corpus::write_json(&a.out.join(format!("{id}.fills.json")), &fills)?;
    eprintln!("{id}: {} fields filled with seed {seed}", out.fills.len());
    Ok(())
}

fn parse_image_arg(s: &str) -> anyhow::Result<(u32, PathBuf)> {
    let (dpi, path) = s.split_once('=').ok_or_else(|| UsageError(format!("--image expects DPI=PATH, got {s:?}")))?;
    let dpi: u32 = dpi.parse().map_err(|_| UsageError(format!("bad DPI in --image {s:?}")))?;
    Ok((dpi, PathBuf::from(path)))
}

fn export(a: ExportArgs) -> anyhow::Result<()> {
    let doc = load_document(&a.input)?;
    let mut bundle = export_bundle(&doc);
    for img in &a.images {
        let (dpi, path) = parse_image_arg(img)?;
        bundle.image_paths.insert(dpi, path);
    }
    let dir = match &a.out {
        Some(d) => d.clone(),
        None => a.input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let manifest = write_bundle(&dir, &bundle).with_context(|| format!("writing bundle to {}", dir.display()))?;
    eprintln!("{}: wrote {}", doc.doc_id, manifest.display());
    Ok(())
}

fn screen(a: ScreenArgs) -> anyhow::Result<()> {
    let opts = ScoreOptions { case_sensitive: !a.case_insensitive, ..ScoreOptions::default() };
    let gts = corpus::list(&a.dir, GT_SUFFIX)?;
    if gts.is_empty() {
        return Err(UsageError(format!("no *{GT_SUFFIX} files in {}", a.dir.display())).into());
    }
    let mut findings = Vec::new();
    for (id, gt_path) in &gts {
        let gt: GroundTruthRecord = corpus::read_json(gt_path)?;
        let (_, schema) = load_schema(&a.dir.join(format!("{id}{SCHEMA_SUFFIX}")))?;
        let manifest = manifest_path(&a.dir, id);
        let bundle = read_bundle(corpus::require(&manifest)?).with_context(|| format!("reading {}", manifest.display()))?;
        findings.extend(screen_document(&gt, &schema, &bundle, &opts));
    }
    let mut ledger = ExclusionLedger::from_findings(&findings);
    if let Some(extra) = load_ledger(a.merge.as_deref())? {
        ledger.merge(&extra);
    }
    let findings_path = a.findings.unwrap_or_else(|| a.dir.join("findings.jsonl"));
    let mut buf = Vec::new();
    write_findings_jsonl(&mut buf, &findings)?;
    corpus::write_bytes(&findings_path, &buf)?;
    let ledger_path = a.ledger.unwrap_or_else(|| a.dir.join("ledger.json"));
    corpus::write_bytes(&ledger_path, &ledger.to_json())?;
    eprintln!(
        "{} documents screened: {} findings, {} removed, {} fields excluded",
        gts.len(),
        findings.len(),
        ledger.removed_docs.len(),
        ledger.excluded_fields.len()
    );
    Ok(())
}

fn run_cmd(a: RunArgs, config: &FileConfig) -> anyhow::Result<()> {
    let mut run: RunConfig = config.run.clone();
    if let Some(e) = a.endpoint {
        run.endpoint = e;
    }
    if let Some(m) = a.model {
        run.model = m;
    }
    if let Some(m) = a.modality {
        run.modality = m;
    }
    if let Some(d) = a.dpi {
        run.dpi = d;
    }
    if let Some(p) = a.parallelism {
        run.parallelism = p;
    }
    run.inline_defs |= a.inline_defs;
    if let Some(p) = &a.prompt_template {
        run.prompt_template = Some(String::from_utf8(corpus::read_bytes(p)?)?);
    }
    if run.model.is_empty() {
        return Err(UsageError("run needs a model (--model or [run] model)".into()).into());
    }
    let ledger = load_ledger(a.ledger.as_deref())?;

    let mut items = Vec::new();
    for (id, manifest) in corpus::list(&a.dir, MANIFEST_SUFFIX)? {
        if ledger.as_ref().is_some_and(|l| l.is_removed(&id)) {
            continue;
        }
        let (schema, _) = load_schema(&a.dir.join(format!("{id}{SCHEMA_SUFFIX}")))?;
        let bundle = read_bundle(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
        let request = build_request(&run, &schema, &bundle)?;
        items.push(RunItem { doc_id: id, request });
    }
    if items.is_empty() {
        return Err(UsageError(format!("no documents to run in {}", a.dir.display())).into());
    }
    let client = OpenAiClient::new(&run)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let summary = runtime.block_on(run_benchmark(&client, &run, items, &a.out, a.resume))?;
    eprintln!(
        "{} requested, {} already present, {} failed",
        summary.requested,
        summary.skipped,
        summary.failed.len()
    );
    Ok(())
}

/// A ground-truth file is either a record with `doc_id` and `values` or the
/// bare instance.
fn gt_values(v: Value, fallback_id: &str) -> (String, Value) {
    if let Value::Object(map) = &v {
        if let (Some(Value::String(id)), Some(values)) = (map.get("doc_id"), map.get("values")) {
            return (id.clone(), values.clone());
        }
    }
    (fallback_id.to_string(), v)
}

fn score(a: ScoreArgs, config: &FileConfig) -> anyhow::Result<()> {
    let opts = ScoreOptions {
        tau: a.tau.or(config.tau).unwrap_or(ScoreOptions::default().tau),
        case_sensitive: !a.case_insensitive,
    };
    if !(0.0..=1.0).contains(&opts.tau) {
        return Err(UsageError(format!("tau must lie in [0, 1], got {}", opts.tau)).into());
    }
    let gt_files = if corpus::require(&a.gt)?.is_dir() {
        if a.schema.is_some() {
            return Err(UsageError("--schema applies to a single ground-truth file".into()).into());
        }
        corpus::list(&a.gt, GT_SUFFIX)?
    } else {
        let id = corpus::gt_doc_id(&a.gt).unwrap_or_default();
        vec![(id, a.gt.clone())]
    };
    let preds = read_predictions(BufReader::new(File::open(corpus::require(&a.pred)?)?))
        .with_context(|| format!("reading {}", a.pred.display()))?;
    let mut by_id: HashMap<&str, (&str, &str)> = HashMap::new();
    for p in &preds {
        by_id.entry(p.doc_id.as_str()).or_insert((p.modality.as_str(), p.raw_output.as_str()));
    }
    let ledger = load_ledger(a.ledger.as_deref())?;

    let mut scores = Vec::new();
    let mut missing = 0;
    for (file_id, path) in &gt_files {
        let (doc_id, values) = gt_values(corpus::read_json(path)?, file_id);
        let schema = match &a.schema {
            Some(p) => load_schema(p)?.1,
            None => {
                let dir = path.parent().unwrap_or(Path::new("."));
                let sibling = dir.join(format!("{file_id}{SCHEMA_SUFFIX}"));
                if sibling.exists() {
                    load_schema(&sibling)?.1
                } else {
                    ExtractionSchema::infer_from_instance(&values)
                        .with_context(|| format!("inferring a schema from {}", path.display()))?
                }
            }
        };
        let (modality, raw) = match by_id.get(doc_id.as_str()) {
            Some(&(m, r)) => (Some(m.to_string()), r),
            None => {
                missing += 1;
                (None, "")
            }
        };
        let mut s = score_document(&doc_id, &values, &schema, raw, ledger.as_ref(), &opts);
        s.modality = modality;
        scores.push(s);
    }

    let mut buf = Vec::new();
    for s in &scores {
        serde_json::to_writer(&mut buf, s)?;
        buf.push(b'\n');
    }
    match &a.out {
        Some(p) => corpus::write_bytes(p, &buf)?,
        None => io::stdout().write_all(&buf)?,
    }
    let scored: Vec<&DocumentScore> = scores.iter().filter(|s| !s.removed && s.em.is_some()).collect();
    let mean = |f: fn(&DocumentScore) -> Option<f64>| {
        if scored.is_empty() {
            f64::NAN
        } else {
            scored.iter().filter_map(|s| f(s)).sum::<f64>() / scored.len() as f64 * 100.0
        }
    };
    eprintln!(
        "{} documents, {} scored, {} without a prediction: EM {:.1}, ANLS {:.1}",
        scores.len(),
        scored.len(),
        missing,
        mean(|s| s.em),
        mean(|s| s.anls)
    );
    Ok(())
}

fn read_scores(path: &Path) -> anyhow::Result<Vec<DocumentScore>> {
    let text = String::from_utf8(corpus::read_bytes(path)?)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

/// Modality labels in the order P, S, V, S+V, then any others by name.
fn label_order(label: &str) -> (usize, String) {
    let rank = ModalityKind::ALL.iter().position(|m| m.cli_name() == label || m.symbol() == label);
    (rank.unwrap_or(ModalityKind::ALL.len()), label.to_string())
}

fn report(a: ReportArgs, config: &FileConfig) -> anyhow::Result<()> {
    let defaults = ReportOptions::default();
    let opts = ReportOptions {
        level: a.level.or(config.level).unwrap_or(defaults.level),
        resamples: a.resamples.or(config.resamples).unwrap_or(defaults.resamples),
        seed: a.seed.or(config.seed).unwrap_or(defaults.seed),
    };
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(UsageError(format!("level must lie in (0, 1), got {}", opts.level)).into());
    }
    let mut groups: BTreeMap<(usize, String), Vec<DocumentScore>> = BTreeMap::new();
    for path in &a.scores {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scores").to_string();
        for s in read_scores(path)? {
            let label = s.modality.clone().unwrap_or_else(|| stem.clone());
            groups.entry(label_order(&label)).or_default().push(s);
        }
    }
    let mut reports = Vec::new();
    for ((_, label), scores) in &groups {
        let display = ModalityKind::from_cli_name(label).map_or(label.as_str(), |m| m.symbol());
        reports.push(aggregate(display, scores, &opts).with_context(|| format!("aggregating {label}"))?);
    }
    if reports.is_empty() {
        bail!("no document scores found");
    }
    let (csv, md) = emit_report(&reports)?;
    corpus::write_bytes(&a.out.join("report.csv"), csv.as_bytes())?;
    corpus::write_bytes(&a.out.join("report.md"), md.as_bytes())?;
    eprintln!("{} input group(s) written to {}", reports.len(), a.out.display());
    Ok(())
}

fn inline(a: InlineArgs) -> anyhow::Result<()> {
    let schema: Value = corpus::read_json(&a.input)?;
    let inlined = inline_defs(&schema).with_context(|| format!("inlining {}", a.input.display()))?;
    corpus::write_pretty(a.out.as_deref(), &inlined)
}
