use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::export::StructureCategory;
use crate::scoring::{Compliance, DocumentScore};

use super::stats::{bootstrap_ci, empty_field_rate, quartile_decay, QuartileDecay};
use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportOptions {
    pub level: f64,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { level: 0.95, resamples: 10_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub documents: usize,
    pub em: Interval,
    pub anls: Interval,
    pub perfect_rate: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub label: String,
    /// Documents with at least one scorable field.
    pub documents: usize,
    pub removed: usize,
    pub overall: CategorySummary,
    pub per_category: BTreeMap<StructureCategory, CategorySummary>,
    pub compliance: BTreeMap<Compliance, usize>,
    pub quartiles: QuartileDecay,
    pub empty_field_rate: Option<f64>,
    pub surplus: usize,
}

fn summarize(docs: &[&DocumentScore], opts: &ReportOptions) -> Result<CategorySummary, BenchError> {
    let em: Vec<f64> = docs.iter().filter_map(|d| d.em).collect();
    let anls: Vec<f64> = docs.iter().filter_map(|d| d.anls).collect();
    let perfect: Vec<f64> = docs.iter().map(|d| f64::from(u8::from(d.perfect))).collect();
    let interval = |v: &[f64]| -> Result<Interval, BenchError> {
        let point = v.iter().sum::<f64>() / v.len() as f64;
        let (lo, hi) = bootstrap_ci(v, opts.level, opts.resamples, opts.seed)?;
        Ok(Interval { point, lo, hi })
    };
    Ok(CategorySummary { documents: docs.len(), em: interval(&em)?, anls: interval(&anls)?, perfect_rate: interval(&perfect)? })
}

/// Aggregate per-document scores. Documents are ordered by id first so
/// the result does not depend on input order.
pub fn aggregate(label: &str, scores: &[DocumentScore], opts: &ReportOptions) -> Result<AggregateReport, BenchError> {
    let mut sorted: Vec<&DocumentScore> = scores.iter().collect();
    sorted.sort_by(|a, b| a.doc_id.cmp(&b.doc_id).then(a.modality.cmp(&b.modality)));
    let removed = sorted.iter().filter(|d| d.removed).count();
    let scored: Vec<&DocumentScore> = sorted.iter().copied().filter(|d| !d.removed && d.em.is_some()).collect();
    if scored.is_empty() {
        return Err(BenchError::NoDocuments);
    }
    let overall = summarize(&scored, opts)?;
    let mut per_category = BTreeMap::new();
    for cat in StructureCategory::ALL {
        let docs: Vec<&DocumentScore> = scored.iter().copied().filter(|d| d.category == cat).collect();
        if !docs.is_empty() {
            per_category.insert(cat, summarize(&docs, opts)?);
        }
    }
    let mut compliance: BTreeMap<Compliance, usize> = Compliance::ALL.iter().map(|c| (*c, 0)).collect();
    for d in &scored {
        *compliance.entry(d.compliance).or_default() += 1;
    }
    let owned: Vec<DocumentScore> = scored.iter().map(|d| (*d).clone()).collect();
    Ok(AggregateReport {
        label: label.to_string(),
        documents: scored.len(),
        removed,
        overall,
        per_category,
        compliance,
        quartiles: quartile_decay(&owned),
        empty_field_rate: empty_field_rate(&owned),
        surplus: scored.iter().map(|d| d.surplus).sum(),
    })
}

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

fn csv_row(out: &mut String, label: &str, metric: &str, scope: &str, value: Option<f64>, ci: Option<(f64, f64)>) {
    let v = value.map(|v| format!("{v:.4}")).unwrap_or_default();
    let (lo, hi) = ci.map(|(l, h)| (format!("{l:.4}"), format!("{h:.4}"))).unwrap_or_default();
    let _ = writeln!(out, "{label},{metric},{scope},{v},{lo},{hi}");
}

/// Render reports as (CSV, Markdown). One report per label, usually one
/// per input modality.
pub fn emit_report(reports: &[AggregateReport]) -> Result<(String, String), BenchError> {
    if reports.is_empty() {
        return Err(BenchError::NoDocuments);
    }
    let mut csv = String::from("label,metric,scope,value,ci_low,ci_high\n");
    for r in reports {
        let l = r.label.as_str();
        let mut scopes: Vec<(&str, &CategorySummary)> = vec![("all", &r.overall)];
        scopes.extend(r.per_category.iter().map(|(c, s)| (c.as_str(), s)));
        for (scope, s) in scopes {
            csv_row(&mut csv, l, "documents", scope, Some(s.documents as f64), None);
            csv_row(&mut csv, l, "em", scope, Some(s.em.point), Some((s.em.lo, s.em.hi)));
            csv_row(&mut csv, l, "anls", scope, Some(s.anls.point), Some((s.anls.lo, s.anls.hi)));
            csv_row(&mut csv, l, "perfect_rate", scope, Some(s.perfect_rate.point), Some((s.perfect_rate.lo, s.perfect_rate.hi)));
        }
        for (c, n) in &r.compliance {
            csv_row(&mut csv, l, "compliance", c.as_str(), Some(*n as f64), None);
        }
        for (i, q) in r.quartiles.quartiles.iter().enumerate() {
            csv_row(&mut csv, l, "quartile_em", &format!("Q{}", i + 1), *q, None);
        }
        csv_row(&mut csv, l, "quartile_ratio", "all", r.quartiles.ratio, None);
        csv_row(&mut csv, l, "empty_field_rate", "all", r.empty_field_rate, None);
        csv_row(&mut csv, l, "surplus", "all", Some(r.surplus as f64), None);
        csv_row(&mut csv, l, "removed", "all", Some(r.removed as f64), None);
    }

    let mut md = String::new();
    md.push_str("| Input | Docs | All | Flat | Nested | Table | Perf. |\n");
    md.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
    for r in reports {
        let cell = |cat: StructureCategory| {
            r.per_category
                .get(&cat)
                .map(|s| format!("{} ({})", pct(s.em.point), pct(s.anls.point)))
                .unwrap_or_else(|| "-".into())
        };
        let _ = writeln!(
            md,
            "| {} | {} | {} ({}) | {} | {} | {} | {} |",
            r.label,
            r.documents,
            pct(r.overall.em.point),
            pct(r.overall.anls.point),
            cell(StructureCategory::Flat),
            cell(StructureCategory::Nested),
            cell(StructureCategory::Table),
            pct(r.overall.perfect_rate.point),
        );
    }
    md.push_str("\nEM% (ANLS%) per cell. Perf. is the share of documents with every field correct.\n");

    md.push_str("\n### Confidence intervals\n\n| Input | EM | ANLS | Perf. |\n|---|---|---|---|\n");
    for r in reports {
        let ci = |i: &Interval| format!("{} [{}, {}]", pct(i.point), pct(i.lo), pct(i.hi));
        let _ = writeln!(md, "| {} | {} | {} | {} |", r.label, ci(&r.overall.em), ci(&r.overall.anls), ci(&r.overall.perfect_rate));
    }

    md.push_str("\n### Output compliance\n\n| Input |");
    for c in Compliance::ALL {
        let _ = write!(md, " {} |", c.as_str());
    }
    md.push_str("\n|---|");
    for _ in Compliance::ALL {
        md.push_str("---:|");
    }
    md.push('\n');
    for r in reports {
        let _ = write!(md, "| {} |", r.label);
        for c in Compliance::ALL {
            let _ = write!(md, " {} |", r.compliance.get(&c).copied().unwrap_or(0));
        }
        md.push('\n');
    }

    md.push_str("\n### Field position and empty fields\n\n| Input | Q1 | Q2 | Q3 | Q4 | Q1/Q4 | Empty | Surplus | Removed |\n|---|---:|---:|---:|---:|---:|---:|---:|---:|\n");
    for r in reports {
        let q = |v: Option<f64>| v.map(pct).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.label,
            q(r.quartiles.quartiles[0]),
            q(r.quartiles.quartiles[1]),
            q(r.quartiles.quartiles[2]),
            q(r.quartiles.quartiles[3]),
            r.quartiles.ratio.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into()),
            q(r.empty_field_rate),
            r.surplus,
            r.removed,
        );
    }
    Ok((csv, md))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::ExtractionSchema;
    use crate::scoring::{score_document, ScoreOptions};
    use serde_json::json;

    fn scores(pred_b: &str) -> Vec<DocumentScore> {
        let schema = ExtractionSchema::from_value(&json!({"type":"object","properties":{
            "name":{"type":"string"},"city":{"type":"string"}}}))
        .unwrap();
        let gt = json!({"name":"Ada","city":"Paris"});
        let opts = ScoreOptions::default();
        vec![
            score_document("b", &gt, &schema, pred_b, None, &opts),
            score_document("a", &gt, &schema, &gt.to_string(), None, &opts),
        ]
    }

    #[test]
    fn perfect_corpus_row() {
        let opts = ReportOptions { resamples: 200, ..Default::default() };
        let r = aggregate("S", &scores(r#"{"name":"Ada","city":"Paris"}"#), &opts).unwrap();
        let (csv, md) = emit_report(std::slice::from_ref(&r)).unwrap();
        assert!(md.contains("| S | 2 | 100.0 (100.0) | 100.0 (100.0) | - | - | 100.0 |"), "{md}");
        assert!(csv.starts_with("label,metric,scope,value,ci_low,ci_high\nS,documents,all,2.0000,,\n"));
        assert_eq!(emit_report(std::slice::from_ref(&r)).unwrap(), (csv, md));
    }

    #[test]
    fn order_independent_and_partial() {
        let opts = ReportOptions { resamples: 300, seed: 4, ..Default::default() };
        let mut s = scores(r#"{"name":"Ada","city":"Pari"}"#);
        let a = aggregate("x", &s, &opts).unwrap();
        s.reverse();
        assert_eq!(a, aggregate("x", &s, &opts).unwrap());
        assert!((a.overall.em.point - 0.75).abs() < 1e-12);
        assert!((a.overall.perfect_rate.point - 0.5).abs() < 1e-12);
        assert!(a.overall.anls.point >= a.overall.em.point);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let err = aggregate("x", &[], &ReportOptions::default()).unwrap_err();
        assert_eq!(err.to_string(), "no documents scored");
        assert!(emit_report(&[]).is_err());
    }
}
