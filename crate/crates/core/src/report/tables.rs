use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{EntailmentSection, ProbeReport, ReportError};
use crate::dataset::FrequencyBin;
use crate::dataset::NliLabel;
use crate::probes::entailment::BreakdownRow;
use crate::probes::ConfusionMatrix;
use crate::ranking::Method;
use crate::ScaleCategory;

/// Placeholder for metrics that could not be computed.
pub const NA: &str = "NA";

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableSchema {
    pub name: &'static str,
    pub description: &'static str,
    pub columns: &'static [(&'static str, &'static str)],
}

/// Every table `render_tables` emits, with its columns documented.
pub const SCHEMA: &[TableSchema] = &[
    TableSchema {
        name: "coverage",
        description: "Distinct adjectives extracted per target adverb",
        columns: &[
            ("adverb", "target adverb, grouped by category in gold order"),
            ("category", "MODALITY, FREQUENCY or DEGREE"),
            ("distinct_adjectives", "number of different adjectives seen after the adverb"),
            ("below_threshold", "true when the count is under the configured threshold"),
        ],
    },
    TableSchema {
        name: "mlm",
        description: "Masked-adverb prediction: mean reciprocal rank and wins over `not`",
        columns: &[
            ("variant", "FULL_CONTEXT (original comment) or NEUTRAL (is [MASK] adj.)"),
            ("group", "target adverb, category, or OVERALL"),
            ("n", "scored instances (failed ones excluded)"),
            ("mrr", "mean of 1/rank of the target adverb"),
            ("beat_not", "share of instances where the target outscores `not`"),
            ("multi_token", "instances whose target spans several word pieces"),
        ],
    },
    TableSchema {
        name: "ranking",
        description: "Scale orderings recovered from embeddings",
        columns: &[
            ("category", "scale category, or OVERALL (pairs pooled over categories)"),
            ("method", "SIM, DIFF or ADJDIFF"),
            ("pairwise_accuracy", "share of gold-ordered pairs ranked in the same order"),
            ("spearman_rho", "rank correlation with the gold order"),
            ("kendall_tau_b", "tau-b against the gold order"),
            ("predicted_order", "evaluated adverbs by descending score"),
        ],
    },
    TableSchema {
        name: "entailment",
        description: "Scalar entailment completion with and without negated answers",
        columns: &[
            ("source", "model id, `random` for the seeded baseline, or `remote:<model>`"),
            ("dimension", "overall, category, bin_condition, template or mask_position"),
            ("key", "value of the dimension"),
            ("n", "items in the group, failed ones included"),
            ("failed", "items without a model answer"),
            ("with_neg_accuracy", "correct / (correct + incorrect + negation) when negations count"),
            ("with_neg_trivial_rate", "trivial answers over classified items, negations counted"),
            ("no_neg_accuracy", "correct / (correct + incorrect) when negations are skipped"),
            ("no_neg_trivial_rate", "trivial answers over classified items, negations skipped"),
        ],
    },
    TableSchema {
        name: "nli",
        description: "NLI classification of sentence-pair items; NEUTRAL is always wrong",
        columns: &[
            ("model", "classifier id"),
            ("group_type", "overall, bin or category"),
            ("group", "value of the group"),
            ("n", "classified pairs"),
            ("correct", "pairs whose predicted label equals the gold label"),
            ("accuracy", "correct / n"),
        ],
    },
    TableSchema {
        name: "nli_confusion",
        description: "Gold label against predicted label",
        columns: &[
            ("gold", "ENTAILMENT or CONTRADICTION"),
            ("ENTAILMENT", "count predicted ENTAILMENT"),
            ("NEUTRAL", "count predicted NEUTRAL"),
            ("CONTRADICTION", "count predicted CONTRADICTION"),
        ],
    },
    TableSchema {
        name: "confusion_full_context",
        description: "Target adverb against the first lexicon word predicted, original contexts",
        columns: &[
            ("target", "target adverb"),
            ("<answer>", "one column per target, then `not`, then OTHER"),
        ],
    },
    TableSchema {
        name: "confusion_neutral",
        description: "As confusion_full_context for the neutral frame",
        columns: &[
            ("target", "target adverb"),
            ("<answer>", "one column per target, then `not`, then OTHER"),
        ],
    },
];

fn schema(name: &str) -> &'static TableSchema {
    SCHEMA.iter().find(|s| s.name == name).expect("every table has a schema entry")
}

fn empty_table(name: &str) -> Table {
    Table {
        name: name.to_string(),
        columns: schema(name).columns.iter().map(|c| c.0.to_string()).collect(),
        rows: Vec::new(),
    }
}

pub fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.4}"),
        _ => NA.to_string(),
    }
}

fn coverage_table(report: &ProbeReport) -> Table {
    let mut t = empty_table("coverage");
    if let Some(cov) = &report.coverage {
        for cat in ScaleCategory::ALL {
            for r in cov.rows.iter().filter(|r| r.category == cat) {
                t.rows.push(vec![
                    r.adverb.clone(),
                    r.category.to_string(),
                    r.distinct_adjectives.to_string(),
                    r.below_threshold.to_string(),
                ]);
            }
        }
    }
    t
}

fn mlm_table(report: &ProbeReport) -> Table {
    let mut t = empty_table("mlm");
    if let Some(m) = &report.mlm {
        for r in &m.rows {
            t.rows.push(vec![
                r.variant.as_str().to_string(),
                r.group.clone(),
                r.n.to_string(),
                fmt_metric(r.mrr),
                fmt_metric(r.beat_not),
                r.multi_token.to_string(),
            ]);
        }
    }
    t
}

fn ranking_table(report: &ProbeReport) -> Table {
    let mut t = empty_table("ranking");
    for cat in ScaleCategory::ALL {
        for method in Method::ALL {
            for r in report.ranking.iter().filter(|r| r.category == cat && r.method == method) {
                t.rows.push(vec![
                    cat.to_string(),
                    method.to_string(),
                    fmt_metric(Some(r.metrics.pairwise_accuracy)),
                    fmt_metric(r.metrics.spearman_rho),
                    fmt_metric(r.metrics.kendall_tau_b),
                    r.predicted_order.join(" "),
                ]);
            }
        }
    }
    for (method, acc) in &report.ranking_overall {
        t.rows.push(vec![
            "OVERALL".into(),
            method.to_string(),
            fmt_metric(*acc),
            NA.into(),
            NA.into(),
            String::new(),
        ]);
    }
    t
}

fn entailment_row(source: &str, dimension: &str, key: &str, with: &BreakdownRow, no: Option<&BreakdownRow>) -> Vec<String> {
    vec![
        source.to_string(),
        dimension.to_string(),
        key.to_string(),
        (with.counts.classified() + with.counts.failed).to_string(),
        with.counts.failed.to_string(),
        fmt_metric(with.accuracy),
        fmt_metric(with.trivial_rate),
        fmt_metric(no.and_then(|r| r.accuracy)),
        fmt_metric(no.and_then(|r| r.trivial_rate)),
    ]
}

fn entailment_rows(section: &EntailmentSection, t: &mut Table) {
    let overall = |a: &crate::probes::EntailmentAggregates| BreakdownRow {
        dimension: "overall".into(),
        key: "ALL".into(),
        counts: a.overall,
        accuracy: a.accuracy,
        trivial_rate: a.trivial_rate,
    };
    let w = overall(&section.with_neg);
    let n = overall(&section.no_neg);
    t.rows.push(entailment_row(&section.source, "overall", "ALL", &w, Some(&n)));
    for dim in ["category", "bin_condition", "template", "mask_position"] {
        let mut rows: Vec<&BreakdownRow> =
            section.with_neg.breakdown.iter().filter(|r| r.dimension == dim).collect();
        match dim {
            "category" => rows.sort_by_key(|r| {
                ScaleCategory::ALL.iter().position(|c| c.as_str() == r.key).unwrap_or(usize::MAX)
            }),
            "bin_condition" => rows.sort_by_key(|r| {
                let (bin, cond) = r.key.split_once('/').unwrap_or((&r.key, ""));
                let b = FrequencyBin::ALL.iter().position(|x| x.as_str() == bin).unwrap_or(usize::MAX);
                (b, cond != "BELOW")
            }),
            _ => {}
        }
        for r in rows {
            t.rows.push(entailment_row(
                &section.source,
                dim,
                &r.key,
                r,
                section.no_neg.row(dim, &r.key),
            ));
        }
    }
}

fn entailment_table(report: &ProbeReport) -> Table {
    let mut t = empty_table("entailment");
    for s in &report.entailment {
        entailment_rows(s, &mut t);
    }
    t
}

fn nli_tables(report: &ProbeReport) -> (Table, Table) {
    let mut t = empty_table("nli");
    let mut c = empty_table("nli_confusion");
    if let Some(r) = &report.nli {
        let push = |t: &mut Table, ty: &str, g: &str, cell: &crate::probes::nli::AccuracyCell| {
            t.rows.push(vec![
                r.model.clone(),
                ty.to_string(),
                g.to_string(),
                cell.n.to_string(),
                cell.correct.to_string(),
                fmt_metric(cell.accuracy),
            ])
        };
        push(&mut t, "overall", "ALL", &r.overall);
        for b in FrequencyBin::ALL {
            if let Some(cell) = r.per_bin.get(b.as_str()) {
                push(&mut t, "bin", b.as_str(), cell);
            }
        }
        for cat in ScaleCategory::ALL {
            if let Some(cell) = r.per_category.get(cat.as_str()) {
                push(&mut t, "category", cat.as_str(), cell);
            }
        }
        for gold in [NliLabel::Entailment, NliLabel::Contradiction] {
            let mut row = vec![gold.as_str().to_string()];
            row.extend(r.confusion[gold.index()].iter().map(|n| n.to_string()));
            c.rows.push(row);
        }
    }
    (t, c)
}

pub fn confusion_table(name: &str, m: Option<&ConfusionMatrix>) -> Table {
    let mut t = empty_table(name);
    if let Some(m) = m {
        t.columns = std::iter::once("target".to_string()).chain(m.columns.iter().cloned()).collect();
        for (r, row) in m.rows.iter().zip(&m.counts) {
            t.rows.push(std::iter::once(r.clone()).chain(row.iter().map(|n| n.to_string())).collect());
        }
    }
    t
}

/// One table per report section, in a fixed order. Sections that did not run render as
/// header-only tables.
pub fn render_tables(report: &ProbeReport) -> Vec<Table> {
    let (nli, nli_confusion) = nli_tables(report);
    vec![
        coverage_table(report),
        mlm_table(report),
        ranking_table(report),
        entailment_table(report),
        nli,
        nli_confusion,
        confusion_table("confusion_full_context", report.mlm.as_ref().map(|m| &m.confusion_full)),
        confusion_table("confusion_neutral", report.mlm.as_ref().map(|m| &m.confusion_neutral)),
    ]
}

impl Table {
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| ReportError::Table(format!("{}: {e}", self.name));
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Table(format!("{}: {e}", self.name)))?;
        String::from_utf8(bytes).map_err(|e| ReportError::Table(e.to_string()))
    }

    /// Left-aligned columns separated by two spaces, with a dashed rule under the header.
    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for r in &self.rows {
            for (w, cell) in widths.iter_mut().zip(r) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = line(&self.columns);
        out.push('\n');
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&rule.join("  "));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

pub fn schema_json() -> String {
    let mut s = serde_json::to_string_pretty(SCHEMA).expect("schema serializes");
    s.push('\n');
    s
}

/// Writes `<name>.csv` and `<name>.txt` for every table plus `schema.json`; returns the
/// paths written.
pub fn write_tables(dir: &Path, tables: &[Table]) -> crate::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for t in tables {
        let csv_path = dir.join(format!("{}.csv", t.name));
        crate::io::write_bytes(&csv_path, t.to_csv()?.as_bytes())?;
        let txt_path = dir.join(format!("{}.txt", t.name));
        crate::io::write_bytes(&txt_path, t.to_text().as_bytes())?;
        written.push(csv_path);
        written.push(txt_path);
    }
    let schema_path = dir.join("schema.json");
    crate::io::write_bytes(&schema_path, schema_json().as_bytes())?;
    written.push(schema_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_gives_header_only_csv() {
        let tables = render_tables(&ProbeReport::empty("m"));
        assert_eq!(tables.len(), SCHEMA.len());
        for t in &tables {
            assert!(t.rows.is_empty());
            let csv = t.to_csv().unwrap();
            assert_eq!(csv.lines().count(), 1, "{}", t.name);
        }
        assert_eq!(tables[1].to_csv().unwrap(), "variant,group,n,mrr,beat_not,multi_token\n");
    }

    #[test]
    fn missing_metrics_render_as_na() {
        assert_eq!(fmt_metric(None), "NA");
        assert_eq!(fmt_metric(Some(f64::NAN)), "NA");
        assert_eq!(fmt_metric(Some(0.0)), "0.0000");
    }

    #[test]
    fn text_alignment() {
        let t = Table {
            name: "x".into(),
            columns: vec!["a".into(), "long".into()],
            rows: vec![vec!["wide cell".into(), "1".into()]],
        };
        assert_eq!(t.to_text(), "a          long\n---------  ----\nwide cell  1\n");
    }

    #[test]
    fn csv_quotes_when_needed() {
        let t = Table {
            name: "x".into(),
            columns: vec!["a".into()],
            rows: vec![vec!["x,y".into()]],
        };
        assert_eq!(t.to_csv().unwrap(), "a\n\"x,y\"\n");
    }
}
