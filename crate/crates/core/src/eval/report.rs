//! Metric tables: per-topic TSV output and multi-system comparison.

use std::fmt::Write as _;

use super::{bonferroni, condense, evaluate, paired_t_test, Metric, MetricReport};
use crate::error::{Error, Result};
use crate::trecio::{id_order, QrelSet, Run};

/// Which ranking variants to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    /// Unjudged documents stay in the ranking with grade 0.
    #[default]
    None,
    /// Unjudged documents are removed first.
    Only,
    Both,
}

impl EvalMode {
    fn variants(self) -> &'static [Variant] {
        match self {
            EvalMode::None => &[Variant::Unjudged],
            EvalMode::Only => &[Variant::JudgedOnly],
            EvalMode::Both => &[Variant::Unjudged, Variant::JudgedOnly],
        }
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "no" | "false" => Ok(EvalMode::None),
            "only" | "yes" | "true" => Ok(EvalMode::Only),
            "both" => Ok(EvalMode::Both),
            _ => Err(Error::InvalidArgument(format!(
                "condensed mode must be none, only or both, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    Unjudged,
    JudgedOnly,
}

impl Variant {
    pub fn heading(self) -> &'static str {
        match self {
            Variant::Unjudged => "Including Unjudged",
            Variant::JudgedOnly => "Judged Only",
        }
    }

    /// Suffix appended to metric names in TSV output.
    fn suffix(self) -> &'static str {
        match self {
            Variant::Unjudged => "",
            Variant::JudgedOnly => ":judged",
        }
    }
}

/// Comma-separated metric names, e.g. `ndcg@10,p@5,p@5f,j@10`.
pub fn parse_metric_list(s: &str) -> Result<Vec<Metric>> {
    let metrics: Vec<Metric> = s
        .split(',')
        .filter(|m| !m.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if metrics.is_empty() {
        return Err(Error::InvalidArgument("empty metric list".into()));
    }
    Ok(metrics)
}

/// `metric<TAB>topic<TAB>value` lines, topics in id order, then an `all` row
/// with the mean. Values carry 4 decimals, as trec_eval prints them.
pub fn report_tsv(reports: &[MetricReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let mut topics: Vec<(&String, &f64)> = r.per_topic.iter().collect();
        topics.sort_by(|a, b| id_order(a.0, b.0));
        for (topic, value) in topics {
            let _ = writeln!(out, "{}\t{}\t{:.4}", r.metric_name, topic, value);
        }
        let _ = writeln!(out, "{}\tall\t{:.4}", r.metric_name, r.mean);
    }
    out
}

/// Column identity in a comparison: a metric on one ranking variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Column {
    pub variant: Variant,
    pub metric: Metric,
}

/// One system's evaluated columns.
#[derive(Debug, Clone)]
pub struct SystemScores {
    pub name: String,
    pub columns: Vec<(Column, MetricReport)>,
}

impl SystemScores {
    /// Evaluates `run` on every metric for each variant selected by `mode`,
    /// unjudged-included columns first.
    pub fn evaluate(name: impl Into<String>, run: &Run, qrels: &QrelSet, metrics: &[Metric], mode: EvalMode) -> Result<Self> {
        let mut columns = Vec::new();
        for &variant in mode.variants() {
            let condensed;
            let ranked = match variant {
                Variant::Unjudged => run,
                Variant::JudgedOnly => {
                    condensed = condense(run, qrels);
                    &condensed
                }
            };
            for &metric in metrics {
                let mut report = evaluate(ranked, qrels, metric)?;
                report.metric_name.push_str(variant.suffix());
                columns.push((Column { variant, metric }, report));
            }
        }
        Ok(SystemScores {
            name: name.into(),
            columns,
        })
    }

    pub fn reports(&self) -> Vec<MetricReport> {
        self.columns.iter().map(|(_, r)| r.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub mean: f64,
    /// Bonferroni-adjusted p-value against the reference; `None` on the
    /// reference row.
    pub p_adjusted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub system: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub columns: Vec<Column>,
    pub rows: Vec<ComparisonRow>,
    pub alpha: f64,
}

/// Tests every system against `reference`, column by column, with a paired
/// t-test corrected for the number of compared systems.
pub fn compare_systems(reference: &SystemScores, others: &[SystemScores], alpha: f64) -> Result<ComparisonTable> {
    if others.is_empty() {
        return Err(Error::InvalidArgument("need at least one system to compare against the reference".into()));
    }
    let columns: Vec<Column> = reference.columns.iter().map(|(c, _)| *c).collect();
    let m = others.len();
    let mut rows = vec![ComparisonRow {
        system: reference.name.clone(),
        cells: reference
            .columns
            .iter()
            .map(|(_, r)| Cell {
                mean: r.mean,
                p_adjusted: None,
            })
            .collect(),
    }];
    for sys in others {
        let theirs: Vec<Column> = sys.columns.iter().map(|(c, _)| *c).collect();
        if theirs != columns {
            return Err(Error::InvalidArgument(format!(
                "system {} was evaluated on different columns than {}",
                sys.name, reference.name
            )));
        }
        let mut cells = Vec::with_capacity(columns.len());
        for ((_, base), (_, r)) in reference.columns.iter().zip(&sys.columns) {
            let test = paired_t_test(&r.per_topic, &base.per_topic)
                .map_err(|e| Error::InvalidArgument(format!("{} vs {}, {}: {e}", sys.name, reference.name, r.metric_name)))?;
            cells.push(Cell {
                mean: r.mean,
                p_adjusted: Some(bonferroni(test.p, m)?),
            });
        }
        rows.push(ComparisonRow {
            system: sys.name.clone(),
            cells,
        });
    }
    Ok(ComparisonTable { columns, rows, alpha })
}

fn column_label(metric: &Metric) -> String {
    match *metric {
        Metric::Ndcg { k } => format!("nDCG@{k}"),
        Metric::Precision { k, min_grade: 1 } => format!("P@{k}"),
        Metric::Precision { k, min_grade: 2 } => format!("P@{k}(F)"),
        Metric::Precision { k, min_grade } => format!("P@{k}(>={min_grade})"),
        Metric::Judged { k } => format!("J@{k}"),
        Metric::Mrr { k } => format!("MRR@{k}"),
    }
}

impl ComparisonTable {
    /// A one-row table without significance markers.
    pub fn single(system: &SystemScores) -> Self {
        ComparisonTable {
            columns: system.columns.iter().map(|(c, _)| *c).collect(),
            rows: vec![ComparisonRow {
                system: system.name.clone(),
                cells: system
                    .columns
                    .iter()
                    .map(|(_, r)| Cell {
                        mean: r.mean,
                        p_adjusted: None,
                    })
                    .collect(),
            }],
            alpha: 0.05,
        }
    }

    fn cell_text(&self, column: &Column, cell: &Cell) -> String {
        let mut s = match column.metric {
            Metric::Judged { .. } => format!("{:.0}%", cell.mean * 100.0),
            _ => format!("{:.3}", cell.mean),
        };
        if cell.p_adjusted.is_some_and(|p| p < self.alpha) {
            s.push('*');
        }
        s
    }

    /// Aligned text table with one header group per ranking variant.
    pub fn render(&self) -> String {
        let mut header_groups: Vec<(Variant, usize)> = Vec::new();
        for c in &self.columns {
            match header_groups.last_mut() {
                Some((v, n)) if *v == c.variant => *n += 1,
                _ => header_groups.push((c.variant, 1)),
            }
        }
        let labels: Vec<String> = self.columns.iter().map(|c| column_label(&c.metric)).collect();
        let body: Vec<(String, Vec<String>)> = self
            .rows
            .iter()
            .map(|r| {
                let cells = self.columns.iter().zip(&r.cells).map(|(c, cell)| self.cell_text(c, cell)).collect();
                (r.system.clone(), cells)
            })
            .collect();

        let name_w = body.iter().map(|(n, _)| n.len()).chain(["System".len()]).max().unwrap_or(0);
        let mut widths: Vec<usize> = labels.iter().map(String::len).collect();
        for (_, cells) in &body {
            for (w, c) in widths.iter_mut().zip(cells) {
                *w = (*w).max(c.len());
            }
        }
        // Widen the last column of a group when its heading needs more room.
        let mut start = 0;
        for (variant, n) in &header_groups {
            let span: usize = widths[start..start + n].iter().sum::<usize>() + 2 * (n - 1);
            let need = variant.heading().len();
            if need > span {
                widths[start + n - 1] += need - span;
            }
            start += n;
        }

        let mut out = String::new();
        let _ = write!(out, "{:name_w$}", "");
        let mut start = 0;
        for (variant, n) in &header_groups {
            let span: usize = widths[start..start + n].iter().sum::<usize>() + 2 * (n - 1);
            let _ = write!(out, "  {:^span$}", variant.heading());
            start += n;
        }
        out.push('\n');
        let _ = write!(out, "{:name_w$}", "System");
        for (l, w) in labels.iter().zip(&widths) {
            let _ = write!(out, "  {l:>w$}");
        }
        out.push('\n');
        for (name, cells) in &body {
            let _ = write!(out, "{name:name_w$}");
            for (c, w) in cells.iter().zip(&widths) {
                let _ = write!(out, "  {c:>w$}");
            }
            out.push('\n');
        }
        out.lines().map(str::trim_end).fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
    }

    /// `system<TAB>column<TAB>mean<TAB>p_adjusted` lines; the reference row
    /// has an empty p column.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("system\tcolumn\tmean\tp_bonferroni\n");
        for row in &self.rows {
            for (c, cell) in self.columns.iter().zip(&row.cells) {
                let p = cell.p_adjusted.map_or(String::new(), |p| format!("{p:.6}"));
                let _ = writeln!(out, "{}\t{}{}\t{:.4}\t{}", row.system, c.metric, c.variant.suffix(), cell.mean, p);
            }
        }
        out
    }
}
