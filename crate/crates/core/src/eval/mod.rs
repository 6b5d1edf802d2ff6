//! Evaluation metrics matching trec_eval's definitions.
//!
//! Unjudged documents count as grade 0. A topic present in the run but absent
//! from the qrels is skipped with a warning, as trec_eval does.

mod report;
mod significance;

use std::collections::BTreeMap;
use std::fmt;

pub use report::{
    compare_systems, parse_metric_list, report_tsv, Cell, Column, ComparisonRow, ComparisonTable, EvalMode,
    SystemScores, Variant,
};
pub use significance::{bonferroni, paired_t_test, regularized_incomplete_beta, student_t_two_sided_p, TTest};

use crate::error::{Error, Result};
use crate::trecio::{QrelSet, Run, ScoredDoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Ndcg { k: usize },
    /// Fraction of the top `k` with grade at least `min_grade`.
    Precision { k: usize, min_grade: u8 },
    /// Fraction of the top `k` that carries any judgment.
    Judged { k: usize },
    Mrr { k: usize },
}

impl Metric {
    pub fn cutoff(&self) -> usize {
        match *self {
            Metric::Ndcg { k } | Metric::Precision { k, .. } | Metric::Judged { k } | Metric::Mrr { k } => k,
        }
    }

    /// Per-topic value for one ranked list against that topic's judgments.
    pub fn score_topic(&self, ranking: &[ScoredDoc], judgments: &BTreeMap<String, u8>) -> f64 {
        match *self {
            Metric::Ndcg { k } => ndcg(ranking, judgments, k),
            Metric::Precision { k, min_grade } => precision(ranking, judgments, k, min_grade),
            Metric::Judged { k } => judged(ranking, judgments, k),
            Metric::Mrr { k } => reciprocal_rank(ranking, judgments, k),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Metric::Ndcg { k } => write!(f, "ndcg@{k}"),
            Metric::Precision { k, min_grade: 1 } => write!(f, "p@{k}"),
            Metric::Precision { k, min_grade: 2 } => write!(f, "p@{k}f"),
            Metric::Precision { k, min_grade } => write!(f, "p@{k}g{min_grade}"),
            Metric::Judged { k } => write!(f, "j@{k}"),
            Metric::Mrr { k } => write!(f, "mrr@{k}"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    /// `ndcg@10`, `p@5`, `p@5f` (fully relevant only), `j@10`, `mrr@10`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown metric `{s}`"));
        let lower = s.trim().to_ascii_lowercase();
        let (name, rest) = lower.split_once('@').ok_or_else(bad)?;
        let (digits, fully) = match rest.strip_suffix('f') {
            Some(d) => (d, true),
            None => (rest, false),
        };
        let k: usize = digits.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(Error::InvalidArgument(format!("metric cutoff must be positive in `{s}`")));
        }
        match (name, fully) {
            ("ndcg", false) => Ok(Metric::Ndcg { k }),
            ("p", false) => Ok(Metric::Precision { k, min_grade: 1 }),
            ("p", true) => Ok(Metric::Precision { k, min_grade: 2 }),
            ("j", false) => Ok(Metric::Judged { k }),
            ("mrr", false) => Ok(Metric::Mrr { k }),
            _ => Err(bad()),
        }
    }
}

fn grade_of(judgments: &BTreeMap<String, u8>, doc: &str) -> u8 {
    judgments.get(doc).copied().unwrap_or(0)
}

fn dcg(gains: impl Iterator<Item = u8>) -> f64 {
    gains
        .enumerate()
        .map(|(i, g)| g as f64 / ((i + 2) as f64).log2())
        .sum()
}

fn ndcg(ranking: &[ScoredDoc], judgments: &BTreeMap<String, u8>, k: usize) -> f64 {
    let actual = dcg(ranking.iter().take(k).map(|d| grade_of(judgments, &d.doc_id)));
    let mut ideal: Vec<u8> = judgments.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let best = dcg(ideal.into_iter().take(k));
    if best == 0.0 {
        0.0
    } else {
        actual / best
    }
}

fn precision(ranking: &[ScoredDoc], judgments: &BTreeMap<String, u8>, k: usize, min_grade: u8) -> f64 {
    let hits = ranking
        .iter()
        .take(k)
        .filter(|d| grade_of(judgments, &d.doc_id) >= min_grade)
        .count();
    hits as f64 / k as f64
}

fn judged(ranking: &[ScoredDoc], judgments: &BTreeMap<String, u8>, k: usize) -> f64 {
    let n = ranking.iter().take(k).filter(|d| judgments.contains_key(&d.doc_id)).count();
    n as f64 / k as f64
}

fn reciprocal_rank(ranking: &[ScoredDoc], judgments: &BTreeMap<String, u8>, k: usize) -> f64 {
    ranking
        .iter()
        .take(k)
        .position(|d| grade_of(judgments, &d.doc_id) >= 1)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Per-topic values and their arithmetic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub metric_name: String,
    pub per_topic: BTreeMap<String, f64>,
    pub mean: f64,
}

impl MetricReport {
    pub fn from_values(metric_name: impl Into<String>, per_topic: BTreeMap<String, f64>) -> Result<Self> {
        let metric_name = metric_name.into();
        if per_topic.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{metric_name}: no run topic has judgments"
            )));
        }
        let mean = per_topic.values().sum::<f64>() / per_topic.len() as f64;
        Ok(MetricReport {
            metric_name,
            per_topic,
            mean,
        })
    }
}

pub fn evaluate(run: &Run, qrels: &QrelSet, metric: Metric) -> Result<MetricReport> {
    if metric.cutoff() == 0 {
        return Err(Error::InvalidArgument("metric cutoff must be positive".into()));
    }
    let mut per_topic = BTreeMap::new();
    for (topic, ranking) in run.topics() {
        match qrels.topic(topic) {
            Some(judgments) => {
                per_topic.insert(topic.to_string(), metric.score_topic(ranking, judgments));
            }
            None => log::warn!("{metric}: topic {topic} has no judgments; skipped"),
        }
    }
    MetricReport::from_values(metric.to_string(), per_topic)
}

pub fn ndcg_at(run: &Run, qrels: &QrelSet, k: usize) -> Result<MetricReport> {
    evaluate(run, qrels, Metric::Ndcg { k })
}

pub fn precision_at(run: &Run, qrels: &QrelSet, k: usize, min_grade: u8) -> Result<MetricReport> {
    evaluate(run, qrels, Metric::Precision { k, min_grade })
}

pub fn judged_at(run: &Run, qrels: &QrelSet, k: usize) -> Result<MetricReport> {
    evaluate(run, qrels, Metric::Judged { k })
}

pub fn mrr_at(run: &Run, qrels: &QrelSet, k: usize) -> Result<MetricReport> {
    evaluate(run, qrels, Metric::Mrr { k })
}

/// Drops unjudged documents from every ranking, keeping scores and order.
pub fn condense(run: &Run, qrels: &QrelSet) -> Run {
    let mut out = Run::new(run.tag.clone());
    for (topic, ranking) in run.topics() {
        let judged: Vec<ScoredDoc> = match qrels.topic(topic) {
            Some(j) => ranking.iter().filter(|d| j.contains_key(&d.doc_id)).cloned().collect(),
            None => Vec::new(),
        };
        if judged.is_empty() && !ranking.is_empty() {
            log::warn!("topic {topic}: no judged documents retrieved");
        }
        out.insert(topic, judged).expect("subset of a valid ranking is valid");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_of(docs: &[&str]) -> Run {
        let n = docs.len();
        let mut run = Run::new("t");
        run.insert(
            "1",
            docs.iter()
                .enumerate()
                .map(|(i, d)| ScoredDoc::new(*d, (n - i) as f64))
                .collect(),
        )
        .unwrap();
        run
    }

    fn qrels_of(judged: &[(&str, u8)]) -> QrelSet {
        let mut q = QrelSet::new();
        for (d, g) in judged {
            q.insert("1", d, *g).unwrap();
        }
        q
    }

    #[test]
    fn ndcg_hand_value() {
        let qrels = qrels_of(&[("dA", 2), ("dB", 1), ("dC", 0)]);
        let r = ndcg_at(&run_of(&["dB", "dA", "dC"]), &qrels, 10).unwrap();
        assert!((r.mean - 0.8597186998521972).abs() < 1e-12);
        let ideal = ndcg_at(&run_of(&["dA", "dB", "dC"]), &qrels, 10).unwrap();
        assert!((ideal.mean - 1.0).abs() < 1e-12);
        let unjudged = ndcg_at(&run_of(&["x", "y"]), &qrels, 10).unwrap();
        assert_eq!(unjudged.mean, 0.0);
    }

    #[test]
    fn ndcg_all_zero_qrels_is_zero() {
        let qrels = qrels_of(&[("dA", 0)]);
        assert_eq!(ndcg_at(&run_of(&["dA"]), &qrels, 10).unwrap().mean, 0.0);
    }

    #[test]
    fn precision_variants() {
        let qrels = qrels_of(&[("a", 2), ("b", 0), ("c", 1), ("e", 2)]);
        let run = run_of(&["a", "b", "c", "d", "e"]);
        assert!((precision_at(&run, &qrels, 5, 1).unwrap().mean - 0.6).abs() < 1e-12);
        assert!((precision_at(&run, &qrels, 5, 2).unwrap().mean - 0.4).abs() < 1e-12);

        let short = run_of(&["x", "c", "y"]);
        assert!((precision_at(&short, &qrels, 5, 1).unwrap().mean - 0.2).abs() < 1e-12);
    }

    #[test]
    fn judged_fraction() {
        let docs: Vec<String> = (0..10).map(|i| format!("d{i}")).collect();
        let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
        let judgments: Vec<(&str, u8)> = refs[..9].iter().map(|d| (*d, 0)).collect();
        let r = judged_at(&run_of(&refs), &qrels_of(&judgments), 10).unwrap();
        assert!((r.mean - 0.9).abs() < 1e-12);
    }

    #[test]
    fn reciprocal_rank_cases() {
        let qrels = qrels_of(&[("r", 1)]);
        assert_eq!(mrr_at(&run_of(&["a", "b", "c", "r"]), &qrels, 10).unwrap().mean, 0.25);
        assert_eq!(mrr_at(&run_of(&["r"]), &qrels, 10).unwrap().mean, 1.0);
        assert_eq!(mrr_at(&run_of(&["a", "b"]), &qrels, 10).unwrap().mean, 0.0);
    }

    #[test]
    fn condensed_run() {
        let qrels = qrels_of(&[("d2", 2)]);
        let condensed = condense(&run_of(&["d1", "d2"]), &qrels);
        assert_eq!(condensed.get("1").unwrap().len(), 1);
        assert_eq!(precision_at(&condensed, &qrels, 1, 1).unwrap().mean, 1.0);

        let full = qrels_of(&[("d1", 0), ("d2", 1)]);
        let run = run_of(&["d1", "d2"]);
        assert_eq!(condense(&run, &full), run);

        let none = condense(&run_of(&["x"]), &qrels);
        assert!(none.get("1").unwrap().is_empty());
        assert_eq!(ndcg_at(&none, &qrels, 10).unwrap().mean, 0.0);
    }

    #[test]
    fn unjudged_topics_skipped_and_empty_report_rejected() {
        let mut run = run_of(&["a"]);
        run.insert("2", vec![ScoredDoc::new("a", 1.0)]).unwrap();
        let r = ndcg_at(&run, &qrels_of(&[("a", 1)]), 10).unwrap();
        assert_eq!(r.per_topic.len(), 1);
        assert!(ndcg_at(&run, &QrelSet::new(), 10).is_err());
    }

    #[test]
    fn metric_names_round_trip() {
        for name in ["ndcg@10", "p@5", "p@5f", "j@10", "mrr@10"] {
            let m: Metric = name.parse().unwrap();
            assert_eq!(m.to_string(), name);
        }
        assert!("p@0".parse::<Metric>().is_err());
        assert!("map".parse::<Metric>().is_err());
        assert_eq!("P@5F".parse::<Metric>().unwrap(), Metric::Precision { k: 5, min_grade: 2 });
    }
}
