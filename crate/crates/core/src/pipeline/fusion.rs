use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::trecio::{canonical_sort, Run, ScoredDoc};

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub rrf_k: f64,
    /// Tag of the fused run.
    pub tag: String,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            rrf_k: 60.0,
            tag: "fusion".into(),
        }
    }
}

/// Reciprocal rank fusion: each document scores Σ 1/(k + rank) over the
/// runs that retrieved it. Ranks come from each run's canonical order.
///
/// Only topics present in every run are fused; the rest are dropped with a
/// warning.
pub fn rrf_fuse(runs: &[Run], cfg: &FusionConfig, out_depth: usize) -> Result<Run> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument(format!("fusion needs at least 2 runs, got {}", runs.len())));
    }
    if !(cfg.rrf_k > 0.0 && cfg.rrf_k.is_finite()) {
        return Err(Error::InvalidArgument(format!("rrf_k must be positive, got {}", cfg.rrf_k)));
    }
    if out_depth == 0 {
        return Err(Error::InvalidArgument("fusion depth must be positive".into()));
    }

    let all: BTreeSet<&str> = runs.iter().flat_map(Run::topic_ids).collect();
    let shared: BTreeSet<&str> = all
        .iter()
        .copied()
        .filter(|t| runs.iter().all(|r| r.get(t).is_some()))
        .collect();
    let dropped: Vec<&str> = all.difference(&shared).copied().collect();
    if !dropped.is_empty() {
        log::warn!("fusion: topics missing from some runs were dropped: {}", dropped.join(", "));
    }

    let mut out = Run::new(cfg.tag.clone());
    for topic in shared {
        let mut contributions: HashMap<&str, Vec<f64>> = HashMap::new();
        for run in runs {
            for (i, d) in run.get(topic).unwrap_or_default().iter().enumerate() {
                contributions
                    .entry(d.doc_id.as_str())
                    .or_default()
                    .push(1.0 / (cfg.rrf_k + (i + 1) as f64));
            }
        }
        let mut fused: Vec<ScoredDoc> = contributions
            .into_iter()
            .map(|(doc, mut parts)| {
                // Summing in a fixed order keeps the result independent of
                // the order the runs were given in.
                parts.sort_by(f64::total_cmp);
                ScoredDoc::new(doc, parts.iter().sum())
            })
            .collect();
        canonical_sort(&mut fused);
        fused.truncate(out_depth);
        out.insert(topic, fused)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(topic: &str, docs: &[&str]) -> Run {
        let mut r = Run::new("r");
        let n = docs.len();
        r.insert(topic, docs.iter().enumerate().map(|(i, d)| ScoredDoc::new(*d, (n - i) as f64)).collect())
            .unwrap();
        r
    }

    #[test]
    fn hand_value() {
        let fused = rrf_fuse(&[run("1", &["x", "y"]), run("1", &["y", "x"])], &FusionConfig::default(), 10).unwrap();
        let top = &fused.get("1").unwrap()[0];
        assert!((top.score - (1.0 / 61.0 + 1.0 / 62.0)).abs() < 1e-12);
        assert!((top.score - 0.032523).abs() < 1e-6);

        let single = rrf_fuse(&[run("1", &["x"]), run("1", &["y"])], &FusionConfig::default(), 10).unwrap();
        assert!((single.get("1").unwrap()[0].score - 1.0 / 61.0).abs() < 1e-15);
    }

    #[test]
    fn self_fusion_keeps_order() {
        let r = run("1", &["c", "a", "b"]);
        let fused = rrf_fuse(&[r.clone(), r], &FusionConfig::default(), 10).unwrap();
        let ids: Vec<_> = fused.get("1").unwrap().iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }

    #[test]
    fn topic_intersection_and_errors() {
        let mut a = run("1", &["x"]);
        a.insert("2", vec![ScoredDoc::new("z", 1.0)]).unwrap();
        let fused = rrf_fuse(&[a, run("1", &["y"])], &FusionConfig::default(), 1).unwrap();
        assert_eq!(fused.topic_ids().collect::<Vec<_>>(), ["1"]);
        assert_eq!(fused.get("1").unwrap().len(), 1);
        assert!(rrf_fuse(&[run("1", &["x"])], &FusionConfig::default(), 10).is_err());
        let bad = FusionConfig { rrf_k: 0.0, ..Default::default() };
        assert!(rrf_fuse(&[run("1", &["x"]), run("1", &["x"])], &bad, 10).is_err());
    }
}
