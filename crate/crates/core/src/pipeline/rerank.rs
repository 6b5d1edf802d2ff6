use std::collections::{BTreeSet, HashMap};

use super::scorer::{score_pairs, ScorePair, Scorer};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::trecio::{Run, ScoredDoc, Topic};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RerankConfig {
    /// First-stage results re-scored per topic.
    pub depth: usize,
    /// Whitespace tokens kept from the question.
    pub max_query_tokens: usize,
    /// Whitespace tokens kept from title and abstract.
    pub max_doc_tokens: usize,
}

impl Default for RerankConfig {
    fn default() -> Self {
        RerankConfig {
            depth: 100,
            max_query_tokens: 60,
            max_doc_tokens: 2000,
        }
    }
}

impl RerankConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.max_query_tokens == 0 || self.max_doc_tokens == 0 {
            return Err(Error::InvalidArgument(
                "re-rank depth and truncation limits must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// First `n` whitespace-separated tokens, single-space joined.
pub fn truncate_tokens(text: &str, n: usize) -> String {
    text.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

/// The text a document is scored on: `title. abstract`.
pub fn rerank_doc_text(doc: &Document, max_tokens: usize) -> String {
    truncate_tokens(&format!("{}. {}", doc.title, doc.abstract_text), max_tokens)
}

/// Pair id for a (topic, document) pair. Both ids are whitespace-free by the
/// run contract, so the single space separates them unambiguously.
pub fn pair_id(topic: &str, doc: &str) -> String {
    format!("{topic} {doc}")
}

/// Re-scores the top `depth` entries of every topic with `scorer`.
///
/// Entries below the depth keep their order and are shifted by a whole
/// number so that they stay strictly below the re-ranked block.
pub fn rerank(
    run: &Run,
    topics: &[Topic],
    docs: &HashMap<String, Document>,
    scorer: &mut dyn Scorer,
    cfg: &RerankConfig,
) -> Result<Run> {
    cfg.validate()?;
    let questions: HashMap<&str, &str> = topics.iter().map(|t| (t.topic_id.as_str(), t.question.as_str())).collect();

    let mut unresolved = BTreeSet::new();
    for (topic, ranking) in run.topics() {
        if !questions.contains_key(topic) {
            unresolved.insert(format!("topic {topic}"));
        }
        for d in ranking.iter().take(cfg.depth) {
            if !docs.contains_key(&d.doc_id) {
                unresolved.insert(d.doc_id.clone());
            }
        }
    }
    if !unresolved.is_empty() {
        return Err(Error::Unresolved(unresolved.into_iter().collect()));
    }

    let mut out = Run::new(run.tag.clone());
    for (topic, ranking) in run.topics() {
        let split = cfg.depth.min(ranking.len());
        let (head, tail) = ranking.split_at(split);
        let query = truncate_tokens(questions[topic], cfg.max_query_tokens);
        let pairs: Vec<ScorePair> = head
            .iter()
            .map(|d| ScorePair::new(pair_id(topic, &d.doc_id), query.clone(), rerank_doc_text(&docs[&d.doc_id], cfg.max_doc_tokens)))
            .collect();
        let scores = score_pairs(scorer, &pairs).map_err(|e| match e {
            Error::Scorer(source) => Error::Rerank {
                topic: topic.to_string(),
                source,
            },
            other => other,
        })?;

        let mut entries: Vec<ScoredDoc> = head
            .iter()
            .zip(&scores)
            .map(|(d, (_, s))| ScoredDoc::new(d.doc_id.clone(), *s))
            .collect();
        if let (Some(block_min), Some(tail_max)) = (
            scores.iter().map(|(_, s)| *s).min_by(f64::total_cmp),
            tail.first().map(|d| d.score),
        ) {
            let shift = (tail_max - block_min).max(0.0).ceil() + 1.0;
            entries.extend(tail.iter().map(|d| ScoredDoc::new(d.doc_id.clone(), d.score - shift)));
        }
        out.insert(topic, entries)?;
    }
    Ok(out)
}
