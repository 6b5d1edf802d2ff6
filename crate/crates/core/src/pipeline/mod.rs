//! Two-stage ranking: BM25 first stage, external re-ranking, and
//! reciprocal rank fusion.

pub mod conformance;
mod fusion;
mod rerank;
pub mod scorer;

use std::collections::HashMap;

use rayon::prelude::*;

pub use fusion::{rrf_fuse, FusionConfig};
pub use rerank::{pair_id, rerank, rerank_doc_text, truncate_tokens, RerankConfig};
pub use scorer::{score_pairs, ScorePair, Scorer, ScorerHandle};

use crate::corpus::{filter_by_date, DateFilterPolicy, Document, FilterStats};
use crate::error::{Error, Result};
use crate::index::{build_index, paragraph_to_doc, Bm25Params, IndexField, InvertedIndex, TokenizationConfig};
use crate::trecio::{Run, ScoredDoc, Topic};

/// Which topic field becomes the query text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueryField {
    #[default]
    Question,
    Query,
    /// Keyword query followed by the question.
    Both,
}

impl QueryField {
    pub fn text(self, topic: &Topic) -> String {
        let query = topic.query.as_deref().unwrap_or_default();
        match self {
            QueryField::Question => topic.question.clone(),
            QueryField::Query => query.to_string(),
            QueryField::Both => format!("{query} {}", topic.question),
        }
    }
}

impl std::str::FromStr for QueryField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "question" => Ok(QueryField::Question),
            "query" => Ok(QueryField::Query),
            "both" => Ok(QueryField::Both),
            _ => Err(Error::InvalidArgument(format!(
                "query field must be question, query or both, got `{s}`"
            ))),
        }
    }
}

/// BM25 run over `topics`. Paragraph indexes are collapsed to one score per
/// document (the best paragraph) before cutting to `k`. Topics without any
/// hit are left out of the run.
pub fn first_stage(
    index: &InvertedIndex,
    topics: &[Topic],
    field: QueryField,
    k: usize,
    params: &Bm25Params,
    tag: &str,
) -> Result<Run> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    params.validate()?;
    let results: Vec<(String, Vec<ScoredDoc>)> = topics
        .par_iter()
        .map(|t| {
            let docs = if index.field() == IndexField::Paragraph {
                let hits = index.search(&field.text(t), index.doc_count().max(1), params)?;
                paragraph_to_doc(&hits)
                    .into_iter()
                    .take(k)
                    .map(|(d, s)| ScoredDoc::new(d, s))
                    .collect()
            } else {
                index
                    .search(&field.text(t), k, params)?
                    .into_iter()
                    .map(|h| ScoredDoc::new(h.doc.doc_id, h.score))
                    .collect()
            };
            Ok((t.topic_id.clone(), docs))
        })
        .collect::<Result<_>>()?;

    let mut run = Run::new(tag);
    for (topic, docs) in results {
        if docs.is_empty() {
            log::warn!("topic {topic}: no document matches the query");
            continue;
        }
        run.insert(&topic, docs)?;
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// `None` skips the date filter.
    pub date_filter: Option<DateFilterPolicy>,
    pub tokenization: TokenizationConfig,
    pub bm25: Bm25Params,
    pub query_field: QueryField,
    /// Documents retrieved per topic by the first stage.
    pub first_stage_depth: usize,
    pub rerank: RerankConfig,
    pub tag: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            date_filter: Some(DateFilterPolicy::default()),
            tokenization: TokenizationConfig::default(),
            bm25: Bm25Params::default(),
            query_field: QueryField::Question,
            first_stage_depth: 1000,
            rerank: RerankConfig::default(),
            tag: "zsrank".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub run: Run,
    /// Present when the date filter ran.
    pub filter_stats: Option<FilterStats>,
    pub indexed_docs: usize,
}

/// Date filter, full-text BM25, then re-ranking when a scorer is given.
pub fn run_zero_shot_pipeline(
    docs: Vec<Document>,
    topics: &[Topic],
    scorer: Option<&mut dyn Scorer>,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    let (docs, filter_stats) = match &cfg.date_filter {
        Some(policy) => {
            let (kept, stats) = filter_by_date(docs, policy);
            (kept, Some(stats))
        }
        None => (docs, None),
    };
    let index = build_index(&docs, IndexField::FullText, &cfg.tokenization)?;
    let mut run = first_stage(&index, topics, cfg.query_field, cfg.first_stage_depth, &cfg.bm25, &cfg.tag)?;
    if let Some(scorer) = scorer {
        let lookup: HashMap<String, Document> = docs.into_iter().map(|d| (d.doc_id.clone(), d)).collect();
        run = rerank(&run, topics, &lookup, scorer, &cfg.rerank)?;
    }
    Ok(PipelineOutput {
        run,
        filter_stats,
        indexed_docs: index.doc_count(),
    })
}
