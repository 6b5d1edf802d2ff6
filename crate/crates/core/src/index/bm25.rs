use std::collections::HashMap;

use super::{DocRef, InvertedIndex};
use crate::error::{Error, Result};

/// Okapi BM25 parameters. Defaults follow Anserini's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::InvalidArgument(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidArgument(format!("b must lie in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit {
    pub doc: DocRef,
    pub score: f64,
}

/// Lucene-style idf, never negative.
pub(crate) fn idf(n: f64, df: f64) -> f64 {
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

impl InvertedIndex {
    /// Scores every unit sharing a term with the query and returns the top `k`.
    ///
    /// Repeated query terms contribute once per occurrence. Ties are broken by
    /// descending [`DocRef`]; zero scores are dropped.
    pub fn search_terms(&self, query_terms: &[String], k: usize, params: &Bm25Params) -> Result<Vec<SearchHit>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        params.validate()?;
        let n = self.doc_count() as f64;
        let avg_len = self.avg_doc_len();
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in query_terms {
            let postings = self.postings(term);
            if postings.is_empty() {
                continue;
            }
            let idf = idf(n, postings.len() as f64);
            for p in postings {
                let tf = p.tf as f64;
                let len_norm = 1.0 - params.b + params.b * self.doc_len(p.doc) as f64 / avg_len;
                *scores.entry(p.doc).or_insert(0.0) += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * len_norm);
            }
        }

        let mut hits: Vec<(u32, f64)> = scores.into_iter().filter(|(_, s)| *s > 0.0).collect();
        hits.sort_by(|(da, sa), (db, sb)| {
            sb.total_cmp(sa)
                .then_with(|| self.doc_refs()[*db as usize].cmp(&self.doc_refs()[*da as usize]))
        });
        hits.truncate(k);
        Ok(hits
            .into_iter()
            .map(|(d, score)| SearchHit {
                doc: self.doc_refs()[d as usize].clone(),
                score,
            })
            .collect())
    }

    /// Tokenizes `text` with the index configuration, then searches.
    pub fn search(&self, text: &str, k: usize, params: &Bm25Params) -> Result<Vec<SearchHit>> {
        self.search_terms(&self.analyze(text), k, params)
    }
}

/// Collapses paragraph hits to one score per document: the best paragraph's.
pub fn paragraph_to_doc(hits: &[SearchHit]) -> Vec<(String, f64)> {
    let mut best: HashMap<&str, f64> = HashMap::new();
    for h in hits {
        let e = best.entry(h.doc.doc_id.as_str()).or_insert(f64::NEG_INFINITY);
        *e = e.max(h.score);
    }
    let mut out: Vec<(String, f64)> = best.into_iter().map(|(d, s)| (d.to_string(), s)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| b.0.cmp(&a.0)));
    out
}
