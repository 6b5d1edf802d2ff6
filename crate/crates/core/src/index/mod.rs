//! Tokenization, inverted indexing and BM25 retrieval.
//!
//! An index covers one field of the corpus: the full text (title, abstract and
//! body), the title plus abstract, or individual body paragraphs, where each
//! paragraph is indexed as its own pseudo-document.

mod analysis;
mod bm25;
pub mod porter;
mod store;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use analysis::{split_words, tokenize, StemmerKind, TokenizationConfig, DEFAULT_STOPWORDS};
pub use bm25::{paragraph_to_doc, Bm25Params, SearchHit};
pub use store::FORMAT_VERSION;

use crate::corpus::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexField {
    FullText,
    Abstract,
    Paragraph,
}

impl std::str::FromStr for IndexField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_text" | "fulltext" => Ok(IndexField::FullText),
            "abstract" => Ok(IndexField::Abstract),
            "paragraph" | "paragraphs" => Ok(IndexField::Paragraph),
            other => Err(Error::InvalidArgument(format!("unknown index field `{other}`"))),
        }
    }
}

impl fmt::Display for IndexField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexField::FullText => "full_text",
            IndexField::Abstract => "abstract",
            IndexField::Paragraph => "paragraph",
        })
    }
}

/// Identifies an indexed unit: a document, or one paragraph of it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DocRef {
    pub doc_id: String,
    pub paragraph: Option<u32>,
}

impl DocRef {
    pub fn doc(doc_id: impl Into<String>) -> Self {
        DocRef {
            doc_id: doc_id.into(),
            paragraph: None,
        }
    }

    pub fn paragraph(doc_id: impl Into<String>, ordinal: u32) -> Self {
        DocRef {
            doc_id: doc_id.into(),
            paragraph: Some(ordinal),
        }
    }
}

impl fmt::Display for DocRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.paragraph {
            Some(p) => write!(f, "{}#{p}", self.doc_id),
            None => f.write_str(&self.doc_id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    /// Position of the unit in [`InvertedIndex::doc_refs`].
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    field: IndexField,
    tokenization: TokenizationConfig,
    docs: Vec<DocRef>,
    doc_lens: Vec<u32>,
    total_len: u64,
    postings: BTreeMap<String, Vec<Posting>>,
}

/// The text units a document contributes to an index over `field`.
pub fn field_units(doc: &Document, field: IndexField) -> Vec<(DocRef, String)> {
    match field {
        IndexField::FullText => vec![(DocRef::doc(&doc.doc_id), doc.full_text())],
        IndexField::Abstract => vec![(DocRef::doc(&doc.doc_id), doc.title_and_abstract())],
        IndexField::Paragraph => doc
            .paragraphs
            .iter()
            .enumerate()
            .map(|(i, p)| (DocRef::paragraph(&doc.doc_id, i as u32), p.clone()))
            .collect(),
    }
}

/// Builds an index over `field`. Tokenization runs in parallel; postings are
/// merged in document order, so the result does not depend on thread count.
pub fn build_index<'a, I>(docs: I, field: IndexField, cfg: &TokenizationConfig) -> Result<InvertedIndex>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut seen = HashSet::new();
    let mut units = Vec::new();
    for doc in docs {
        if doc.doc_id.is_empty() {
            return Err(Error::InvalidArgument("document with empty doc_id".into()));
        }
        if !seen.insert(doc.doc_id.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate doc_id {}", doc.doc_id)));
        }
        units.extend(field_units(doc, field));
    }

    let counted: Vec<(u32, Vec<(String, u32)>)> = units
        .par_iter()
        .map(|(_, text)| {
            let tokens = tokenize(text, cfg);
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_insert(0) += 1;
            }
            let mut tf: Vec<_> = tf.into_iter().collect();
            tf.sort_unstable();
            (tokens.len() as u32, tf)
        })
        .collect();

    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut doc_lens = Vec::with_capacity(units.len());
    let mut total_len = 0u64;
    for (i, (len, tfs)) in counted.into_iter().enumerate() {
        doc_lens.push(len);
        total_len += len as u64;
        for (term, tf) in tfs {
            postings.entry(term).or_default().push(Posting { doc: i as u32, tf });
        }
    }

    Ok(InvertedIndex {
        field,
        tokenization: cfg.clone(),
        docs: units.into_iter().map(|(r, _)| r).collect(),
        doc_lens,
        total_len,
        postings,
    })
}

impl InvertedIndex {
    pub fn field(&self) -> IndexField {
        self.field
    }

    pub fn tokenization(&self) -> &TokenizationConfig {
        &self.tokenization
    }

    /// Number of indexed units.
    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        if self.docs.is_empty() {
            0.0
        } else {
            self.total_len as f64 / self.docs.len() as f64
        }
    }

    pub fn doc_refs(&self) -> &[DocRef] {
        &self.docs
    }

    pub fn doc_len(&self, doc: u32) -> u32 {
        self.doc_lens[doc as usize]
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.postings.iter().map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    /// Tokenizes `text` with the index's own configuration.
    pub fn analyze(&self, text: &str) -> Vec<String> {
        tokenize(text, &self.tokenization)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str) -> Document {
        let mut d = Document::new(id);
        d.abstract_text = text.into();
        d
    }

    #[test]
    fn average_length_and_term_counts() {
        let docs = vec![doc("a", "alpha beta gamma"), doc("b", "vaccine vaccine delta epsilon zeta")];
        let index = build_index(&docs, IndexField::FullText, &TokenizationConfig::default()).unwrap();
        assert_eq!(index.doc_count(), 2);
        assert_eq!(index.avg_doc_len(), 4.0);
        assert_eq!(index.postings("vaccin"), &[Posting { doc: 1, tf: 2 }]);
    }

    #[test]
    fn paragraphs_become_units() {
        let mut d = Document::new("d1");
        d.paragraphs = vec!["one".into(), "two".into(), "three".into()];
        let index = build_index([&d], IndexField::Paragraph, &TokenizationConfig::default()).unwrap();
        assert_eq!(index.doc_count(), 3);
        assert_eq!(index.doc_refs()[2], DocRef::paragraph("d1", 2));
    }

    #[test]
    fn empty_corpus() {
        let index = build_index(&[], IndexField::Abstract, &TokenizationConfig::default()).unwrap();
        assert_eq!(index.doc_count(), 0);
        assert_eq!(index.avg_doc_len(), 0.0);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let docs = vec![doc("a", "x"), doc("a", "y")];
        assert!(build_index(&docs, IndexField::FullText, &TokenizationConfig::default()).is_err());
    }

    #[test]
    fn abstract_field_uses_title_and_abstract_only() {
        let mut d = doc("a", "abstract words");
        d.title = "title".into();
        d.paragraphs = vec!["body".into()];
        let cfg = TokenizationConfig::default();
        let abs = build_index([&d], IndexField::Abstract, &cfg).unwrap();
        let full = build_index([&d], IndexField::FullText, &cfg).unwrap();
        assert_eq!(abs.doc_freq("bodi"), 0);
        assert_eq!(full.doc_freq("bodi"), 1);
        assert_eq!(abs.doc_freq("titl"), 1);
    }
}
