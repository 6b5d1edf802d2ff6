//! Lexicon-based filtering of training queries.
//!
//! A query is kept when one of the lexicon's phrases occurs in it as a
//! contiguous run of tokens. Matching is on surface forms: queries are
//! lowercased and split on non-alphanumerics, with no stemming and no stopword
//! removal. Single-word entries listed as exclusions are ignored, which is how
//! ambiguous lexicon words ("gas", "fall", ...) are kept from pulling in
//! non-medical questions.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::split_words;
use crate::trecio::id_order;

/// Default exclusions for the MedSyn lexicon.
pub const DEFAULT_EXCLUSIONS: &str = include_str!("../data/medsyn_exclusions.txt");

fn phrase_tokens(text: &str) -> Vec<String> {
    split_words(text).map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    phrases: BTreeSet<Vec<String>>,
    exclusions: BTreeSet<String>,
    /// Effective phrases bucketed by their first token.
    by_first: HashMap<String, Vec<Vec<String>>>,
}

impl Lexicon {
    pub fn new<P, E>(phrases: P, exclusions: E) -> Self
    where
        P: IntoIterator,
        P::Item: AsRef<str>,
        E: IntoIterator,
        E::Item: AsRef<str>,
    {
        let phrases: BTreeSet<Vec<String>> = phrases
            .into_iter()
            .map(|p| phrase_tokens(p.as_ref()))
            .filter(|p| !p.is_empty())
            .collect();
        let exclusions: BTreeSet<String> = exclusions
            .into_iter()
            .map(|e| e.as_ref().trim().to_lowercase())
            .filter(|e| !e.is_empty())
            .collect();
        let mut by_first: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        for p in &phrases {
            if p.len() == 1 && exclusions.contains(&p[0]) {
                continue;
            }
            by_first.entry(p[0].clone()).or_default().push(p.clone());
        }
        Lexicon {
            phrases,
            exclusions,
            by_first,
        }
    }

    pub fn phrases(&self) -> &BTreeSet<Vec<String>> {
        &self.phrases
    }

    pub fn exclusions(&self) -> &BTreeSet<String> {
        &self.exclusions
    }

    /// Phrases that take part in matching, space-joined and sorted.
    pub fn effective_phrases(&self) -> Vec<String> {
        let mut out: Vec<String> = self.by_first.values().flatten().map(|p| p.join(" ")).collect();
        out.sort();
        out
    }

    /// True when some effective phrase occurs contiguously in `text`.
    pub fn matches(&self, text: &str) -> bool {
        if self.by_first.is_empty() {
            return false;
        }
        let tokens = phrase_tokens(text);
        (0..tokens.len()).any(|i| {
            self.by_first
                .get(&tokens[i])
                .is_some_and(|cands| cands.iter().any(|p| tokens[i..].starts_with(p)))
        })
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .map(|l| l.map_err(|e| Error::io(path, e)))
        .collect()
}

/// Loads a one-phrase-per-line lexicon. Without an exclusions file the
/// built-in default list applies.
pub fn load_lexicon(file: &Path, exclusions_file: Option<&Path>) -> Result<Lexicon> {
    let phrases = read_lines(file)?;
    let exclusions = match exclusions_file {
        Some(p) => read_lines(p)?,
        None => DEFAULT_EXCLUSIONS.lines().map(str::to_string).collect(),
    };
    let lex = Lexicon::new(phrases, exclusions);
    if lex.phrases.is_empty() {
        log::warn!("lexicon {} is empty; no query will match", file.display());
    }
    Ok(lex)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRecord {
    pub query_id: String,
    pub text: String,
}

impl QueryRecord {
    pub fn new(query_id: impl Into<String>, text: impl Into<String>) -> Self {
        QueryRecord {
            query_id: query_id.into(),
            text: text.into(),
        }
    }
}

pub fn matches(query: &QueryRecord, lex: &Lexicon) -> bool {
    lex.matches(&query.text)
}

/// `query_id<TAB>text` lines.
pub fn read_queries(path: &Path) -> Result<Vec<QueryRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected `query_id<TAB>text`"))?;
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::parse(path, i + 1, "empty query id"));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::parse(path, i + 1, format!("duplicate query id {id}")));
        }
        out.push(QueryRecord::new(id, text.trim_end_matches('\r')));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetentionStats {
    pub input: usize,
    pub kept: usize,
}

impl RetentionStats {
    /// Fraction kept; zero for empty input.
    pub fn ratio(&self) -> f64 {
        if self.input == 0 {
            0.0
        } else {
            self.kept as f64 / self.input as f64
        }
    }
}

/// Keeps matching queries, in input order. Matching runs in parallel.
pub fn filter_queries(queries: Vec<QueryRecord>, lex: &Lexicon) -> (Vec<QueryRecord>, RetentionStats) {
    let input = queries.len();
    let keep: Vec<bool> = queries.par_iter().map(|q| matches(q, lex)).collect();
    let kept: Vec<QueryRecord> = queries
        .into_iter()
        .zip(keep)
        .filter_map(|(q, k)| k.then_some(q))
        .collect();
    let stats = RetentionStats {
        input,
        kept: kept.len(),
    };
    (kept, stats)
}

fn sorted_ids<'a>(kept: impl IntoIterator<Item = &'a QueryRecord>) -> Vec<&'a str> {
    let mut ids: Vec<&str> = kept.into_iter().map(|q| q.query_id.as_str()).collect();
    ids.sort_by(|a, b| id_order(a, b));
    ids
}

/// One id per line, ascending (numerically for numeric ids).
pub fn query_id_list<'a>(kept: impl IntoIterator<Item = &'a QueryRecord>) -> String {
    sorted_ids(kept).iter().fold(String::new(), |mut s, id| {
        s.push_str(id);
        s.push('\n');
        s
    })
}

pub fn emit_query_id_list<'a>(kept: impl IntoIterator<Item = &'a QueryRecord>, path: &Path) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(query_id_list(kept).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Reads a query id list back into a set.
pub fn read_id_list(path: &Path) -> Result<BTreeSet<String>> {
    Ok(read_lines(path)?
        .into_iter()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_exclusions() -> Vec<&'static str> {
        DEFAULT_EXCLUSIONS.lines().collect()
    }

    #[test]
    fn default_exclusions_are_the_seven_terms() {
        let mut got = default_exclusions();
        got.sort();
        assert_eq!(got, ["bing", "card", "died", "fall", "falls", "gas", "map"]);
    }

    #[test]
    fn excluded_single_terms_drop_out() {
        let lex = Lexicon::new(["gas", "asthma"], default_exclusions());
        assert_eq!(lex.effective_phrases(), ["asthma"]);
    }

    #[test]
    fn exclusions_never_touch_multi_token_phrases() {
        let lex = Lexicon::new(["gas gangrene", "gas"], default_exclusions());
        assert_eq!(lex.effective_phrases(), ["gas gangrene"]);
        assert!(lex.matches("is gas gangrene contagious"));
        assert!(!lex.matches("natural gas prices today"));
    }

    #[test]
    fn phrases_lowercased_and_deduplicated() {
        let lex = Lexicon::new(["Asthma", "asthma", "peritoneal cancer"], Vec::<&str>::new());
        assert_eq!(lex.phrases().len(), 2);
        assert!(lex.phrases().contains(&vec!["peritoneal".to_string(), "cancer".to_string()]));
    }

    #[test]
    fn contiguous_match_only() {
        let lex = Lexicon::new(["peritoneal cancer"], Vec::<&str>::new());
        assert!(lex.matches("causes of peritoneal cancer prognosis"));
        assert!(!lex.matches("peritoneal lining cancer"));
        assert!(!lex.matches("cancer peritoneal"));
    }

    #[test]
    fn matching_ignores_case_and_punctuation() {
        let lex = Lexicon::new(["cancer"], default_exclusions());
        assert!(lex.matches("Causes of peritoneal CANCER, prognosis?"));
        assert!(!lex.matches("cancerous growth"));
        assert!(!Lexicon::default().matches("cancer"));
    }

    #[test]
    fn retention_counts() {
        let lex = Lexicon::new(["fever"], default_exclusions());
        let qs = vec![
            QueryRecord::new("1", "what causes fever"),
            QueryRecord::new("2", "weather today"),
            QueryRecord::new("3", "price of gas"),
            QueryRecord::new("4", "how tall is everest"),
        ];
        let (kept, stats) = filter_queries(qs, &lex);
        assert_eq!(kept.len(), 1);
        assert_eq!(stats.ratio(), 0.25);
        assert_eq!(filter_queries(Vec::new(), &lex).1.ratio(), 0.0);
    }

    #[test]
    fn id_list_sorted_ascending() {
        let kept = vec![QueryRecord::new("7", "a"), QueryRecord::new("3", "b")];
        assert_eq!(query_id_list(&kept), "3\n7\n");
        assert_eq!(query_id_list(&[]), "");
        let numeric = vec![QueryRecord::new("100", "a"), QueryRecord::new("20", "b")];
        assert_eq!(query_id_list(&numeric), "20\n100\n");
    }
}
