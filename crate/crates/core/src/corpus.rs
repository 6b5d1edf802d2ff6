//! Corpus ingestion and the publication-date filter.
//!
//! Raw metadata arrives as CSV (one article per row, header-driven columns) with
//! optional per-article JSON full text. Everything downstream consumes the
//! canonical line-delimited JSON form written by [`write_jsonl`].

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Publication date as recorded in the metadata. Many articles carry only a year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PublishDate {
    Full(NaiveDate),
    Year(i32),
    Absent,
}

impl PublishDate {
    /// `YYYY-MM-DD` gives a full date, `YYYY` a year; anything else is absent.
    pub fn parse(raw: &str) -> Self {
        let raw = raw.trim();
        let bytes = raw.as_bytes();
        if bytes.len() == 4 && bytes.iter().all(u8::is_ascii_digit) {
            return raw.parse().map(PublishDate::Year).unwrap_or(PublishDate::Absent);
        }
        if bytes.len() == 10
            && bytes[4] == b'-'
            && bytes[7] == b'-'
            && bytes
                .iter()
                .enumerate()
                .all(|(i, b)| i == 4 || i == 7 || b.is_ascii_digit())
        {
            if let Ok(date) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
                return PublishDate::Full(date);
            }
        }
        PublishDate::Absent
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, PublishDate::Absent)
    }
}

impl fmt::Display for PublishDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PublishDate::Full(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            PublishDate::Year(y) => write!(f, "{y:04}"),
            PublishDate::Absent => Ok(()),
        }
    }
}

impl Serialize for PublishDate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PublishDate::Absent => s.serialize_none(),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for PublishDate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        Ok(raw.map_or(PublishDate::Absent, |r| PublishDate::parse(&r)))
    }
}

/// One corpus article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default)]
    pub paragraphs: Vec<String>,
    #[serde(default = "absent_date")]
    pub publish_date: PublishDate,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

fn absent_date() -> PublishDate {
    PublishDate::Absent
}

impl Document {
    pub fn new(doc_id: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            title: String::new(),
            abstract_text: String::new(),
            paragraphs: Vec::new(),
            publish_date: PublishDate::Absent,
            extra: BTreeMap::new(),
        }
    }

    /// Title, abstract and every paragraph, in that order.
    pub fn full_text(&self) -> String {
        let mut parts = vec![self.title.as_str(), self.abstract_text.as_str()];
        parts.extend(self.paragraphs.iter().map(String::as_str));
        join_nonempty(&parts)
    }

    pub fn title_and_abstract(&self) -> String {
        join_nonempty(&[self.title.as_str(), self.abstract_text.as_str()])
    }
}

fn join_nonempty(parts: &[&str]) -> String {
    parts
        .iter()
        .filter(|p| !p.trim().is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateFilterPolicy {
    pub cutoff: NaiveDate,
    pub keep_undated: bool,
}

impl Default for DateFilterPolicy {
    fn default() -> Self {
        DateFilterPolicy {
            cutoff: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            keep_undated: false,
        }
    }
}

impl DateFilterPolicy {
    pub fn keeps(&self, doc: &Document) -> bool {
        match doc.publish_date {
            PublishDate::Full(date) => date >= self.cutoff,
            PublishDate::Year(year) => year >= self.cutoff.year(),
            PublishDate::Absent => self.keep_undated,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterStats {
    pub kept: usize,
    pub dropped: usize,
    /// Documents without any date, whether kept or dropped.
    pub undated: usize,
}

impl FilterStats {
    pub fn record(&mut self, doc: &Document, kept: bool) {
        if kept {
            self.kept += 1;
        } else {
            self.dropped += 1;
        }
        if doc.publish_date.is_absent() {
            self.undated += 1;
        }
    }
}

/// Keeps documents the policy admits, preserving order.
pub fn filter_by_date<I>(docs: I, policy: &DateFilterPolicy) -> (Vec<Document>, FilterStats)
where
    I: IntoIterator<Item = Document>,
{
    let mut stats = FilterStats::default();
    let kept = docs
        .into_iter()
        .filter(|doc| {
            let keep = policy.keeps(doc);
            stats.record(doc, keep);
            keep
        })
        .collect();
    (kept, stats)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub rows: usize,
    pub documents: usize,
    pub malformed: usize,
    pub fulltext_loaded: usize,
    pub fulltext_errors: usize,
}

const ID_COLUMNS: &[&str] = &["doc_id", "cord_uid", "id"];
const TITLE_COLUMNS: &[&str] = &["title"];
const ABSTRACT_COLUMNS: &[&str] = &["abstract"];
const DATE_COLUMNS: &[&str] = &["publish_date", "publish_time", "date"];

const BATCH_ROWS: usize = 512;

struct Columns {
    id: usize,
    title: usize,
    abstract_text: usize,
    date: usize,
    names: Vec<String>,
}

impl Columns {
    fn resolve(header: &csv::StringRecord) -> Result<Self> {
        let names: Vec<String> = header.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
        let find = |aliases: &[&str]| {
            aliases
                .iter()
                .find_map(|alias| names.iter().position(|n| n == alias))
                .ok_or_else(|| Error::MissingColumn(aliases[0].to_string()))
        };
        Ok(Columns {
            id: find(ID_COLUMNS)?,
            title: find(TITLE_COLUMNS)?,
            abstract_text: find(ABSTRACT_COLUMNS)?,
            date: find(DATE_COLUMNS)?,
            names,
        })
    }
}

/// Streams [`Document`]s out of a CSV metadata file, in file order.
///
/// Rows are read in batches; full-text loading within a batch runs in
/// parallel and the batch is re-emitted in row order.
pub struct CorpusReader {
    records: csv::StringRecordsIntoIter<File>,
    columns: Columns,
    fulltext_dir: Option<PathBuf>,
    seen: HashSet<String>,
    pending: VecDeque<Document>,
    stats: IngestStats,
    exhausted: bool,
}

/// Opens a metadata CSV for streaming ingestion.
pub fn parse_corpus(metadata_file: &Path, fulltext_dir: Option<&Path>) -> Result<CorpusReader> {
    let file = File::open(metadata_file).map_err(|e| Error::io(metadata_file, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::parse(metadata_file, 1, e.to_string()))?
        .clone();
    let columns = Columns::resolve(&header)?;
    Ok(CorpusReader {
        records: reader.into_records(),
        columns,
        fulltext_dir: fulltext_dir.map(Path::to_path_buf),
        seen: HashSet::new(),
        pending: VecDeque::new(),
        stats: IngestStats::default(),
        exhausted: false,
    })
}

enum Loaded {
    Missing,
    Paragraphs(Vec<String>),
    Failed(String),
}

impl CorpusReader {
    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    fn fill(&mut self) {
        let mut batch = Vec::with_capacity(BATCH_ROWS);
        while batch.len() < BATCH_ROWS {
            match self.records.next() {
                None => {
                    self.exhausted = true;
                    break;
                }
                Some(record) => {
                    self.stats.rows += 1;
                    match record.ok().and_then(|r| self.row_to_document(&r)) {
                        Some(doc) => batch.push(doc),
                        None => self.stats.malformed += 1,
                    }
                }
            }
        }

        let loaded: Vec<Loaded> = match &self.fulltext_dir {
            Some(dir) => batch.par_iter().map(|doc| load_fulltext(dir, &doc.doc_id)).collect(),
            None => Vec::new(),
        };
        for (i, mut doc) in batch.into_iter().enumerate() {
            match loaded.get(i) {
                Some(Loaded::Paragraphs(p)) => {
                    doc.paragraphs = p.clone();
                    self.stats.fulltext_loaded += 1;
                }
                Some(Loaded::Failed(msg)) => {
                    log::warn!("full text for {}: {msg}", doc.doc_id);
                    self.stats.fulltext_errors += 1;
                }
                Some(Loaded::Missing) | None => {}
            }
            self.stats.documents += 1;
            self.pending.push_back(doc);
        }
    }

    fn row_to_document(&mut self, record: &csv::StringRecord) -> Option<Document> {
        let cols = &self.columns;
        let id = record.get(cols.id)?.trim();
        if id.is_empty() || !self.seen.insert(id.to_string()) {
            return None;
        }
        let mut doc = Document::new(id);
        doc.title = record.get(cols.title)?.trim().to_string();
        doc.abstract_text = record.get(cols.abstract_text)?.trim().to_string();
        doc.publish_date = PublishDate::parse(record.get(cols.date)?);
        for (i, value) in record.iter().enumerate() {
            if i == cols.id || i == cols.title || i == cols.abstract_text || i == cols.date {
                continue;
            }
            if !value.trim().is_empty() {
                if let Some(name) = cols.names.get(i) {
                    doc.extra.insert(name.clone(), value.trim().to_string());
                }
            }
        }
        Some(doc)
    }
}

impl Iterator for CorpusReader {
    type Item = Document;

    fn next(&mut self) -> Option<Document> {
        while self.pending.is_empty() && !self.exhausted {
            self.fill();
        }
        self.pending.pop_front()
    }
}

#[derive(Deserialize)]
struct FullTextJson {
    #[serde(default)]
    paragraphs: Option<Vec<String>>,
    #[serde(default)]
    body_text: Option<Vec<BodyParagraph>>,
}

#[derive(Deserialize)]
struct BodyParagraph {
    text: String,
}

fn load_fulltext(dir: &Path, doc_id: &str) -> Loaded {
    let path = dir.join(format!("{doc_id}.json"));
    let raw = match std::fs::read_to_string(&path) {
        Ok(raw) => raw,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Loaded::Missing,
        Err(e) => return Loaded::Failed(e.to_string()),
    };
    match serde_json::from_str::<FullTextJson>(&raw) {
        Ok(FullTextJson {
            paragraphs: Some(p), ..
        }) => Loaded::Paragraphs(p),
        Ok(FullTextJson {
            body_text: Some(body),
            ..
        }) => Loaded::Paragraphs(body.into_iter().map(|b| b.text).collect()),
        Ok(_) => Loaded::Failed("neither `paragraphs` nor `body_text` present".into()),
        Err(e) => Loaded::Failed(e.to_string()),
    }
}

/// Writes documents as line-delimited JSON.
pub fn write_jsonl<'a, I>(path: &Path, docs: I) -> Result<usize>
where
    I: IntoIterator<Item = &'a Document>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut n = 0;
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        n += 1;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(n)
}

/// Streams documents back out of a line-delimited JSON file.
pub fn read_jsonl(path: &Path) -> Result<impl Iterator<Item = Result<Document>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let path = path.to_path_buf();
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Err(e) => Some(Err(Error::io(&path, e))),
            Ok(line) if line.trim().is_empty() => None,
            Ok(line) => Some(
                serde_json::from_str::<Document>(&line)
                    .map_err(|e| Error::parse(&path, i + 1, e.to_string())),
            ),
        }))
}

/// Reads a whole JSONL corpus into memory, rejecting duplicate ids.
pub fn load_jsonl(path: &Path) -> Result<Vec<Document>> {
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for doc in read_jsonl(path)? {
        let doc = doc?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::InvalidArgument(format!(
                "{}: duplicate doc_id {}",
                path.display(),
                doc.doc_id
            )));
        }
        docs.push(doc);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dated(id: &str, raw: &str) -> Document {
        let mut d = Document::new(id);
        d.publish_date = PublishDate::parse(raw);
        d
    }

    #[test]
    fn parses_date_shapes() {
        assert_eq!(
            PublishDate::parse("2020-03-15"),
            PublishDate::Full(NaiveDate::from_ymd_opt(2020, 3, 15).unwrap())
        );
        assert_eq!(PublishDate::parse("2019"), PublishDate::Year(2019));
        assert_eq!(PublishDate::parse(""), PublishDate::Absent);
        assert_eq!(PublishDate::parse("2020-02-30"), PublishDate::Absent);
        assert_eq!(PublishDate::parse("2020-03"), PublishDate::Absent);
        assert_eq!(PublishDate::parse("March 2020"), PublishDate::Absent);
        assert_eq!(PublishDate::parse(" 2021 "), PublishDate::Year(2021));
    }

    #[test]
    fn cutoff_semantics() {
        let policy = DateFilterPolicy::default();
        assert!(policy.keeps(&dated("a", "2020-03-15")));
        assert!(policy.keeps(&dated("a", "2020-01-01")));
        assert!(!policy.keeps(&dated("a", "2019-12-31")));
        assert!(policy.keeps(&dated("a", "2020")));
        assert!(!policy.keeps(&dated("a", "2019")));
        assert!(!policy.keeps(&dated("a", "")));
        let lenient = DateFilterPolicy {
            keep_undated: true,
            ..policy
        };
        assert!(lenient.keeps(&dated("a", "")));
    }

    #[test]
    fn year_only_compares_by_year_even_with_mid_year_cutoff() {
        let policy = DateFilterPolicy {
            cutoff: NaiveDate::from_ymd_opt(2020, 6, 1).unwrap(),
            keep_undated: false,
        };
        assert!(policy.keeps(&dated("a", "2020")));
        assert!(!policy.keeps(&dated("a", "2020-05-31")));
    }

    #[test]
    fn filter_counts_add_up() {
        let docs = vec![
            dated("a", "2020-03-15"),
            dated("b", "2019-12-31"),
            dated("c", ""),
            dated("d", "2021"),
        ];
        let (kept, stats) = filter_by_date(docs, &DateFilterPolicy::default());
        let ids: Vec<_> = kept.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "d"]);
        assert_eq!(
            stats,
            FilterStats {
                kept: 2,
                dropped: 2,
                undated: 1
            }
        );
    }

    #[test]
    fn jsonl_uses_fixed_field_names() {
        let mut d = dated("x1", "2019");
        d.title = "T".into();
        d.abstract_text = "A".into();
        let line = serde_json::to_string(&d).unwrap();
        assert_eq!(
            line,
            r#"{"doc_id":"x1","title":"T","abstract":"A","paragraphs":[],"publish_date":"2019"}"#
        );
        let undated = serde_json::to_string(&Document::new("y")).unwrap();
        assert!(undated.contains(r#""publish_date":null"#));
        let back: Document = serde_json::from_str(&line).unwrap();
        assert_eq!(back, d);
    }
}
