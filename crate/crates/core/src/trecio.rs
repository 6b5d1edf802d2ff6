//! TREC topics, qrels and run files.
//!
//! Run files are written so that the line order equals the order the
//! reference evaluator would sort them into: score descending, then doc id
//! descending. Scores are compared at the printed precision so that a file
//! read back and written again is byte-identical.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub topic_id: String,
    pub query: Option<String>,
    pub question: String,
    pub narrative: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopicFormat {
    Tsv,
    TrecXml,
}

impl std::str::FromStr for TopicFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(TopicFormat::Tsv),
            "xml" | "trec_xml" | "trec-xml" => Ok(TopicFormat::TrecXml),
            other => Err(Error::InvalidArgument(format!("unknown topic format `{other}`"))),
        }
    }
}

fn non_empty(s: &str) -> Option<String> {
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_string())
}

pub fn parse_topics(path: &Path, format: TopicFormat) -> Result<Vec<Topic>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        TopicFormat::Tsv => parse_topics_tsv(&text, path),
        TopicFormat::TrecXml => parse_topics_xml(&text, path),
    }
}

/// `topic_id<TAB>query<TAB>question[<TAB>narrative]`, one topic per line.
pub fn parse_topics_tsv(text: &str, origin: &Path) -> Result<Vec<Topic>> {
    let mut topics = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::parse(
                origin,
                i + 1,
                format!("expected 3 or 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let topic_id = non_empty(fields[0])
            .ok_or_else(|| Error::parse(origin, i + 1, "empty topic id"))?;
        let question = non_empty(fields[2])
            .ok_or_else(|| Error::parse(origin, i + 1, "empty question"))?;
        topics.push(Topic {
            topic_id,
            query: non_empty(fields[1]),
            question,
            narrative: fields.get(3).and_then(|n| non_empty(n)),
        });
    }
    Ok(topics)
}

/// TREC-COVID layout: `<topics><topic number="1"><query/><question/><narrative/></topic>…</topics>`.
pub fn parse_topics_xml(text: &str, origin: &Path) -> Result<Vec<Topic>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let doc = roxmltree::Document::parse(text)
        .map_err(|e| Error::parse(origin, e.pos().row as usize, e.to_string()))?;
    let line_of = |node: roxmltree::Node| doc.text_pos_at(node.range().start).row as usize;

    let mut topics = Vec::new();
    for node in doc.root_element().children().filter(|n| n.is_element()) {
        if node.tag_name().name() != "topic" {
            return Err(Error::parse(
                origin,
                line_of(node),
                format!("unexpected element <{}>", node.tag_name().name()),
            ));
        }
        let field = |name: &str| {
            node.children()
                .find(|c| c.is_element() && c.tag_name().name() == name)
                .map(|c| c.text().unwrap_or("").to_string())
        };
        let topic_id = node
            .attribute("number")
            .and_then(non_empty)
            .ok_or_else(|| Error::parse(origin, line_of(node), "topic without number attribute"))?;
        let question = field("question")
            .as_deref()
            .and_then(non_empty)
            .ok_or_else(|| Error::parse(origin, line_of(node), "topic without question"))?;
        topics.push(Topic {
            topic_id,
            query: field("query").as_deref().and_then(non_empty),
            question,
            narrative: field("narrative").as_deref().and_then(non_empty),
        });
    }
    Ok(topics)
}

/// Graded judgments: topic → doc → grade in {0, 1, 2}.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QrelSet {
    judgments: BTreeMap<String, BTreeMap<String, u8>>,
}

pub const MAX_GRADE: u8 = 2;

impl QrelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, topic: &str, doc: &str, grade: u8) -> Result<()> {
        if grade > MAX_GRADE {
            return Err(Error::InvalidArgument(format!(
                "grade {grade} outside 0..={MAX_GRADE}"
            )));
        }
        self.judgments
            .entry(topic.to_string())
            .or_default()
            .insert(doc.to_string(), grade);
        Ok(())
    }

    pub fn grade(&self, topic: &str, doc: &str) -> Option<u8> {
        self.judgments.get(topic)?.get(doc).copied()
    }

    pub fn topic(&self, topic: &str) -> Option<&BTreeMap<String, u8>> {
        self.judgments.get(topic)
    }

    pub fn topics(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, u8>)> {
        self.judgments.iter().map(|(t, j)| (t.as_str(), j))
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Judgments for the given topics only.
    pub fn restrict<'a>(&self, topics: impl IntoIterator<Item = &'a str>) -> QrelSet {
        let mut out = QrelSet::new();
        for t in topics {
            if let Some(j) = self.judgments.get(t) {
                out.judgments.insert(t.to_string(), j.clone());
            }
        }
        out
    }
}

/// Whitespace-separated `qid iter docid grade` lines; later duplicates win.
pub fn parse_qrels(path: &Path) -> Result<QrelSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut qrels = QrelSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected 4 columns, found {}", cols.len()),
            ));
        }
        let grade: i64 = cols[3]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("non-integer grade `{}`", cols[3])))?;
        if !(0..=MAX_GRADE as i64).contains(&grade) {
            return Err(Error::parse(
                path,
                i + 1,
                format!("grade {grade} outside 0..={MAX_GRADE}"),
            ));
        }
        qrels.insert(cols[0], cols[2], grade as u8)?;
    }
    Ok(qrels)
}

pub fn write_qrels(qrels: &QrelSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut topics: Vec<_> = qrels.judgments.keys().collect();
    topics.sort_by(|a, b| id_order(a, b));
    for topic in topics {
        for (doc, grade) in &qrels.judgments[topic] {
            writeln!(out, "{topic} 0 {doc} {grade}").map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Numeric ids sort numerically and before non-numeric ids, which sort lexicographically.
pub fn id_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

impl ScoredDoc {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        ScoredDoc {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// Score as it appears in a run file.
pub fn format_score(score: f64) -> String {
    format!("{score:.6}")
}

fn printed_score(score: f64) -> f64 {
    format_score(score).parse().unwrap_or(score)
}

/// Sorts by printed score descending, then doc id descending.
pub fn canonical_sort(docs: &mut [ScoredDoc]) {
    docs.sort_by_cached_key(|d| (std::cmp::Reverse(OrdScore(printed_score(d.score))), std::cmp::Reverse(d.doc_id.clone())));
}

/// Printed score as a sort key; `-0.000000` and `0.000000` compare equal,
/// as they do when trec_eval parses them.
struct OrdScore(f64);

impl PartialEq for OrdScore {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OrdScore {}

impl PartialOrd for OrdScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdScore {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.0 + 0.0).total_cmp(&(other.0 + 0.0))
    }
}

/// A ranked result list per topic. Lists are always held in canonical order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Run {
    pub tag: String,
    entries: BTreeMap<String, Vec<ScoredDoc>>,
}

fn check_id(kind: &str, id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(Error::InvalidRun(format!("{kind} id {id:?} is empty or contains whitespace")));
    }
    Ok(())
}

impl Run {
    pub fn new(tag: impl Into<String>) -> Self {
        Run {
            tag: tag.into(),
            entries: BTreeMap::new(),
        }
    }

    /// Replaces the list for `topic`, validating and canonically ordering it.
    pub fn insert(&mut self, topic: &str, mut docs: Vec<ScoredDoc>) -> Result<()> {
        check_id("topic", topic)?;
        let mut seen = HashSet::with_capacity(docs.len());
        for d in &docs {
            check_id("doc", &d.doc_id)?;
            if !d.score.is_finite() {
                return Err(Error::InvalidRun(format!(
                    "topic {topic}: non-finite score for {}",
                    d.doc_id
                )));
            }
            if !seen.insert(d.doc_id.as_str()) {
                return Err(Error::InvalidRun(format!(
                    "topic {topic}: duplicate doc {}",
                    d.doc_id
                )));
            }
        }
        canonical_sort(&mut docs);
        self.entries.insert(topic.to_string(), docs);
        Ok(())
    }

    pub fn get(&self, topic: &str) -> Option<&[ScoredDoc]> {
        self.entries.get(topic).map(Vec::as_slice)
    }

    pub fn topics(&self) -> impl Iterator<Item = (&str, &[ScoredDoc])> {
        self.entries.iter().map(|(t, d)| (t.as_str(), d.as_slice()))
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Renders the run in trec_eval format.
    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        let mut topics: Vec<&String> = self.entries.keys().collect();
        topics.sort_by(|a, b| id_order(a, b));
        for topic in topics {
            for (rank, d) in self.entries[topic].iter().enumerate() {
                out.push_str(&format!(
                    "{topic} Q0 {} {} {} {}\n",
                    d.doc_id,
                    rank + 1,
                    format_score(d.score),
                    self.tag
                ));
            }
        }
        out
    }
}

pub fn write_run(run: &Run, path: &Path) -> Result<()> {
    check_id("run tag", &run.tag)?;
    std::fs::write(path, run.to_trec_string()).map_err(|e| Error::io(path, e))
}

pub fn read_run(path: &Path) -> Result<Run> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run(&text, path)
}

/// Parses `topic Q0 doc rank score tag` lines. The rank column is validated
/// but ignored; ordering is recomputed from scores.
pub fn parse_run(text: &str, origin: &Path) -> Result<Run> {
    let mut tag: Option<String> = None;
    let mut lists: BTreeMap<String, Vec<ScoredDoc>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(Error::parse(
                origin,
                i + 1,
                format!("expected 6 columns, found {}", cols.len()),
            ));
        }
        cols[3]
            .parse::<u64>()
            .map_err(|_| Error::parse(origin, i + 1, format!("bad rank `{}`", cols[3])))?;
        let score: f64 = cols[4]
            .parse()
            .map_err(|_| Error::parse(origin, i + 1, format!("bad score `{}`", cols[4])))?;
        if !score.is_finite() {
            return Err(Error::parse(origin, i + 1, "non-finite score"));
        }
        match &tag {
            None => tag = Some(cols[5].to_string()),
            Some(t) if t != cols[5] => {
                log::warn!("{}:{}: run tag {} differs from {}", origin.display(), i + 1, cols[5], t)
            }
            Some(_) => {}
        }
        lists
            .entry(cols[0].to_string())
            .or_default()
            .push(ScoredDoc::new(cols[2], score));
    }
    let mut run = Run::new(tag.unwrap_or_default());
    for (topic, docs) in lists {
        run.insert(&topic, docs).map_err(|e| Error::parse(origin, 0, e.to_string()))?;
    }
    Ok(run)
}
