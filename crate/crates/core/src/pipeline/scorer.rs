//! Re-ranker wire protocol.
//!
//! Requests are `pair_id<TAB>query<TAB>doc` lines and responses are
//! `pair_id<TAB>score` lines, UTF-8, one record per line. Over a pipe the
//! scorer reads to end of input and then closes its output. Over TCP each
//! batch, in both directions, is terminated by a `##END##` line and the
//! connection may carry any number of batches.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::process::{Command, Stdio};

use crate::error::{Error, Result, ScorerError};
use crate::trecio::QrelSet;

pub const BATCH_END: &str = "##END##";
/// Response score token for a request the server could not handle.
pub const ERR_TOKEN: &str = "ERR";

/// Replaces tabs and line breaks with spaces so a text fits in one field.
pub fn sanitize(text: &str) -> String {
    text.replace(['\t', '\n', '\r'], " ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScorePair {
    pub pair_id: String,
    pub query: String,
    pub doc: String,
}

impl ScorePair {
    pub fn new(pair_id: impl Into<String>, query: impl Into<String>, doc: impl Into<String>) -> Self {
        ScorePair {
            pair_id: pair_id.into(),
            query: query.into(),
            doc: doc.into(),
        }
    }

    fn request_line(&self) -> String {
        format!("{}\t{}\t{}", self.pair_id, sanitize(&self.query), sanitize(&self.doc))
    }
}

/// A transport that exchanges one batch of request lines for response lines.
pub trait Scorer: Send {
    fn exchange(&mut self, requests: &[String]) -> Result<Vec<String>, ScorerError>;
}

/// Scores `pairs` and returns `(pair_id, score)` in request order.
///
/// Texts are sanitized before sending. The response must cover every
/// request exactly once with a finite score, in any order.
pub fn score_pairs(scorer: &mut dyn Scorer, pairs: &[ScorePair]) -> Result<Vec<(String, f64)>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let mut ids = HashSet::with_capacity(pairs.len());
    for p in pairs {
        if p.pair_id.is_empty() || p.pair_id.contains(['\t', '\n', '\r']) {
            return Err(Error::InvalidArgument(format!("pair id {:?} is empty or contains a tab or line break", p.pair_id)));
        }
        if !ids.insert(p.pair_id.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate pair id {}", p.pair_id)));
        }
    }
    let requests: Vec<String> = pairs.iter().map(ScorePair::request_line).collect();
    let responses = scorer.exchange(&requests)?;
    let scores = parse_responses(&responses, &ids)?;
    Ok(pairs.iter().map(|p| (p.pair_id.clone(), scores[p.pair_id.as_str()])).collect())
}

fn parse_responses<'a>(lines: &[String], expected: &HashSet<&'a str>) -> Result<HashMap<&'a str, f64>, ScorerError> {
    let mut scores: HashMap<&str, f64> = HashMap::with_capacity(expected.len());
    for line in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (id, raw) = line
            .rsplit_once('\t')
            .ok_or_else(|| ScorerError::Protocol(format!("malformed response line {line:?}")))?;
        let id = *expected
            .get(id)
            .ok_or_else(|| ScorerError::Protocol(format!("response for unknown pair id {id:?}")))?;
        if raw.trim() == ERR_TOKEN {
            return Err(ScorerError::Protocol(format!("scorer reported an error for pair {id}")));
        }
        let score: f64 = raw
            .trim()
            .parse()
            .map_err(|_| ScorerError::Protocol(format!("pair {id}: unparseable score {raw:?}")))?;
        if !score.is_finite() {
            return Err(ScorerError::Protocol(format!("pair {id}: non-finite score {raw}")));
        }
        if scores.insert(id, score).is_some() {
            return Err(ScorerError::Protocol(format!("duplicate response for pair {id}")));
        }
    }
    if scores.len() != expected.len() {
        let mut missing: Vec<&str> = expected.iter().filter(|id| !scores.contains_key(*id)).copied().collect();
        missing.sort_unstable();
        let shown = missing.iter().take(5).copied().collect::<Vec<_>>().join(", ");
        return Err(ScorerError::Protocol(format!(
            "expected {} responses, got {}; missing {shown}{}",
            expected.len(),
            scores.len(),
            if missing.len() > 5 { ", ..." } else { "" }
        )));
    }
    Ok(scores)
}

/// Spawns `sh -c <command>` once per batch.
#[derive(Debug, Clone)]
pub struct SubprocessScorer {
    pub command: String,
}

impl Scorer for SubprocessScorer {
    fn exchange(&mut self, requests: &[String]) -> Result<Vec<String>, ScorerError> {
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        let transport = |what: &str, e: std::io::Error| ScorerError::Transport(format!("`{}`: {what}: {e}", self.command));
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| transport("spawn failed", e))?;
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let payload: String = requests.iter().flat_map(|r| [r.as_str(), "\n"]).collect();
        // Feed stdin from a separate thread so a scorer that answers while
        // still reading cannot deadlock on a full pipe.
        let writer = std::thread::spawn(move || stdin.write_all(payload.as_bytes()));
        let stdout = child.stdout.take().expect("stdout is piped");
        let lines: std::io::Result<Vec<String>> = BufReader::new(stdout).lines().collect();
        let write_result = writer.join().map_err(|_| ScorerError::Transport("writer thread panicked".into()))?;
        let status = child.wait().map_err(|e| transport("wait failed", e))?;
        let lines = lines.map_err(|e| transport("read failed", e))?;
        if !status.success() {
            return Err(ScorerError::Transport(format!("`{}` exited with {status}", self.command)));
        }
        if let Err(e) = write_result {
            return Err(transport("scorer closed its input early", e));
        }
        Ok(lines)
    }
}

/// Client for a scorer listening on `host:port`. The connection is opened on
/// first use and kept for later batches.
#[derive(Debug)]
pub struct TcpScorer {
    pub addr: String,
    conn: Option<(TcpStream, BufReader<TcpStream>)>,
}

impl TcpScorer {
    pub fn new(addr: impl Into<String>) -> Self {
        TcpScorer {
            addr: addr.into(),
            conn: None,
        }
    }

    fn connect(&mut self) -> Result<&mut (TcpStream, BufReader<TcpStream>), ScorerError> {
        if self.conn.is_none() {
            let transport = |e: std::io::Error| ScorerError::Transport(format!("{}: {e}", self.addr));
            let addr = self
                .addr
                .to_socket_addrs()
                .map_err(transport)?
                .next()
                .ok_or_else(|| ScorerError::Transport(format!("{}: no address", self.addr)))?;
            let stream = TcpStream::connect(addr).map_err(transport)?;
            let reader = BufReader::new(stream.try_clone().map_err(transport)?);
            self.conn = Some((stream, reader));
        }
        Ok(self.conn.as_mut().expect("just connected"))
    }
}

impl Scorer for TcpScorer {
    fn exchange(&mut self, requests: &[String]) -> Result<Vec<String>, ScorerError> {
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        let addr = self.addr.clone();
        let transport = move |e: std::io::Error| ScorerError::Transport(format!("{addr}: {e}"));
        let (stream, reader) = self.connect()?;
        let mut payload: String = requests.iter().flat_map(|r| [r.as_str(), "\n"]).collect();
        payload.push_str(BATCH_END);
        payload.push('\n');
        let mut w = stream.try_clone().map_err(&transport)?;
        let writer = std::thread::spawn(move || w.write_all(payload.as_bytes()).and_then(|_| w.flush()));

        let mut out = Vec::with_capacity(requests.len());
        let mut line = String::new();
        let result = loop {
            line.clear();
            match reader.read_line(&mut line) {
                Ok(0) => break Err(ScorerError::Transport(format!("{}: connection closed mid-batch", self.addr))),
                Ok(_) => {
                    let l = line.trim_end_matches(['\n', '\r']);
                    if l == BATCH_END {
                        break Ok(());
                    }
                    out.push(l.to_string());
                }
                Err(e) => break Err(transport(e)),
            }
        };
        let write_result = writer.join().map_err(|_| ScorerError::Transport("writer thread panicked".into()))?;
        if result.is_err() || write_result.is_err() {
            self.conn = None;
        }
        result?;
        write_result.map_err(transport)?;
        Ok(out)
    }
}

/// Where the scorer lives: exactly one transport.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScorerHandle {
    Pipe(String),
    Tcp(String),
}

impl ScorerHandle {
    pub fn connect(&self) -> Box<dyn Scorer> {
        match self {
            ScorerHandle::Pipe(cmd) => Box::new(SubprocessScorer { command: cmd.clone() }),
            ScorerHandle::Tcp(addr) => Box::new(TcpScorer::new(addr.clone())),
        }
    }
}

/// Scoring logic run in-process; see [`InProcess`] and the `serve_*` helpers.
pub trait ScoreFn: Send + Sync {
    /// `None` marks a request this scorer cannot answer.
    fn score(&self, pair_id: &str, query: &str, doc: &str) -> Option<f64>;
}

/// Score = length of the document text in characters.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoScorer;

impl ScoreFn for EchoScorer {
    fn score(&self, _: &str, _: &str, doc: &str) -> Option<f64> {
        Some(doc.chars().count() as f64)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl ScoreFn for ConstantScorer {
    fn score(&self, _: &str, _: &str, _: &str) -> Option<f64> {
        Some(self.0)
    }
}

/// Planted oracle: the judged grade of the pair, 0 when unjudged. Needs pair
/// ids of the form `topic_id doc_id`, as produced by the re-ranker.
#[derive(Debug, Clone)]
pub struct GradeScorer(pub QrelSet);

impl ScoreFn for GradeScorer {
    fn score(&self, pair_id: &str, _: &str, _: &str) -> Option<f64> {
        let (topic, doc) = pair_id.split_once(' ')?;
        Some(self.0.grade(topic, doc).unwrap_or(0) as f64)
    }
}

/// Answers one request line the way a conforming server must.
pub fn respond(f: &dyn ScoreFn, line: &str) -> String {
    let line = line.trim_end_matches('\r');
    let mut parts = line.splitn(3, '\t');
    let id = parts.next().unwrap_or_default();
    match (parts.next(), parts.next()) {
        (Some(q), Some(d)) => match f.score(id, q, d) {
            Some(s) if s.is_finite() => format!("{id}\t{s}"),
            _ => format!("{id}\t{ERR_TOKEN}"),
        },
        _ => format!("{id}\t{ERR_TOKEN}"),
    }
}

/// Adapter that runs a [`ScoreFn`] behind the line protocol without a
/// process boundary.
pub struct InProcess<F: ScoreFn>(pub F);

impl<F: ScoreFn> Scorer for InProcess<F> {
    fn exchange(&mut self, requests: &[String]) -> Result<Vec<String>, ScorerError> {
        Ok(requests.iter().map(|r| respond(&self.0, r)).collect())
    }
}

/// Pipe-mode server loop: one response per request line until end of input.
pub fn serve_lines(f: &dyn ScoreFn, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        writeln!(output, "{}", respond(f, &line))?;
    }
    output.flush()
}

/// Serves one TCP connection until the client disconnects.
pub fn serve_connection(f: &dyn ScoreFn, stream: TcpStream) -> std::io::Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    let mut out = std::io::BufWriter::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim_end_matches('\r') == BATCH_END {
            writeln!(out, "{BATCH_END}")?;
            out.flush()?;
        } else if !line.is_empty() {
            writeln!(out, "{}", respond(f, &line))?;
        }
    }
    out.flush()
}

/// Accepts connections forever (or until `max_connections` have been
/// served), one thread per connection.
pub fn serve_tcp<F: ScoreFn + 'static>(f: F, listener: TcpListener, max_connections: Option<usize>) -> std::io::Result<()> {
    let f = std::sync::Arc::new(f);
    let mut workers = Vec::new();
    for (served, conn) in listener.incoming().enumerate() {
        let stream = conn?;
        let f = f.clone();
        workers.push(std::thread::spawn(move || {
            if let Err(e) = serve_connection(f.as_ref(), stream) {
                log::warn!("scorer connection ended with an error: {e}");
            }
        }));
        if max_connections.is_some_and(|m| served + 1 >= m) {
            break;
        }
    }
    for w in workers {
        let _ = w.join();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Canned(Vec<String>);

    impl Scorer for Canned {
        fn exchange(&mut self, _: &[String]) -> Result<Vec<String>, ScorerError> {
            Ok(self.0.clone())
        }
    }

    fn pairs(n: usize) -> Vec<ScorePair> {
        (0..n).map(|i| ScorePair::new(format!("p{i}"), "q", "x".repeat(i + 1))).collect()
    }

    fn canned(lines: &[&str]) -> Canned {
        Canned(lines.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn echo_in_process() {
        let got = score_pairs(&mut InProcess(EchoScorer), &pairs(3)).unwrap();
        assert_eq!(got, vec![("p0".into(), 1.0), ("p1".into(), 2.0), ("p2".into(), 3.0)]);
        assert!(score_pairs(&mut InProcess(EchoScorer), &[]).unwrap().is_empty());
    }

    #[test]
    fn sanitized_texts_reach_the_scorer() {
        let p = [ScorePair::new("a", "tab\there", "line\nbreak\r\n")];
        let got = score_pairs(&mut InProcess(EchoScorer), &p).unwrap();
        assert_eq!(got[0].1, "line break  ".chars().count() as f64);
    }

    #[test]
    fn protocol_violations() {
        let p = pairs(2);
        for bad in [
            vec!["p0\t1", "p1\t2", "zz\t3"],
            vec!["p0\t1", "p0\t2", "p1\t3"],
            vec!["p0\t1"],
            vec!["p0\t1", "p1\tNaN"],
            vec!["p0\t1", "p1\tinf"],
            vec!["p0\t1", "p1\tERR"],
            vec!["p0 1", "p1\t2"],
        ] {
            let err = score_pairs(&mut canned(&bad), &p).unwrap_err();
            assert!(matches!(err, Error::Scorer(ScorerError::Protocol(_))), "{bad:?}: {err}");
        }
        let ok = score_pairs(&mut canned(&["p1\t2.5", "p0\t-1", ""]), &p).unwrap();
        assert_eq!(ok, vec![("p0".into(), -1.0), ("p1".into(), 2.5)]);
    }

    #[test]
    fn duplicate_request_ids_rejected() {
        let p = [ScorePair::new("a", "q", "d"), ScorePair::new("a", "q", "e")];
        assert!(matches!(score_pairs(&mut InProcess(EchoScorer), &p), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn malformed_request_gets_err_line() {
        assert_eq!(respond(&EchoScorer, "id-only"), "id-only\tERR");
        assert_eq!(respond(&EchoScorer, "x\tq\tabc"), "x\t3");
    }

    #[test]
    fn grade_scorer_reads_pair_ids() {
        let mut q = QrelSet::new();
        q.insert("7", "docA", 2).unwrap();
        let g = GradeScorer(q);
        assert_eq!(g.score("7 docA", "", ""), Some(2.0));
        assert_eq!(g.score("7 docB", "", ""), Some(0.0));
        assert_eq!(g.score("nospace", "", ""), None);
    }
}
