//! Training-data plumbing for the external scorer.
//!
//! Covers sampling training triples restricted to a query subset, the
//! pairwise softmax loss and its gradient, early stopping over validation
//! events, and the BM25-candidate validation bundle.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{evaluate, Metric, MetricReport};
use crate::index::{Bm25Params, InvertedIndex};
use crate::lexfilter::QueryRecord;
use crate::pipeline::scorer::{sanitize, score_pairs, ScorePair, Scorer};
use crate::pipeline::pair_id;
use crate::trecio::{id_order, QrelSet, Run, ScoredDoc};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainTriple {
    pub query_id: String,
    pub query_text: String,
    pub pos_text: String,
    pub neg_text: String,
}

/// Reads `id<TAB>text` lines into a map (queries or passages).
pub fn read_id_text_map(path: &Path) -> Result<HashMap<String, String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected `id<TAB>text`"))?;
        out.insert(id.trim().to_string(), text.trim_end_matches('\r').to_string());
    }
    Ok(out)
}

/// Streams triples from a `query_id<TAB>pos_id<TAB>neg_id` pair list, in
/// file order, keeping only rows whose query is in `med_ids`.
pub struct PairSampler<'a> {
    path: PathBuf,
    lines: Lines<BufReader<File>>,
    line_no: usize,
    med_ids: &'a BTreeSet<String>,
    passages: &'a HashMap<String, String>,
    queries: &'a HashMap<String, String>,
    skipped: usize,
    degenerate: usize,
    failed: bool,
}

pub fn sample_pairs<'a>(
    pair_list: &Path,
    med_ids: &'a BTreeSet<String>,
    passages: &'a HashMap<String, String>,
    queries: &'a HashMap<String, String>,
) -> Result<PairSampler<'a>> {
    let file = File::open(pair_list).map_err(|e| Error::io(pair_list, e))?;
    Ok(PairSampler {
        path: pair_list.to_path_buf(),
        lines: BufReader::new(file).lines(),
        line_no: 0,
        med_ids,
        passages,
        queries,
        skipped: 0,
        degenerate: 0,
        failed: false,
    })
}

impl PairSampler<'_> {
    /// Rows dropped because their query is not in the subset.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Rows dropped because positive and negative texts are identical.
    pub fn degenerate(&self) -> usize {
        self.degenerate
    }

    fn resolve<'m>(&self, map: &'m HashMap<String, String>, kind: &str, id: &str) -> Result<&'m String> {
        map.get(id).ok_or_else(|| Error::Unresolved(vec![format!("{kind} {id} (line {})", self.line_no)]))
    }

    fn next_row(&mut self) -> Option<Result<TrainTriple>> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            let [qid, pos, neg] = fields[..] else {
                return Some(Err(Error::parse(&self.path, self.line_no, format!("expected 3 columns, found {}", fields.len()))));
            };
            if !self.med_ids.contains(qid) {
                self.skipped += 1;
                continue;
            }
            let triple = (|| {
                Ok(TrainTriple {
                    query_id: qid.to_string(),
                    query_text: self.resolve(self.queries, "query", qid)?.clone(),
                    pos_text: self.resolve(self.passages, "passage", pos)?.clone(),
                    neg_text: self.resolve(self.passages, "passage", neg)?.clone(),
                })
            })();
            match triple {
                Ok(t) if t.pos_text == t.neg_text => {
                    self.degenerate += 1;
                    continue;
                }
                other => return Some(other),
            }
        }
    }
}

impl Iterator for PairSampler<'_> {
    type Item = Result<TrainTriple>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = self.next_row();
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}

/// Writes `query<TAB>pos_text<TAB>neg_text` lines and returns the count.
pub fn write_training_tsv<I>(triples: I, path: &Path) -> Result<usize>
where
    I: IntoIterator<Item = Result<TrainTriple>>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut n = 0;
    for t in triples {
        let t = t?;
        writeln!(w, "{}\t{}\t{}", sanitize(&t.query_text), sanitize(&t.pos_text), sanitize(&t.neg_text))
            .map_err(|e| Error::io(path, e))?;
        n += 1;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(n)
}

fn check_finite(s_pos: f64, s_neg: f64) -> Result<()> {
    if !s_pos.is_finite() || !s_neg.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite scores ({s_pos}, {s_neg})")));
    }
    Ok(())
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// −log softmax of the positive score over the pair, as log(1 + e^(s_neg − s_pos)).
pub fn pairwise_loss(s_pos: f64, s_neg: f64) -> Result<f64> {
    check_finite(s_pos, s_neg)?;
    Ok(softplus(s_neg - s_pos))
}

/// (∂loss/∂s_pos, ∂loss/∂s_neg).
pub fn loss_gradient(s_pos: f64, s_neg: f64) -> Result<(f64, f64)> {
    check_finite(s_pos, s_neg)?;
    let g = sigmoid(s_neg - s_pos);
    Ok((-g, g))
}

/// Patience-based stopping over a stream of validation scores.
///
/// A score improves only when strictly greater than the best so far, so the
/// earliest of tied maxima is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopper {
    patience: usize,
    best: Option<(usize, f64)>,
    seen: usize,
    since_best: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Result<Self> {
        if patience == 0 {
            return Err(Error::InvalidArgument("patience must be positive".into()));
        }
        Ok(EarlyStopper {
            patience,
            best: None,
            seen: 0,
            since_best: 0,
        })
    }

    /// Records one validation score; true when training should stop.
    pub fn observe(&mut self, score: f64) -> bool {
        let improved = score.is_finite() && self.best.is_none_or(|(_, b)| score > b);
        if improved {
            self.best = Some((self.seen, score));
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        self.seen += 1;
        self.should_stop()
    }

    pub fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }

    pub fn best_index(&self) -> Option<usize> {
        self.best.map(|(i, _)| i)
    }

    pub fn best_score(&self) -> Option<f64> {
        self.best.map(|(_, s)| s)
    }
}

/// Replays `scores` through an [`EarlyStopper`]: the best index and the stop
/// flag after each step.
pub fn early_stop(scores: &[f64], patience: usize) -> Result<(Option<usize>, Vec<bool>)> {
    let mut s = EarlyStopper::new(patience)?;
    let flags = scores.iter().map(|&x| s.observe(x)).collect();
    Ok((s.best_index(), flags))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationConfig {
    pub held_out_queries: usize,
    /// BM25 candidates per held-out query.
    pub rerank_depth: usize,
    pub samples_per_validation: usize,
    pub patience: usize,
    pub metric: Metric,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            held_out_queries: 200,
            rerank_depth: 20,
            samples_per_validation: 512,
            patience: 20,
            metric: Metric::Mrr { k: 10 },
        }
    }
}

impl ValidationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.held_out_queries == 0 || self.rerank_depth == 0 || self.samples_per_validation == 0 || self.patience == 0 {
            return Err(Error::InvalidArgument("validation settings must all be positive".into()));
        }
        Ok(())
    }
}

/// Splits `ids` into `n` held-out ids and the rest, by a seeded shuffle.
pub fn split_held_out(ids: &BTreeSet<String>, n: usize, seed: u64) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut all: Vec<&String> = ids.iter().collect();
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held: BTreeSet<String> = all.iter().take(n).map(|s| s.to_string()).collect();
    let rest = ids.difference(&held).cloned().collect();
    (held, rest)
}

/// Held-out queries with their BM25 candidates and judgments.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationBundle {
    pub queries: Vec<QueryRecord>,
    /// One entry per query, possibly empty.
    pub candidates: Run,
    pub qrels: QrelSet,
}

impl ValidationBundle {
    /// Writes `queries.tsv`, `candidates.run` and `qrels.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let qpath = dir.join("queries.tsv");
        let mut queries: Vec<&QueryRecord> = self.queries.iter().collect();
        queries.sort_by(|a, b| id_order(&a.query_id, &b.query_id));
        let text: String = queries
            .iter()
            .map(|q| format!("{}\t{}\n", q.query_id, sanitize(&q.text)))
            .collect();
        std::fs::write(&qpath, text).map_err(|e| Error::io(&qpath, e))?;
        crate::trecio::write_run(&self.candidates, &dir.join("candidates.run"))?;
        crate::trecio::write_qrels(&self.qrels, &dir.join("qrels.txt"))
    }
}

/// BM25 top-`rerank_depth` candidates for each query over a passage index.
pub fn make_validation_set(
    queries: &[QueryRecord],
    qrels: &QrelSet,
    index: &InvertedIndex,
    cfg: &ValidationConfig,
    params: &Bm25Params,
) -> Result<ValidationBundle> {
    cfg.validate()?;
    let mut candidates = Run::new("validation");
    for q in queries {
        let hits = index.search(&q.text, cfg.rerank_depth, params)?;
        candidates.insert(
            &q.query_id,
            hits.into_iter().map(|h| ScoredDoc::new(h.doc.doc_id, h.score)).collect(),
        )?;
    }
    Ok(ValidationBundle {
        queries: queries.to_vec(),
        candidates,
        qrels: qrels.restrict(queries.iter().map(|q| q.query_id.as_str())),
    })
}

/// Re-scores the bundle's candidates with `scorer` and evaluates the result.
/// Queries whose relevant passages were not retrieved score 0 whatever the
/// scorer does.
pub fn validate_scorer(
    bundle: &ValidationBundle,
    passages: &HashMap<String, String>,
    scorer: &mut dyn Scorer,
    metric: Metric,
) -> Result<MetricReport> {
    let texts: HashMap<&str, &str> = bundle.queries.iter().map(|q| (q.query_id.as_str(), q.text.as_str())).collect();
    let mut reranked = Run::new("validation");
    for (qid, cands) in bundle.candidates.topics() {
        let query = texts
            .get(qid)
            .ok_or_else(|| Error::Unresolved(vec![format!("query {qid}")]))?;
        let missing: Vec<String> = cands.iter().filter(|c| !passages.contains_key(&c.doc_id)).map(|c| c.doc_id.clone()).collect();
        if !missing.is_empty() {
            return Err(Error::Unresolved(missing));
        }
        let pairs: Vec<ScorePair> = cands
            .iter()
            .map(|c| ScorePair::new(pair_id(qid, &c.doc_id), *query, passages[&c.doc_id].as_str()))
            .collect();
        let scores = score_pairs(scorer, &pairs)?;
        reranked.insert(
            qid,
            cands.iter().zip(scores).map(|(c, (_, s))| ScoredDoc::new(c.doc_id.clone(), s)).collect(),
        )?;
    }
    evaluate(&reranked, &bundle.qrels, metric)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_values() {
        assert!((pairwise_loss(0.0, 0.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((pairwise_loss(5.0, 0.0).unwrap() - 0.006715348489118068).abs() < 1e-12);
        assert!(pairwise_loss(30.0, 0.0).unwrap() < 1e-12);
        assert!((pairwise_loss(0.0, 30.0).unwrap() - 30.0).abs() < 1e-12);
        assert!(pairwise_loss(1e308, -1e308).unwrap().is_finite());
        assert!(pairwise_loss(f64::NAN, 0.0).is_err());
        assert!(loss_gradient(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn gradient_values() {
        assert_eq!(loss_gradient(0.0, 0.0).unwrap(), (-0.5, 0.5));
        let (gp, gn) = loss_gradient(5.0, 0.0).unwrap();
        assert!((gn - 0.0066928509242848554).abs() < 1e-12);
        assert_eq!(gp + gn, 0.0);
    }

    #[test]
    fn early_stopping_examples() {
        let mut scores = vec![0.5, 0.6];
        scores.extend(std::iter::repeat_n(0.55, 19));
        scores.push(0.6);
        let (best, flags) = early_stop(&scores, 20).unwrap();
        assert_eq!(best, Some(1));
        assert_eq!(flags.iter().position(|&f| f), Some(21));

        let rising: Vec<f64> = (0..100).map(f64::from).collect();
        assert!(early_stop(&rising, 20).unwrap().1.iter().all(|f| !f));
        assert_eq!(early_stop(&[0.6, 0.6], 20).unwrap().0, Some(0));
        assert_eq!(early_stop(&[], 20).unwrap().0, None);
        assert!(EarlyStopper::new(0).is_err());
    }

    #[test]
    fn held_out_split_is_seeded() {
        let ids: BTreeSet<String> = (0..50).map(|i| i.to_string()).collect();
        let (a, rest) = split_held_out(&ids, 10, 7);
        assert_eq!(a.len(), 10);
        assert_eq!(rest.len(), 40);
        assert!(a.is_disjoint(&rest));
        assert_eq!(split_held_out(&ids, 10, 7).0, a);
    }
}
