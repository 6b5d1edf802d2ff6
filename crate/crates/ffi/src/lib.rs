//! C ABI over the zsrank core.
//!
//! Objects cross the boundary as opaque handles created by a `zs_*_new`,
//! `zs_*_load` or `zs_*_read` function and released with the matching
//! `zs_*_free`. Every fallible call returns a [`ZsStatus`]; on failure the
//! message is kept per thread and read back with [`zs_last_error`].
//! Strings passed in must be NUL-terminated UTF-8. Strings handed out stay
//! valid until the owning handle is freed.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use zsrank::corpus::load_jsonl;
use zsrank::eval::{bonferroni, evaluate, paired_t_test, Metric};
use zsrank::index::{build_index, Bm25Params, IndexField, InvertedIndex, TokenizationConfig};
use zsrank::lexfilter::{load_lexicon, Lexicon, DEFAULT_EXCLUSIONS};
use zsrank::pipeline::{rrf_fuse, FusionConfig};
use zsrank::training::{loss_gradient, pairwise_loss};
use zsrank::trecio::{parse_qrels, read_run, write_run, QrelSet, Run};
use zsrank::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    IndexFormat = 6,
    Scorer = 7,
    OutOfRange = 8,
    Internal = 9,
}

/// Which text of a document an index covers.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZsField {
    FullText = 0,
    Abstract = 1,
    Paragraph = 2,
}

/// Opaque BM25 index.
pub struct ZsIndex(InvertedIndex);

/// Opaque ranked list returned by a search.
pub struct ZsHits(Vec<(CString, f64)>);

/// Opaque run (ranked lists per topic).
pub struct ZsRun(Run);

/// Opaque relevance judgments.
pub struct ZsQrels(QrelSet);

/// Opaque query lexicon.
pub struct ZsLexicon(Lexicon);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ZsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => ZsStatus::Io,
            Error::Parse { .. } | Error::MissingColumn(_) | Error::Json(_) => ZsStatus::Parse,
            Error::InvalidArgument(_) | Error::InvalidRun(_) | Error::Unresolved(_) => ZsStatus::InvalidArgument,
            Error::IndexVersion { .. } | Error::IndexFormat(_) => ZsStatus::IndexFormat,
            Error::Rerank { .. } | Error::Scorer(_) => ZsStatus::Scorer,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: ZsStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ZsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ZsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            ZsStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(ZsStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ZsStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(ZsStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(ZsStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(ZsStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn zs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn zs_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

// ------------------------------------------------------------------ index

/// Builds an index over a JSONL corpus with the default analysis
/// (lowercase, English stopwords, Porter stemming).
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_index_build_jsonl(path: *const c_char, field: ZsField, out: *mut *mut ZsIndex) -> ZsStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let field = match field {
            ZsField::FullText => IndexField::FullText,
            ZsField::Abstract => IndexField::Abstract,
            ZsField::Paragraph => IndexField::Paragraph,
        };
        let docs = load_jsonl(Path::new(path))?;
        let index = build_index(&docs, field, &TokenizationConfig::default())?;
        *out = Box::into_raw(Box::new(ZsIndex(index)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_index_load(path: *const c_char, out: *mut *mut ZsIndex) -> ZsStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(ZsIndex(InvertedIndex::load(Path::new(path))?)));
        Ok(())
    })
}

/// # Safety
/// `index` must come from this library; `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn zs_index_save(index: *const ZsIndex, path: *const c_char) -> ZsStatus {
    guard(|| {
        let index = ref_arg(index, "index")?;
        index.0.save(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Number of indexed units (documents or paragraphs); 0 for a null handle.
///
/// # Safety
/// `index` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn zs_index_doc_count(index: *const ZsIndex) -> usize {
    index.as_ref().map_or(0, |i| i.0.doc_count())
}

/// # Safety
/// `index` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zs_index_free(index: *mut ZsIndex) {
    free_handle(index)
}

/// BM25 top-`k` for `query`. Paragraph hits are reported as `doc#n`.
///
/// # Safety
/// `index` must come from this library; `query` must be a valid C string;
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_index_search(
    index: *const ZsIndex,
    query: *const c_char,
    k: usize,
    k1: f64,
    b: f64,
    out: *mut *mut ZsHits,
) -> ZsStatus {
    guard(|| {
        let index = ref_arg(index, "index")?;
        let query = str_arg(query, "query")?;
        let out = out_arg(out, "out")?;
        let hits = index.0.search(query, k, &Bm25Params { k1, b })?;
        let hits = hits
            .into_iter()
            .map(|h| Ok((CString::new(h.doc.to_string()).map_err(|_| fail(ZsStatus::Internal, "NUL in doc id"))?, h.score)))
            .collect::<Result<_, Failure>>()?;
        *out = Box::into_raw(Box::new(ZsHits(hits)));
        Ok(())
    })
}

/// # Safety
/// `hits` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn zs_hits_len(hits: *const ZsHits) -> usize {
    hits.as_ref().map_or(0, |h| h.0.len())
}

/// Doc id at rank `i` (0-based), or null when out of range.
///
/// # Safety
/// `hits` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn zs_hits_doc_id(hits: *const ZsHits, i: usize) -> *const c_char {
    hits.as_ref()
        .and_then(|h| h.0.get(i))
        .map_or(ptr::null(), |(d, _)| d.as_ptr())
}

/// Score at rank `i` (0-based), or NaN when out of range.
///
/// # Safety
/// `hits` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn zs_hits_score(hits: *const ZsHits, i: usize) -> f64 {
    hits.as_ref().and_then(|h| h.0.get(i)).map_or(f64::NAN, |(_, s)| *s)
}

/// # Safety
/// `hits` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zs_hits_free(hits: *mut ZsHits) {
    free_handle(hits)
}

// ------------------------------------------------------- runs and qrels

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_run_read(path: *const c_char, out: *mut *mut ZsRun) -> ZsStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(ZsRun(read_run(Path::new(path))?)));
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library; `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn zs_run_write(run: *const ZsRun, path: *const c_char) -> ZsStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        write_run(&run.0, Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Number of topics in the run; 0 for a null handle.
///
/// # Safety
/// `run` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn zs_run_topic_count(run: *const ZsRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.len())
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zs_run_free(run: *mut ZsRun) {
    free_handle(run)
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_qrels_read(path: *const c_char, out: *mut *mut ZsQrels) -> ZsStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(ZsQrels(parse_qrels(Path::new(path))?)));
        Ok(())
    })
}

/// # Safety
/// `qrels` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zs_qrels_free(qrels: *mut ZsQrels) {
    free_handle(qrels)
}

/// Mean of `metric` (`ndcg@10`, `p@5`, `p@5f`, `j@10`, `mrr@10`, ...) over
/// the run topics that have judgments. `out_topics` may be null.
///
/// # Safety
/// Handles must come from this library; `metric` must be a valid C string;
/// `out_mean` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_evaluate(
    run: *const ZsRun,
    qrels: *const ZsQrels,
    metric: *const c_char,
    out_mean: *mut f64,
    out_topics: *mut usize,
) -> ZsStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let qrels = ref_arg(qrels, "qrels")?;
        let metric: Metric = str_arg(metric, "metric")?.parse()?;
        let out_mean = out_arg(out_mean, "out_mean")?;
        let report = evaluate(&run.0, &qrels.0, metric)?;
        *out_mean = report.mean;
        if let Some(n) = out_topics.as_mut() {
            *n = report.per_topic.len();
        }
        Ok(())
    })
}

/// Per-topic value of `metric`. Fails with `OutOfRange` when the topic is
/// absent from the run or has no judgments.
///
/// # Safety
/// Handles must come from this library; strings must be valid C strings;
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_evaluate_topic(
    run: *const ZsRun,
    qrels: *const ZsQrels,
    metric: *const c_char,
    topic: *const c_char,
    out: *mut f64,
) -> ZsStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let qrels = ref_arg(qrels, "qrels")?;
        let metric: Metric = str_arg(metric, "metric")?.parse()?;
        let topic = str_arg(topic, "topic")?;
        let out = out_arg(out, "out")?;
        let ranking = run.0.get(topic).ok_or_else(|| fail(ZsStatus::OutOfRange, format!("topic {topic} not in run")))?;
        let judgments = qrels
            .0
            .topic(topic)
            .ok_or_else(|| fail(ZsStatus::OutOfRange, format!("topic {topic} has no judgments")))?;
        *out = metric.score_topic(ranking, judgments);
        Ok(())
    })
}

/// Reciprocal rank fusion of `n` runs, each cut to `depth` per topic.
///
/// # Safety
/// `runs` must point to `n` handles from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn zs_rrf_fuse(
    runs: *const *const ZsRun,
    n: usize,
    rrf_k: f64,
    depth: usize,
    out: *mut *mut ZsRun,
) -> ZsStatus {
    guard(|| {
        let handles = slice_arg(runs, n, "runs")?;
        let out = out_arg(out, "out")?;
        let mut owned = Vec::with_capacity(n);
        for (i, h) in handles.iter().enumerate() {
            owned.push(ref_arg(*h, &format!("runs[{i}]"))?.0.clone());
        }
        let cfg = FusionConfig {
            rrf_k,
            ..Default::default()
        };
        *out = Box::into_raw(Box::new(ZsRun(rrf_fuse(&owned, &cfg, depth)?)));
        Ok(())
    })
}

// ---------------------------------------------------------------- lexicon

/// Lexicon from in-memory phrases. With `default_exclusions` set the
/// built-in exclusion list is used and `exclusions` is ignored.
///
/// # Safety
/// `phrases` must point to `n_phrases` C strings and `exclusions` to
/// `n_exclusions` C strings (either may be null when its count is 0).
#[no_mangle]
pub unsafe extern "C" fn zs_lexicon_new(
    phrases: *const *const c_char,
    n_phrases: usize,
    exclusions: *const *const c_char,
    n_exclusions: usize,
    default_exclusions: bool,
    out: *mut *mut ZsLexicon,
) -> ZsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let phrases = slice_arg(phrases, n_phrases, "phrases")?
            .iter()
            .map(|p| str_arg(*p, "phrase"))
            .collect::<Result<Vec<_>, _>>()?;
        let exclusions: Vec<&str> = if default_exclusions {
            DEFAULT_EXCLUSIONS.lines().collect()
        } else {
            slice_arg(exclusions, n_exclusions, "exclusions")?
                .iter()
                .map(|p| str_arg(*p, "exclusion"))
                .collect::<Result<_, _>>()?
        };
        *out = Box::into_raw(Box::new(ZsLexicon(Lexicon::new(phrases, exclusions))));
        Ok(())
    })
}

/// Lexicon file with one phrase per line. A null `exclusions_path` selects
/// the built-in exclusion list.
///
/// # Safety
/// `path` must be a valid C string, `exclusions_path` null or a valid C
/// string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_lexicon_load(
    path: *const c_char,
    exclusions_path: *const c_char,
    out: *mut *mut ZsLexicon,
) -> ZsStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let exclusions = if exclusions_path.is_null() {
            None
        } else {
            Some(Path::new(str_arg(exclusions_path, "exclusions_path")?))
        };
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(ZsLexicon(load_lexicon(Path::new(path), exclusions)?)));
        Ok(())
    })
}

/// # Safety
/// `lexicon` must come from this library; `text` must be a valid C string;
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_lexicon_matches(lexicon: *const ZsLexicon, text: *const c_char, out: *mut bool) -> ZsStatus {
    guard(|| {
        let lexicon = ref_arg(lexicon, "lexicon")?;
        let text = str_arg(text, "text")?;
        *out_arg(out, "out")? = lexicon.0.matches(text);
        Ok(())
    })
}

/// # Safety
/// `lexicon` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zs_lexicon_free(lexicon: *mut ZsLexicon) {
    free_handle(lexicon)
}

// --------------------------------------------------- training and stats

/// Pairwise loss log(1 + exp(s_neg - s_pos)).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_pairwise_loss(s_pos: f64, s_neg: f64, out: *mut f64) -> ZsStatus {
    guard(|| {
        *out_arg(out, "out")? = pairwise_loss(s_pos, s_neg)?;
        Ok(())
    })
}

/// Partial derivatives of the pairwise loss.
///
/// # Safety
/// Both output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zs_loss_gradient(s_pos: f64, s_neg: f64, out_d_pos: *mut f64, out_d_neg: *mut f64) -> ZsStatus {
    guard(|| {
        let d_pos = out_arg(out_d_pos, "out_d_pos")?;
        let d_neg = out_arg(out_d_neg, "out_d_neg")?;
        (*d_pos, *d_neg) = loss_gradient(s_pos, s_neg)?;
        Ok(())
    })
}

/// Two-sided paired t-test over `n` topics; `a[i]` and `b[i]` belong to the
/// same topic. `out_t` may be null.
///
/// # Safety
/// `a` and `b` must point to `n` doubles; `out_p` must be valid.
#[no_mangle]
pub unsafe extern "C" fn zs_paired_t_test(a: *const f64, b: *const f64, n: usize, out_t: *mut f64, out_p: *mut f64) -> ZsStatus {
    guard(|| {
        let a = slice_arg(a, n, "a")?;
        let b = slice_arg(b, n, "b")?;
        let out_p = out_arg(out_p, "out_p")?;
        let keyed = |v: &[f64]| -> BTreeMap<String, f64> { v.iter().enumerate().map(|(i, x)| (i.to_string(), *x)).collect() };
        let test = paired_t_test(&keyed(a), &keyed(b))?;
        *out_p = test.p;
        if let Some(t) = out_t.as_mut() {
            *t = test.t;
        }
        Ok(())
    })
}

/// Bonferroni-adjusted p-value, min(1, p * m).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_bonferroni(p: f64, m: usize, out: *mut f64) -> ZsStatus {
    guard(|| {
        *out_arg(out, "out")? = bonferroni(p, m)?;
        Ok(())
    })
}
