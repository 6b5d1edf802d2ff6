//! `zsrank` command-line interface.
//!
//! Every stage is a subcommand; `pipeline` chains them. Flags can also come
//! from a `--config` file of `key=value` lines named after the long flags.
//! Flags given on the command line win over the file.

use std::collections::{BTreeSet, HashMap};
use std::ffi::OsString;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::{Args, CommandFactory, Parser, Subcommand};

use zsrank::corpus::{filter_by_date, load_jsonl, parse_corpus, write_jsonl, DateFilterPolicy, Document};
use zsrank::eval::{compare_systems, parse_metric_list, report_tsv, ComparisonTable, EvalMode, SystemScores};
use zsrank::index::{build_index, Bm25Params, IndexField, InvertedIndex, StemmerKind, TokenizationConfig};
use zsrank::lexfilter::{emit_query_id_list, filter_queries, load_lexicon, read_id_list, read_queries, QueryRecord};
use zsrank::pipeline::conformance::{run_conformance, ConformanceConfig};
use zsrank::pipeline::scorer::{serve_lines, serve_tcp, ConstantScorer, EchoScorer, GradeScorer, ScoreFn};
use zsrank::pipeline::{
    first_stage, rerank, rrf_fuse, run_zero_shot_pipeline, FusionConfig, PipelineConfig, QueryField, RerankConfig,
    Scorer, ScorerHandle,
};
use zsrank::training::{make_validation_set, read_id_text_map, sample_pairs, split_held_out, write_training_tsv, ValidationConfig};
use zsrank::trecio::{parse_qrels, parse_topics, read_run, write_run, Run, TopicFormat};

#[derive(Parser, Debug)]
#[command(name = "zsrank", version, about = "Zero-shot two-stage retrieval: filtered BM25, external re-ranking, TREC evaluation")]
struct Cli {
    /// File of `flag=value` lines applied before the command-line flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read CSV metadata (and optional full text) into the JSONL corpus format.
    Ingest(IngestArgs),
    /// Drop documents published before the cutoff date.
    FilterCorpus(FilterCorpusArgs),
    /// Build a BM25 index over one document field.
    Index(IndexArgs),
    /// Run BM25 for every topic and write a run file.
    Search(SearchArgs),
    /// Keep training queries that mention a lexicon phrase.
    FilterQueries(FilterQueriesArgs),
    /// Emit training triples (and optionally a validation bundle) for the scorer.
    MakeTraining(MakeTrainingArgs),
    /// Re-score the top of a run with an external scorer.
    Rerank(RerankArgs),
    /// Reciprocal rank fusion of several runs.
    Fuse(FuseArgs),
    /// Compute metrics for one run.
    Evaluate(EvaluateArgs),
    /// Compare runs against a reference with paired t-tests.
    Compare(CompareArgs),
    /// Date filter, full-text BM25 and optional re-ranking in one go.
    Pipeline(PipelineArgs),
    /// Built-in reference scorers speaking the wire protocol.
    StubScorer(StubScorerArgs),
    /// Run the protocol conformance harness against a scorer.
    CheckScorer(CheckScorerArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Metadata CSV with id, title, abstract and date columns.
    #[arg(long)]
    metadata: PathBuf,
    /// Directory of `<doc_id>.json` full-text files.
    #[arg(long)]
    fulltext_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct DateArgs {
    /// Documents dated before this day are dropped.
    #[arg(long, default_value = "2020-01-01")]
    cutoff: NaiveDate,
    /// Keep documents without any publication date.
    #[arg(long)]
    keep_undated: bool,
}

impl DateArgs {
    fn policy(&self) -> DateFilterPolicy {
        DateFilterPolicy {
            cutoff: self.cutoff,
            keep_undated: self.keep_undated,
        }
    }
}

#[derive(Args, Debug)]
struct FilterCorpusArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    date: DateArgs,
}

#[derive(Args, Debug, Clone)]
struct AnalysisArgs {
    #[arg(long, default_value = "porter")]
    stemmer: StemmerKind,
    /// Stopword file, one word per line (default: the 33-word English list).
    #[arg(long, conflicts_with = "no_stopwords")]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    no_stopwords: bool,
    #[arg(long)]
    no_lowercase: bool,
}

impl AnalysisArgs {
    fn config(&self) -> anyhow::Result<TokenizationConfig> {
        let mut cfg = TokenizationConfig {
            lowercase: !self.no_lowercase,
            stemmer: self.stemmer,
            ..Default::default()
        };
        if self.no_stopwords {
            cfg.stopwords.clear();
        } else if let Some(path) = &self.stopwords {
            cfg.stopwords = read_id_list(path)?;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct IndexArgs {
    #[arg(long)]
    input: PathBuf,
    /// full_text, abstract or paragraph.
    #[arg(long, default_value = "full_text")]
    field: IndexField,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    analysis: AnalysisArgs,
}

#[derive(Args, Debug, Clone)]
struct TopicArgs {
    #[arg(long)]
    topics: PathBuf,
    /// tsv or xml.
    #[arg(long, default_value = "tsv")]
    topic_format: TopicFormat,
}

impl TopicArgs {
    fn load(&self) -> anyhow::Result<Vec<zsrank::trecio::Topic>> {
        Ok(parse_topics(&self.topics, self.topic_format)?)
    }
}

#[derive(Args, Debug, Clone)]
struct Bm25Args {
    #[arg(long, default_value_t = 0.9)]
    k1: f64,
    #[arg(long, default_value_t = 0.4)]
    b: f64,
    /// Query text: question, query or both.
    #[arg(long, default_value = "question")]
    query_field: QueryField,
}

impl Bm25Args {
    fn params(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    #[command(flatten)]
    topics: TopicArgs,
    #[command(flatten)]
    bm25: Bm25Args,
    /// Documents per topic.
    #[arg(long, default_value_t = 1000)]
    k: usize,
    #[arg(long, default_value = "bm25")]
    tag: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FilterQueriesArgs {
    /// `query_id<TAB>text` file.
    #[arg(long)]
    queries: PathBuf,
    /// One phrase per line.
    #[arg(long)]
    lexicon: PathBuf,
    /// One term per line (default: the built-in seven-term list).
    #[arg(long)]
    exclusions: Option<PathBuf>,
    /// Kept queries, same format as the input.
    #[arg(long)]
    out: PathBuf,
    /// Sorted list of kept query ids.
    #[arg(long)]
    ids_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MakeTrainingArgs {
    /// `query_id<TAB>pos_id<TAB>neg_id` training pair list.
    #[arg(long)]
    pairs: PathBuf,
    /// `query_id<TAB>text`.
    #[arg(long)]
    queries: PathBuf,
    /// `passage_id<TAB>text`.
    #[arg(long)]
    passages: PathBuf,
    /// Query ids to keep, one per line.
    #[arg(long)]
    med_ids: PathBuf,
    /// Training TSV `query<TAB>pos<TAB>neg`.
    #[arg(long)]
    out: PathBuf,
    /// Write a validation bundle here; needs --qrels.
    #[arg(long, requires = "qrels")]
    validation_dir: Option<PathBuf>,
    /// Passage judgments for the held-out queries.
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    held_out: usize,
    /// BM25 candidates per validation query.
    #[arg(long, default_value_t = 20)]
    val_depth: usize,
    #[arg(long, default_value_t = 13)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct ScorerArgs {
    /// Shell command of a pipe-mode scorer.
    #[arg(long, conflicts_with = "scorer_addr")]
    scorer_cmd: Option<String>,
    /// host:port of a TCP scorer.
    #[arg(long)]
    scorer_addr: Option<String>,
}

impl ScorerArgs {
    fn handle(&self) -> Option<ScorerHandle> {
        match (&self.scorer_cmd, &self.scorer_addr) {
            (Some(cmd), _) => Some(ScorerHandle::Pipe(cmd.clone())),
            (None, Some(addr)) => Some(ScorerHandle::Tcp(addr.clone())),
            (None, None) => None,
        }
    }

    fn require(&self) -> anyhow::Result<ScorerHandle> {
        match self.handle() {
            Some(h) => Ok(h),
            None => Err(zsrank::Error::InvalidArgument("one of --scorer-cmd or --scorer-addr is required".into()).into()),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct RerankKnobs {
    /// Results re-scored per topic.
    #[arg(long, default_value_t = 100)]
    depth: usize,
    /// Whitespace tokens kept from the question.
    #[arg(long, default_value_t = 60)]
    max_query_tokens: usize,
    /// Whitespace tokens kept from title and abstract.
    #[arg(long, default_value_t = 2000)]
    max_doc_tokens: usize,
}

impl RerankKnobs {
    fn config(&self) -> RerankConfig {
        RerankConfig {
            depth: self.depth,
            max_query_tokens: self.max_query_tokens,
            max_doc_tokens: self.max_doc_tokens,
        }
    }
}

#[derive(Args, Debug)]
struct RerankArgs {
    #[arg(long)]
    run: PathBuf,
    #[command(flatten)]
    topics: TopicArgs,
    /// JSONL corpus the run's documents come from.
    #[arg(long)]
    docs: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[command(flatten)]
    knobs: RerankKnobs,
    /// Tag of the output run (default: the input run's tag).
    #[arg(long)]
    tag: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FuseArgs {
    /// Input run; give at least two.
    #[arg(long = "run", required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, default_value_t = 60.0)]
    rrf_k: f64,
    /// Documents kept per topic.
    #[arg(long, default_value_t = 1000)]
    depth: usize,
    #[arg(long, default_value = "fusion")]
    tag: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct MetricArgs {
    /// Comma-separated: ndcg@K, p@K, p@Kf (fully relevant), j@K, mrr@K.
    #[arg(long, default_value = "ndcg@10,p@5,p@5f,j@10")]
    metrics: String,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[command(flatten)]
    metrics: MetricArgs,
    /// Judged-only evaluation: none, only or both.
    #[arg(long, default_value = "none")]
    condensed: EvalMode,
    /// Per-topic TSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    qrels: PathBuf,
    /// `name=path` or `path`; the first run is the reference.
    #[arg(long = "run", required = true)]
    runs: Vec<String>,
    #[command(flatten)]
    metrics: MetricArgs,
    #[arg(long, default_value = "both")]
    condensed: EvalMode,
    /// Significance level after Bonferroni correction.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Means and adjusted p-values as TSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// JSONL corpus.
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    topics: TopicArgs,
    #[command(flatten)]
    date: DateArgs,
    /// Skip the publication-date filter.
    #[arg(long)]
    no_date_filter: bool,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[command(flatten)]
    bm25: Bm25Args,
    /// First-stage documents per topic.
    #[arg(long, default_value_t = 1000)]
    k: usize,
    #[command(flatten)]
    scorer: ScorerArgs,
    /// Stop after BM25 even when a scorer is configured.
    #[arg(long)]
    no_rerank: bool,
    #[command(flatten)]
    knobs: RerankKnobs,
    #[arg(long, default_value = "zsrank")]
    tag: String,
    #[arg(long)]
    out: PathBuf,
    /// Print an evaluation of the output run.
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[command(flatten)]
    metrics: MetricArgs,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum StubKind {
    /// Score = document text length.
    Echo,
    /// Score = --value for every pair.
    Constant,
    /// Score = judged grade of `topic doc` pair ids (needs --qrels).
    Grade,
}

#[derive(Args, Debug)]
struct StubScorerArgs {
    #[arg(long, value_enum, default_value = "echo")]
    kind: StubKind,
    #[arg(long, default_value_t = 0.0)]
    value: f64,
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// Serve TCP on this address instead of stdin/stdout.
    #[arg(long)]
    listen: Option<String>,
    /// Exit after serving this many TCP connections.
    #[arg(long)]
    max_connections: Option<usize>,
}

#[derive(Args, Debug)]
struct CheckScorerArgs {
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long, default_value_t = 10_000)]
    pairs: usize,
    #[arg(long, default_value_t = 512)]
    batch_size: usize,
    #[arg(long, default_value_t = 17)]
    seed: u64,
}

/// Rewrites argv so that config-file entries become flags, unless the same
/// flag is already on the command line.
fn apply_config_file(args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut config = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            config = strs.get(i + 1).cloned();
        } else if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.to_string());
        }
    }
    let Some(config) = config else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&config).map_err(|e| zsrank::Error::Io {
        path: config.clone().into(),
        source: e,
    })?;

    let cmd = Cli::command();
    let globals_with_value: BTreeSet<String> = ["config", "threads"].iter().map(|s| s.to_string()).collect();
    let mut sub_name = None;
    let mut skip = false;
    for a in strs.iter().skip(1) {
        if skip {
            skip = false;
            continue;
        }
        if let Some(name) = a.strip_prefix("--") {
            skip = globals_with_value.contains(name);
            continue;
        }
        if a.starts_with('-') {
            continue;
        }
        sub_name = Some(a.clone());
        break;
    }
    let Some(sub) = sub_name.as_deref().and_then(|n| cmd.find_subcommand(n)) else {
        return Ok(args);
    };
    let known: HashMap<String, bool> = sub
        .get_arguments()
        .chain(cmd.get_arguments())
        .filter_map(|a| a.get_long().map(|l| (l.to_string(), a.get_action().takes_values())))
        .collect();
    let present: BTreeSet<&str> = strs
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a))
        .collect();

    let mut extra: Vec<OsString> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(zsrank::Error::Parse {
                location: config.clone(),
                line: i + 1,
                message: "expected `key=value`".into(),
            }
            .into());
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" || present.contains(key.as_str()) {
            continue;
        }
        match known.get(&key) {
            Some(true) => {
                extra.push(format!("--{key}").into());
                extra.push(value.into());
            }
            Some(false) => match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => extra.push(format!("--{key}").into()),
                "false" | "no" | "off" | "0" => {}
                _ => {
                    return Err(zsrank::Error::Parse {
                        location: config.clone(),
                        line: i + 1,
                        message: format!("`{key}` is a switch; use true or false"),
                    }
                    .into())
                }
            },
            None => eprintln!("zsrank: warning: {config}:{}: `{key}` is not a flag of `{}`; ignored", i + 1, sub.get_name()),
        }
    }
    let mut out = args;
    out.extend(extra);
    Ok(out)
}

fn load_docs(path: &Path) -> anyhow::Result<Vec<Document>> {
    Ok(load_jsonl(path)?)
}

fn load_run(path: &Path) -> anyhow::Result<Run> {
    Ok(read_run(path)?)
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).map_err(|e| zsrank::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn cmd_ingest(a: IngestArgs) -> anyhow::Result<()> {
    let mut reader = parse_corpus(&a.metadata, a.fulltext_dir.as_deref())?;
    let docs: Vec<Document> = reader.by_ref().collect();
    let stats = reader.stats();
    write_jsonl(&a.out, &docs)?;
    eprintln!(
        "ingested {} documents from {} rows ({} malformed or duplicate skipped, {} full texts, {} full-text errors)",
        stats.documents, stats.rows, stats.malformed, stats.fulltext_loaded, stats.fulltext_errors
    );
    Ok(())
}

fn cmd_filter_corpus(a: FilterCorpusArgs) -> anyhow::Result<()> {
    let docs = load_docs(&a.input)?;
    let (kept, stats) = filter_by_date(docs, &a.date.policy());
    write_jsonl(&a.out, &kept)?;
    eprintln!(
        "kept {} documents, dropped {} ({} undated) with cutoff {}",
        stats.kept, stats.dropped, stats.undated, a.date.cutoff
    );
    Ok(())
}

fn cmd_index(a: IndexArgs) -> anyhow::Result<()> {
    let docs = load_docs(&a.input)?;
    let index = build_index(&docs, a.field, &a.analysis.config()?)?;
    index.save(&a.out)?;
    eprintln!(
        "indexed {} {} units, {} terms",
        index.doc_count(),
        a.field,
        index.vocabulary_size()
    );
    Ok(())
}

fn cmd_search(a: SearchArgs) -> anyhow::Result<()> {
    let index = InvertedIndex::load(&a.index)?;
    let topics = a.topics.load()?;
    let run = first_stage(&index, &topics, a.bm25.query_field, a.k, &a.bm25.params(), &a.tag)?;
    write_run(&run, &a.out)?;
    eprintln!("wrote {} topics to {}", run.len(), a.out.display());
    Ok(())
}

fn cmd_filter_queries(a: FilterQueriesArgs) -> anyhow::Result<()> {
    let lex = load_lexicon(&a.lexicon, a.exclusions.as_deref())?;
    let queries = read_queries(&a.queries)?;
    let (kept, stats) = filter_queries(queries, &lex);
    let text: String = kept.iter().map(|q| format!("{}\t{}\n", q.query_id, q.text)).collect();
    write_text(&a.out, &text)?;
    if let Some(ids) = &a.ids_out {
        emit_query_id_list(&kept, ids)?;
    }
    eprintln!(
        "kept {} of {} queries ({:.1}%)",
        stats.kept,
        stats.input,
        100.0 * stats.ratio()
    );
    Ok(())
}

fn cmd_make_training(a: MakeTrainingArgs) -> anyhow::Result<()> {
    let queries = read_id_text_map(&a.queries)?;
    let passages = read_id_text_map(&a.passages)?;
    let mut med_ids = read_id_list(&a.med_ids)?;

    if let Some(dir) = &a.validation_dir {
        let qrels_path = a.qrels.as_ref().context("--validation-dir needs --qrels")?;
        let qrels = parse_qrels(qrels_path)?;
        let judged: BTreeSet<String> = med_ids
            .iter()
            .filter(|q| qrels.topic(q).is_some() && queries.contains_key(*q))
            .cloned()
            .collect();
        let cfg = ValidationConfig {
            held_out_queries: a.held_out,
            rerank_depth: a.val_depth,
            ..Default::default()
        };
        cfg.validate()?;
        let (held, _) = split_held_out(&judged, a.held_out, a.seed);
        if held.len() < a.held_out {
            log::warn!("only {} judged queries available for validation, wanted {}", held.len(), a.held_out);
        }
        let records: Vec<QueryRecord> = held.iter().map(|q| QueryRecord::new(q.clone(), queries[q].clone())).collect();
        let mut ids: Vec<&String> = passages.keys().collect();
        ids.sort();
        let docs: Vec<Document> = ids
            .into_iter()
            .map(|id| {
                let mut d = Document::new(id.clone());
                d.abstract_text = passages[id].clone();
                d
            })
            .collect();
        let index = build_index(&docs, IndexField::Abstract, &TokenizationConfig::default())?;
        let bundle = make_validation_set(&records, &qrels, &index, &cfg, &Bm25Params::default())?;
        bundle.write(dir)?;
        med_ids.retain(|q| !held.contains(q));
        eprintln!("validation bundle: {} held-out queries in {}", held.len(), dir.display());
    }

    let mut sampler = sample_pairs(&a.pairs, &med_ids, &passages, &queries)?;
    let n = write_training_tsv(sampler.by_ref(), &a.out)?;
    eprintln!(
        "wrote {n} triples; skipped {} rows outside the query set and {} with identical passages",
        sampler.skipped(),
        sampler.degenerate()
    );
    Ok(())
}

fn cmd_rerank(a: RerankArgs) -> anyhow::Result<()> {
    let run = load_run(&a.run)?;
    let topics = a.topics.load()?;
    let docs: HashMap<String, Document> = load_docs(&a.docs)?.into_iter().map(|d| (d.doc_id.clone(), d)).collect();
    let mut scorer = a.scorer.require()?.connect();
    let mut out = rerank(&run, &topics, &docs, scorer.as_mut(), &a.knobs.config())?;
    if let Some(tag) = a.tag {
        out.tag = tag;
    }
    write_run(&out, &a.out)?;
    eprintln!("re-ranked {} topics", out.len());
    Ok(())
}

fn cmd_fuse(a: FuseArgs) -> anyhow::Result<()> {
    let runs = a.runs.iter().map(|p| load_run(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let cfg = FusionConfig {
        rrf_k: a.rrf_k,
        tag: a.tag,
    };
    let fused = rrf_fuse(&runs, &cfg, a.depth)?;
    write_run(&fused, &a.out)?;
    eprintln!("fused {} runs over {} topics", runs.len(), fused.len());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let run = load_run(&a.run)?;
    let qrels = parse_qrels(&a.qrels)?;
    let metrics = parse_metric_list(&a.metrics.metrics)?;
    let name = if run.tag.is_empty() { "run".to_string() } else { run.tag.clone() };
    let scores = SystemScores::evaluate(name, &run, &qrels, &metrics, a.condensed)?;
    if let Some(out) = &a.out {
        write_text(out, &report_tsv(&scores.reports()))?;
    }
    print!("{}", ComparisonTable::single(&scores).render());
    Ok(())
}

fn split_named_run(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            let name = path
                .file_stem()
                .map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
            (name, path)
        }
    }
}

fn cmd_compare(a: CompareArgs) -> anyhow::Result<()> {
    if a.runs.len() < 2 {
        bail!(zsrank::Error::InvalidArgument("compare needs a reference run and at least one more".into()));
    }
    let qrels = parse_qrels(&a.qrels)?;
    let metrics = parse_metric_list(&a.metrics.metrics)?;
    let systems = a
        .runs
        .iter()
        .map(|spec| {
            let (name, path) = split_named_run(spec);
            let run = load_run(&path)?;
            Ok(SystemScores::evaluate(name, &run, &qrels, &metrics, a.condensed)?)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let table = compare_systems(&systems[0], &systems[1..], a.alpha)?;
    if let Some(out) = &a.out {
        write_text(out, &table.to_tsv())?;
    }
    print!("{}", table.render());
    println!(
        "* p < {} (paired t-test against {}, Bonferroni correction for {} comparisons)",
        a.alpha,
        systems[0].name,
        systems.len() - 1
    );
    Ok(())
}

fn cmd_pipeline(a: PipelineArgs) -> anyhow::Result<()> {
    let docs = load_docs(&a.corpus)?;
    let topics = a.topics.load()?;
    let cfg = PipelineConfig {
        date_filter: (!a.no_date_filter).then(|| a.date.policy()),
        tokenization: a.analysis.config()?,
        bm25: a.bm25.params(),
        query_field: a.bm25.query_field,
        first_stage_depth: a.k,
        rerank: a.knobs.config(),
        tag: a.tag.clone(),
    };
    let mut scorer = if a.no_rerank { None } else { a.scorer.handle().map(|h| h.connect()) };
    if scorer.is_none() {
        log::info!("no scorer configured; the output is the BM25 run");
    }
    let reranked = scorer.is_some();
    let out = run_zero_shot_pipeline(docs, &topics, scorer.as_mut().map(|s| s.as_mut() as &mut dyn Scorer), &cfg)?;
    write_run(&out.run, &a.out)?;
    if let Some(stats) = out.filter_stats {
        eprintln!("date filter kept {}, dropped {} ({} undated)", stats.kept, stats.dropped, stats.undated);
    }
    eprintln!(
        "indexed {} documents; wrote {} topics{}",
        out.indexed_docs,
        out.run.len(),
        if reranked { " (re-ranked)" } else { "" }
    );
    if let Some(q) = &a.qrels {
        let qrels = parse_qrels(q)?;
        let metrics = parse_metric_list(&a.metrics.metrics)?;
        let scores = SystemScores::evaluate(a.tag, &out.run, &qrels, &metrics, EvalMode::None)?;
        print!("{}", ComparisonTable::single(&scores).render());
    }
    Ok(())
}

fn cmd_stub_scorer(a: StubScorerArgs) -> anyhow::Result<()> {
    fn serve<F: ScoreFn + 'static>(f: F, a: &StubScorerArgs) -> anyhow::Result<()> {
        match &a.listen {
            Some(addr) => {
                let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
                eprintln!("listening on {}", listener.local_addr()?);
                serve_tcp(f, listener, a.max_connections)?;
            }
            None => {
                let stdin = std::io::stdin().lock();
                let stdout = std::io::stdout().lock();
                serve_lines(&f, stdin, std::io::BufWriter::new(stdout))?;
            }
        }
        Ok(())
    }
    match a.kind {
        StubKind::Echo => serve(EchoScorer, &a),
        StubKind::Constant => serve(ConstantScorer(a.value), &a),
        StubKind::Grade => {
            let path = a
                .qrels
                .as_ref()
                .ok_or_else(|| zsrank::Error::InvalidArgument("--kind grade needs --qrels".into()))?;
            serve(GradeScorer(parse_qrels(path)?), &a)
        }
    }
}

fn cmd_check_scorer(a: CheckScorerArgs) -> anyhow::Result<()> {
    let mut scorer = a.scorer.require()?.connect();
    let cfg = ConformanceConfig {
        pairs: a.pairs,
        batch_size: a.batch_size,
        seed: a.seed,
    };
    let report = run_conformance(scorer.as_mut(), &cfg)?;
    println!(
        "pairs sent {}, scored {}, batches {}, errors {}",
        report.pairs_sent,
        report.pairs_scored,
        report.batches,
        report.errors.len()
    );
    for e in &report.errors {
        println!("  {e}");
    }
    if !report.passed() {
        bail!("scorer failed the conformance check");
    }
    println!("conformance: pass");
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(zsrank::Error::InvalidArgument("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::FilterCorpus(a) => cmd_filter_corpus(a),
        Command::Index(a) => cmd_index(a),
        Command::Search(a) => cmd_search(a),
        Command::FilterQueries(a) => cmd_filter_queries(a),
        Command::MakeTraining(a) => cmd_make_training(a),
        Command::Rerank(a) => cmd_rerank(a),
        Command::Fuse(a) => cmd_fuse(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::StubScorer(a) => cmd_stub_scorer(a),
        Command::CheckScorer(a) => cmd_check_scorer(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err
        .chain()
        .find_map(|e| e.downcast_ref::<zsrank::Error>())
        .is_some_and(zsrank::Error::is_usage);
    if usage {
        2
    } else {
        1
    }
}

/// The error chain on one line, skipping causes already spelled out by
/// the message above them.
fn one_line(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if msg.contains(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg.replace('\n', " ")
}

fn main() -> ExitCode {
    let args = match apply_config_file(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("zsrank: error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("zsrank: error: {}", one_line(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
