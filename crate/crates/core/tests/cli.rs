use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use zsrank::corpus::load_jsonl;
use zsrank::trecio::read_run;

const BIN: &str = env!("CARGO_BIN_EXE_zsrank");

fn synthetic(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic").join(name)
}

fn zsrank(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = zsrank(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(zsrank(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(zsrank(&["search"]).status.code(), Some(2));
    let out = zsrank(&["evaluate", "--run", "x", "--qrels", "y", "--metrics", "bogus@3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("zsrank: error:"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = zsrank(&["filter-corpus", "--input", "/nonexistent/docs.jsonl", "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.matches("No such file").count(), 1, "{err}");
}

#[test]
fn failing_scorer_is_a_runtime_error() {
    let out = zsrank(&["check-scorer", "--scorer-cmd", "exit 3", "--pairs", "10"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn filter_corpus_drops_pre_cutoff_and_undated() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kept.jsonl");
    ok(&["filter-corpus", "--input", s(&synthetic("docs.jsonl")), "--out", s(&out)]);
    let kept = load_jsonl(&out).unwrap();
    let ids: Vec<&str> = kept.iter().map(|d| d.doc_id.as_str()).collect();
    assert_eq!(kept.len(), 28);
    assert!(!ids.contains(&"cv18") && !ids.contains(&"cv10"));

    let lenient = dir.path().join("lenient.jsonl");
    ok(&["filter-corpus", "--input", s(&synthetic("docs.jsonl")), "--out", s(&lenient), "--keep-undated"]);
    assert_eq!(load_jsonl(&lenient).unwrap().len(), 29);
}

#[test]
fn ingest_reads_metadata_and_fulltext() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("docs.jsonl");
    ok(&[
        "ingest",
        "--metadata",
        s(&synthetic("metadata.csv")),
        "--fulltext-dir",
        s(&synthetic("fulltext")),
        "--out",
        s(&out),
    ]);
    let docs = load_jsonl(&out).unwrap();
    assert_eq!(docs.len(), 30);
    let cv01 = docs.iter().find(|d| d.doc_id == "cv01").unwrap();
    assert!(!cv01.paragraphs.is_empty());
}

fn index_and_search(dir: &Path, extra: &[&str]) -> PathBuf {
    let kept = dir.join("kept.jsonl");
    let index = dir.join("full.idx");
    let run = dir.join("bm25.run");
    ok(&["filter-corpus", "--input", s(&synthetic("docs.jsonl")), "--out", s(&kept)]);
    ok(&["index", "--input", s(&kept), "--out", s(&index)]);
    let topics = synthetic("topics.tsv");
    let mut args = vec!["search", "--index", s(&index), "--topics", s(&topics), "--out", s(&run)];
    args.extend_from_slice(extra);
    ok(&args);
    run
}

#[test]
fn search_is_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let one = index_and_search(a.path(), &["--threads", "1"]);
    let four = index_and_search(b.path(), &["--threads", "4"]);
    assert_eq!(std::fs::read(one).unwrap(), std::fs::read(four).unwrap());
}

#[test]
fn xml_and_tsv_topics_agree() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = index_and_search(dir.path(), &[]);
    let xml = dir.path().join("xml.run");
    ok(&[
        "search",
        "--index",
        s(&dir.path().join("full.idx")),
        "--topics",
        s(&synthetic("topics.xml")),
        "--topic-format",
        "xml",
        "--out",
        s(&xml),
    ]);
    assert_eq!(std::fs::read(tsv).unwrap(), std::fs::read(xml).unwrap());
}

#[test]
fn evaluate_writes_per_topic_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let run = index_and_search(dir.path(), &[]);
    let tsv = dir.path().join("eval.tsv");
    let out = ok(&["evaluate", "--run", s(&run), "--qrels", s(&synthetic("qrels.txt")), "--out", s(&tsv)]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("nDCG@10") || table.contains("ndcg@10"), "{table}");
    let text = std::fs::read_to_string(tsv).unwrap();
    let all: Vec<&str> = text.lines().filter(|l| l.starts_with("ndcg@10\tall\t")).collect();
    assert_eq!(all, ["ndcg@10\tall\t1.0000"]);
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let kept = dir.path().join("kept.jsonl");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!("# filter settings\ninput={}\nout={}\nkeep-undated=true\n", synthetic("docs.jsonl").display(), kept.display()),
    )
    .unwrap();
    ok(&["filter-corpus", "--config", s(&cfg)]);
    assert_eq!(load_jsonl(&kept).unwrap().len(), 29);

    let later = dir.path().join("later.jsonl");
    ok(&["filter-corpus", "--config", s(&cfg), "--out", s(&later), "--cutoff", "2021-01-01"]);
    assert!(later.exists());
    assert_eq!(load_jsonl(&later).unwrap().len(), 1);
}

#[test]
fn pipeline_with_grade_oracle_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("oracle.run");
    let scorer = format!("{BIN} stub-scorer --kind grade --qrels {}", synthetic("qrels.txt").display());
    let out = ok(&[
        "pipeline",
        "--corpus",
        s(&synthetic("docs.jsonl")),
        "--topics",
        s(&synthetic("topics.tsv")),
        "--scorer-cmd",
        &scorer,
        "--qrels",
        s(&synthetic("qrels.txt")),
        "--metrics",
        "ndcg@10",
        "--out",
        s(&run),
    ]);
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("1.000"), "{report}");
    assert_eq!(read_run(&run).unwrap().len(), 5);
}

#[test]
fn tcp_stub_passes_conformance() {
    let mut server = Command::new(BIN)
        .args(["stub-scorer", "--kind", "echo", "--listen", "127.0.0.1:0", "--max-connections", "1"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("address line").to_string();
    let out = ok(&["check-scorer", "--scorer-addr", &addr, "--pairs", "2000", "--batch-size", "128"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("conformance: pass"));
    assert!(server.wait().unwrap().success());
}

#[test]
fn pipe_stub_passes_conformance() {
    let scorer = format!("{BIN} stub-scorer --kind constant --value 0.5");
    let out = ok(&["check-scorer", "--scorer-cmd", &scorer, "--pairs", "1000", "--batch-size", "250"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("conformance: pass"));
}

#[test]
fn fuse_two_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = index_and_search(dir.path(), &["--query-field", "question"]);
    let b = dir.path().join("query.run");
    ok(&[
        "search",
        "--index",
        s(&dir.path().join("full.idx")),
        "--topics",
        s(&synthetic("topics.tsv")),
        "--query-field",
        "query",
        "--out",
        s(&b),
    ]);
    let fused = dir.path().join("fused.run");
    ok(&["fuse", "--run", s(&a), "--run", s(&b), "--depth", "3", "--out", s(&fused)]);
    let run = read_run(&fused).unwrap();
    assert!(run.topics().all(|(_, docs)| docs.len() <= 3));
    assert_eq!(run.tag, "fusion");
}

#[test]
fn filter_queries_then_make_training() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    std::fs::write(
        p("queries.tsv"),
        "1\twhat is gastric ulcer\n2\tgas prices in ohio\n3\twhat causes cirrhosis\n4\tbest pizza dough\n5\tsigns of fever in adults\n",
    )
    .unwrap();
    std::fs::write(p("lexicon.txt"), "gastric ulcer\ngas\ncirrhosis\nfever\n").unwrap();
    std::fs::write(
        p("passages.tsv"),
        "p1\tA gastric ulcer is a sore in the stomach lining.\n\
         p2\tPizza dough needs flour and yeast.\n\
         p3\tCirrhosis is scarring of the liver.\n\
         p4\tFever in adults above 39 degrees needs attention.\n\
         p5\tGas prices vary by state.\n",
    )
    .unwrap();
    std::fs::write(p("pairs.tsv"), "1\tp1\tp2\n2\tp5\tp2\n3\tp3\tp2\n3\tp3\tp3\n5\tp4\tp1\n4\tp2\tp1\n").unwrap();
    std::fs::write(p("qrels.txt"), "1 0 p1 1\n3 0 p3 1\n5 0 p4 1\n").unwrap();

    ok(&[
        "filter-queries",
        "--queries",
        s(&p("queries.tsv")),
        "--lexicon",
        s(&p("lexicon.txt")),
        "--out",
        s(&p("med.tsv")),
        "--ids-out",
        s(&p("med_ids.txt")),
    ]);
    let ids = std::fs::read_to_string(p("med_ids.txt")).unwrap();
    assert_eq!(ids.lines().collect::<Vec<_>>(), ["1", "3", "5"]);

    ok(&[
        "make-training",
        "--pairs",
        s(&p("pairs.tsv")),
        "--queries",
        s(&p("queries.tsv")),
        "--passages",
        s(&p("passages.tsv")),
        "--med-ids",
        s(&p("med_ids.txt")),
        "--validation-dir",
        s(&p("val")),
        "--qrels",
        s(&p("qrels.txt")),
        "--held-out",
        "1",
        "--out",
        s(&p("train.tsv")),
    ]);
    let held = std::fs::read_to_string(p("val/queries.tsv")).unwrap();
    assert_eq!(held.lines().count(), 1);
    let held_id = held.split('\t').next().unwrap();
    let train = std::fs::read_to_string(p("train.tsv")).unwrap();
    // Three med queries minus the held-out one; the pos == neg row is skipped.
    assert_eq!(train.lines().count(), 2, "{train}");
    assert!(train.lines().all(|l| l.split('\t').count() == 3 || l.split('\t').count() == 4));
    let qtext = std::fs::read_to_string(p("queries.tsv")).unwrap();
    let held_text = qtext.lines().find(|l| l.starts_with(&format!("{held_id}\t"))).unwrap().split('\t').nth(1).unwrap();
    assert!(!train.contains(held_text));
    assert!(p("val/candidates.run").exists() && p("val/qrels.txt").exists());
}
