use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use zsrank_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn synthetic(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/synthetic").join(name);
    c(p.to_str().unwrap())
}

fn last_error() -> String {
    let p = zs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn index_search_and_round_trip() {
    unsafe {
        let mut index: *mut ZsIndex = ptr::null_mut();
        assert_eq!(zs_index_build_jsonl(synthetic("docs.jsonl").as_ptr(), ZsField::FullText, &mut index), ZsStatus::Ok);
        assert!(zs_last_error().is_null());
        assert_eq!(zs_index_doc_count(index), 30);

        let mut hits: *mut ZsHits = ptr::null_mut();
        let q = c("antibody immunity after infection");
        assert_eq!(zs_index_search(index, q.as_ptr(), 5, 0.9, 0.4, &mut hits), ZsStatus::Ok);
        let n = zs_hits_len(hits);
        assert!(n > 0 && n <= 5);
        for i in 1..n {
            assert!(zs_hits_score(hits, i - 1) >= zs_hits_score(hits, i));
        }
        let top = CStr::from_ptr(zs_hits_doc_id(hits, 0)).to_str().unwrap().to_string();
        assert!(zs_hits_doc_id(hits, n).is_null());
        assert!(zs_hits_score(hits, n).is_nan());

        let dir = tempfile::tempdir().unwrap();
        let path = c(dir.path().join("i.idx").to_str().unwrap());
        assert_eq!(zs_index_save(index, path.as_ptr()), ZsStatus::Ok);
        let mut loaded: *mut ZsIndex = ptr::null_mut();
        assert_eq!(zs_index_load(path.as_ptr(), &mut loaded), ZsStatus::Ok);
        let mut again: *mut ZsHits = ptr::null_mut();
        assert_eq!(zs_index_search(loaded, q.as_ptr(), 5, 0.9, 0.4, &mut again), ZsStatus::Ok);
        assert_eq!(CStr::from_ptr(zs_hits_doc_id(again, 0)).to_str().unwrap(), top);

        zs_hits_free(hits);
        zs_hits_free(again);
        zs_index_free(index);
        zs_index_free(loaded);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut index: *mut ZsIndex = ptr::null_mut();
        assert_eq!(zs_index_load(c("/nonexistent.idx").as_ptr(), &mut index), ZsStatus::Io);
        assert!(last_error().contains("nonexistent"));
        assert!(index.is_null());

        assert_eq!(zs_index_load(ptr::null(), &mut index), ZsStatus::NullPointer);
        let bad = [0xffu8, 0];
        assert_eq!(zs_index_load(bad.as_ptr() as *const c_char, &mut index), ZsStatus::InvalidUtf8);

        let junk = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(junk.path(), b"not an index").unwrap();
        let junk_path = c(junk.path().to_str().unwrap());
        assert_eq!(zs_index_load(junk_path.as_ptr(), &mut index), ZsStatus::IndexFormat);

        let mut out = 0.0;
        assert_eq!(zs_bonferroni(0.2, 0, &mut out), ZsStatus::InvalidArgument);
        assert_eq!(zs_pairwise_loss(f64::NAN, 0.0, &mut out), ZsStatus::InvalidArgument);
        assert_eq!(zs_pairwise_loss(0.0, 0.0, ptr::null_mut()), ZsStatus::NullPointer);

        // Null handles are tolerated by accessors and destructors.
        assert_eq!(zs_index_doc_count(ptr::null()), 0);
        zs_index_free(ptr::null_mut());
        zs_run_free(ptr::null_mut());
    }
}

#[test]
fn evaluate_and_fuse_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run_path = dir.path().join("a.run");
    std::fs::write(&run_path, "3 Q0 cv13 1 9.0 t\n3 Q0 cv18 2 8.0 t\n3 Q0 cv14 3 7.0 t\n").unwrap();
    let other_path = dir.path().join("b.run");
    std::fs::write(&other_path, "3 Q0 cv14 1 5.0 u\n3 Q0 cv13 2 4.0 u\n").unwrap();
    unsafe {
        let mut run: *mut ZsRun = ptr::null_mut();
        let mut other: *mut ZsRun = ptr::null_mut();
        let mut qrels: *mut ZsQrels = ptr::null_mut();
        assert_eq!(zs_run_read(c(run_path.to_str().unwrap()).as_ptr(), &mut run), ZsStatus::Ok);
        assert_eq!(zs_run_read(c(other_path.to_str().unwrap()).as_ptr(), &mut other), ZsStatus::Ok);
        assert_eq!(zs_qrels_read(synthetic("qrels.txt").as_ptr(), &mut qrels), ZsStatus::Ok);
        assert_eq!(zs_run_topic_count(run), 1);

        let (mut mean, mut topics) = (0.0, 0usize);
        assert_eq!(zs_evaluate(run, qrels, c("p@5f").as_ptr(), &mut mean, &mut topics), ZsStatus::Ok);
        assert_eq!((mean, topics), (0.4, 1));
        let mut mrr = 0.0;
        assert_eq!(zs_evaluate_topic(run, qrels, c("mrr@10").as_ptr(), c("3").as_ptr(), &mut mrr), ZsStatus::Ok);
        assert_eq!(mrr, 1.0);
        assert_eq!(zs_evaluate_topic(run, qrels, c("mrr@10").as_ptr(), c("9").as_ptr(), &mut mrr), ZsStatus::OutOfRange);
        assert_eq!(zs_evaluate(run, qrels, c("bogus").as_ptr(), &mut mean, ptr::null_mut()), ZsStatus::InvalidArgument);

        let runs = [run as *const ZsRun, other as *const ZsRun];
        let mut fused: *mut ZsRun = ptr::null_mut();
        assert_eq!(zs_rrf_fuse(runs.as_ptr(), 2, 60.0, 10, &mut fused), ZsStatus::Ok);
        let out = dir.path().join("fused.run");
        assert_eq!(zs_run_write(fused, c(out.to_str().unwrap()).as_ptr()), ZsStatus::Ok);
        let text = std::fs::read_to_string(&out).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("3 Q0 cv13 1 0.032522 "), "{first}");
        assert_eq!(zs_rrf_fuse(runs.as_ptr(), 1, 60.0, 10, &mut fused), ZsStatus::InvalidArgument);

        zs_run_free(run);
        zs_run_free(other);
        zs_run_free(fused);
        zs_qrels_free(qrels);
    }
}

#[test]
fn lexicon_matching() {
    let phrases = [c("gastric ulcer"), c("gas"), c("fever")];
    let ptrs: Vec<*const c_char> = phrases.iter().map(|p| p.as_ptr()).collect();
    unsafe {
        let mut lex: *mut ZsLexicon = ptr::null_mut();
        assert_eq!(zs_lexicon_new(ptrs.as_ptr(), ptrs.len(), ptr::null(), 0, true, &mut lex), ZsStatus::Ok);
        let mut hit = false;
        assert_eq!(zs_lexicon_matches(lex, c("what is gastric ulcer").as_ptr(), &mut hit), ZsStatus::Ok);
        assert!(hit);
        assert_eq!(zs_lexicon_matches(lex, c("cheap gas near me").as_ptr(), &mut hit), ZsStatus::Ok);
        assert!(!hit);
        zs_lexicon_free(lex);

        let mut plain: *mut ZsLexicon = ptr::null_mut();
        assert_eq!(zs_lexicon_new(ptrs.as_ptr(), ptrs.len(), ptr::null(), 0, false, &mut plain), ZsStatus::Ok);
        assert_eq!(zs_lexicon_matches(plain, c("cheap gas near me").as_ptr(), &mut hit), ZsStatus::Ok);
        assert!(hit);
        zs_lexicon_free(plain);

        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(file.path(), "fever\nfalls\n").unwrap();
        let mut loaded: *mut ZsLexicon = ptr::null_mut();
        assert_eq!(zs_lexicon_load(c(file.path().to_str().unwrap()).as_ptr(), ptr::null(), &mut loaded), ZsStatus::Ok);
        assert_eq!(zs_lexicon_matches(loaded, c("niagara falls").as_ptr(), &mut hit), ZsStatus::Ok);
        assert!(!hit);
        zs_lexicon_free(loaded);
    }
}

#[test]
fn loss_and_statistics() {
    unsafe {
        let mut loss = 0.0;
        assert_eq!(zs_pairwise_loss(1.5, 1.5, &mut loss), ZsStatus::Ok);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        let (mut dp, mut dn) = (0.0, 0.0);
        assert_eq!(zs_loss_gradient(0.0, 0.0, &mut dp, &mut dn), ZsStatus::Ok);
        assert_eq!((dp, dn), (-0.5, 0.5));

        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0; 5];
        let (mut t, mut p) = (0.0, 0.0);
        assert_eq!(zs_paired_t_test(a.as_ptr(), b.as_ptr(), 5, &mut t, &mut p), ZsStatus::Ok);
        assert!((t - 4.242640687119285).abs() < 1e-9);
        assert!((p - 0.013235599563682695).abs() < 1e-9);
        assert_eq!(zs_paired_t_test(a.as_ptr(), b.as_ptr(), 1, ptr::null_mut(), &mut p), ZsStatus::InvalidArgument);

        let mut adj = 0.0;
        assert_eq!(zs_bonferroni(0.3, 4, &mut adj), ZsStatus::Ok);
        assert_eq!(adj, 1.0);
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(zs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/zsrank.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    let source = include_str!("../src/lib.rs");
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 25, "{exports:?}");
    for name in exports {
        assert!(text.contains(&format!("{name}(")), "{name} missing from header");
    }
}

/// Compiles a small C program against the header, when a C compiler is
/// available.
#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        "#include \"zsrank.h\"\n\
         int main(void) {\n\
           double out = 0.0;\n\
           ZsStatus s = zs_pairwise_loss(1.0, 1.0, &out);\n\
           ZsIndex *idx = NULL;\n\
           (void)idx;\n\
           return s == ZS_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let include = header().parent().unwrap().to_path_buf();
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler found; header compile check skipped"),
    }
}
