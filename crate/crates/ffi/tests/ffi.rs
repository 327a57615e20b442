use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use argmine::corpus::{save_corpus, Corpus, Document, Sentence};
use argmine_ffi::*;

fn last_error() -> String {
    let p = argmine_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn two_topic_corpus(path: &Path) {
    let mut docs = Vec::new();
    for (topic, words) in [("energy", "solar wind turbine grid power"), ("school", "pupil teacher uniform class exam")] {
        for d in 0..4 {
            let text: Vec<&str> = words.split(' ').cycle().skip(d).take(8).collect();
            docs.push(Document {
                doc_id: format!("{topic}-{d}"),
                title: String::new(),
                topic: topic.into(),
                sentences: vec![Sentence::new(text.join(" "))],
            });
        }
    }
    save_corpus(&Corpus::new("two", docs).unwrap(), path).unwrap();
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(argmine_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn ari_of_relabelled_partition_is_one() {
    let truth = [0i64, 0, 1, 1, 2];
    let pred = [7i64, 7, 3, 3, -1];
    let mut ari = 0.0;
    let s = unsafe { argmine_adjusted_rand_index(truth.as_ptr(), pred.as_ptr(), truth.len(), &mut ari) };
    assert_eq!(s, ArgmineStatus::Ok);
    assert_eq!(ari, 1.0);
}

#[test]
fn null_arguments_are_rejected_with_a_message() {
    let s = unsafe { argmine_adjusted_rand_index(ptr::null(), ptr::null(), 3, ptr::null_mut()) };
    assert_eq!(s, ArgmineStatus::InvalidArgument);
    assert!(last_error().contains("null"));

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { argmine_corpus_load(ptr::null(), &mut out) }, ArgmineStatus::InvalidArgument);
    assert!(out.is_null());
    assert_eq!(unsafe { argmine_corpus_len(ptr::null()) }, 0);
    unsafe { argmine_corpus_free(ptr::null_mut()) };
    unsafe { argmine_assignment_free(ptr::null_mut()) };
}

#[test]
fn errors_are_per_thread() {
    let s = unsafe { argmine_pipeline_run(ptr::null()) };
    assert_eq!(s, ArgmineStatus::InvalidArgument);
    let other = std::thread::spawn(|| argmine_last_error().is_null()).join().unwrap();
    assert!(other);
}

#[test]
fn missing_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = cstr(dir.path().join("absent.jsonl").to_str().unwrap());
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { argmine_corpus_load(path.as_ptr(), &mut out) }, ArgmineStatus::Data);
    assert!(last_error().contains("absent.jsonl"));
}

#[test]
fn missing_pipeline_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = cstr(dir.path().join("none.json").to_str().unwrap());
    assert_eq!(unsafe { argmine_pipeline_run(path.as_ptr()) }, ArgmineStatus::Config);
}

#[test]
fn topic_clustering_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    two_topic_corpus(&path);
    let path = cstr(path.to_str().unwrap());

    let mut corpus = ptr::null_mut();
    assert_eq!(unsafe { argmine_corpus_load(path.as_ptr(), &mut corpus) }, ArgmineStatus::Ok);
    assert_eq!(unsafe { argmine_corpus_len(corpus) }, 8);

    let bad = cstr(r#"{"model": "nonsense"}"#);
    let mut a = ptr::null_mut();
    assert_eq!(unsafe { argmine_topics_cluster(corpus, bad.as_ptr(), 1, &mut a) }, ArgmineStatus::Config);

    let cfg = cstr(r#"{"model": "kmeans_tfidf", "k": 2}"#);
    assert_eq!(unsafe { argmine_topics_cluster(corpus, cfg.as_ptr(), 1, &mut a) }, ArgmineStatus::Ok);
    assert_eq!(unsafe { argmine_assignment_len(a) }, 8);
    assert_eq!(unsafe { argmine_assignment_n_clusters(a) }, 2);

    let mut short = [0i64; 3];
    let s = unsafe { argmine_assignment_labels(a, short.as_mut_ptr(), short.len()) };
    assert_eq!(s, ArgmineStatus::BufferTooSmall);
    let mut labels = [0i64; 8];
    assert_eq!(unsafe { argmine_assignment_labels(a, labels.as_mut_ptr(), labels.len()) }, ArgmineStatus::Ok);
    assert!(labels[..4].iter().all(|&l| l == labels[0]));
    assert!(labels[4..].iter().all(|&l| l == labels[4] && l != labels[0]));

    let report = unsafe { CStr::from_ptr(argmine_assignment_report(a)) }.to_str().unwrap();
    let report: serde_json::Value = serde_json::from_str(report).unwrap();
    assert_eq!(report["with_noise.ari"], 1.0);

    unsafe {
        argmine_assignment_free(a);
        argmine_corpus_free(corpus);
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/argmine.h");
    assert!(header.is_file(), "build script writes the header");
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "argmine.h"
int main(void) {
    ArgmineCorpus *c = NULL;
    ArgmineStatus s = argmine_corpus_load("x.jsonl", &c);
    if (s != ARGMINE_STATUS_OK) return (int)s;
    argmine_corpus_free(c);
    return 0;
}
"#,
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .output()
        .expect("a C compiler is available");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
