//! C ABI over `argmine`.
//!
//! Handles are opaque pointers created by `*_load`/`*_cluster` functions and
//! released by the matching `*_free`. Every fallible call returns an
//! [`ArgmineStatus`]; on failure [`argmine_last_error`] describes it. The
//! error message is per thread and lives until the next failing call on that
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use argmine::cluster::ClusterAssignment;
use argmine::corpus::{load_corpus, Corpus};
use argmine::metrics::{adjusted_rand_index, NoiseMode};
use argmine::pipeline::{run_pipeline, run_topic_stage, PipelineConfig, TopicConfig};
use argmine::Error;

/// Result of every fallible call. Codes 2-4 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgmineStatus {
    Ok = 0,
    /// A required pointer argument was null or a string was not UTF-8.
    InvalidArgument = 1,
    Config = 2,
    Data = 3,
    Numeric = 4,
    /// The output buffer is shorter than the data to copy.
    BufferTooSmall = 5,
    /// The library panicked; the handle involved should not be reused.
    Panic = 6,
}

pub struct ArgmineCorpus {
    corpus: Corpus,
}

pub struct ArgmineAssignment {
    assignment: ClusterAssignment,
    report: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: ArgmineStatus, msg: impl Into<String>) -> ArgmineStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> ArgmineStatus {
    let status = match e.exit_code() {
        2 => ArgmineStatus::Config,
        4 => ArgmineStatus::Numeric,
        _ => ArgmineStatus::Data,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> ArgmineStatus) -> ArgmineStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(ArgmineStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// # Safety
/// `s` is null or a NUL-terminated string.
unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, ArgmineStatus> {
    if s.is_null() {
        return Err(fail(ArgmineStatus::InvalidArgument, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(ArgmineStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn argmine_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version has no interior NUL"),
    };
    VERSION.as_ptr()
}

/// Message of the last failure on this thread, or null if none.
#[no_mangle]
pub extern "C" fn argmine_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Loads a corpus JSONL file into `*out`.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn argmine_corpus_load(path: *const c_char, out: *mut *mut ArgmineCorpus) -> ArgmineStatus {
    guard(|| {
        if out.is_null() {
            return fail(ArgmineStatus::InvalidArgument, "out is null");
        }
        let path = tri!(str_arg(path, "path"));
        match load_corpus(path) {
            Ok(corpus) => {
                *out = Box::into_raw(Box::new(ArgmineCorpus { corpus }));
                ArgmineStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of documents; 0 for a null handle.
///
/// # Safety
/// `corpus` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn argmine_corpus_len(corpus: *const ArgmineCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.corpus.len())
}

/// # Safety
/// `corpus` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn argmine_corpus_free(corpus: *mut ArgmineCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Clusters the documents of `corpus` into topics.
///
/// `config_json` is a topic configuration object as in the `topics` section
/// of a pipeline config, or null for the defaults.
///
/// # Safety
/// `corpus` is a live handle; `config_json` is null or a NUL-terminated
/// string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn argmine_topics_cluster(
    corpus: *const ArgmineCorpus,
    config_json: *const c_char,
    seed: u64,
    out: *mut *mut ArgmineAssignment,
) -> ArgmineStatus {
    guard(|| {
        let Some(corpus) = corpus.as_ref() else {
            return fail(ArgmineStatus::InvalidArgument, "corpus is null");
        };
        if out.is_null() {
            return fail(ArgmineStatus::InvalidArgument, "out is null");
        }
        let cfg: TopicConfig = if config_json.is_null() {
            TopicConfig::default()
        } else {
            let text = tri!(str_arg(config_json, "config_json"));
            match serde_json::from_str(text) {
                Ok(c) => c,
                Err(e) => return fail(ArgmineStatus::Config, format!("topic config: {e}")),
            }
        };
        let modes = [NoiseMode::WithNoiseSingleCluster, NoiseMode::ExcludeNoise];
        match run_topic_stage(&corpus.corpus, &cfg, &modes, seed) {
            Ok(t) => {
                let report = CString::new(t.report.to_json()).expect("JSON has no NUL");
                *out = Box::into_raw(Box::new(ArgmineAssignment {
                    assignment: t.assignment,
                    report,
                }));
                ArgmineStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `a` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn argmine_assignment_len(a: *const ArgmineAssignment) -> usize {
    a.as_ref().map_or(0, |a| a.assignment.len())
}

/// Number of non-noise clusters.
///
/// # Safety
/// `a` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn argmine_assignment_n_clusters(a: *const ArgmineAssignment) -> usize {
    a.as_ref().map_or(0, |a| a.assignment.n_clusters())
}

/// Copies the per-document labels (`-1` = noise) into `buf`.
///
/// # Safety
/// `a` is a live handle; `buf` points to `cap` writable `int64_t`.
#[no_mangle]
pub unsafe extern "C" fn argmine_assignment_labels(a: *const ArgmineAssignment, buf: *mut i64, cap: usize) -> ArgmineStatus {
    guard(|| {
        let Some(a) = a.as_ref() else {
            return fail(ArgmineStatus::InvalidArgument, "assignment is null");
        };
        let labels = a.assignment.labels();
        if labels.is_empty() {
            return ArgmineStatus::Ok;
        }
        if buf.is_null() {
            return fail(ArgmineStatus::InvalidArgument, "buf is null");
        }
        if cap < labels.len() {
            return fail(
                ArgmineStatus::BufferTooSmall,
                format!("buffer holds {cap} labels, need {}", labels.len()),
            );
        }
        ptr::copy_nonoverlapping(labels.as_ptr(), buf, labels.len());
        ArgmineStatus::Ok
    })
}

/// Clustering scores against the gold topics as a JSON object. The string
/// is owned by the handle.
///
/// # Safety
/// `a` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn argmine_assignment_report(a: *const ArgmineAssignment) -> *const c_char {
    a.as_ref().map_or(ptr::null(), |a| a.report.as_ptr())
}

/// # Safety
/// `a` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn argmine_assignment_free(a: *mut ArgmineAssignment) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Adjusted Rand index of two labelings of `n` items.
///
/// # Safety
/// `truth` and `pred` point to `n` readable `int64_t`; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn argmine_adjusted_rand_index(
    truth: *const i64,
    pred: *const i64,
    n: usize,
    out: *mut f64,
) -> ArgmineStatus {
    guard(|| {
        if out.is_null() || (n > 0 && (truth.is_null() || pred.is_null())) {
            return fail(ArgmineStatus::InvalidArgument, "null pointer argument");
        }
        let (t, p) = if n == 0 {
            (&[][..], &[][..])
        } else {
            (std::slice::from_raw_parts(truth, n), std::slice::from_raw_parts(pred, n))
        };
        match adjusted_rand_index(t, p) {
            Ok(v) => {
                *out = v;
                ArgmineStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs the stages listed in a pipeline config file and writes their outputs.
///
/// # Safety
/// `config_path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn argmine_pipeline_run(config_path: *const c_char) -> ArgmineStatus {
    guard(|| {
        let path = PathBuf::from(tri!(str_arg(config_path, "config_path")));
        let result = PipelineConfig::load(&path).and_then(|cfg| run_pipeline(&cfg, &cfg.stages));
        match result {
            Ok(_) => ArgmineStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}
