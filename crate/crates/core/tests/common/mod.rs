#![allow(dead_code)]

use cheesescript::kernel::value::{render, Value};
use cheesescript::{RunError, Session, SessionConfig};

pub fn session(seed: u64) -> Session {
    Session::new(SessionConfig {
        seed,
        ..Default::default()
    })
}

/// Evaluate a source text; returns the rendered values of the top-level
/// non-definition items.
pub fn run(src: &str) -> Result<Vec<String>, RunError> {
    let mut s = session(0);
    let items = s.eval_source("test", src)?;
    Ok(items
        .into_iter()
        .filter(|i| !i.is_definition)
        .map(|i| i.rendered)
        .collect())
}

pub fn run_seeded(src: &str, seed: u64) -> Result<Vec<String>, RunError> {
    let mut s = session(seed);
    let items = s.eval_source("test", src)?;
    Ok(items
        .into_iter()
        .filter(|i| !i.is_definition)
        .map(|i| i.rendered)
        .collect())
}

pub fn run_values(src: &str) -> Result<Vec<Value>, RunError> {
    let mut s = session(0);
    let items = s.eval_source("test", src)?;
    Ok(items
        .into_iter()
        .filter(|i| !i.is_definition)
        .map(|i| i.value)
        .collect())
}

/// Evaluate and return the single result, panicking on errors.
pub fn run1(src: &str) -> String {
    let vals = run(src).unwrap_or_else(|e| panic!("program failed: {e}\n{src}"));
    assert_eq!(vals.len(), 1, "expected one result from {src}");
    vals.into_iter().next().unwrap()
}

/// Evaluate, expecting an uncaught exception; returns its structure tag.
pub fn expect_exception(src: &str) -> String {
    match run(src) {
        Err(RunError::Uncaught(t)) => match &t.value {
            Value::Obj(o) => o.tag.as_deref().unwrap_or("<untagged>").to_string(),
            other => render(other),
        },
        Ok(vals) => panic!("expected exception, got {vals:?}"),
        Err(e) => panic!("expected uncaught exception, got {e}"),
    }
}

pub fn corpus_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

pub fn corpus_source(name: &str) -> String {
    std::fs::read_to_string(corpus_path(name))
        .unwrap_or_else(|e| panic!("missing corpus file {name}: {e}"))
}

/// All corpus programs, sorted by file name.
pub fn corpus_files() -> Vec<(String, String)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .expect("corpus directory")
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".acts"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| (n.clone(), corpus_source(&n)))
        .collect()
}
