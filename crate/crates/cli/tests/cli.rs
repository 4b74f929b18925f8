//! Golden tests for the command line interface: output, exit codes, and
//! byte-level determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cheesescript"))
}

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

fn write_temp(name: &str, content: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("cheesescript-cli-{name}"));
    std::fs::write(&path, content).unwrap();
    path
}

#[test]
fn run_sort_prints_the_sorted_list() {
    let out = bin().arg("run").arg(corpus("sort.acts")).output().unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), "[1, 2, 3, 7, 8, 9]\n");
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn run_fringe_prints_exactly() {
    let out = bin()
        .arg("run")
        .arg(corpus("fringe.acts"))
        .output()
        .unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), "[3, 4, 5]\ntrue\n");
}

#[test]
fn explore_prints_the_result_set() {
    let out = bin()
        .args(["explore", "--bound", "100000"])
        .arg(corpus("account.acts"))
        .output()
        .unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), "{2, 3, 4, 5}\n");
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn parse_errors_exit_2_with_location() {
    let path = write_temp("bad.acts", "1 +;;\n");
    let out = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":1:"), "stderr should carry line/col: {err}");
}

#[test]
fn uncaught_exceptions_exit_1() {
    let path = write_temp("boom.acts", "throw Boom;;\n");
    let out = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Boom"), "{err}");
    assert!(
        err.contains(":1:"),
        "exception should carry its source span: {err}"
    );
}

#[test]
fn stalled_schedules_exit_3() {
    let path = write_temp(
        "stall.acts",
        "L :=: actor() queue q (| wait -> passThru q -> void |);;\nL().wait;;\n",
    );
    let out = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn json_output_shape() {
    let out = bin()
        .args(["run", "--output", "json"])
        .arg(corpus("variadic.acts"))
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.starts_with("{\"results\":[\"6\",\"0\",\"9\"],\"steps\":"),
        "{text}"
    );
    assert!(text.trim_end().ends_with(",\"exit\":0}"), "{text}");
}

#[test]
fn identical_seeds_give_byte_identical_output_and_trace() {
    let run = |seed: &str| -> Output {
        bin()
            .args(["run", "--seed", seed, "--trace"])
            .arg(corpus("account.acts"))
            .output()
            .unwrap()
    };
    let a = run("9");
    let b = run("9");
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
    assert!(!a.stderr.is_empty(), "trace should appear on stderr");
}

#[test]
fn seed_env_variable_is_the_default() {
    let with_flag = bin()
        .args(["run", "--seed", "5"])
        .arg(corpus("account.acts"))
        .output()
        .unwrap();
    let with_env = bin()
        .arg("run")
        .arg(corpus("account.acts"))
        .env("CHEESESCRIPT_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(with_flag.stdout, with_env.stdout);
}

#[test]
fn multiple_files_share_one_session() {
    let defs = write_temp("defs.acts", "double(x) :=: x * 2;;\n");
    let uses = write_temp("uses.acts", "double(21);;\n");
    let out = bin().arg("run").arg(&defs).arg(&uses).output().unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), "42\n");
}

#[test]
fn repl_keeps_definitions_and_survives_errors() {
    use std::io::Write;
    let mut child = bin()
        .arg("repl")
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(
            b"factorial(n) :=: n ?? (0 -> 1, (> 0) -> n * factorial(n - 1));;\n\
              factorial(3);;\n\
              throw Boom;;\n\
              :seed 7\n\
              factorial(4);;\n\
              :quit\n",
        )
        .unwrap();
    let out = child.wait_with_output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("6\n"), "{stdout}");
    assert!(
        stdout.contains("24\n"),
        "session should survive the thrown exception: {stdout}"
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Boom"), "{stderr}");
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn explore_requires_a_bound() {
    let out = bin()
        .arg("explore")
        .arg(corpus("account.acts"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn every_corpus_program_runs_cleanly() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("acts") {
            continue;
        }
        let out = bin().arg("run").arg(&path).output().unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn repl_runs_are_repeatable_for_a_fixed_seed() {
    use std::io::Write;
    let drive = || {
        let mut child = bin()
            .arg("repl")
            .stdin(std::process::Stdio::piped())
            .stdout(std::process::Stdio::piped())
            .stderr(std::process::Stdio::piped())
            .spawn()
            .unwrap();
        child
            .stdin
            .as_mut()
            .unwrap()
            .write_all(
                b":seed 7\n\
                  A :=: actor((balance: b, penalty: p rigid) |-> Currency) (|\n\
                    getBalance -> b,\n\
                    withdraw(amount) -> void also b = b - amount |);;\n\
                  let c = A(balance: 5, penalty: 1) -> {c.withdraw(1), c.withdraw(2), c.getBalance};;\n\
                  :quit\n",
            )
            .unwrap();
        child.wait_with_output().unwrap().stdout
    };
    let a = drive();
    let b = drive();
    assert_eq!(a, b, "identical REPL sessions must print identically");
}
