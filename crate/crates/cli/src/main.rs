//! Command line interface: batch runner, interleaving explorer, and REPL.
//!
//! Exit codes: 0 success, 1 uncaught exception, 2 parse error, 3 step
//! limit (or a stalled schedule).

use std::io::Write;
use std::process::ExitCode;

use cheesescript::runtime::machine::DEFAULT_STEP_LIMIT;
use cheesescript::{explore_source, RunError, Session, SessionConfig};

mod repl;

#[derive(Clone, Copy, PartialEq)]
enum Output {
    Text,
    Json,
}

struct Config {
    mode: String,
    files: Vec<String>,
    seed: u64,
    step_limit: u64,
    trace: bool,
    bound: Option<u64>,
    output: Output,
}

const USAGE: &str = "usage: cheesescript <run|explore|repl> [options] [files...]
options:
  --seed N         scheduler seed (default 0 or $CHEESESCRIPT_SEED)
  --steps N        step limit (default 1000000)
  --trace          write the scheduler trace to stderr
  --bound N        interleaving bound (explore mode, required)
  --output MODE    text or json (default text)";

fn parse_args() -> Result<Config, String> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = args.first().cloned().ok_or(USAGE.to_string())?;
    if !matches!(mode.as_str(), "run" | "explore" | "repl") {
        return Err(format!("unknown mode '{mode}'\n{USAGE}"));
    }
    let default_seed = std::env::var("CHEESESCRIPT_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0u64);
    let mut cfg = Config {
        mode,
        files: Vec::new(),
        seed: default_seed,
        step_limit: DEFAULT_STEP_LIMIT,
        trace: false,
        bound: None,
        output: Output::Text,
    };
    let mut i = 1;
    let need = |i: usize, args: &[String], what: &str| -> Result<String, String> {
        args.get(i).cloned().ok_or(format!("{what} needs a value"))
    };
    while i < args.len() {
        match args[i].as_str() {
            "--seed" => {
                cfg.seed = need(i + 1, &args, "--seed")?
                    .parse()
                    .map_err(|_| "bad --seed")?;
                i += 2;
            }
            "--steps" => {
                cfg.step_limit = need(i + 1, &args, "--steps")?
                    .parse()
                    .map_err(|_| "bad --steps")?;
                i += 2;
            }
            "--bound" => {
                cfg.bound = Some(
                    need(i + 1, &args, "--bound")?
                        .parse()
                        .map_err(|_| "bad --bound")?,
                );
                i += 2;
            }
            "--trace" => {
                cfg.trace = true;
                i += 1;
            }
            "--output" => {
                cfg.output = match need(i + 1, &args, "--output")?.as_str() {
                    "text" => Output::Text,
                    "json" => Output::Json,
                    other => return Err(format!("unknown output mode '{other}'")),
                };
                i += 2;
            }
            flag if flag.starts_with("--") => return Err(format!("unknown flag '{flag}'")),
            file => {
                cfg.files.push(file.to_string());
                i += 1;
            }
        }
    }
    Ok(cfg)
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

fn print_json(results: &[String], steps: u64, exit: u8) {
    let items: Vec<String> = results
        .iter()
        .map(|r| format!("\"{}\"", json_escape(r)))
        .collect();
    println!(
        "{{\"results\":[{}],\"steps\":{},\"exit\":{}}}",
        items.join(","),
        steps,
        exit
    );
}

fn exit_code_for(err: &RunError) -> u8 {
    match err {
        RunError::Parse(_) => 2,
        RunError::Uncaught(_) => 1,
        RunError::StepLimit { .. } => 3,
    }
}

fn run_mode(cfg: &Config) -> u8 {
    let mut session = Session::new(SessionConfig {
        seed: cfg.seed,
        step_limit: cfg.step_limit,
        trace: cfg.trace,
    });
    let mut results = Vec::new();
    let mut exit = 0u8;
    'files: for file in &cfg.files {
        let source = match std::fs::read_to_string(file) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("{file}: {e}");
                exit = 2;
                break;
            }
        };
        match session.eval_source(file, &source) {
            Ok(items) => {
                for w in session.warnings.drain(..) {
                    eprintln!("{w}");
                }
                for item in items {
                    if !item.is_definition {
                        if cfg.output == Output::Text {
                            println!("{}", item.rendered);
                        }
                        results.push(item.rendered);
                    }
                }
            }
            Err(e) => {
                eprintln!("{e}");
                exit = exit_code_for(&e);
                break 'files;
            }
        }
    }
    if cfg.trace {
        let mut err = std::io::stderr().lock();
        for line in session.take_trace() {
            let _ = writeln!(err, "{line}");
        }
    }
    if cfg.output == Output::Json {
        print_json(&results, session.steps(), exit);
    }
    exit
}

fn explore_mode(cfg: &Config) -> u8 {
    let bound = match cfg.bound {
        Some(b) => b,
        None => {
            eprintln!("explore mode requires --bound N");
            return 2;
        }
    };
    if cfg.files.len() != 1 {
        eprintln!("explore mode takes exactly one file");
        return 2;
    }
    let file = &cfg.files[0];
    let source = match std::fs::read_to_string(file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{file}: {e}");
            return 2;
        }
    };
    match explore_source(file, &source, bound, cfg.step_limit) {
        Ok(outcome) => {
            let entries: Vec<String> = outcome
                .results
                .iter()
                .map(|r| r.replace('\n', "; "))
                .collect();
            if !outcome.complete {
                eprintln!(
                    "bound reached after {} interleavings; results are partial",
                    outcome.paths
                );
            }
            match cfg.output {
                Output::Text => println!("{{{}}}", entries.join(", ")),
                Output::Json => print_json(&entries, outcome.paths, 0),
            }
            0
        }
        Err(e) => {
            eprintln!("{e}");
            exit_code_for(&e)
        }
    }
}

fn main() -> ExitCode {
    let cfg = match parse_args() {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    let code = match cfg.mode.as_str() {
        "run" => run_mode(&cfg),
        "explore" => explore_mode(&cfg),
        "repl" => {
            let stdin = std::io::stdin();
            repl::repl_loop(&cfg_to_session(&cfg), stdin.lock())
        }
        _ => unreachable!(),
    };
    ExitCode::from(code)
}

fn cfg_to_session(cfg: &Config) -> SessionConfig {
    SessionConfig {
        seed: cfg.seed,
        step_limit: cfg.step_limit,
        trace: cfg.trace,
    }
}
