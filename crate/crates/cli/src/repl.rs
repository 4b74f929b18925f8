//! Interactive session: one item per `;;`, definitions persist, errors
//! print without ending the session.

use std::io::BufRead;

use cheesescript::{RunError, Session, SessionConfig};

pub fn repl_loop(config: &SessionConfig, input: impl BufRead) -> u8 {
    let mut session = Session::new(config.clone());
    let mut trace = config.trace;
    let mut buffer = String::new();
    println!("cheesescript repl — end items with ;; — :quit to leave");
    for line in input.lines() {
        let line = match line {
            Ok(l) => l,
            Err(_) => break,
        };
        let trimmed = line.trim();
        if buffer.is_empty() && trimmed.starts_with(':') {
            match meta_command(trimmed, &mut session, &mut trace) {
                MetaResult::Quit => return 0,
                MetaResult::Handled => continue,
                MetaResult::Unknown => {
                    eprintln!("unknown command: {trimmed}");
                    continue;
                }
            }
        }
        buffer.push_str(&line);
        buffer.push('\n');
        if !buffer.contains(";;") {
            continue;
        }
        let source = std::mem::take(&mut buffer);
        match session.eval_source("<repl>", &source) {
            Ok(items) => {
                for w in session.warnings.drain(..) {
                    eprintln!("{w}");
                }
                for item in items {
                    if !item.is_definition {
                        println!("{}", item.rendered);
                    }
                }
            }
            Err(RunError::Uncaught(t)) => {
                eprintln!(
                    "{}: exception: {}",
                    t.span,
                    cheesescript::kernel::value::render(&t.value)
                )
            }
            Err(e) => eprintln!("{e}"),
        }
        if trace {
            for line in session.take_trace() {
                eprintln!("{line}");
            }
        }
    }
    0
}

enum MetaResult {
    Quit,
    Handled,
    Unknown,
}

fn meta_command(cmd: &str, session: &mut Session, trace: &mut bool) -> MetaResult {
    let mut parts = cmd.split_whitespace();
    match parts.next() {
        Some(":quit") | Some(":q") => MetaResult::Quit,
        Some(":seed") => {
            match parts.next().and_then(|s| s.parse::<u64>().ok()) {
                Some(seed) => {
                    session.set_seed(seed);
                    println!("seed set to {seed}");
                }
                None => eprintln!(":seed takes an integer"),
            }
            MetaResult::Handled
        }
        Some(":trace") => {
            match parts.next() {
                Some("on") => {
                    session.interp().enable_trace();
                    *trace = true;
                    println!("trace on");
                }
                Some("off") => {
                    session.take_trace();
                    *trace = false;
                    println!("trace off");
                }
                _ => eprintln!(":trace takes on or off"),
            }
            MetaResult::Handled
        }
        _ => MetaResult::Unknown,
    }
}
