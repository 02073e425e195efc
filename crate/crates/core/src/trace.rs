//! Trace sanitization, parsing into events, and rationale consistency checks.
//!
//! Raw logs follow the snooping tracer's layout:
//!
//! ```text
//! Source path:... /abs/solution.py
//! Starting var:.. nums = [1, 2]
//! 19:03:21.790438 call         6 def solution(nums):
//! 19:03:21.790501 line         7     total = 0
//! New var:....... total = 0
//! 19:03:21.790602 return       9     return total
//! Return value:.. 3
//! Elapsed time: 00:00:00.000164
//! ```
//!
//! Sanitized form drops colour codes and timestamps, collapses padding, and
//! reduces the source path to its file name:
//!
//! ```text
//! Source path: solution.py
//! Starting var: nums = [1, 2]
//! call 6 def solution(nums):
//! ```

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{TraceEvent, TraceEventKind};
use crate::pysrc;

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static pattern"))
}

fn ansi() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"\x1b\[[0-9;?]*[ -/]*[@-~]|\x1b")
}

fn stamped() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(
        &R,
        r"^\d{2}:\d{2}:\d{2}\.\d{6}\s+((?:call|line|return|exception|Elapsed time|Starting var|New var|Modified var|Return value)\b.*)$",
    )
}

fn marker() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"^(Starting var|New var|Modified var|Return value|Source path):\.+\s*(.*)$")
}

fn source_event() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"^(call|line|return|exception)\s+(\d+)(?:\s+(.*))?$")
}

fn var_line() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"^(Starting var|New var|Modified var): ([^\s=]+) = (.*)$")
}

/// Cleans a raw trace. Idempotent.
pub fn sanitize_trace(raw: &str) -> String {
    let text = ansi().replace_all(raw, "");
    let mut out: Vec<String> = Vec::new();
    for line in text.lines() {
        let mut line = line.trim().to_string();
        if let Some(c) = stamped().captures(&line) {
            line = c[1].to_string();
        }
        if let Some(c) = marker().captures(&line) {
            let value = &c[2];
            line = if &c[1] == "Source path" {
                let base = value.trim().rsplit(['/', '\\']).next().unwrap_or("");
                format!("Source path: {base}")
            } else {
                format!("{}: {value}", &c[1])
            };
        } else if source_event().is_match(&line) {
            line = crate::util::collapse_whitespace(&line);
        }
        if !line.is_empty() {
            out.push(line);
        }
    }
    let mut joined = out.join("\n");
    if !joined.is_empty() {
        joined.push('\n');
    }
    joined
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceParseError {
    #[error("no recognizable trace lines in {0} non-empty lines")]
    Unrecognized(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedTrace {
    pub events: Vec<TraceEvent>,
    /// Lines neither recognized nor folded into a multi-line value.
    pub skipped_lines: usize,
}

fn is_metadata(line: &str) -> bool {
    line.starts_with("Source path:")
        || line.starts_with("Call ended by exception")
        || line.starts_with("Exception:")
        || line.starts_with("Exception:....")
}

fn event(kind: TraceEventKind) -> TraceEvent {
    TraceEvent {
        seq: 0,
        kind,
        line_no: None,
        source_text: None,
        var_name: None,
        value_repr: None,
    }
}

fn recognize(line: &str) -> Option<TraceEvent> {
    if let Some(c) = source_event().captures(line) {
        let kind = match &c[1] {
            "call" => TraceEventKind::Call,
            "line" => TraceEventKind::Line,
            "return" => TraceEventKind::Return,
            _ => TraceEventKind::Exception,
        };
        let n: u32 = c[2].parse().ok().filter(|n| *n > 0)?;
        let mut e = event(kind);
        e.line_no = Some(n);
        e.source_text = Some(c.get(3).map_or("", |m| m.as_str()).to_string());
        return Some(e);
    }
    if let Some(c) = var_line().captures(line) {
        let kind = match &c[1] {
            "Starting var" => TraceEventKind::VarStart,
            "New var" => TraceEventKind::VarNew,
            _ => TraceEventKind::VarModified,
        };
        let mut e = event(kind);
        e.var_name = Some(c[2].to_string());
        e.value_repr = Some(c[3].to_string());
        return Some(e);
    }
    if let Some(v) = line.strip_prefix("Return value: ") {
        let mut e = event(TraceEventKind::ReturnValue);
        e.value_repr = Some(v.to_string());
        return Some(e);
    }
    if let Some(v) = line.strip_prefix("Elapsed time: ") {
        let mut e = event(TraceEventKind::Elapsed);
        e.value_repr = Some(v.trim().to_string());
        return Some(e);
    }
    None
}

/// Parses sanitized trace text into dense, ordered events.
pub fn parse_trace(clean: &str) -> Result<ParsedTrace, TraceParseError> {
    let mut events: Vec<TraceEvent> = Vec::new();
    let mut skipped = 0;
    let mut recognized = 0;
    let mut nonempty = 0;
    for raw in clean.lines() {
        let line = raw.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        nonempty += 1;
        if is_metadata(line) {
            recognized += 1;
            continue;
        }
        if let Some(mut e) = recognize(line) {
            recognized += 1;
            e.seq = events.len();
            events.push(e);
            continue;
        }
        let open = events
            .last_mut()
            .and_then(|e| e.value_repr.as_mut())
            .filter(|v| !pysrc::is_balanced(v));
        match open {
            Some(v) => {
                v.push('\n');
                v.push_str(line);
            }
            None => skipped += 1,
        }
    }
    if nonempty > 0 && recognized == 0 {
        return Err(TraceParseError::Unrecognized(nonempty));
    }
    if skipped > 0 {
        log::warn!("trace parse skipped {skipped} unrecognized lines");
    }
    Ok(ParsedTrace {
        events,
        skipped_lines: skipped,
    })
}

/// Renders events back to sanitized text; parsing the result yields the same
/// events.
pub fn render_events(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        let v = e.value_repr.as_deref().unwrap_or("");
        let name = e.var_name.as_deref().unwrap_or("");
        let line = match e.kind {
            TraceEventKind::Call | TraceEventKind::Line | TraceEventKind::Return | TraceEventKind::Exception => {
                let kind = match e.kind {
                    TraceEventKind::Call => "call",
                    TraceEventKind::Line => "line",
                    TraceEventKind::Return => "return",
                    _ => "exception",
                };
                let src = e.source_text.as_deref().unwrap_or("");
                let n = e.line_no.unwrap_or(0);
                if src.is_empty() {
                    format!("{kind} {n}")
                } else {
                    format!("{kind} {n} {src}")
                }
            }
            TraceEventKind::VarStart => format!("Starting var: {name} = {v}"),
            TraceEventKind::VarNew => format!("New var: {name} = {v}"),
            TraceEventKind::VarModified => format!("Modified var: {name} = {v}"),
            TraceEventKind::ReturnValue => format!("Return value: {v}"),
            TraceEventKind::Elapsed => format!("Elapsed time: {v}"),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub name: String,
    pub claimed_value: String,
    pub trace_values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub mentions_checked: usize,
    pub mentions_matched: usize,
    pub violations: Vec<Violation>,
    pub ratio: f64,
}

/// Comparison form for values: no whitespace, one quote style, no object
/// addresses.
pub fn normalize_value(text: &str) -> String {
    static ADDR: OnceLock<Regex> = OnceLock::new();
    let no_addr = re(&ADDR, r"\s+at\s+0x[0-9a-fA-F]+").replace_all(text, "");
    no_addr
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| if c == '"' { '\'' } else { c })
        .collect()
}

/// Byte length of the literal at the start of `text`, if any.
fn literal_len(text: &str) -> Option<usize> {
    let first = text.chars().next()?;
    match first {
        '[' | '(' | '{' => pysrc::matching_close(text, 0).map(|i| i + 1),
        '<' => {
            let mut depth = 0;
            for (i, c) in text.char_indices() {
                match c {
                    '<' => depth += 1,
                    '>' => {
                        depth -= 1;
                        if depth == 0 {
                            return Some(i + 1);
                        }
                    }
                    '\n' => return None,
                    _ => {}
                }
            }
            None
        }
        '\'' | '"' => {
            let mut escaped = false;
            for (i, c) in text.char_indices().skip(1) {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == first {
                    return Some(i + 1);
                } else if c == '\n' {
                    return None;
                }
            }
            None
        }
        c if c.is_ascii_digit() || c == '-' => {
            static NUM: OnceLock<Regex> = OnceLock::new();
            re(&NUM, r"^-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?").find(text).map(|m| m.end())
        }
        _ => ["True", "False", "None"].iter().find_map(|k| {
            let rest = text.strip_prefix(k)?;
            let next = rest.chars().next();
            (!next.is_some_and(|c| c.is_alphanumeric() || c == '_')).then_some(k.len())
        }),
    }
}

/// `name = literal` mentions in free text, in order of appearance.
pub fn extract_mentions(text: &str) -> Vec<(String, String)> {
    static NAME_EQ: OnceLock<Regex> = OnceLock::new();
    let pat = re(&NAME_EQ, r"([A-Za-z_][A-Za-z0-9_]*)[ \t]*=[ \t]*");
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    for c in pat.captures_iter(text) {
        let whole = c.get(0).expect("match");
        let name = c.get(1).expect("name");
        let eq = text[name.end()..whole.end()].find('=').map(|k| name.end() + k).expect("eq");
        let before_name = name.start().checked_sub(1).map(|i| bytes[i]);
        if matches!(before_name, Some(b'.') | Some(b'_')) || before_name.is_some_and(|b| b.is_ascii_alphanumeric()) {
            continue;
        }
        // part of ==, <=, >=, != or a keyword argument run like a==b
        if eq + 1 < bytes.len() && bytes[eq + 1] == b'=' {
            continue;
        }
        if eq > 0 && matches!(bytes[eq - 1], b'=' | b'<' | b'>' | b'!') {
            continue;
        }
        let rest = &text[whole.end()..];
        let Some(len) = literal_len(rest) else { continue };
        let after = rest[len..].trim_start_matches([' ', '\t']);
        let mut ahead = after.chars();
        let continues = match ahead.next() {
            Some('.') => ahead.next().is_some_and(|ch| ch.is_alphanumeric() || ch == '_'),
            Some(ch) => "+-*/%<>=!&|^@([".contains(ch),
            None => false,
        };
        if continues {
            continue;
        }
        out.push((name.as_str().to_string(), rest[..len].to_string()));
    }
    out
}

/// Checks every `name = literal` mention of a traced variable against the
/// values the trace recorded for it.
pub fn check_cot_consistency(cot: &str, events: &[TraceEvent]) -> ConsistencyReport {
    let mut checked = 0;
    let mut matched = 0;
    let mut violations = Vec::new();
    for (name, claimed) in extract_mentions(cot) {
        let values: Vec<&str> = events
            .iter()
            .filter(|e| e.kind.is_var() && e.var_name.as_deref() == Some(name.as_str()))
            .filter_map(|e| e.value_repr.as_deref())
            .collect();
        if values.is_empty() {
            continue;
        }
        checked += 1;
        let want = normalize_value(&claimed);
        if values.iter().any(|v| normalize_value(v) == want) {
            matched += 1;
        } else {
            let mut trace_values: Vec<String> = Vec::new();
            for v in values {
                if !trace_values.iter().any(|t| t == v) {
                    trace_values.push(v.to_string());
                }
            }
            violations.push(Violation {
                name,
                claimed_value: claimed,
                trace_values,
            });
        }
    }
    ConsistencyReport {
        mentions_checked: checked,
        mentions_matched: matched,
        violations,
        ratio: if checked == 0 {
            1.0
        } else {
            matched as f64 / checked as f64
        },
    }
}
