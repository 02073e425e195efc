//! Lexical helpers for subject-language (Python) source text.
//!
//! Nothing here builds an AST. The scanners only track string literals and
//! bracket depth, which is all the structural checks need.

/// Quote state while scanning.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Quote {
    None,
    Single(char),
    Triple(char),
}

/// Walks `text` calling `f(byte_index, char, depth)` for every character that
/// is outside a string literal. Depth counts `([{` nesting.
fn scan_code(text: &str, mut f: impl FnMut(usize, char, i32) -> bool) {
    let bytes = text.as_bytes();
    let mut quote = Quote::None;
    let mut depth = 0i32;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        match quote {
            Quote::Single(q) => {
                if c == '\\' {
                    iter.next();
                } else if c == q || c == '\n' {
                    quote = Quote::None;
                }
            }
            Quote::Triple(q) => {
                if c == '\\' {
                    iter.next();
                } else if c == q
                    && bytes.get(i + 1) == Some(&(q as u8))
                    && bytes.get(i + 2) == Some(&(q as u8))
                {
                    iter.next();
                    iter.next();
                    quote = Quote::None;
                }
            }
            Quote::None => {
                if c == '\'' || c == '"' {
                    if bytes.get(i + 1) == Some(&(c as u8)) && bytes.get(i + 2) == Some(&(c as u8)) {
                        iter.next();
                        iter.next();
                        quote = Quote::Triple(c);
                    } else {
                        quote = Quote::Single(c);
                    }
                    continue;
                }
                if c == '#' {
                    // comment to end of line
                    while let Some(&(_, n)) = iter.peek() {
                        if n == '\n' {
                            break;
                        }
                        iter.next();
                    }
                    continue;
                }
                match c {
                    '(' | '[' | '{' => {
                        if !f(i, c, depth) {
                            return;
                        }
                        depth += 1;
                        continue;
                    }
                    ')' | ']' | '}' => {
                        depth -= 1;
                    }
                    _ => {}
                }
                if !f(i, c, depth) {
                    return;
                }
            }
        }
    }
}

/// Net bracket depth at the end of `text`.
pub fn bracket_depth(text: &str) -> i32 {
    let mut depth = 0;
    scan_code(text, |_, c, _| {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            _ => {}
        }
        true
    });
    depth
}

/// `true` when every bracket opened in `text` is closed and no string is open.
pub fn is_balanced(text: &str) -> bool {
    bracket_depth(text) == 0 && !has_open_string(text)
}

fn has_open_string(text: &str) -> bool {
    let bytes = text.as_bytes();
    let mut quote = Quote::None;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match quote {
            Quote::Single(q) => {
                if c == b'\\' {
                    i += 1;
                } else if c == q as u8 {
                    quote = Quote::None;
                }
            }
            Quote::Triple(q) => {
                if c == b'\\' {
                    i += 1;
                } else if c == q as u8 && bytes.get(i + 1) == Some(&c) && bytes.get(i + 2) == Some(&c) {
                    i += 2;
                    quote = Quote::None;
                }
            }
            Quote::None => {
                if c == b'#' {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                } else if c == b'\'' || c == b'"' {
                    if bytes.get(i + 1) == Some(&c) && bytes.get(i + 2) == Some(&c) {
                        i += 2;
                        quote = Quote::Triple(c as char);
                    } else {
                        quote = Quote::Single(c as char);
                    }
                }
            }
        }
        i += 1;
    }
    quote != Quote::None
}

/// Byte index of the first occurrence of `pat` at depth 0 outside strings.
pub fn find_top_level(text: &str, pat: &str) -> Option<usize> {
    let mut found = None;
    scan_code(text, |i, _, d| {
        if d == 0 && text[i..].starts_with(pat) {
            found = Some(i);
            return false;
        }
        true
    });
    found
}

/// Byte index of the bracket closing the one at `open`.
pub fn matching_close(text: &str, open: usize) -> Option<usize> {
    let mut result = None;
    let mut base = None;
    scan_code(text, |i, c, d| {
        if i == open {
            base = Some(d);
            return true;
        }
        if let Some(b) = base {
            if i > open && matches!(c, ')' | ']' | '}') && d == b {
                result = Some(i);
                return false;
            }
        }
        true
    });
    result
}

/// Splits at `sep` occurrences at depth 0 outside strings. Pieces are trimmed;
/// an empty input yields no pieces.
pub fn split_top_level(text: &str, sep: char) -> Vec<String> {
    if text.trim().is_empty() {
        return Vec::new();
    }
    let mut cuts = Vec::new();
    scan_code(text, |i, c, d| {
        if d == 0 && c == sep {
            cuts.push(i);
        }
        true
    });
    let mut out = Vec::new();
    let mut start = 0;
    for cut in cuts {
        out.push(text[start..cut].trim().to_string());
        start = cut + sep.len_utf8();
    }
    out.push(text[start..].trim().to_string());
    out
}

/// Removes a trailing `#` comment (outside strings) from one line.
pub fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    let mut quote: Option<u8> = None;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match quote {
            Some(q) => {
                if c == b'\\' {
                    i += 1;
                } else if c == q {
                    quote = None;
                }
            }
            None => {
                if c == b'#' {
                    return line[..i].trim_end();
                }
                if c == b'\'' || c == b'"' {
                    quote = Some(c);
                }
            }
        }
        i += 1;
    }
    line.trim_end()
}

/// A logical statement: physical lines joined while brackets stay open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalLine {
    /// 1-based physical line number where the statement starts.
    pub line_no: usize,
    pub indent: usize,
    /// Statement text with comments removed.
    pub text: String,
}

/// Splits source into logical lines, skipping blank and comment-only lines.
pub fn logical_lines(source: &str) -> Vec<LogicalLine> {
    let mut out = Vec::new();
    let mut pending: Option<LogicalLine> = None;
    for (idx, raw) in source.lines().enumerate() {
        let code = strip_comment(raw);
        if let Some(mut cur) = pending.take() {
            cur.text.push('\n');
            cur.text.push_str(code.trim());
            if is_balanced(&cur.text) && !cur.text.ends_with('\\') {
                out.push(cur);
            } else {
                pending = Some(cur);
            }
            continue;
        }
        if code.trim().is_empty() {
            continue;
        }
        let indent = code.len() - code.trim_start().len();
        let cur = LogicalLine {
            line_no: idx + 1,
            indent,
            text: code.trim().to_string(),
        };
        if is_balanced(&cur.text) && !cur.text.ends_with('\\') {
            out.push(cur);
        } else {
            pending = Some(cur);
        }
    }
    if let Some(cur) = pending {
        out.push(cur);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopKind {
    Def,
    Class,
    Import,
    Other,
}

/// A top-level chunk of a source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopLevel {
    pub kind: TopKind,
    /// Defined name for `def`/`class`.
    pub name: Option<String>,
    pub text: String,
}

fn classify_top(line: &str) -> (TopKind, Option<String>) {
    let ident = |rest: &str| -> Option<String> {
        let name: String = rest
            .chars()
            .take_while(|c| c.is_alphanumeric() || *c == '_')
            .collect();
        (!name.is_empty()).then_some(name)
    };
    if let Some(rest) = line.strip_prefix("def ").or_else(|| line.strip_prefix("async def ")) {
        (TopKind::Def, ident(rest.trim_start()))
    } else if let Some(rest) = line.strip_prefix("class ") {
        (TopKind::Class, ident(rest.trim_start()))
    } else if line.starts_with("import ") || line.starts_with("from ") {
        (TopKind::Import, None)
    } else {
        (TopKind::Other, None)
    }
}

/// Splits a module into top-level chunks. Column-0 comments are attached to the
/// chunk that follows them; decorators start the chunk they decorate.
pub fn top_level_chunks(source: &str) -> Vec<TopLevel> {
    let mut chunks: Vec<TopLevel> = Vec::new();
    let mut leading: Vec<&str> = Vec::new();
    let mut open_depth_text = String::new();
    let mut decorator = false;
    for line in source.lines() {
        let trimmed = line.trim();
        let continuing = !open_depth_text.is_empty();
        if continuing {
            open_depth_text.push('\n');
            open_depth_text.push_str(line);
            if let Some(last) = chunks.last_mut() {
                last.text.push('\n');
                last.text.push_str(line);
            }
            if is_balanced(&open_depth_text) {
                open_depth_text.clear();
            }
            continue;
        }
        let at_col0 = !line.starts_with(' ') && !line.starts_with('\t');
        if trimmed.is_empty() {
            if let Some(last) = chunks.last_mut() {
                last.text.push('\n');
            }
            continue;
        }
        if at_col0 && trimmed.starts_with('#') {
            leading.push(line);
            continue;
        }
        if at_col0 && !decorator {
            let (kind, name) = classify_top(trimmed);
            let mut text = String::new();
            for l in leading.drain(..) {
                text.push_str(l);
                text.push('\n');
            }
            text.push_str(line);
            decorator = trimmed.starts_with('@');
            chunks.push(TopLevel { kind, name, text });
        } else if at_col0 && decorator {
            let (kind, name) = classify_top(trimmed);
            decorator = trimmed.starts_with('@');
            if let Some(last) = chunks.last_mut() {
                last.kind = kind;
                last.name = name;
                last.text.push('\n');
                last.text.push_str(line);
            }
        } else {
            match chunks.last_mut() {
                Some(last) => {
                    for l in leading.drain(..) {
                        last.text.push('\n');
                        last.text.push_str(l);
                    }
                    last.text.push('\n');
                    last.text.push_str(line);
                }
                None => chunks.push(TopLevel {
                    kind: TopKind::Other,
                    name: None,
                    text: line.to_string(),
                }),
            }
        }
        if !is_balanced(line) {
            open_depth_text = line.to_string();
        }
    }
    for c in &mut chunks {
        let trimmed = c.text.trim_end().to_string();
        c.text = trimmed;
    }
    chunks
}

/// `true` for a valid identifier (ASCII subset).
pub fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Python keywords that cannot be identifiers.
pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

/// Bare identifiers appearing outside strings, with the byte offset after each.
pub fn identifiers(text: &str) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut positions = Vec::new();
    scan_code(text, |i, c, _| {
        positions.push((i, c));
        true
    });
    let mut k = 0;
    while k < positions.len() {
        let (i, c) = positions[k];
        if c.is_alphabetic() || c == '_' {
            let prev_is_word = k > 0 && {
                let (pi, pc) = positions[k - 1];
                pi + pc.len_utf8() == i && (pc.is_alphanumeric() || pc == '_' || pc == '.')
            };
            let mut end = i + c.len_utf8();
            let mut j = k + 1;
            while j < positions.len() {
                let (ni, nc) = positions[j];
                if ni == end && (nc.is_alphanumeric() || nc == '_') {
                    end += nc.len_utf8();
                    j += 1;
                } else {
                    break;
                }
            }
            if !prev_is_word {
                out.push((text[i..end].to_string(), i, end));
            }
            k = j;
        } else {
            k += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_respects_brackets_and_strings() {
        assert_eq!(
            split_top_level("[1, 2], 'a,b', {'k': (1, 2)}", ','),
            vec!["[1, 2]", "'a,b'", "{'k': (1, 2)}"]
        );
        assert!(split_top_level("  ", ',').is_empty());
    }

    #[test]
    fn find_top_level_skips_nested() {
        let s = "f(a == b) == [x == y]";
        assert_eq!(find_top_level(s, "=="), Some(10));
        assert_eq!(find_top_level("'==' != 1", "=="), None);
    }

    #[test]
    fn matching_close_finds_partner() {
        let s = "f([1, (2)], 'x)') + 1";
        assert_eq!(matching_close(s, 1), Some(16));
        assert_eq!(matching_close(s, 2), Some(9));
    }

    #[test]
    fn comments_and_balance() {
        assert_eq!(strip_comment("x = '#' # c"), "x = '#'");
        assert!(is_balanced("f([1], {2: 3})"));
        assert!(!is_balanced("f([1,"));
        assert!(!is_balanced("'open"));
    }

    #[test]
    fn logical_lines_join_continuations() {
        let src = "def f():\n    # c\n    assert g([1,\n      2]) == 3\n";
        let lines = logical_lines(src);
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].text, "assert g([1,\n2]) == 3");
        assert_eq!(lines[1].line_no, 3);
        assert_eq!(lines[1].indent, 4);
    }

    #[test]
    fn chunks_split_definitions() {
        let src = "import math\n\n# helper\ndef a():\n    return 1\n\n@dec\ndef b(x,\ny):\n    return 2\nclass C:\n    pass\n";
        let chunks = top_level_chunks(src);
        let kinds: Vec<_> = chunks.iter().map(|c| (c.kind, c.name.clone())).collect();
        assert_eq!(
            kinds,
            vec![
                (TopKind::Import, None),
                (TopKind::Def, Some("a".into())),
                (TopKind::Def, Some("b".into())),
                (TopKind::Class, Some("C".into())),
            ]
        );
        assert!(chunks[1].text.starts_with("# helper\ndef a"));
    }

    #[test]
    fn identifiers_outside_strings() {
        let ids: Vec<String> = identifiers("f(x, 'y', z.w, 3)")
            .into_iter()
            .map(|(s, _, _)| s)
            .collect();
        assert_eq!(ids, vec!["f", "x", "z"]);
    }
}
