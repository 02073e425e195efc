//! Literal values of the subject language, enough to evaluate mock-bank tests.
//!
//! Supports `None`, booleans, integers, strings, lists, tuples and dicts with
//! the subject runtime's `repr` formatting and equality semantics.

use std::fmt;

use thiserror::Error;

use crate::pysrc;

#[derive(Debug, Clone)]
pub enum PyValue {
    None,
    Bool(bool),
    Int(i64),
    Str(String),
    List(Vec<PyValue>),
    Tuple(Vec<PyValue>),
    /// Insertion-ordered.
    Dict(Vec<(PyValue, PyValue)>),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("literal parse error at byte {pos}: {msg}")]
pub struct LiteralError {
    pub pos: usize,
    pub msg: String,
}

impl PartialEq for PyValue {
    fn eq(&self, other: &Self) -> bool {
        use PyValue::*;
        match (self, other) {
            (None, None) => true,
            (Bool(a), Bool(b)) => a == b,
            (Int(a), Int(b)) => a == b,
            // True == 1 in the subject language
            (Bool(a), Int(b)) | (Int(b), Bool(a)) => i64::from(*a) == *b,
            (Str(a), Str(b)) => a == b,
            (List(a), List(b)) | (Tuple(a), Tuple(b)) => a == b,
            (Dict(a), Dict(b)) => {
                a.len() == b.len()
                    && a.iter()
                        .all(|(k, v)| b.iter().any(|(k2, v2)| k == k2 && v == v2))
            }
            _ => false,
        }
    }
}

impl PyValue {
    pub fn list(items: impl IntoIterator<Item = PyValue>) -> Self {
        PyValue::List(items.into_iter().collect())
    }

    pub fn str(s: &str) -> Self {
        PyValue::Str(s.to_string())
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            PyValue::Int(n) => Some(*n),
            PyValue::Bool(b) => Some(i64::from(*b)),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            PyValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_seq(&self) -> Option<&[PyValue]> {
        match self {
            PyValue::List(v) | PyValue::Tuple(v) => Some(v),
            _ => None,
        }
    }

    pub fn repr(&self) -> String {
        self.to_string()
    }

    /// Truthiness.
    pub fn truthy(&self) -> bool {
        match self {
            PyValue::None => false,
            PyValue::Bool(b) => *b,
            PyValue::Int(n) => *n != 0,
            PyValue::Str(s) => !s.is_empty(),
            PyValue::List(v) | PyValue::Tuple(v) => !v.is_empty(),
            PyValue::Dict(v) => !v.is_empty(),
        }
    }
}

fn repr_str(s: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let quote = if s.contains('\'') && !s.contains('"') {
        '"'
    } else {
        '\''
    };
    write!(f, "{quote}")?;
    for c in s.chars() {
        match c {
            '\\' => write!(f, "\\\\")?,
            '\n' => write!(f, "\\n")?,
            '\t' => write!(f, "\\t")?,
            '\r' => write!(f, "\\r")?,
            c if c == quote => write!(f, "\\{c}")?,
            c => write!(f, "{c}")?,
        }
    }
    write!(f, "{quote}")
}

impl fmt::Display for PyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PyValue::None => write!(f, "None"),
            PyValue::Bool(true) => write!(f, "True"),
            PyValue::Bool(false) => write!(f, "False"),
            PyValue::Int(n) => write!(f, "{n}"),
            PyValue::Str(s) => repr_str(s, f),
            PyValue::List(items) => {
                write!(f, "[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "]")
            }
            PyValue::Tuple(items) => {
                write!(f, "(")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                if items.len() == 1 {
                    write!(f, ",")?;
                }
                write!(f, ")")
            }
            PyValue::Dict(items) => {
                write!(f, "{{")?;
                for (i, (k, v)) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, LiteralError> {
        Err(LiteralError {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn value(&mut self) -> Result<PyValue, LiteralError> {
        self.skip_ws();
        match self.peek() {
            Some('[') => {
                self.pos += 1;
                let items = self.seq(']')?;
                Ok(PyValue::List(items))
            }
            Some('(') => {
                self.pos += 1;
                self.skip_ws();
                if self.eat(')') {
                    return Ok(PyValue::Tuple(Vec::new()));
                }
                let first = self.value()?;
                if self.eat(')') {
                    // parenthesised expression, not a tuple
                    return Ok(first);
                }
                if !self.eat(',') {
                    return self.err("expected ',' or ')'");
                }
                let mut items = vec![first];
                items.extend(self.seq(')')?);
                Ok(PyValue::Tuple(items))
            }
            Some('{') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    if self.eat('}') {
                        break;
                    }
                    let k = self.value()?;
                    if !self.eat(':') {
                        return self.err("expected ':' in dict");
                    }
                    let v = self.value()?;
                    items.push((k, v));
                    if self.eat('}') {
                        break;
                    }
                    if !self.eat(',') {
                        return self.err("expected ',' or '}' in dict");
                    }
                }
                Ok(PyValue::Dict(items))
            }
            Some('\'') | Some('"') => self.string(),
            Some(c) if c == '-' || c.is_ascii_digit() => self.int(),
            Some(c) if c.is_ascii_alphabetic() => {
                let rest = &self.src[self.pos..];
                let word: String = rest
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                    .collect();
                let v = match word.as_str() {
                    "None" => PyValue::None,
                    "True" => PyValue::Bool(true),
                    "False" => PyValue::Bool(false),
                    _ => return self.err(format!("unsupported name '{word}'")),
                };
                self.pos += word.len();
                Ok(v)
            }
            Some(c) => self.err(format!("unexpected '{c}'")),
            None => self.err("unexpected end"),
        }
    }

    fn seq(&mut self, close: char) -> Result<Vec<PyValue>, LiteralError> {
        let mut items = Vec::new();
        loop {
            if self.eat(close) {
                return Ok(items);
            }
            items.push(self.value()?);
            if self.eat(close) {
                return Ok(items);
            }
            if !self.eat(',') {
                return self.err(format!("expected ',' or '{close}'"));
            }
        }
    }

    fn int(&mut self) -> Result<PyValue, LiteralError> {
        let start = self.pos;
        if self.peek() == Some('-') {
            self.pos += 1;
            self.skip_ws();
        }
        let digits_start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '_') {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return self.err("expected digits");
        }
        if matches!(self.peek(), Some('.') | Some('e') | Some('E')) {
            return self.err("floats are not supported");
        }
        let text: String = self.src[start..self.pos]
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .collect();
        match text.parse::<i64>() {
            Ok(n) => Ok(PyValue::Int(n)),
            Err(_) => self.err("integer out of range"),
        }
    }

    fn string(&mut self) -> Result<PyValue, LiteralError> {
        let quote = self.peek().expect("quote");
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return self.err("unterminated string");
            };
            self.pos += c.len_utf8();
            if c == quote {
                return Ok(PyValue::Str(out));
            }
            if c == '\\' {
                let Some(e) = self.peek() else {
                    return self.err("dangling escape");
                };
                self.pos += e.len_utf8();
                out.push(match e {
                    'n' => '\n',
                    't' => '\t',
                    'r' => '\r',
                    '0' => '\0',
                    other => other,
                });
            } else {
                out.push(c);
            }
        }
    }
}

/// Parses one literal; the whole input must be consumed.
pub fn parse_literal(text: &str) -> Result<PyValue, LiteralError> {
    let mut p = Parser { src: text, pos: 0 };
    let v = p.value()?;
    p.skip_ws();
    if p.pos != text.len() {
        return p.err("trailing input");
    }
    Ok(v)
}

/// Parses a positional argument list such as `[1, 2], 2`. Keyword arguments
/// are rejected.
pub fn parse_args(text: &str) -> Result<Vec<PyValue>, LiteralError> {
    pysrc::split_top_level(text, ',')
        .into_iter()
        .enumerate()
        .filter(|(i, piece)| !(piece.is_empty() && *i > 0))
        .map(|(_, piece)| parse_literal(&piece))
        .collect()
}

/// Renders positional arguments as call text.
pub fn render_args(args: &[PyValue]) -> String {
    args.iter()
        .map(PyValue::repr)
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn repr_matches_runtime_formatting() {
        let v = PyValue::Dict(vec![
            (PyValue::str("a"), PyValue::Int(2)),
            (PyValue::str("it's"), PyValue::list([PyValue::Bool(true), PyValue::None])),
        ]);
        assert_eq!(v.repr(), "{'a': 2, \"it's\": [True, None]}");
        assert_eq!(PyValue::Tuple(vec![PyValue::Int(1)]).repr(), "(1,)");
    }

    #[test]
    fn parses_nested_literals() {
        let v = parse_literal("[[1, 3], [2, -6]]").unwrap();
        assert_eq!(v.repr(), "[[1, 3], [2, -6]]");
        let t = parse_literal("[('a',1)]").unwrap();
        assert_eq!(t.repr(), "[('a', 1)]");
        assert_eq!(parse_literal("(5)").unwrap(), PyValue::Int(5));
        assert!(parse_literal("1.5").is_err());
        assert!(parse_literal("foo").is_err());
        assert!(parse_literal("[1,").is_err());
    }

    #[test]
    fn parses_argument_lists() {
        let args = parse_args("[1, 2], 2").unwrap();
        assert_eq!(args.len(), 2);
        assert!(parse_args("").unwrap().is_empty());
        assert_eq!(render_args(&args), "[1, 2], 2");
    }

    #[test]
    fn dict_equality_ignores_order() {
        let a = parse_literal("{'a': 1, 'b': 2}").unwrap();
        let b = parse_literal("{'b': 2, 'a': 1}").unwrap();
        assert_eq!(a, b);
        assert_ne!(a.repr(), b.repr());
        assert_eq!(PyValue::Bool(true), PyValue::Int(1));
    }

    fn arb_value() -> impl Strategy<Value = PyValue> {
        let leaf = prop_oneof![
            Just(PyValue::None),
            any::<bool>().prop_map(PyValue::Bool),
            any::<i64>().prop_map(PyValue::Int),
            "[a-z '\"\\\\]{0,6}".prop_map(PyValue::Str),
        ];
        leaf.prop_recursive(3, 24, 4, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 0..4).prop_map(PyValue::List),
                proptest::collection::vec(inner.clone(), 0..4).prop_map(PyValue::Tuple),
                proptest::collection::vec(("[a-z]{1,3}".prop_map(PyValue::Str), inner), 0..3)
                    .prop_map(PyValue::Dict),
            ]
        })
    }

    proptest! {
        #[test]
        fn repr_then_parse_round_trips(v in arb_value()) {
            let text = v.repr();
            let back = parse_literal(&text).unwrap();
            prop_assert_eq!(back.repr(), text);
        }
    }
}
