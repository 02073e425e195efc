//! Text-generation provider gateway: prompt templates, request rendering,
//! response parsers, and the provider backends (HTTP and offline mock).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod http;
pub mod mock;

pub use http::HttpProvider;
pub use mock::MockProvider;

/// Every prompt template the pipeline renders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Instruction,
    Signature,
    CodeFunction,
    CodeClass,
    TestScenarios,
    TestFunction,
    TestClass,
    ConceptScore,
    IoExtraction,
    QuestionPair,
    ForwardCot,
    BackwardCot,
    AnswerabilitySolve,
    DifficultyRating,
}

impl TemplateId {
    pub const ALL: [TemplateId; 14] = [
        TemplateId::Instruction,
        TemplateId::Signature,
        TemplateId::CodeFunction,
        TemplateId::CodeClass,
        TemplateId::TestScenarios,
        TemplateId::TestFunction,
        TemplateId::TestClass,
        TemplateId::ConceptScore,
        TemplateId::IoExtraction,
        TemplateId::QuestionPair,
        TemplateId::ForwardCot,
        TemplateId::BackwardCot,
        TemplateId::AnswerabilitySolve,
        TemplateId::DifficultyRating,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Instruction => "instruction",
            TemplateId::Signature => "signature",
            TemplateId::CodeFunction => "code_function",
            TemplateId::CodeClass => "code_class",
            TemplateId::TestScenarios => "test_scenarios",
            TemplateId::TestFunction => "test_function",
            TemplateId::TestClass => "test_class",
            TemplateId::ConceptScore => "concept_score",
            TemplateId::IoExtraction => "io_extraction",
            TemplateId::QuestionPair => "question_pair",
            TemplateId::ForwardCot => "forward_cot",
            TemplateId::BackwardCot => "backward_cot",
            TemplateId::AnswerabilitySolve => "answerability_solve",
            TemplateId::DifficultyRating => "difficulty_rating",
        }
    }

    /// Raw template text.
    pub fn template(self) -> &'static str {
        match self {
            TemplateId::Instruction => include_str!("templates/instruction.txt"),
            TemplateId::Signature => include_str!("templates/signature.txt"),
            TemplateId::CodeFunction => include_str!("templates/code_function.txt"),
            TemplateId::CodeClass => include_str!("templates/code_class.txt"),
            TemplateId::TestScenarios => include_str!("templates/test_scenarios.txt"),
            TemplateId::TestFunction => include_str!("templates/test_function.txt"),
            TemplateId::TestClass => include_str!("templates/test_class.txt"),
            TemplateId::ConceptScore => include_str!("templates/concept_score.txt"),
            TemplateId::IoExtraction => include_str!("templates/io_extraction.txt"),
            TemplateId::QuestionPair => include_str!("templates/question_pair.txt"),
            TemplateId::ForwardCot => include_str!("templates/forward_cot.txt"),
            TemplateId::BackwardCot => include_str!("templates/backward_cot.txt"),
            TemplateId::AnswerabilitySolve => include_str!("templates/answerability_solve.txt"),
            TemplateId::DifficultyRating => include_str!("templates/difficulty_rating.txt"),
        }
    }

    /// Placeholder names in first-appearance order, duplicates removed.
    pub fn placeholders(self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for seg in segments(self.template()) {
            if let Segment::Placeholder(name) = seg {
                if !out.iter().any(|n| n == name) {
                    out.push(name.to_string());
                }
            }
        }
        out
    }

    /// Sampling defaults: diverse generation for code and tests, greedy for
    /// scoring and extraction.
    pub fn default_sampling(self) -> Sampling {
        let temperature = match self {
            TemplateId::Instruction
            | TemplateId::CodeFunction
            | TemplateId::CodeClass
            | TemplateId::TestScenarios
            | TemplateId::TestFunction
            | TemplateId::TestClass
            | TemplateId::QuestionPair
            | TemplateId::ForwardCot
            | TemplateId::BackwardCot => 0.7,
            TemplateId::Signature
            | TemplateId::ConceptScore
            | TemplateId::IoExtraction
            | TemplateId::AnswerabilitySolve
            | TemplateId::DifficultyRating => 0.0,
        };
        Sampling {
            temperature,
            max_tokens: 4096,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A templated generation request. Extra variables that the template does
/// not reference are allowed; the mock provider uses some of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub template_id: TemplateId,
    pub variables: BTreeMap<String, String>,
    pub sampling: Sampling,
}

impl GenerationRequest {
    pub fn new(template_id: TemplateId) -> Self {
        GenerationRequest {
            template_id,
            variables: BTreeMap::new(),
            sampling: template_id.default_sampling(),
        }
    }

    pub fn var(mut self, name: &str, value: impl Into<String>) -> Self {
        self.variables.insert(name.to_string(), value.into());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.sampling.seed = Some(seed);
        self
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.variables.get(name).map(String::as_str)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template {template} has no binding for placeholder '{placeholder}'")]
    MissingBinding {
        template: &'static str,
        placeholder: String,
    },
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("provider gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("environment variable {0} is not set")]
    MissingToken(String),
    #[error("malformed provider response: {0}")]
    BadResponse(String),
    #[error("mock provider has no response for template {0}")]
    Unsupported(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("expected {expected} '{prefix}k:' sections, found {found}")]
    MissingSections {
        prefix: String,
        expected: usize,
        found: usize,
    },
    #[error("section markers out of order: expected {prefix}{expected}, found {prefix}{found}")]
    OutOfOrder {
        prefix: String,
        expected: usize,
        found: usize,
    },
    #[error("unterminated code fence opened on line {0}")]
    UnterminatedFence(usize),
}

/// A text-generation backend.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    /// Returns the raw completion for the rendered request.
    fn complete(&self, request: &GenerationRequest) -> Result<String, ProviderError>;
}

enum Segment<'a> {
    Literal(&'a str),
    Placeholder(&'a str),
}

/// Splits a template using format-string rules: `{{`/`}}` are literal braces,
/// `{name}` is a placeholder, and a stray brace is literal.
fn segments(template: &str) -> Vec<Segment<'_>> {
    let bytes = template.as_bytes();
    let mut out = Vec::new();
    let mut lit_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                out.push(Segment::Literal(&template[lit_start..i + 1]));
                i += 2;
                lit_start = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                out.push(Segment::Literal(&template[lit_start..i + 1]));
                i += 2;
                lit_start = i;
            }
            b'{' => {
                let close = template[i + 1..].find('}').map(|k| i + 1 + k);
                match close {
                    Some(end) if crate::pysrc::is_identifier(&template[i + 1..end]) => {
                        out.push(Segment::Literal(&template[lit_start..i]));
                        out.push(Segment::Placeholder(&template[i + 1..end]));
                        i = end + 1;
                        lit_start = i;
                    }
                    _ => i += 1,
                }
            }
            _ => i += 1,
        }
    }
    out.push(Segment::Literal(&template[lit_start..]));
    out
}

/// Substitutes every placeholder of the request's template.
pub fn render_prompt(request: &GenerationRequest) -> Result<String, TemplateError> {
    render_template(request.template_id, &request.variables)
}

pub fn render_template(
    id: TemplateId,
    variables: &BTreeMap<String, String>,
) -> Result<String, TemplateError> {
    let mut out = String::new();
    for seg in segments(id.template()) {
        match seg {
            Segment::Literal(text) => out.push_str(text),
            Segment::Placeholder(name) => match variables.get(name) {
                Some(v) => out.push_str(v),
                None => {
                    return Err(TemplateError::MissingBinding {
                        template: id.as_str(),
                        placeholder: name.to_string(),
                    })
                }
            },
        }
    }
    Ok(out)
}

fn section_marker(line: &str, prefix: &str) -> Option<(usize, String)> {
    let t = line.trim().trim_start_matches(['#', '*', ' ']);
    let rest = t.strip_prefix(prefix)?;
    let rest = rest.trim_start();
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    if digits.is_empty() {
        return None;
    }
    let after = rest[digits.len()..].trim_start_matches('*');
    let body = after.strip_prefix(':')?;
    let body = body.trim_start_matches('*');
    Some((digits.parse().ok()?, body.trim().to_string()))
}

/// Returns the bodies following `<prefix>k:` markers for k = 1..=expected.
pub fn parse_numbered_sections(
    text: &str,
    prefix: &str,
    expected: usize,
) -> Result<Vec<String>, ParseError> {
    let mut sections: Vec<(usize, Vec<String>)> = Vec::new();
    for line in text.lines() {
        if let Some((k, first)) = section_marker(line, prefix) {
            let mut body = Vec::new();
            if !first.is_empty() {
                body.push(first);
            }
            sections.push((k, body));
        } else if let Some((_, body)) = sections.last_mut() {
            body.push(line.to_string());
        }
    }
    for (idx, (k, _)) in sections.iter().enumerate() {
        if *k != idx + 1 {
            return Err(ParseError::OutOfOrder {
                prefix: prefix.to_string(),
                expected: idx + 1,
                found: *k,
            });
        }
    }
    if sections.len() < expected {
        return Err(ParseError::MissingSections {
            prefix: prefix.to_string(),
            expected,
            found: sections.len(),
        });
    }
    Ok(sections
        .into_iter()
        .take(expected)
        .map(|(_, body)| body.join("\n").trim().to_string())
        .collect())
}

/// Returns the contents of fenced code blocks in order, fences stripped.
pub fn extract_code_blocks(text: &str) -> Result<Vec<String>, ParseError> {
    let mut out = Vec::new();
    let mut current: Option<(usize, Vec<&str>)> = None;
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        match current.take() {
            None => {
                if let Some(rest) = t.strip_prefix("```") {
                    // one-line block: ```code```
                    if let Some(inner) = rest.strip_suffix("```") {
                        if !inner.trim().is_empty() {
                            out.push(inner.trim().to_string());
                            continue;
                        }
                    }
                    current = Some((idx + 1, Vec::new()));
                }
            }
            Some((start, mut body)) => {
                if t.starts_with("```") {
                    out.push(body.join("\n"));
                } else {
                    body.push(line);
                    current = Some((start, body));
                }
            }
        }
    }
    if let Some((start, _)) = current {
        return Err(ParseError::UnterminatedFence(start));
    }
    Ok(out)
}

/// Provider settings for the HTTP backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_token_env: String,
    /// Requests per second across all callers.
    pub rate_limit: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_ms: 500,
        }
    }
}
