//! Five-step task synthesis: instructions, signature, candidate code, test
//! scenarios and tests, with structural validation between steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    CandidateSolution, Concept, DifficultyLabel, InvalidReason, MethodSpec, ParamSpec,
    SignatureKind, SignatureSpec, SolutionOrigin, TaskBundle, TestCase, TestStructure,
};
use crate::provider::{
    extract_code_blocks, parse_numbered_sections, GenerationRequest, Provider, TemplateId,
};
use crate::pysrc::{self, TopKind};
use crate::pyvalue;
use crate::util::{collapse_whitespace, derive_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DifficultyMix {
    pub medium: f64,
    pub hard: f64,
}

impl Default for DifficultyMix {
    fn default() -> Self {
        DifficultyMix { medium: 0.5, hard: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub instructions_per_concept: usize,
    pub solutions_per_instruction: usize,
    pub test_suites: usize,
    pub tests_per_suite: usize,
    pub difficulty_mix: DifficultyMix,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            instructions_per_concept: 6,
            solutions_per_instruction: 5,
            test_suites: 3,
            tests_per_suite: 10,
            difficulty_mix: DifficultyMix::default(),
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("instructions_per_concept", self.instructions_per_concept),
            ("solutions_per_instruction", self.solutions_per_instruction),
            ("test_suites", self.test_suites),
            ("tests_per_suite", self.tests_per_suite),
        ] {
            if v == 0 {
                return Err(format!("{name} must be at least 1"));
            }
        }
        let m = &self.difficulty_mix;
        if m.medium < 0.0 || m.hard < 0.0 || ((m.medium + m.hard) - 1.0).abs() > 1e-9 {
            return Err("difficulty_mix fractions must be non-negative and sum to 1".into());
        }
        Ok(())
    }

    /// Difficulty for all instructions of one concept, drawn from the mix by
    /// a stable hash of (seed, concept id).
    pub fn difficulty_for(&self, concept_id: &str, seed: u64) -> DifficultyLabel {
        let u = (derive_seed(seed, &format!("difficulty/{concept_id}")) >> 11) as f64 / (1u64 << 53) as f64;
        if u < self.difficulty_mix.medium {
            DifficultyLabel::Medium
        } else {
            DifficultyLabel::Hard
        }
    }
}

/// Pipeline step names used in the skip ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Instruction,
    Signature,
    Code,
    Scenarios,
    Tests,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub concept_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    pub step: Step,
    pub reason: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("provider: {0}")]
    Provider(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("duplicate instruction {0}")]
    DuplicateInstruction(usize),
    #[error("no candidate survived static checks")]
    NoCandidates,
}

fn complexity(label: DifficultyLabel) -> (&'static str, &'static str) {
    match label {
        DifficultyLabel::Medium => (
            "moderately challenging problems that combine two or three ideas with careful edge-case handling (5-7 difficulty)",
            "30-60 lines",
        ),
        DifficultyLabel::Hard => (
            "sophisticated long problems requiring complex algorithms and data structures (8-10 difficulty)",
            "50-100+ lines",
        ),
    }
}

/// Step 1. Exactly `instructions_per_concept` distinct instruction bodies.
pub fn generate_instructions(
    concept: &Concept,
    label: DifficultyLabel,
    config: &SynthesisConfig,
    provider: &dyn Provider,
    seed: u64,
) -> Result<Vec<String>, SynthError> {
    let (desc, lines) = complexity(label);
    let req = GenerationRequest::new(TemplateId::Instruction)
        .var("difficulty", label.as_str())
        .var("complexity_description", desc)
        .var("expected_lines", lines)
        .var("concept", concept.text.clone())
        .var("description", concept.description.clone())
        .var("examples", if concept.source_ref.is_empty() { "None" } else { concept.source_ref.as_str() })
        .seed(seed);
    let text = provider.complete(&req).map_err(|e| SynthError::Provider(e.to_string()))?;
    let bodies = parse_numbered_sections(&text, "Instruction", config.instructions_per_concept)
        .map_err(|e| SynthError::Parse(e.to_string()))?;
    for (i, b) in bodies.iter().enumerate() {
        if b.is_empty() {
            return Err(SynthError::Parse(format!("instruction {} is empty", i + 1)));
        }
        let key = collapse_whitespace(b);
        if bodies[..i].iter().any(|p| collapse_whitespace(p) == key) {
            return Err(SynthError::DuplicateInstruction(i + 1));
        }
    }
    Ok(bodies)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("signature format error at '{token}': {message}")]
pub struct SignatureError {
    pub token: String,
    pub message: String,
}

fn sig_err(token: &str, message: &str) -> SignatureError {
    SignatureError {
        token: token.to_string(),
        message: message.to_string(),
    }
}

fn check_type(t: &str) -> Result<(), SignatureError> {
    if t.is_empty() {
        return Err(sig_err(t, "empty type"));
    }
    if t.contains('"') || t.contains('\'') {
        return Err(sig_err(t, "quoted type"));
    }
    if !pysrc::is_balanced(t) {
        return Err(sig_err(t, "unbalanced brackets in type"));
    }
    if t.ends_with([',', '.', ';', ':']) {
        return Err(sig_err(t, "trailing punctuation"));
    }
    Ok(())
}

fn parse_param(text: &str) -> Result<ParamSpec, SignatureError> {
    let (name, ty) = match text.split_once(':') {
        Some((n, t)) => (n.trim(), t.trim()),
        None => (text.trim(), "unknown"),
    };
    if !pysrc::is_identifier(name) {
        return Err(sig_err(name, "parameter name is not an identifier"));
    }
    check_type(ty)?;
    Ok(ParamSpec {
        name: name.to_string(),
        type_expr: ty.to_string(),
    })
}

/// `name(params) -> ret` as (name, params, return_name, return_type).
fn parse_callable(text: &str) -> Result<(String, Vec<ParamSpec>, Option<String>, String), SignatureError> {
    let text = text.trim();
    if text.contains("**") {
        let tok = text.split('(').next().unwrap_or(text);
        return Err(sig_err(tok, "emphasis markers are not allowed"));
    }
    let open = text.find('(').ok_or_else(|| sig_err(text, "missing parameter list"))?;
    let name = text[..open].trim();
    if !pysrc::is_identifier(name) {
        return Err(sig_err(name, "name is not an identifier"));
    }
    let close = pysrc::matching_close(text, open).ok_or_else(|| sig_err(&text[open..], "unclosed parameter list"))?;
    let params: Vec<ParamSpec> = pysrc::split_top_level(&text[open + 1..close], ',')
        .iter()
        .filter(|p| !p.is_empty())
        .map(|p| parse_param(p))
        .collect::<Result<_, _>>()?;
    let rest = text[close + 1..].trim();
    let ret = rest
        .strip_prefix("->")
        .ok_or_else(|| {
            let tok = rest.split_whitespace().next().unwrap_or(rest);
            sig_err(if tok.is_empty() { text } else { tok }, "expected '-> return_type'")
        })?
        .trim();
    let (return_name, return_type) = match pysrc::find_top_level(ret, ":") {
        Some(i) if pysrc::is_identifier(ret[..i].trim()) => {
            (Some(ret[..i].trim().to_string()), ret[i + 1..].trim().to_string())
        }
        _ => (None, ret.to_string()),
    };
    check_type(&return_type)?;
    Ok((name.to_string(), params, return_name, return_type))
}

/// Primary method of a class: `compute` when declared, else the last
/// non-constructor method.
fn primary_of(methods: &[MethodSpec]) -> Option<String> {
    let regular: Vec<&MethodSpec> = methods.iter().filter(|m| m.name != "__init__").collect();
    regular
        .iter()
        .find(|m| m.name == "compute")
        .or(regular.last())
        .map(|m| m.name.clone())
}

/// Parses a `Function: ...` or `Class: ...` signature skeleton.
pub fn parse_signature(text: &str) -> Result<SignatureSpec, SignatureError> {
    let text = text.trim();
    for (c, what) in [('\t', "tab"), ('\n', "newline"), ('\\', "backslash")] {
        if let Some(i) = text.find(c) {
            let tok: String = text[i..].chars().take(12).collect();
            return Err(sig_err(&tok, &format!("{what} is not allowed")));
        }
    }
    if let Some(rest) = text.strip_prefix("Function:") {
        let (name, params, return_name, return_type) = parse_callable(rest)?;
        return Ok(SignatureSpec {
            kind: SignatureKind::Function,
            name,
            params,
            return_name,
            return_type,
            methods: Vec::new(),
            primary_method: None,
        });
    }
    let rest = text
        .strip_prefix("Class:")
        .ok_or_else(|| sig_err(text.split_whitespace().next().unwrap_or(""), "expected 'Function:' or 'Class:'"))?;
    let parts = pysrc::split_top_level(rest, ';');
    let class_name = parts.first().map_or("", |p| p.trim());
    if !pysrc::is_identifier(class_name) {
        return Err(sig_err(class_name, "class name is not an identifier"));
    }
    let mut methods = Vec::new();
    for part in parts.iter().skip(1) {
        if part.starts_with("Class:") {
            return Err(sig_err("Class:", "only one class may be declared"));
        }
        if part.is_empty() {
            return Err(sig_err(";", "empty method entry"));
        }
        let (name, mut params, return_name, return_type) = parse_callable(part)?;
        if params.first().map(|p| p.name.as_str()) != Some("self") {
            return Err(sig_err(&name, "method must take self first"));
        }
        params.remove(0);
        methods.push(MethodSpec {
            name,
            params,
            return_name,
            return_type,
        });
    }
    if !methods.iter().any(|m| m.name != "__init__") {
        return Err(sig_err(class_name, "class declares no methods"));
    }
    let params = methods
        .iter()
        .find(|m| m.name == "__init__")
        .map(|m| m.params.clone())
        .unwrap_or_default();
    let primary_method = primary_of(&methods);
    Ok(SignatureSpec {
        kind: SignatureKind::Class,
        name: class_name.to_string(),
        params,
        return_name: None,
        return_type: class_name.to_string(),
        methods,
        primary_method,
    })
}

fn render_params(params: &[ParamSpec], with_self: bool) -> String {
    let mut parts: Vec<String> = Vec::new();
    if with_self {
        parts.push("self".into());
    }
    parts.extend(params.iter().map(|p| format!("{}: {}", p.name, p.type_expr)));
    parts.join(", ")
}

fn render_return(name: &Option<String>, ty: &str) -> String {
    match name {
        Some(n) => format!("{n}: {ty}"),
        None => ty.to_string(),
    }
}

fn render_method(m: &MethodSpec) -> String {
    format!("{}({}) -> {}", m.name, render_params(&m.params, true), render_return(&m.return_name, &m.return_type))
}

/// Inverse of [`parse_signature`].
pub fn render_signature(spec: &SignatureSpec) -> String {
    match spec.kind {
        SignatureKind::Function => format!(
            "Function: {}({}) -> {}",
            spec.name,
            render_params(&spec.params, false),
            render_return(&spec.return_name, &spec.return_type)
        ),
        SignatureKind::Class => {
            let mut parts = vec![format!("Class: {}", spec.name)];
            parts.extend(spec.methods.iter().map(render_method));
            parts.join("; ")
        }
    }
}

/// Reads the signature skeleton from a provider response: the first fenced
/// block, else the first line starting with a signature keyword.
pub fn signature_text(response: &str) -> Option<String> {
    if let Ok(blocks) = extract_code_blocks(response) {
        if let Some(b) = blocks.into_iter().find(|b| !b.trim().is_empty()) {
            return Some(b.trim().to_string());
        }
    }
    response
        .lines()
        .map(str::trim)
        .find(|l| l.starts_with("Function:") || l.starts_with("Class:"))
        .map(str::to_string)
}

/// Static candidate check; returns the reason a candidate is dropped.
pub fn check_candidate(source: &str, sig: &SignatureSpec) -> Result<(), &'static str> {
    if !pysrc::is_balanced(source) {
        return Err("unbalanced brackets");
    }
    let chunks = pysrc::top_level_chunks(source);
    let want = match sig.kind {
        SignatureKind::Function => TopKind::Def,
        SignatureKind::Class => TopKind::Class,
    };
    let defs: Vec<_> = chunks
        .iter()
        .filter(|c| matches!(c.kind, TopKind::Def | TopKind::Class))
        .collect();
    let target = match defs.as_slice() {
        [only] if only.kind == want && only.name.as_deref() == Some(sig.name.as_str()) => *only,
        [] => return Err("no definition"),
        [_] => return Err("definition does not match the signature name"),
        _ => return Err("more than one top-level definition"),
    };
    if chunks.iter().any(|c| c.kind == TopKind::Other) {
        return Err("top-level statements besides the definition");
    }
    let lines = pysrc::logical_lines(&target.text);
    let body = &lines[1.min(lines.len())..];
    if sig.kind == SignatureKind::Function
        && body.iter().any(|l| {
            l.text.starts_with("def ") || l.text.starts_with("async def ") || l.text.starts_with("class ")
        })
    {
        return Err("nested definition");
    }
    if !body.iter().any(|l| l.text.starts_with("return ") || l.text.starts_with("return(")) {
        return Err("no return statement");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedCandidate {
    pub index: usize,
    pub reason: String,
}

fn method_list(sig: &SignatureSpec) -> String {
    sig.regular_methods().map(render_method).collect::<Vec<_>>().join("; ")
}

fn constructor_text(sig: &SignatureSpec) -> String {
    sig.constructor().map(render_method).unwrap_or_else(|| "None".to_string())
}

/// Step 3. Extracts up to `solutions_per_instruction` candidates and drops
/// those failing the static checks. Ids are `<task_id>/s<k>` by response
/// position.
pub fn generate_solutions(
    task_id: &str,
    instruction: &str,
    sig: &SignatureSpec,
    config: &SynthesisConfig,
    provider: &dyn Provider,
    seed: u64,
) -> Result<(Vec<CandidateSolution>, Vec<DroppedCandidate>), SynthError> {
    let req = match sig.kind {
        SignatureKind::Function => GenerationRequest::new(TemplateId::CodeFunction)
            .var("function_name", sig.name.clone())
            .var("input_params", render_params(&sig.params, false))
            .var("return_type", render_return(&sig.return_name, &sig.return_type)),
        SignatureKind::Class => GenerationRequest::new(TemplateId::CodeClass)
            .var("class_name", sig.name.clone())
            .var("method_signatures", method_list(sig))
            .var("constructor_signature", constructor_text(sig)),
    }
    .var("instruction", instruction)
    .seed(seed);
    let text = provider.complete(&req).map_err(|e| SynthError::Provider(e.to_string()))?;
    let blocks = extract_code_blocks(&text).map_err(|e| SynthError::Parse(e.to_string()))?;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (k, block) in blocks.into_iter().take(config.solutions_per_instruction).enumerate() {
        match check_candidate(&block, sig) {
            Ok(()) => kept.push(CandidateSolution {
                solution_id: format!("{task_id}/s{k}"),
                source: format!("{}\n", block.trim_end()),
                origin: SolutionOrigin::Generated,
            }),
            Err(reason) => dropped.push(DroppedCandidate { index: k, reason: reason.to_string() }),
        }
    }
    if kept.is_empty() {
        return Err(SynthError::NoCandidates);
    }
    Ok((kept, dropped))
}

/// Scenario lines of a fenced text block, at most ten.
pub fn parse_scenarios(response: &str) -> Vec<String> {
    let blocks = extract_code_blocks(response).unwrap_or_default();
    let body = blocks.into_iter().next().unwrap_or_default();
    body.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .take(10)
        .map(str::to_string)
        .collect()
}

/// Step 4.
pub fn generate_test_scenarios(
    instruction: &str,
    sig: &SignatureSpec,
    provider: &dyn Provider,
    seed: u64,
) -> Result<Vec<String>, SynthError> {
    let req = GenerationRequest::new(TemplateId::TestScenarios)
        .var("instruction", instruction)
        .var("signature_details", render_signature(sig))
        .seed(seed);
    let text = provider.complete(&req).map_err(|e| SynthError::Provider(e.to_string()))?;
    Ok(parse_scenarios(&text))
}

/// Splits `Name(a).m(b).n()` into `[("Name", "a"), ("m", "b"), ("n", "")]`.
pub fn split_call_chain(expr: &str) -> Option<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut rest = expr.trim();
    loop {
        let open = rest.find('(')?;
        let name = rest[..open].trim();
        if !pysrc::is_identifier(name) {
            return None;
        }
        let close = pysrc::matching_close(rest, open)?;
        out.push((name.to_string(), rest[open + 1..close].trim().to_string()));
        rest = rest[close + 1..].trim_start();
        if rest.is_empty() {
            return Some(out);
        }
        rest = rest.strip_prefix('.')?;
    }
}

/// The single assert of a structurally valid test: the call chain and the
/// expected-value text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertParts {
    pub chain: Vec<(String, String)>,
    pub expected: String,
}

fn free_identifiers(expr: &str) -> bool {
    let mut prev_end: Option<usize> = None;
    for (id, start, end) in pysrc::identifiers(expr) {
        // keyword argument names
        let after = expr[end..].trim_start();
        let is_kwarg = after.starts_with('=') && !after.starts_with("==");
        if !is_kwarg && !["True", "False", "None"].contains(&id.as_str()) {
            let _ = (start, prev_end);
            return true;
        }
        prev_end = Some(end);
    }
    false
}

fn literal_args(args: &str) -> bool {
    pysrc::split_top_level(args, ',')
        .iter()
        .filter(|a| !a.is_empty())
        .all(|a| pyvalue::parse_literal(a).is_ok() || !free_identifiers(a))
}

/// Checks one test against the structure rules.
pub fn validate_test_structure(test_id: &str, source: &str, sig: &SignatureSpec) -> TestCase {
    let (structure, reason) = classify_test(source, sig);
    TestCase {
        test_id: test_id.to_string(),
        source: source.to_string(),
        structure,
        invalid_reason: reason,
    }
}

fn invalid(reason: InvalidReason) -> (TestStructure, Option<InvalidReason>) {
    (TestStructure::Invalid, Some(reason))
}

fn classify_test(source: &str, sig: &SignatureSpec) -> (TestStructure, Option<InvalidReason>) {
    if !pysrc::is_balanced(source) {
        return invalid(InvalidReason::Unparseable);
    }
    let chunks: Vec<_> = pysrc::top_level_chunks(source)
        .into_iter()
        .filter(|c| c.kind != TopKind::Import)
        .collect();
    let test = match chunks.as_slice() {
        [] => return invalid(InvalidReason::Unparseable),
        [c] if c.kind == TopKind::Def && c.name.as_deref().is_some_and(|n| n.starts_with("test")) => c,
        [c] if c.kind == TopKind::Class => return invalid(InvalidReason::NotTopLevel),
        [c] if c.kind == TopKind::Def => return invalid(InvalidReason::NotTopLevel),
        _ => return invalid(InvalidReason::Unparseable),
    };
    let lines = pysrc::logical_lines(&test.text);
    let Some(header) = lines.first() else {
        return invalid(InvalidReason::Unparseable);
    };
    if !header.text.ends_with(':') {
        return invalid(InvalidReason::Unparseable);
    }
    let body = &lines[1..];
    if body.iter().any(|l| l.text.starts_with("def ") || l.text.starts_with("class ")) {
        return invalid(InvalidReason::NotTopLevel);
    }
    if body.iter().any(|l| {
        l.text == "try:" || l.text.starts_with("except") || l.text == "finally:" || l.text.starts_with("with pytest.raises")
    }) {
        return invalid(InvalidReason::TryExcept);
    }
    let asserts: Vec<&str> = body
        .iter()
        .filter_map(|l| l.text.strip_prefix("assert ").or_else(|| l.text.strip_prefix("assert(")))
        .collect();
    let others = body.iter().filter(|l| !l.text.starts_with("assert") && l.text != "pass").count();
    if others > 0 {
        return invalid(InvalidReason::AssignmentOutsideAssert);
    }
    match asserts.len() {
        0 => return invalid(InvalidReason::IndirectComparison),
        1 => {}
        _ => return invalid(InvalidReason::MultipleAsserts),
    }
    match assert_parts(asserts[0], sig) {
        Ok((parts, structure)) => {
            if parts.chain.iter().any(|(_, args)| !literal_args(args)) || free_identifiers(&parts.expected) {
                return invalid(InvalidReason::AssignmentOutsideAssert);
            }
            (structure, None)
        }
        Err(reason) => invalid(reason),
    }
}

/// Splits the assert expression (without the `assert` keyword).
pub fn assert_parts(expr: &str, sig: &SignatureSpec) -> Result<(AssertParts, TestStructure), InvalidReason> {
    let expr = pysrc::split_top_level(expr, ',').into_iter().next().unwrap_or_default();
    let expr = expr.trim();
    let expr = if expr.starts_with('(') && pysrc::matching_close(expr, 0) == Some(expr.len() - 1) {
        expr[1..expr.len() - 1].trim()
    } else {
        expr
    };
    let eq = pysrc::find_top_level(expr, "==").ok_or(InvalidReason::IndirectComparison)?;
    let lhs = expr[..eq].trim();
    let expected = expr[eq + 2..].trim().to_string();
    if expected.is_empty() || pysrc::find_top_level(&expected, "==").is_some() {
        return Err(InvalidReason::IndirectComparison);
    }
    let chain = split_call_chain(lhs).ok_or(InvalidReason::IndirectComparison)?;
    if chain[0].0 != sig.name {
        return Err(InvalidReason::WrongCallee);
    }
    let structure = match (sig.kind, chain.len()) {
        (SignatureKind::Function, 1) => TestStructure::ValidSingleAssert,
        (SignatureKind::Function, _) => return Err(InvalidReason::IndirectComparison),
        (SignatureKind::Class, 1) => return Err(InvalidReason::WrongCallee),
        (SignatureKind::Class, _) => TestStructure::ValidChainedAssert,
    };
    Ok((AssertParts { chain, expected }, structure))
}

/// Test functions of one provider response, in order.
pub fn split_tests(response: &str) -> Vec<String> {
    let blocks = extract_code_blocks(response).unwrap_or_default();
    let mut out = Vec::new();
    for b in blocks {
        for c in pysrc::top_level_chunks(&b) {
            if matches!(c.kind, TopKind::Def | TopKind::Class) {
                out.push(c.text);
            }
        }
    }
    out
}

/// Step 5 for one suite.
#[allow(clippy::too_many_arguments)]
pub fn generate_test_suite(
    task_id: &str,
    suite: usize,
    instruction: &str,
    sig: &SignatureSpec,
    scenarios: &[String],
    config: &SynthesisConfig,
    provider: &dyn Provider,
    seed: u64,
) -> Result<Vec<TestCase>, SynthError> {
    let required = if scenarios.is_empty() {
        "Test basic functionality".to_string()
    } else {
        scenarios.join("\n")
    };
    let req = match sig.kind {
        SignatureKind::Function => GenerationRequest::new(TemplateId::TestFunction)
            .var("function_name", sig.name.clone())
            .var("function_signature", render_signature(sig)),
        SignatureKind::Class => GenerationRequest::new(TemplateId::TestClass)
            .var("class_name", sig.name.clone())
            .var("method_signatures", method_list(sig))
            .var("primary_method", sig.primary_method.clone().unwrap_or_else(|| "compute".into())),
    }
    .var("instruction", instruction)
    .var("required_tests", required)
    .var("suite_index", suite.to_string())
    .seed(seed);
    let text = provider.complete(&req).map_err(|e| SynthError::Provider(e.to_string()))?;
    Ok(split_tests(&text)
        .into_iter()
        .take(config.tests_per_suite)
        .enumerate()
        .map(|(k, src)| {
            let id = format!("{task_id}/t{:02}", suite * config.tests_per_suite + k);
            validate_test_structure(&id, &src, sig)
        })
        .collect())
}

/// Steps 2 to 5 for one instruction.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_task(
    concept: &Concept,
    index: usize,
    instruction: &str,
    label: DifficultyLabel,
    config: &SynthesisConfig,
    provider: &dyn Provider,
    seed: u64,
) -> Result<TaskBundle, SkipEntry> {
    let task_id = format!("{}/{}", concept.id, index);
    let task_seed = derive_seed(seed, &task_id);
    let skip = |step: Step, reason: String| SkipEntry {
        concept_id: concept.id.clone(),
        task_id: Some(task_id.clone()),
        step,
        reason,
    };
    let sig_req = GenerationRequest::new(TemplateId::Signature)
        .var("instruction", instruction)
        .seed(task_seed);
    let response = provider
        .complete(&sig_req)
        .map_err(|e| skip(Step::Signature, format!("provider: {e}")))?;
    let text = signature_text(&response).ok_or_else(|| skip(Step::Signature, "no signature in response".into()))?;
    let signature = parse_signature(&text).map_err(|e| skip(Step::Signature, e.to_string()))?;

    let (solutions, dropped) =
        generate_solutions(&task_id, instruction, &signature, config, provider, task_seed)
            .map_err(|e| skip(Step::Code, e.to_string()))?;
    for d in &dropped {
        log::info!("{task_id}: dropped candidate {} ({})", d.index, d.reason);
    }
    let scenarios = generate_test_scenarios(instruction, &signature, provider, task_seed)
        .map_err(|e| skip(Step::Scenarios, e.to_string()))?;
    let mut tests = Vec::new();
    for suite in 0..config.test_suites {
        tests.extend(
            generate_test_suite(&task_id, suite, instruction, &signature, &scenarios, config, provider, task_seed)
                .map_err(|e| skip(Step::Tests, e.to_string()))?,
        );
    }
    Ok(TaskBundle {
        task_id,
        concept_id: concept.id.clone(),
        instruction: instruction.to_string(),
        difficulty_label: label,
        signature,
        solutions,
        tests,
    })
}

/// All steps for one concept. Tasks whose steps fail are skipped and logged.
pub fn synthesize_concept(
    concept: &Concept,
    config: &SynthesisConfig,
    provider: &dyn Provider,
    seed: u64,
) -> (Vec<TaskBundle>, Vec<SkipEntry>) {
    let label = config.difficulty_for(&concept.id, seed);
    let concept_seed = derive_seed(seed, &concept.id);
    let instructions = match generate_instructions(concept, label, config, provider, concept_seed) {
        Ok(i) => i,
        Err(e) => {
            return (
                Vec::new(),
                vec![SkipEntry {
                    concept_id: concept.id.clone(),
                    task_id: None,
                    step: Step::Instruction,
                    reason: e.to_string(),
                }],
            )
        }
    };
    let mut tasks = Vec::new();
    let mut skips = Vec::new();
    for (i, ins) in instructions.iter().enumerate() {
        match synthesize_task(concept, i, ins, label, config, provider, seed) {
            Ok(t) => tasks.push(t),
            Err(s) => skips.push(s),
        }
    }
    (tasks, skips)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn func_sig() -> SignatureSpec {
        parse_signature("Function: solution(nums: list[int], k: int) -> list[int]").unwrap()
    }

    #[test]
    fn parses_function_example() {
        let s = parse_signature("Function: solution(freq_list: list[tuple[str, int]]) -> dict[str, str]").unwrap();
        assert_eq!(s.kind, SignatureKind::Function);
        assert_eq!(s.params.len(), 1);
        assert_eq!(s.params[0].type_expr, "list[tuple[str, int]]");
        assert_eq!(s.return_type, "dict[str, str]");
    }

    #[test]
    fn parses_class_example() {
        let s = parse_signature(
            "Class: HuffmanTree; __init__(self, freq_list: list[tuple[str, int]]) -> unknown; build_tree(self) -> tuple; get_encoding(self) -> dict[str, str]",
        )
        .unwrap();
        assert_eq!(s.kind, SignatureKind::Class);
        assert!(s.constructor().is_some());
        assert_eq!(s.regular_methods().count(), 2);
        assert_eq!(s.primary_method.as_deref(), Some("get_encoding"));
        assert_eq!(s.params[0].name, "freq_list");
    }

    #[test]
    fn return_name_is_split() {
        let s = parse_signature("Class: T; build(self) -> tree: tuple; compute(self, x: int) -> int").unwrap();
        assert_eq!(s.methods[0].return_name.as_deref(), Some("tree"));
        assert_eq!(s.methods[0].return_type, "tuple");
        assert_eq!(s.primary_method.as_deref(), Some("compute"));
    }

    #[test]
    fn rejects_malformed_signatures() {
        let bad = [
            "Class: Matrix; **init**(self, data: list[list[int]]): add(self, other: \"Matrix\") -> \"Matrix\"",
            "Class: Polynomial; \\ __init__(self, coeffs: list[float]) -> None; \\ evaluate(self, value: float) -> float",
            "Class: Shape; area(self) -> float; Class: Circle; __init__(self, radius: float) -> None",
            "Function: solution(x: int) -> int.",
            "Function: solution(x: int):",
            "Function: solution(x:\tint) -> int",
            "Function: solution(x: \"Matrix\") -> int",
            "solution(x: int) -> int",
        ];
        for b in bad {
            assert!(parse_signature(b).is_err(), "{b}");
        }
        let e = parse_signature(bad[0]).unwrap_err();
        assert!(e.token.contains("**init**"), "{e}");
    }

    #[test]
    fn candidate_checks() {
        let sig = func_sig();
        assert!(check_candidate("def solution(nums, k):\n    return nums[:k]\n", &sig).is_ok());
        assert_eq!(
            check_candidate("def solution(nums, k):\n    def inner():\n        return 1\n    return inner()\n", &sig),
            Err("nested definition")
        );
        assert_eq!(check_candidate("def solution(nums, k):\n    print(nums)\n", &sig), Err("no return statement"));
        assert!(check_candidate("def other(nums, k):\n    return 1\n", &sig).is_err());
        assert!(check_candidate("import math\n\n# note\ndef solution(nums, k):\n    return 1\n", &sig).is_ok());
    }

    #[test]
    fn test_structure_examples() {
        let sig = func_sig();
        let v = |s: &str| validate_test_structure("t", s, &sig);
        assert_eq!(v("def test_basic():\n    assert solution([1,2,3], 2) == [1]").structure, TestStructure::ValidSingleAssert);
        assert_eq!(
            v("def test_wrong():\n    lst = [1, 2, 3]\n    assert solution(lst, 2) == [1]").invalid_reason,
            Some(InvalidReason::AssignmentOutsideAssert)
        );
        assert_eq!(
            v("def test_m():\n    # Test Case 1\n    assert solution([1], 1) == [1]\n    # Test Case 2\n    assert solution([2], 1) == [2]").invalid_reason,
            Some(InvalidReason::MultipleAsserts)
        );
        assert_eq!(
            v("def test_t():\n    try:\n        assert solution([], 1) == []\n    except ValueError:\n        pass").invalid_reason,
            Some(InvalidReason::TryExcept)
        );
        assert_eq!(v("def test_i():\n    assert solution([1], 1) != [2]").invalid_reason, Some(InvalidReason::IndirectComparison));
        assert_eq!(v("def test_c():\n    assert helper([1], 1) == [2]").invalid_reason, Some(InvalidReason::WrongCallee));
        assert_eq!(
            v("class TestX:\n    def test_a(self):\n        assert solution([1], 1) == [1]").invalid_reason,
            Some(InvalidReason::NotTopLevel)
        );
        assert_eq!(v("def test_u():\n    assert solution([1, 2) == 1").invalid_reason, Some(InvalidReason::Unparseable));
        assert_eq!(v("def test_f():\n    assert solution(xs, 2) == [1]").invalid_reason, Some(InvalidReason::AssignmentOutsideAssert));
        assert_eq!(v("def test_z():\n    assert solution([], -1) == []").structure, TestStructure::ValidSingleAssert);
    }

    #[test]
    fn chained_class_asserts() {
        let sig = parse_signature("Class: HuffmanTree; __init__(self, freq: list) -> unknown; get_encoding(self) -> dict").unwrap();
        let t = validate_test_structure("t", "def test_h():\n    assert HuffmanTree([('a',1)]).get_encoding() == {'a': '0'}", &sig);
        assert_eq!(t.structure, TestStructure::ValidChainedAssert);
        let t = validate_test_structure("t", "def test_h():\n    h = HuffmanTree([('a',1)])\n    assert h.get_encoding() == {}", &sig);
        assert_eq!(t.invalid_reason, Some(InvalidReason::AssignmentOutsideAssert));
    }

    #[test]
    fn scenario_parsing() {
        let many: String = (1..=12).map(|i| format!("Test case {i}\n")).collect();
        assert_eq!(parse_scenarios(&format!("```text\n{many}```")).len(), 10);
        assert!(parse_scenarios("```text\n\n```").is_empty());
    }

    #[test]
    fn difficulty_mix_extremes() {
        let mut c = SynthesisConfig {
            difficulty_mix: DifficultyMix { medium: 1.0, hard: 0.0 },
            ..SynthesisConfig::default()
        };
        assert_eq!(c.difficulty_for("x", 1), DifficultyLabel::Medium);
        c.difficulty_mix = DifficultyMix { medium: 0.0, hard: 1.0 };
        assert_eq!(c.difficulty_for("x", 1), DifficultyLabel::Hard);
        c.difficulty_mix = DifficultyMix { medium: 0.7, hard: 0.7 };
        assert!(c.validate().is_err());
    }
}
