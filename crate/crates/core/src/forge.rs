//! From verified pairs to training records: traced runs, I/O extraction,
//! question and rationale generation, dataset assembly and difficulty
//! subsetting.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{run_pair, run_traced, Backend, ExecLimits};
use crate::model::{
    CandidateSolution, CoTRecord, DatasetMode, Direction, Extraction, IOPair, Provenance,
    SignatureKind, SignatureSpec, SolutionOrigin, TaskBundle, TestCase, TestStructure, Trace,
    TraceEvent, Turn, VerifiedPair,
};
use crate::provider::{extract_code_blocks, GenerationRequest, Provider, TemplateId};
use crate::pysrc;
use crate::synthesis::{assert_parts, render_signature};
use crate::trace::{check_cot_consistency, normalize_value, parse_trace, sanitize_trace};
use crate::util::derive_seed;

/// File-name safe trace id for a test id.
pub fn trace_id_for(test_id: &str) -> String {
    test_id.replace('/', "__")
}

/// Why a test produced no trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceIssue {
    pub task_id: String,
    pub test_id: String,
    pub reason: String,
}

/// Traces the canonical solution on every passing test of `pair`. Only
/// passing runs with a parseable, valid trace are kept.
pub fn trace_pair(
    pair: &VerifiedPair,
    signature: &SignatureSpec,
    limits: &ExecLimits,
    backend: &dyn Backend,
) -> (Vec<Trace>, Vec<TraceIssue>) {
    let mut traces = Vec::new();
    let mut issues = Vec::new();
    for test in &pair.passing_tests {
        let issue = |reason: String| TraceIssue {
            task_id: pair.task_id.clone(),
            test_id: test.test_id.clone(),
            reason,
        };
        let (raw, outcome) = run_traced(&pair.canonical_solution, test, signature.target_name(), limits, backend);
        if !outcome.is_pass() {
            let detail = outcome.stderr_excerpt.clone();
            issues.push(issue(format!("traced run did not pass: {detail}")));
            continue;
        }
        let Some(raw) = raw else {
            issues.push(issue("runner returned no trace".into()));
            continue;
        };
        let clean = sanitize_trace(&raw);
        let parsed = match parse_trace(&clean) {
            Ok(p) => p,
            Err(e) => {
                issues.push(issue(e.to_string()));
                continue;
            }
        };
        let trace = Trace {
            trace_id: trace_id_for(&test.test_id),
            task_id: pair.task_id.clone(),
            test_id: test.test_id.clone(),
            sanitized_text: clean,
            events: parsed.events,
            outcome,
        };
        match trace.validate() {
            Ok(()) => traces.push(trace),
            Err(e) => issues.push(issue(e.to_string())),
        }
    }
    (traces, issues)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IoError {
    #[error("provider: {0}")]
    Provider(String),
    #[error("io extraction response lacks {0}")]
    Missing(&'static str),
}

fn structural_io(test: &TestCase, sig: &SignatureSpec) -> Option<IOPair> {
    if test.structure == TestStructure::Invalid {
        return None;
    }
    let lines = pysrc::logical_lines(&test.source);
    let expr = lines.iter().find_map(|l| l.text.strip_prefix("assert "))?;
    let (parts, _) = assert_parts(expr, sig).ok()?;
    let input = parts
        .chain
        .iter()
        .map(|(_, args)| args.as_str())
        .filter(|a| !a.is_empty())
        .collect::<Vec<_>>()
        .join(", ");
    Some(IOPair {
        input_expr: input,
        output_expr: parts.expected,
        extraction: Extraction::Structural,
    })
}

fn field<'a>(text: &'a str, label: &str) -> Option<&'a str> {
    text.lines().rev().find_map(|l| l.trim().strip_prefix(label)).map(str::trim)
}

/// Ground-truth input and output of a test: read structurally from the
/// assert, else through the provider.
pub fn extract_io(
    test: &TestCase,
    sig: &SignatureSpec,
    provider: &dyn Provider,
    seed: u64,
) -> Result<IOPair, IoError> {
    if let Some(io) = structural_io(test, sig) {
        return Ok(io);
    }
    let req = GenerationRequest::new(TemplateId::IoExtraction)
        .var("function_name", sig.name.clone())
        .var("test_source", test.source.clone())
        .seed(seed);
    let text = provider.complete(&req).map_err(|e| IoError::Provider(e.to_string()))?;
    let input = field(&text, "Input:").ok_or(IoError::Missing("Input"))?;
    let output = field(&text, "Output:").ok_or(IoError::Missing("Output"))?;
    if output.is_empty() {
        return Err(IoError::Missing("Output"));
    }
    Ok(IOPair {
        input_expr: input.to_string(),
        output_expr: output.to_string(),
        extraction: Extraction::ProviderAssisted,
    })
}

pub fn fallback_questions(io: &IOPair, sig: &SignatureSpec) -> (String, String) {
    (
        format!("Given the input {}, what does the function {} return?", io.input_expr, sig.name),
        format!("Which input to the function {} produces the output {}?", sig.name, io.output_expr),
    )
}

/// Forward and backward questions; each falls back to its template when the
/// response lacks the field or the field omits the expression it must embed.
pub fn generate_questions(
    io: &IOPair,
    sig: &SignatureSpec,
    instruction: &str,
    provider: &dyn Provider,
    seed: u64,
) -> (String, String) {
    let (fwd_default, bwd_default) = fallback_questions(io, sig);
    let req = GenerationRequest::new(TemplateId::QuestionPair)
        .var("function_name", sig.name.clone())
        .var("instruction", instruction)
        .var("input_expr", io.input_expr.clone())
        .var("output_expr", io.output_expr.clone())
        .seed(seed);
    let Ok(text) = provider.complete(&req) else {
        return (fwd_default, bwd_default);
    };
    let pick = |label: &str, must: &str, default: String| match field(&text, label) {
        Some(q) if !q.is_empty() && q.contains(must) => q.to_string(),
        _ => default,
    };
    (
        pick("Forward question:", &io.input_expr, fwd_default),
        pick("Backward question:", &io.output_expr, bwd_default),
    )
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CotRejection {
    #[error("provider: {detail}")]
    Provider { detail: String },
    #[error("malformed-cot")]
    MalformedCot,
    #[error("consistency ratio {ratio} below minimum")]
    Inconsistent { ratio: f64 },
    #[error("prediction {prediction} differs from expected output")]
    WrongPrediction { prediction: String },
    #[error("no plausible inputs")]
    NoPlausibleInputs,
    #[error("no plausible input reproduces the output")]
    Unconfirmed,
}

fn cot_request(id: TemplateId, instruction: &str, source: &str, question: &str, trace: &Trace, seed: u64) -> GenerationRequest {
    GenerationRequest::new(id)
        .var("instruction", instruction)
        .var("function_source", source)
        .var("question", question)
        .var("trace", trace.sanitized_text.clone())
        .seed(seed)
}

fn strip_ticks(s: &str) -> &str {
    s.trim().trim_matches('`').trim()
}

/// Splits a forward rationale at its final `Predicted Output:` marker.
pub fn split_forward(text: &str) -> Option<(String, String)> {
    let at = text.rfind("Predicted Output:")?;
    let prediction = strip_ticks(text[at + "Predicted Output:".len()..].lines().next().unwrap_or(""));
    if prediction.is_empty() {
        return None;
    }
    Some((text[..at].trim_end().to_string(), prediction.to_string()))
}

/// Checked forward turn: consistent with the trace and predicting the
/// expected output.
#[allow(clippy::too_many_arguments)]
pub fn generate_forward_cot(
    instruction: &str,
    function_source: &str,
    question: &str,
    trace: &Trace,
    io: &IOPair,
    consistency_min: f64,
    provider: &dyn Provider,
    seed: u64,
) -> Result<Turn, CotRejection> {
    let req = cot_request(TemplateId::ForwardCot, instruction, function_source, question, trace, seed);
    let text = provider.complete(&req).map_err(|e| CotRejection::Provider { detail: e.to_string() })?;
    let (cot, prediction) = split_forward(&text).ok_or(CotRejection::MalformedCot)?;
    let report = check_cot_consistency(&cot, &trace.events);
    if report.ratio < consistency_min {
        return Err(CotRejection::Inconsistent { ratio: report.ratio });
    }
    if normalize_value(&prediction) != normalize_value(&io.output_expr) {
        return Err(CotRejection::WrongPrediction { prediction });
    }
    Ok(Turn {
        direction: Direction::Forward,
        question: question.to_string(),
        cot,
        prediction,
    })
}

/// Splits a backward rationale into its text and the `Plausible input k:`
/// lines after the final `Predicted Input:` marker.
pub fn split_backward(text: &str) -> Option<(String, Vec<String>)> {
    let at = text.rfind("Predicted Input:")?;
    let inputs = text[at..]
        .lines()
        .filter_map(|l| {
            let l = l.trim();
            let rest = l.strip_prefix("Plausible input")?;
            let (k, value) = rest.split_once(':')?;
            k.trim().parse::<u32>().ok()?;
            Some(strip_ticks(value).to_string())
        })
        .collect();
    Some((text[..at].trim_end().to_string(), inputs))
}

/// Executes the canonical solution on proposed inputs.
#[derive(Clone, Copy)]
pub struct Verifier<'a> {
    pub solution: &'a CandidateSolution,
    pub backend: &'a dyn Backend,
    pub limits: &'a ExecLimits,
}

impl Verifier<'_> {
    /// Whether calling the target with `input` returns `output`.
    pub fn confirms(&self, sig: &SignatureSpec, input: &str, output: &str) -> bool {
        if sig.kind != SignatureKind::Function || !pysrc::is_balanced(input) {
            return false;
        }
        let test = TestCase {
            test_id: "backward-check".into(),
            source: format!("def test_backward():\n    assert {}({input}) == {output}\n", sig.name),
            structure: TestStructure::ValidSingleAssert,
            invalid_reason: None,
        };
        run_pair(self.solution, &test, &sig.name, self.limits, self.backend).is_pass()
    }
}

/// Checked backward turn. Accepts the first plausible input equal to the true
/// input; otherwise the first one the verifier confirms.
#[allow(clippy::too_many_arguments)]
pub fn generate_backward_cot(
    instruction: &str,
    function_source: &str,
    question: &str,
    trace: &Trace,
    io: &IOPair,
    sig: &SignatureSpec,
    verifier: Option<Verifier<'_>>,
    provider: &dyn Provider,
    seed: u64,
) -> Result<Turn, CotRejection> {
    let req = cot_request(TemplateId::BackwardCot, instruction, function_source, question, trace, seed);
    let text = provider.complete(&req).map_err(|e| CotRejection::Provider { detail: e.to_string() })?;
    let (cot, inputs) = split_backward(&text).ok_or(CotRejection::MalformedCot)?;
    if inputs.is_empty() {
        return Err(CotRejection::NoPlausibleInputs);
    }
    let want = normalize_value(&io.input_expr);
    let accepted = inputs
        .iter()
        .find(|i| normalize_value(i) == want)
        .or_else(|| {
            let v = verifier?;
            inputs.iter().find(|i| v.confirms(sig, i, &io.output_expr))
        })
        .ok_or(CotRejection::Unconfirmed)?;
    Ok(Turn {
        direction: Direction::Backward,
        question: question.to_string(),
        cot,
        prediction: accepted.clone(),
    })
}

/// Both directions for one traced test, before assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgedRecord {
    pub task_id: String,
    pub test_id: String,
    pub trace_id: String,
    pub instruction: String,
    pub function_source: String,
    pub cluster_score: u64,
    pub io: IOPair,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward: Option<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backward: Option<Turn>,
}

/// Why a direction (or the whole test, when `direction` is absent) was
/// dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgeIssue {
    pub task_id: String,
    pub test_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForgeConfig {
    pub consistency_min: f64,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        ForgeConfig { consistency_min: 1.0 }
    }
}

/// Inputs for forging one task.
pub struct ForgeJob<'a> {
    pub task: &'a TaskBundle,
    pub pair: &'a VerifiedPair,
    pub traces: Vec<&'a Trace>,
}

fn forge_one(
    job: &ForgeJob<'_>,
    trace: &Trace,
    config: &ForgeConfig,
    provider: &dyn Provider,
    verifier: Option<(&dyn Backend, &ExecLimits)>,
    seed: u64,
) -> (Option<ForgedRecord>, Vec<ForgeIssue>) {
    let task = job.task;
    let issue = |direction: Option<Direction>, reason: String| ForgeIssue {
        task_id: task.task_id.clone(),
        test_id: trace.test_id.clone(),
        direction,
        reason,
    };
    let Some(test) = job.pair.passing_tests.iter().find(|t| t.test_id == trace.test_id) else {
        return (None, vec![issue(None, "trace does not belong to a passing test".into())]);
    };
    let seed = derive_seed(seed, &format!("forge/{}", trace.test_id));
    let io = match extract_io(test, &task.signature, provider, seed) {
        Ok(io) => io,
        Err(e) => return (None, vec![issue(None, e.to_string())]),
    };
    let source = &job.pair.canonical_solution.source;
    let (fq, bq) = generate_questions(&io, &task.signature, &task.instruction, provider, seed);
    let mut issues = Vec::new();
    let forward = generate_forward_cot(&task.instruction, source, &fq, trace, &io, config.consistency_min, provider, seed)
        .map_err(|e| issues.push(issue(Some(Direction::Forward), e.to_string())))
        .ok();
    let v = verifier.map(|(backend, limits)| Verifier {
        solution: &job.pair.canonical_solution,
        backend,
        limits,
    });
    let backward = generate_backward_cot(&task.instruction, source, &bq, trace, &io, &task.signature, v, provider, seed)
        .map_err(|e| issues.push(issue(Some(Direction::Backward), e.to_string())))
        .ok();
    let record = ForgedRecord {
        task_id: task.task_id.clone(),
        test_id: trace.test_id.clone(),
        trace_id: trace.trace_id.clone(),
        instruction: task.instruction.clone(),
        function_source: source.clone(),
        cluster_score: job.pair.cluster_score,
        io,
        forward,
        backward,
    };
    (Some(record), issues)
}

/// Forges every traced test concurrently; output sorted by (task, test).
pub fn forge_all(
    jobs: &[ForgeJob<'_>],
    config: &ForgeConfig,
    provider: &dyn Provider,
    verifier: Option<(&dyn Backend, &ExecLimits)>,
    seed: u64,
) -> (Vec<ForgedRecord>, Vec<ForgeIssue>) {
    let units: Vec<(&ForgeJob<'_>, &Trace)> = jobs.iter().flat_map(|j| j.traces.iter().map(move |t| (j, *t))).collect();
    let results: Vec<(Option<ForgedRecord>, Vec<ForgeIssue>)> = units
        .par_iter()
        .map(|(job, trace)| forge_one(job, trace, config, provider, verifier, seed))
        .collect();
    let mut records = Vec::new();
    let mut issues = Vec::new();
    for (r, i) in results {
        records.extend(r);
        issues.extend(i);
    }
    records.sort_by(|a, b| (&a.task_id, &a.test_id).cmp(&(&b.task_id, &b.test_id)));
    issues.sort_by(|a, b| (&a.task_id, &a.test_id, a.direction).cmp(&(&b.task_id, &b.test_id, b.direction)));
    (records, issues)
}

/// Dataset records of one mode, in (task, test) order.
pub fn assemble(records: &[ForgedRecord], mode: DatasetMode) -> Vec<CoTRecord> {
    let mut sorted: Vec<&ForgedRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.task_id, &a.test_id).cmp(&(&b.task_id, &b.test_id)));
    sorted
        .into_iter()
        .filter_map(|r| {
            let turns: Vec<Turn> = match mode {
                DatasetMode::Forward => vec![r.forward.clone()?],
                DatasetMode::Backward => vec![r.backward.clone()?],
                DatasetMode::Bidirectional => vec![r.forward.clone()?, r.backward.clone()?],
            };
            Some(CoTRecord {
                task_id: r.task_id.clone(),
                mode,
                instruction: r.instruction.clone(),
                function_source: r.function_source.clone(),
                turns,
                provenance: Provenance {
                    trace_id: r.trace_id.clone(),
                    test_id: r.test_id.clone(),
                    cluster_score: r.cluster_score,
                },
            })
        })
        .collect()
}

/// Outcome of a subsetting filter for one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub task_id: String,
    pub filter: String,
    pub kept: bool,
    pub reason: String,
}

/// Drops tasks the provider already solves: its answer passes every
/// passing test. Tasks with no extractable answer are kept.
pub fn filter_answerability(
    pairs: &[VerifiedPair],
    tasks: &BTreeMap<String, TaskBundle>,
    provider: &dyn Provider,
    backend: &dyn Backend,
    limits: &ExecLimits,
    seed: u64,
) -> (Vec<VerifiedPair>, Vec<FilterDecision>) {
    let decide = |pair: &VerifiedPair| -> (bool, String) {
        let Some(task) = tasks.get(&pair.task_id) else {
            return (true, "task bundle not found".into());
        };
        let req = GenerationRequest::new(TemplateId::AnswerabilitySolve)
            .var("instruction", task.instruction.clone())
            .var("signature", render_signature(&task.signature))
            .seed(derive_seed(seed, &format!("answer/{}", pair.task_id)));
        let code = match provider.complete(&req) {
            Ok(text) => extract_code_blocks(&text).ok().and_then(|b| b.into_iter().find(|c| !c.trim().is_empty())),
            Err(e) => return (true, format!("provider: {e}")),
        };
        let Some(code) = code else {
            return (true, "no code in answer".into());
        };
        let answer = CandidateSolution {
            solution_id: format!("{}/answer", pair.task_id),
            source: code,
            origin: SolutionOrigin::Generated,
        };
        let target = task.signature.target_name();
        let failed = pair
            .passing_tests
            .iter()
            .filter(|t| !run_pair(&answer, t, target, limits, backend).is_pass())
            .count();
        if failed == 0 {
            (false, "answered".into())
        } else {
            (true, format!("answer failed {failed} of {} tests", pair.passing_tests.len()))
        }
    };
    let verdicts: Vec<(bool, String)> = pairs.par_iter().map(decide).collect();
    let mut kept = Vec::new();
    let mut log = Vec::new();
    for (pair, (keep, reason)) in pairs.iter().zip(verdicts) {
        log.push(FilterDecision {
            task_id: pair.task_id.clone(),
            filter: "answerability".into(),
            kept: keep,
            reason,
        });
        if keep {
            kept.push(pair.clone());
        }
    }
    (kept, log)
}

/// Rating word of a difficulty response: easy, medium or hard.
pub fn parse_difficulty_rating(text: &str) -> Option<&'static str> {
    let t = text.trim();
    let t = t
        .lines()
        .rev()
        .find_map(|l| {
            let l = l.trim();
            l.get(..11)
                .filter(|p| p.eq_ignore_ascii_case("difficulty:"))
                .map(|_| &l[11..])
        })
        .unwrap_or(t);
    let word = t.trim().trim_matches(|c: char| !c.is_alphanumeric()).to_ascii_lowercase();
    ["easy", "medium", "hard"].into_iter().find(|w| *w == word)
}

/// Keeps tasks rated medium or hard; unparseable ratings drop the task.
pub fn filter_rated_difficulty(
    pairs: &[VerifiedPair],
    tasks: &BTreeMap<String, TaskBundle>,
    provider: &dyn Provider,
    seed: u64,
) -> (Vec<VerifiedPair>, Vec<FilterDecision>) {
    let rate = |pair: &VerifiedPair| -> (bool, String) {
        let Some(task) = tasks.get(&pair.task_id) else {
            return (false, "task bundle not found".into());
        };
        let req = GenerationRequest::new(TemplateId::DifficultyRating)
            .var("instruction", task.instruction.clone())
            .seed(derive_seed(seed, &format!("rating/{}", pair.task_id)));
        match provider.complete(&req) {
            Ok(text) => match parse_difficulty_rating(&text) {
                Some(r @ ("medium" | "hard")) => (true, format!("rated {r}")),
                Some(r) => (false, format!("rated {r}")),
                None => (false, format!("unparseable rating: {}", text.trim())),
            },
            Err(e) => (false, format!("provider: {e}")),
        }
    };
    let verdicts: Vec<(bool, String)> = pairs.par_iter().map(rate).collect();
    let mut kept = Vec::new();
    let mut log = Vec::new();
    for (pair, (keep, reason)) in pairs.iter().zip(verdicts) {
        log.push(FilterDecision {
            task_id: pair.task_id.clone(),
            filter: "difficulty".into(),
            kept: keep,
            reason,
        });
        if keep {
            kept.push(pair.clone());
        }
    }
    (kept, log)
}

/// Records restricted to the given task ids.
pub fn subset(records: &[CoTRecord], task_ids: &BTreeSet<String>) -> Vec<CoTRecord> {
    records.iter().filter(|r| task_ids.contains(&r.task_id)).cloned().collect()
}

/// Events of a trace, for callers holding only the sanitized text.
pub fn events_of(clean: &str) -> Vec<TraceEvent> {
    parse_trace(clean).map(|p| p.events).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PairOutcome;
    use crate::provider::{mock::MockProvider, ProviderError};
    use crate::synthesis::{parse_signature, validate_test_structure};

    fn sig() -> SignatureSpec {
        parse_signature("Function: solution(nums: list[int], k: int) -> list[int]").unwrap()
    }

    #[test]
    fn structural_examples() {
        let s = sig();
        let t = validate_test_structure("t", "def test_a():\n    assert solution([1, 2], 2) == [1]", &s);
        let io = extract_io(&t, &s, &MockProvider, 0).unwrap();
        assert_eq!((io.input_expr.as_str(), io.output_expr.as_str()), ("[1, 2], 2", "[1]"));
        assert_eq!(io.extraction, Extraction::Structural);

        let z = parse_signature("Function: solution() -> int").unwrap();
        let t = validate_test_structure("t", "def test_z():\n    assert solution() == 0", &z);
        let io = extract_io(&t, &z, &MockProvider, 0).unwrap();
        assert_eq!((io.input_expr.as_str(), io.output_expr.as_str()), ("", "0"));

        let c = parse_signature("Class: HuffmanTree; __init__(self, f: list) -> unknown; get_encoding(self) -> dict").unwrap();
        let t = validate_test_structure("t", "def test_h():\n    assert HuffmanTree([('a',1)]).get_encoding() == {'a': '0'}", &c);
        let io = extract_io(&t, &c, &MockProvider, 0).unwrap();
        assert_eq!((io.input_expr.as_str(), io.output_expr.as_str()), ("[('a',1)]", "{'a': '0'}"));
    }

    #[test]
    fn provider_assisted_for_invalid_tests() {
        let s = sig();
        let t = validate_test_structure("t", "def test_x():\n    data = [1, 2]\n    assert solution(data, 2) == [1]", &s);
        let io = extract_io(&t, &s, &MockProvider, 0).unwrap();
        assert_eq!(io.extraction, Extraction::ProviderAssisted);
        assert_eq!(io.input_expr, "[1, 2], 2");
    }

    struct Fixed(&'static str);
    impl Provider for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn complete(&self, _: &GenerationRequest) -> Result<String, ProviderError> {
            Ok(self.0.to_string())
        }
    }

    fn io() -> IOPair {
        IOPair {
            input_expr: "[1, 2, 3], 2".into(),
            output_expr: "[1]".into(),
            extraction: Extraction::Structural,
        }
    }

    #[test]
    fn questions_embed_expressions_or_fall_back() {
        let (f, b) = generate_questions(&io(), &sig(), "x", &MockProvider, 1);
        assert!(f.contains("[1, 2, 3]"));
        assert!(b.contains("[1]"));
        assert_eq!((f.clone(), b.clone()), generate_questions(&io(), &sig(), "x", &MockProvider, 1));
        let (f, b) = generate_questions(&io(), &sig(), "x", &Fixed("Forward question: what?"), 1);
        assert_eq!((f, b), fallback_questions(&io(), &sig()));
    }

    fn trace() -> Trace {
        let text = "call 1 def solution(nums, k):\nStarting var: nums = [1, 2, 3]\nStarting var: k = 2\nline 2 return nums[:1]\nreturn 2 return nums[:1]\nReturn value: [1]\n";
        Trace {
            trace_id: "t".into(),
            task_id: "task".into(),
            test_id: "task/t00".into(),
            sanitized_text: text.into(),
            events: events_of(text),
            outcome: PairOutcome::pass(1),
        }
    }

    #[test]
    fn forward_markers() {
        let p = Fixed("I think `k = 2`.\nPredicted Output: [1]");
        let t = generate_forward_cot("i", "s", "q", &trace(), &io(), 1.0, &p, 0).unwrap();
        assert_eq!(t.prediction, "[1]");
        let p = Fixed("`k = 3`\nPredicted Output: [1]");
        assert!(matches!(generate_forward_cot("i", "s", "q", &trace(), &io(), 1.0, &p, 0), Err(CotRejection::Inconsistent { .. })));
        let p = Fixed("no marker");
        assert_eq!(generate_forward_cot("i", "s", "q", &trace(), &io(), 1.0, &p, 0), Err(CotRejection::MalformedCot));
        let p = Fixed("Predicted Output: [2]");
        assert!(matches!(generate_forward_cot("i", "s", "q", &trace(), &io(), 1.0, &p, 0), Err(CotRejection::WrongPrediction { .. })));
        let t = generate_forward_cot("i", "s", "q", &trace(), &io(), 1.0, &MockProvider, 0).unwrap();
        assert_eq!(t.prediction, "[1]");
    }

    #[test]
    fn backward_markers() {
        let p = Fixed("reasoning\nPredicted Input:\nPlausible input 1: [1, 2, 3]\nPlausible input 2: [1, 1, 2, 3, 3]");
        let (_, inputs) = split_backward(p.0).unwrap();
        assert_eq!(inputs, vec!["[1, 2, 3]", "[1, 1, 2, 3, 3]"]);
        let p = Fixed("Predicted Input:\n");
        assert_eq!(
            generate_backward_cot("i", "s", "q", &trace(), &io(), &sig(), None, &p, 0),
            Err(CotRejection::NoPlausibleInputs)
        );
        let p = Fixed("Predicted Input:\nPlausible input 1: [9], 1");
        assert_eq!(
            generate_backward_cot("i", "s", "q", &trace(), &io(), &sig(), None, &p, 0),
            Err(CotRejection::Unconfirmed)
        );
        let t = generate_backward_cot("i", "s", "q", &trace(), &io(), &sig(), None, &MockProvider, 0).unwrap();
        assert_eq!(normalize_value(&t.prediction), normalize_value("[1, 2, 3], 2"));
    }

    fn forged(task: &str, test: &str, f: bool, b: bool) -> ForgedRecord {
        let turn = |d| Turn {
            direction: d,
            question: "q".into(),
            cot: "c".into(),
            prediction: "p".into(),
        };
        ForgedRecord {
            task_id: task.into(),
            test_id: test.into(),
            trace_id: trace_id_for(test),
            instruction: "i".into(),
            function_source: "s".into(),
            cluster_score: 4,
            io: io(),
            forward: f.then(|| turn(Direction::Forward)),
            backward: b.then(|| turn(Direction::Backward)),
        }
    }

    #[test]
    fn assembly_pairing_rule() {
        let recs = vec![
            forged("a", "a/t02", true, false),
            forged("a", "a/t00", true, true),
            forged("a", "a/t01", true, true),
        ];
        assert_eq!(assemble(&recs, DatasetMode::Forward).len(), 3);
        assert_eq!(assemble(&recs, DatasetMode::Backward).len(), 2);
        let bi = assemble(&recs, DatasetMode::Bidirectional);
        assert_eq!(bi.len(), 2);
        assert!(bi.iter().all(|r| r.is_well_formed()));
        assert_eq!(bi[0].provenance.test_id, "a/t00");
        assert!(assemble(&[], DatasetMode::Forward).is_empty());
    }

    #[test]
    fn rating_parse() {
        assert_eq!(parse_difficulty_rating("hard"), Some("hard"));
        assert_eq!(parse_difficulty_rating("HARD "), Some("hard"));
        assert_eq!(parse_difficulty_rating("Difficulty: Medium"), Some("medium"));
        assert_eq!(parse_difficulty_rating("easy"), Some("easy"));
        assert_eq!(parse_difficulty_rating("somewhat tricky"), None);
    }
}
