//! Offline provider answering every template from the built-in bank.
//!
//! Output is a pure function of (template, variables, seed). The problem a
//! request refers to is recovered from its `instruction` variable; code and
//! test answers additionally depend on the request seed. Test requests read
//! an optional `suite_index` variable selecting which block of the bank's
//! planned tests to return.

use crate::bank::{split_assert, Bank, Problem, VariantKind};
use crate::pysrc;
use crate::trace::parse_trace;
use crate::model::TraceEventKind;
use crate::util::fnv1a64;

use super::{GenerationRequest, Provider, ProviderError, TemplateId};

#[derive(Debug, Default, Clone, Copy)]
pub struct MockProvider;

impl MockProvider {
    pub fn new() -> Self {
        MockProvider
    }
}

fn var<'a>(req: &'a GenerationRequest, name: &str) -> &'a str {
    req.get(name).unwrap_or("")
}

fn problem(req: &GenerationRequest) -> &'static Problem {
    Bank::get().problem_for_instruction(var(req, "instruction"))
}

fn fenced(lang: &str, body: &str) -> String {
    format!("```{lang}\n{}\n```", body.trim_end())
}

fn instructions(req: &GenerationRequest) -> String {
    Bank::get()
        .instructions_for(var(req, "concept"), 6)
        .iter()
        .enumerate()
        .map(|(i, text)| format!("Instruction{}:\n{text}\n", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn solutions(req: &GenerationRequest, seed: u64) -> String {
    let p = problem(req);
    let blocks: Vec<String> = Bank::get()
        .solutions_for(p, seed)
        .iter()
        .enumerate()
        .map(|(i, (src, _))| format!("Implementation {}:\n{}", i + 1, fenced("python", src)))
        .collect();
    blocks.join("\n\n")
}

fn tests(req: &GenerationRequest, seed: u64) -> String {
    let p = problem(req);
    let suite: usize = var(req, "suite_index").trim().parse().unwrap_or(0);
    let planned = Bank::get().tests_for(p, seed);
    let body: Vec<&str> = planned
        .iter()
        .skip(suite * 10)
        .take(10)
        .map(|t| t.source.as_str())
        .collect();
    fenced("python", &body.join("\n\n"))
}

fn concept_score(req: &GenerationRequest) -> String {
    let (d, r) = Bank::get().concept_scores(var(req, "concept"));
    format!("Difficulty: {d}\nRelevance: {r}")
}

/// Reads the effective call of a test body, inlining `name = literal`
/// bindings made before the assert.
fn io_extraction(req: &GenerationRequest) -> String {
    let source = var(req, "test_source");
    let mut env: Vec<(String, String)> = Vec::new();
    for line in pysrc::logical_lines(source) {
        let stmt = line.text.as_str();
        if let Some(expr) = stmt.strip_prefix("assert ") {
            if let Some((_, args, rhs)) = split_assert(expr) {
                let subst = |text: &str| {
                    let mut out = text.to_string();
                    for (name, value) in env.iter().rev() {
                        out = pysrc::identifiers(&out)
                            .into_iter()
                            .rev()
                            .filter(|(id, _, _)| id == name)
                            .fold(out.clone(), |mut acc, (_, s, e)| {
                                acc.replace_range(s..e, value);
                                acc
                            });
                    }
                    out
                };
                return format!("Input: {}\nOutput: {}", subst(args.trim()), subst(rhs.trim()));
            }
        } else if let Some(eq) = pysrc::find_top_level(stmt, "=") {
            let name = stmt[..eq].trim();
            if pysrc::is_identifier(name) && !stmt[eq..].starts_with("==") {
                env.push((name.to_string(), stmt[eq + 1..].trim().to_string()));
            }
        }
    }
    "I could not find an assertion in this test.".to_string()
}

fn question_pair(req: &GenerationRequest) -> String {
    let input = var(req, "input_expr");
    let output = var(req, "output_expr");
    let name = var(req, "function_name");
    let h = fnv1a64(format!("{input}\u{0}{output}").as_bytes());
    let (fwd, bwd) = if h.is_multiple_of(2) {
        (
            format!("Given the input `{input}`, what does `{name}` return?"),
            format!("Which input to `{name}` produces the output `{output}`?"),
        )
    } else {
        (
            format!("If `{name}` is called with `{input}`, what is the result?"),
            format!("`{name}` returned `{output}`. What arguments could it have been called with?"),
        )
    };
    format!("Forward question: {fwd}\nBackward question: {bwd}")
}

fn forward_cot(req: &GenerationRequest) -> String {
    let events = parse_trace(var(req, "trace")).map(|p| p.events).unwrap_or_default();
    let mut out = String::from("### Understand\n");
    let starts: Vec<String> = events
        .iter()
        .filter(|e| e.kind == TraceEventKind::VarStart)
        .map(|e| format!("`{} = {}`", e.var_name.as_deref().unwrap_or(""), e.value_repr.as_deref().unwrap_or("")))
        .collect();
    if starts.is_empty() {
        out.push_str("The function is called without arguments.\n");
    } else {
        out.push_str(&format!("The function is called with {}.\n", starts.join(" and ")));
    }
    out.push_str("\n### Plan\nFollow the recorded lines in order and track every binding change.\n\n### Execute\n");
    for e in &events {
        match e.kind {
            TraceEventKind::Line => {
                out.push_str(&format!("Line {} runs.\n", e.line_no.unwrap_or(0)));
            }
            TraceEventKind::VarNew => out.push_str(&format!(
                "It binds `{} = {}`.\n",
                e.var_name.as_deref().unwrap_or(""),
                e.value_repr.as_deref().unwrap_or("")
            )),
            TraceEventKind::VarModified => out.push_str(&format!(
                "Now `{} = {}`.\n",
                e.var_name.as_deref().unwrap_or(""),
                e.value_repr.as_deref().unwrap_or("")
            )),
            _ => {}
        }
    }
    let ret = events
        .iter()
        .rev()
        .find(|e| e.kind == TraceEventKind::ReturnValue)
        .and_then(|e| e.value_repr.clone())
        .unwrap_or_default();
    out.push_str(&format!("\n### Reflect\nThe function finishes and hands back `{ret}`.\n\nPredicted Output: {ret}"));
    out
}

fn backward_cot(req: &GenerationRequest) -> String {
    let events = parse_trace(var(req, "trace")).map(|p| p.events).unwrap_or_default();
    let starts: Vec<(&str, &str)> = events
        .iter()
        .filter(|e| e.kind == TraceEventKind::VarStart)
        .map(|e| (e.var_name.as_deref().unwrap_or(""), e.value_repr.as_deref().unwrap_or("")))
        .collect();
    let ret = events
        .iter()
        .rev()
        .find(|e| e.kind == TraceEventKind::ReturnValue)
        .and_then(|e| e.value_repr.as_deref())
        .unwrap_or("");
    let mut out = format!("### Understand\nThe final state returns `{ret}`.\n\n### Plan\nWalk the recorded bindings backwards to the arguments.\n\n### Execute\n");
    for (name, value) in &starts {
        out.push_str(&format!("The argument must satisfy `{name} = {value}`.\n"));
    }
    out.push_str("\n### Reflect\nOnly these arguments reproduce every recorded step.\n\nPredicted Input:\n");
    let values: Vec<&str> = starts.iter().map(|(_, v)| *v).collect();
    out.push_str(&format!("Plausible input 1: {}\n", values.join(", ")));
    if values.len() > 1 {
        let rev: Vec<&str> = values.iter().rev().copied().collect();
        out.push_str(&format!("Plausible input 2: {}\n", rev.join(", ")));
    }
    out
}

fn answerability(req: &GenerationRequest) -> String {
    let p = problem(req);
    let v = if p.trivial {
        VariantKind::Correct(0)
    } else {
        VariantKind::Buggy(0)
    };
    p.source(v)
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, req: &GenerationRequest) -> Result<String, ProviderError> {
        let seed = req.sampling.seed.unwrap_or(0);
        Ok(match req.template_id {
            TemplateId::Instruction => instructions(req),
            TemplateId::Signature => fenced("text", problem(req).signature),
            TemplateId::CodeFunction => solutions(req, seed),
            TemplateId::TestScenarios => fenced("text", &problem(req).scenario_text()),
            TemplateId::TestFunction => tests(req, seed),
            TemplateId::ConceptScore => concept_score(req),
            TemplateId::IoExtraction => io_extraction(req),
            TemplateId::QuestionPair => question_pair(req),
            TemplateId::ForwardCot => forward_cot(req),
            TemplateId::BackwardCot => backward_cot(req),
            TemplateId::AnswerabilitySolve => fenced("python", &answerability(req)),
            TemplateId::DifficultyRating => format!("Difficulty: {}", problem(req).rating),
            TemplateId::CodeClass | TemplateId::TestClass => {
                return Err(ProviderError::Unsupported(req.template_id.as_str()))
            }
        })
    }
}
