//! Built-in problem bank behind the offline mock provider.
//!
//! Five function-kind problems, each with four correct variants rendered from
//! one skeleton and two seeded-buggy variants. Every variant has a reference
//! semantics implemented here, so the bank can also act as an execution
//! backend with known ground truth and emit traces in the tracer's format.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::harness::{Backend, BackendError, PairJob, RunMode, RunnerResponse};
use crate::model::{FailCause, PairStatus};
use crate::pysrc::{self, TopKind};
use crate::pyvalue::{self, PyValue};
use crate::util::{derive_seed, fnv1a64};

mod problems;
pub mod recorder;

pub use problems::PROBLEMS;
use recorder::Recorder;

/// Path the bank reports in `Source path` trace lines.
pub const SOURCE_PATH: &str = "/sandbox/solution.py";

/// Abnormal termination of a reference evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    Runtime(String),
    Timeout,
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fault::Runtime(m) => write!(f, "{m}"),
            Fault::Timeout => write!(f, "timed out"),
        }
    }
}

pub type Eval = Result<PyValue, Fault>;

type NameSet = &'static [(&'static str, &'static str)];

pub struct Problem {
    pub key: &'static str,
    pub phrasings: [&'static str; 2],
    pub keywords: &'static [&'static str],
    pub signature: &'static str,
    pub params: &'static [&'static str],
    /// Correct implementation with `@key@` name placeholders.
    pub skeleton: &'static str,
    pub name_sets: [NameSet; 4],
    pub comments: [&'static str; 4],
    pub buggy: [&'static str; 2],
    pub scenarios: &'static [&'static str],
    /// easy, medium or hard.
    pub rating: &'static str,
    /// Whether the answerability mock solves it correctly.
    pub trivial: bool,
    pub reference: fn(&[PyValue]) -> Eval,
    pub bugs: [fn(&[PyValue]) -> Eval; 2],
    pub tracer: fn(&mut Recorder, &[PyValue]) -> Result<PyValue, recorder::TraceFault>,
    pub core_inputs: fn() -> Vec<Vec<PyValue>>,
    pub random_input: fn(&mut ChaCha8Rng) -> Vec<PyValue>,
    /// Maps a correct output to a different, wrong one.
    pub perturb: fn(&PyValue) -> PyValue,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem").field("key", &self.key).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariantKind {
    Correct(usize),
    Buggy(usize),
}

impl VariantKind {
    pub fn is_correct(self) -> bool {
        matches!(self, VariantKind::Correct(_))
    }
}

impl Problem {
    pub fn source(&self, variant: VariantKind) -> String {
        match variant {
            VariantKind::Correct(k) => {
                let mut text = self.skeleton.to_string();
                for (key, name) in self.name_sets[k] {
                    text = text.replace(&format!("@{key}@"), name);
                }
                let comment = self.comments[k];
                if comment.is_empty() {
                    return text;
                }
                let (head, body) = text.split_once('\n').unwrap_or((&text, ""));
                format!("{head}\n{comment}\n{body}")
            }
            VariantKind::Buggy(j) => self.buggy[j].to_string(),
        }
    }

    pub fn eval(&self, variant: VariantKind, args: &[PyValue]) -> Eval {
        if args.len() != self.params.len() {
            return Err(Fault::Runtime(format!(
                "TypeError: solution() takes {} positional arguments but {} were given",
                self.params.len(),
                args.len()
            )));
        }
        match variant {
            VariantKind::Correct(_) => (self.reference)(args),
            VariantKind::Buggy(j) => (self.bugs[j])(args),
        }
    }

    /// Raw trace of `variant` called with `args`. Correct variants get a
    /// full line-level trace; buggy variants a call/return skeleton.
    pub fn trace(&self, variant: VariantKind, source: &str, args: &[PyValue]) -> (Eval, String) {
        let names: Vec<(&str, &str)> = match variant {
            VariantKind::Correct(k) => self.name_sets[k].to_vec(),
            VariantKind::Buggy(_) => Vec::new(),
        };
        let mut rec = Recorder::new(source, SOURCE_PATH, &names);
        for (p, v) in self.params.iter().zip(args) {
            rec.starting(p, v);
        }
        if let Err(e) = rec.call("solution") {
            return (Err(Fault::Runtime(e.0)), rec.finish());
        }
        let result = match variant {
            VariantKind::Correct(_) if args.len() == self.params.len() => {
                problems::trace_with(self, &mut rec, args)
            }
            _ => {
                let r = self.eval(variant, args);
                if let Ok(v) = &r {
                    let _ = rec.ret_last(v);
                }
                r
            }
        };
        (result, rec.finish())
    }

    pub fn scenario_text(&self) -> String {
        self.scenarios.join("\n")
    }
}

/// Ground-truth category of a planned test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Sound,
    WrongExpected,
    AssignmentOutsideAssert,
    MultipleAsserts,
}

#[derive(Debug, Clone)]
pub struct PlannedTest {
    pub name: String,
    pub source: String,
    pub kind: TestKind,
    pub args: Vec<PyValue>,
    pub expected: PyValue,
}

/// Number of tests the bank plans per (problem, seed).
pub const TESTS_PER_PROBLEM: usize = 30;

pub struct Bank {
    index: HashMap<String, (usize, VariantKind)>,
}

/// Source fingerprint that ignores comments, blank lines and trailing spaces.
fn source_key(source: &str) -> String {
    pysrc::logical_lines(source)
        .iter()
        .map(|l| format!("{}{}", " ".repeat(l.indent), l.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Demo concepts used when the mock pipeline runs without input:
/// (text, description, difficulty, relevance).
pub const DEMO_CONCEPTS: [(&str, &str, u8, u8); 7] = [
    ("Dynamic Programming", "Solving problems by combining solutions of overlapping subproblems", 4, 5),
    ("binary searching", "Halving a sorted search space on every step", 3, 4),
    ("Binary Search", "Locating a target in a sorted sequence by repeated halving", 3, 4),
    ("Hash Maps", "Key-value lookup tables with constant expected access time", 3, 5),
    ("Stack Data Structures", "Last-in first-out containers for nested structure", 3, 4),
    ("print statements", "Writing text to standard output", 1, 2),
    ("Greedy Algorithms", "Building a solution from locally optimal choices", 4, 4),
];

impl Bank {
    pub fn get() -> &'static Bank {
        static BANK: OnceLock<Bank> = OnceLock::new();
        BANK.get_or_init(|| {
            let mut index = HashMap::new();
            for (p, problem) in PROBLEMS.iter().enumerate() {
                let variants = (0..4)
                    .map(VariantKind::Correct)
                    .chain((0..2).map(VariantKind::Buggy));
                for v in variants {
                    index.insert(source_key(&problem.source(v)), (p, v));
                }
            }
            Bank { index }
        })
    }

    pub fn problems(&self) -> &'static [Problem] {
        &PROBLEMS
    }

    /// Identifies a bank variant by content, ignoring comments.
    pub fn identify(&self, source: &str) -> Option<(&'static Problem, VariantKind)> {
        self.index
            .get(&source_key(source))
            .map(|&(p, v)| (&PROBLEMS[p], v))
    }

    /// Problem an instruction text refers to: exact phrasing, then keywords,
    /// then a stable hash.
    pub fn problem_for_instruction(&self, instruction: &str) -> &'static Problem {
        if let Some(p) = PROBLEMS
            .iter()
            .find(|p| p.phrasings.iter().any(|ph| instruction.contains(ph)))
        {
            return p;
        }
        let lower = instruction.to_lowercase();
        if let Some(p) = PROBLEMS
            .iter()
            .find(|p| p.keywords.iter().any(|k| lower.contains(k)))
        {
            return p;
        }
        &PROBLEMS[(fnv1a64(instruction.as_bytes()) % PROBLEMS.len() as u64) as usize]
    }

    /// Six instructions for a concept, cycling through the problems from a
    /// concept-dependent start.
    pub fn instructions_for(&self, concept: &str, count: usize) -> Vec<String> {
        let start = (fnv1a64(concept.trim().to_lowercase().as_bytes()) % PROBLEMS.len() as u64) as usize;
        (0..count)
            .map(|i| {
                let p = &PROBLEMS[(start + i) % PROBLEMS.len()];
                p.phrasings[(i / PROBLEMS.len()) % 2].to_string()
            })
            .collect()
    }

    /// Five candidate sources: one or two buggy variants, the rest correct,
    /// in seeded order.
    pub fn solutions_for(&self, problem: &Problem, seed: u64) -> Vec<(String, VariantKind)> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("solutions/{}", problem.key)));
        let n_buggy = rng.gen_range(1..=2);
        let mut buggy = vec![VariantKind::Buggy(0), VariantKind::Buggy(1)];
        buggy.shuffle(&mut rng);
        buggy.truncate(n_buggy);
        let mut correct: Vec<VariantKind> = (0..4).map(VariantKind::Correct).collect();
        correct.shuffle(&mut rng);
        correct.truncate(5 - n_buggy);
        let mut all: Vec<VariantKind> = correct.into_iter().chain(buggy).collect();
        all.shuffle(&mut rng);
        all.into_iter().map(|v| (problem.source(v), v)).collect()
    }

    /// Thirty tests: 26 sound, 2 with a wrong expected value and 2 that break
    /// the structure rules. Bug-revealing core inputs are always sound.
    pub fn tests_for(&self, problem: &Problem, seed: u64) -> Vec<PlannedTest> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("tests/{}", problem.key)));
        let core = (problem.core_inputs)();
        let mut seen: Vec<String> = core.iter().map(|a| pyvalue::render_args(a)).collect();
        let mut random: Vec<Vec<PyValue>> = Vec::new();
        let needed = TESTS_PER_PROBLEM + 1 - core.len();
        let mut attempts = 0;
        while random.len() < needed && attempts < 10_000 {
            attempts += 1;
            let args = (problem.random_input)(&mut rng);
            let key = pyvalue::render_args(&args);
            if !seen.contains(&key) {
                seen.push(key);
                random.push(args);
            }
        }
        let expect = |args: &[PyValue]| {
            (problem.reference)(args).expect("reference is total on generated inputs")
        };
        let mut plans: Vec<(TestKind, Vec<PyValue>, Option<Vec<PyValue>>)> = Vec::new();
        for args in core {
            plans.push((TestKind::Sound, args, None));
        }
        let mut it = random.into_iter();
        for kind in [TestKind::WrongExpected, TestKind::WrongExpected, TestKind::AssignmentOutsideAssert] {
            plans.push((kind, it.next().expect("enough inputs"), None));
        }
        let first = it.next().expect("enough inputs");
        let second = it.next().expect("enough inputs");
        plans.push((TestKind::MultipleAsserts, first, Some(second)));
        for args in it {
            if plans.len() == TESTS_PER_PROBLEM {
                break;
            }
            plans.push((TestKind::Sound, args, None));
        }
        plans.shuffle(&mut rng);
        plans
            .into_iter()
            .enumerate()
            .map(|(k, (kind, args, extra))| {
                let name = format!("test_case_{:02}", k + 1);
                let scenario = problem.scenarios[k % problem.scenarios.len()];
                let correct = expect(&args);
                let expected = match kind {
                    TestKind::WrongExpected => (problem.perturb)(&correct),
                    _ => correct,
                };
                let call = pyvalue::render_args(&args);
                let body = match kind {
                    TestKind::Sound | TestKind::WrongExpected => {
                        format!("    assert solution({call}) == {expected}")
                    }
                    TestKind::AssignmentOutsideAssert => {
                        let mut rest: Vec<String> = args.iter().map(PyValue::repr).collect();
                        let first = rest.remove(0);
                        let call = std::iter::once("data".to_string())
                            .chain(rest)
                            .collect::<Vec<_>>()
                            .join(", ");
                        format!("    data = {first}\n    assert solution({call}) == {expected}")
                    }
                    TestKind::MultipleAsserts => {
                        let extra = extra.expect("second input");
                        let extra_expected = expect(&extra);
                        format!(
                            "    # Test Case 1\n    assert solution({call}) == {expected}\n    # Test Case 2\n    assert solution({}) == {extra_expected}",
                            pyvalue::render_args(&extra)
                        )
                    }
                };
                PlannedTest {
                    source: format!("def {name}():\n    # {scenario}\n{body}"),
                    name,
                    kind,
                    args,
                    expected,
                }
            })
            .collect()
    }

    /// (difficulty, relevance) for a concept: the demo table, else a hash.
    pub fn concept_scores(&self, concept: &str) -> (u8, u8) {
        let t = concept.trim();
        if let Some(&(_, _, d, r)) = DEMO_CONCEPTS.iter().find(|c| c.0.eq_ignore_ascii_case(t)) {
            return (d, r);
        }
        let h = fnv1a64(t.to_lowercase().as_bytes());
        (1 + (h % 5) as u8, 1 + ((h >> 8) % 5) as u8)
    }

    /// Executes one test function against a bank variant. Durations are
    /// nominal so results stay byte-deterministic.
    pub fn execute(&self, solution: &str, test: &str, mode: RunMode, timeout_s: f64) -> RunnerResponse {
        match self.identify(solution) {
            None => harness_failure("unknown-solution: source is not a bank variant"),
            Some((problem, variant)) => run_test(problem, variant, solution, test, mode, timeout_s),
        }
    }
}

fn harness_failure(msg: &str) -> RunnerResponse {
    RunnerResponse {
        status: PairStatus::Fail,
        cause: Some(FailCause::HarnessError),
        raw_trace: None,
        duration_ms: 0,
        stderr_excerpt: Some(msg.to_string()),
    }
}

fn verdict(cause: Option<FailCause>, msg: &str, trace: Option<String>, duration_ms: u64) -> RunnerResponse {
    RunnerResponse {
        status: if cause.is_none() { PairStatus::Pass } else { PairStatus::Fail },
        cause,
        raw_trace: trace,
        duration_ms,
        stderr_excerpt: (!msg.is_empty()).then(|| msg.to_string()),
    }
}

/// Resolves one argument or expected-value expression: a literal or a name
/// bound earlier in the test body.
fn resolve(expr: &str, env: &[(String, PyValue)]) -> Result<PyValue, String> {
    let e = expr.trim();
    if let Some((_, v)) = env.iter().rev().find(|(n, _)| n == e) {
        return Ok(v.clone());
    }
    pyvalue::parse_literal(e).map_err(|err| format!("cannot evaluate '{e}': {err}"))
}

/// Splits `solution(args) == expected` into (callee, args, expected).
pub fn split_assert(expr: &str) -> Option<(String, String, String)> {
    let eq = pysrc::find_top_level(expr, "==")?;
    let lhs = expr[..eq].trim();
    let rhs = expr[eq + 2..].trim();
    let open = lhs.find('(')?;
    let close = pysrc::matching_close(lhs, open)?;
    if close != lhs.len() - 1 {
        return None;
    }
    let callee = lhs[..open].trim();
    if !pysrc::is_identifier(callee) {
        return None;
    }
    Some((callee.to_string(), lhs[open + 1..close].to_string(), rhs.to_string()))
}

fn run_test(
    problem: &Problem,
    variant: VariantKind,
    solution: &str,
    test: &str,
    mode: RunMode,
    timeout_s: f64,
) -> RunnerResponse {
    let chunk = pysrc::top_level_chunks(test)
        .into_iter()
        .find(|c| c.kind == TopKind::Def && c.name.as_deref().is_some_and(|n| n.starts_with("test")));
    let Some(chunk) = chunk else {
        return harness_failure("no-test: no top-level test function");
    };
    let timeout_ms = (timeout_s * 1000.0).round() as u64;
    let mut env: Vec<(String, PyValue)> = Vec::new();
    let mut trace: Option<String> = None;
    for line in pysrc::logical_lines(&chunk.text).iter().skip(1) {
        let stmt = line.text.as_str();
        if let Some(expr) = stmt.strip_prefix("assert ") {
            let Some((callee, args_text, rhs)) = split_assert(expr) else {
                return harness_failure(&format!("unsupported assertion: {stmt}"));
            };
            if callee != "solution" {
                return verdict(Some(FailCause::RuntimeError), &format!("NameError: name '{callee}' is not defined"), trace, 1);
            }
            let args: Result<Vec<PyValue>, String> = pysrc::split_top_level(&args_text, ',')
                .iter()
                .filter(|a| !a.is_empty())
                .map(|a| resolve(a, &env))
                .collect();
            let (args, expected) = match (args, resolve(&rhs, &env)) {
                (Ok(a), Ok(e)) => (a, e),
                (Err(m), _) | (_, Err(m)) => return harness_failure(&m),
            };
            let result = if mode == RunMode::Trace && trace.is_none() {
                let (r, t) = problem.trace(variant, solution, &args);
                trace = Some(t);
                r
            } else {
                problem.eval(variant, &args)
            };
            match result {
                Err(Fault::Timeout) => return verdict(Some(FailCause::Timeout), "timed out", trace, timeout_ms),
                Err(Fault::Runtime(m)) => return verdict(Some(FailCause::RuntimeError), &m, trace, 1),
                Ok(v) if v != expected => {
                    return verdict(
                        Some(FailCause::Assertion),
                        &format!("AssertionError: {v} != {expected}"),
                        trace,
                        1,
                    )
                }
                Ok(_) => {}
            }
        } else if let Some(eq) = pysrc::find_top_level(stmt, "=") {
            let name = stmt[..eq].trim();
            if !pysrc::is_identifier(name) || stmt[eq..].starts_with("==") {
                return harness_failure(&format!("unsupported statement: {stmt}"));
            }
            match resolve(&stmt[eq + 1..], &env) {
                Ok(v) => env.push((name.to_string(), v)),
                Err(m) => return harness_failure(&m),
            }
        } else if stmt != "pass" {
            return harness_failure(&format!("unsupported statement: {stmt}"));
        }
    }
    verdict(None, "", trace, 1)
}

/// Execution backend that evaluates bank variants by content.
#[derive(Debug, Default, Clone, Copy)]
pub struct BankBackend;

impl Backend for BankBackend {
    fn name(&self) -> &str {
        "bank"
    }

    fn run(&self, job: &PairJob<'_>) -> Result<RunnerResponse, BackendError> {
        Ok(Bank::get().execute(
            &job.solution.source,
            &job.test.source,
            job.mode,
            job.limits.wall_timeout_s,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank() -> &'static Bank {
        Bank::get()
    }

    #[test]
    fn every_variant_is_identified() {
        for p in bank().problems() {
            for v in (0..4).map(VariantKind::Correct).chain((0..2).map(VariantKind::Buggy)) {
                let (q, w) = bank().identify(&p.source(v)).unwrap();
                assert_eq!((q.key, w), (p.key, v));
            }
        }
        assert!(bank().identify("def solution():\n    return 0\n").is_none());
    }

    #[test]
    fn solutions_mix_has_one_or_two_bugs() {
        for seed in 0..40 {
            for p in bank().problems() {
                let sols = bank().solutions_for(p, seed);
                assert_eq!(sols.len(), 5);
                let bugs = sols.iter().filter(|(_, v)| !v.is_correct()).count();
                assert!((1..=2).contains(&bugs));
            }
        }
    }

    #[test]
    fn test_plan_shape() {
        for p in bank().problems() {
            let tests = bank().tests_for(p, 7);
            assert_eq!(tests.len(), TESTS_PER_PROBLEM);
            let count = |k| tests.iter().filter(|t| t.kind == k).count();
            assert_eq!(count(TestKind::Sound), 26);
            assert_eq!(count(TestKind::WrongExpected), 2);
            assert_eq!(count(TestKind::AssignmentOutsideAssert), 1);
            assert_eq!(count(TestKind::MultipleAsserts), 1);
        }
    }

    #[test]
    fn every_bug_is_revealed_by_some_sound_test() {
        for seed in 0..10 {
            for p in bank().problems() {
                let tests = bank().tests_for(p, seed);
                for j in 0..2 {
                    let src = p.source(VariantKind::Buggy(j));
                    let caught = tests.iter().filter(|t| t.kind == TestKind::Sound).any(|t| {
                        bank().execute(&src, &t.source, RunMode::Exec, 1.0).status == PairStatus::Fail
                    });
                    assert!(caught, "{} bug {j} seed {seed}", p.key);
                }
            }
        }
    }

    #[test]
    fn correct_variants_pass_exactly_the_sound_tests() {
        for p in bank().problems() {
            let tests = bank().tests_for(p, 3);
            for k in 0..4 {
                let src = p.source(VariantKind::Correct(k));
                for t in &tests {
                    let r = bank().execute(&src, &t.source, RunMode::Exec, 1.0);
                    let expect_pass = t.kind != TestKind::WrongExpected;
                    assert_eq!(r.status == PairStatus::Pass, expect_pass, "{} {}", p.key, t.source);
                }
            }
        }
    }

    #[test]
    fn known_bug_causes() {
        let gcd = &PROBLEMS[2];
        let slow = gcd.source(VariantKind::Buggy(1));
        let r = bank().execute(&slow, "def test_z():\n    assert solution(0, 5) == 5", RunMode::Exec, 1.0);
        assert_eq!(r.cause, Some(FailCause::Timeout));
        let rs = &PROBLEMS[0];
        let first = rs.source(VariantKind::Buggy(1));
        let r = bank().execute(&first, "def test_e():\n    assert solution([]) == []", RunMode::Exec, 1.0);
        assert_eq!(r.cause, Some(FailCause::RuntimeError));
        let signed = gcd.source(VariantKind::Buggy(0));
        let r = bank().execute(&signed, "def test_n():\n    assert solution(12, -18) == 6", RunMode::Exec, 1.0);
        assert_eq!(r.cause, Some(FailCause::Assertion));
    }

    #[test]
    fn traces_of_correct_variants_end_with_the_result() {
        for p in bank().problems() {
            let tests = bank().tests_for(p, 11);
            for k in 0..4 {
                let src = p.source(VariantKind::Correct(k));
                for t in tests.iter().filter(|t| t.kind == TestKind::Sound) {
                    let r = bank().execute(&src, &t.source, RunMode::Trace, 1.0);
                    assert_eq!(r.status, PairStatus::Pass, "{}", t.source);
                    let raw = r.raw_trace.unwrap();
                    assert!(raw.contains(&format!("Return value:.. {}\n", t.expected)), "{raw}");
                    assert_eq!(raw.matches(" call ").count(), 1);
                }
            }
        }
    }

    #[test]
    fn instructions_route_back_to_their_problem() {
        let ins = bank().instructions_for("Dynamic Programming", 6);
        assert_eq!(ins.len(), 6);
        let mut uniq = ins.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 6);
        for i in &ins {
            let p = bank().problem_for_instruction(i);
            assert!(p.phrasings.iter().any(|ph| ph == i));
        }
    }

    #[test]
    fn assignment_tests_execute_with_bound_names() {
        let p = &PROBLEMS[0];
        let src = p.source(VariantKind::Correct(0));
        let t = "def test_x():\n    data = [1, 2]\n    assert solution(data) == [1, 3]";
        assert_eq!(bank().execute(&src, t, RunMode::Exec, 1.0).status, PairStatus::Pass);
    }
}
