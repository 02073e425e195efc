//! Solution x test execution: the runner protocol, execution backends, and
//! the pass/fail matrix builder.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    CandidateSolution, FailCause, PairOutcome, PairStatus, PassFailMatrix, TaskBundle, TestCase,
};

mod process;

pub use process::{ProcessBackend, MAX_TRACE_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Isolation {
    #[default]
    Process,
    Container,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecLimits {
    pub wall_timeout_s: f64,
    pub memory_mb: u64,
    #[serde(default)]
    pub isolation: Isolation,
    /// Command template for container isolation. `{memory_mb}` and
    /// `{timeout_s}` are substituted; the runner request arrives on stdin.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub container_command: Vec<String>,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits {
            wall_timeout_s: 10.0,
            memory_mb: 512,
            isolation: Isolation::Process,
            container_command: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Exec,
    Trace,
}

/// One request on the runner's stdin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerRequest {
    pub mode: RunMode,
    pub solution_source: String,
    pub test_source: String,
    pub target_name: String,
    pub timeout_s: f64,
}

/// One response on the runner's stdout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerResponse {
    pub status: PairStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<FailCause>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_trace: Option<String>,
    #[serde(default)]
    pub duration_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr_excerpt: Option<String>,
}

impl RunnerResponse {
    pub fn outcome(&self) -> PairOutcome {
        let stderr = self.stderr_excerpt.as_deref().unwrap_or("");
        match self.status {
            PairStatus::Pass => {
                let mut o = PairOutcome::pass(self.duration_ms);
                o.stderr_excerpt = crate::util::truncate_bytes(stderr, crate::model::STDERR_EXCERPT_MAX);
                o
            }
            PairStatus::Fail => PairOutcome::fail(
                self.cause.unwrap_or(FailCause::HarnessError),
                self.duration_ms,
                stderr,
            ),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("runner protocol violation: {0}")]
    Protocol(String),
    #[error("runner exited with status {code}: {stderr}")]
    RunnerExit { code: i32, stderr: String },
    #[error("trace-overflow")]
    TraceOverflow,
}

/// Everything a backend needs to run one pair.
#[derive(Debug, Clone, Copy)]
pub struct PairJob<'a> {
    pub solution: &'a CandidateSolution,
    pub test: &'a TestCase,
    pub mode: RunMode,
    pub target_name: &'a str,
    pub limits: &'a ExecLimits,
}

impl PairJob<'_> {
    pub fn request(&self) -> RunnerRequest {
        RunnerRequest {
            mode: self.mode,
            solution_source: self.solution.source.clone(),
            test_source: self.test.source.clone(),
            target_name: self.target_name.to_string(),
            timeout_s: self.limits.wall_timeout_s,
        }
    }
}

/// Executes one pair. Implementations must be safe to call concurrently.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn run(&self, job: &PairJob<'_>) -> Result<RunnerResponse, BackendError>;
}

/// Runs one pair in exec mode. Never fails: every problem becomes a fail
/// outcome with a cause.
pub fn run_pair(
    solution: &CandidateSolution,
    test: &TestCase,
    target_name: &str,
    limits: &ExecLimits,
    backend: &dyn Backend,
) -> PairOutcome {
    if !test.is_executable() {
        return PairOutcome::harness_error("test is structurally invalid");
    }
    let job = PairJob {
        solution,
        test,
        mode: RunMode::Exec,
        target_name,
        limits,
    };
    match backend.run(&job) {
        Ok(resp) => resp.outcome(),
        Err(e) => PairOutcome::harness_error(&e.to_string()),
    }
}

/// Runs one pair in trace mode, returning the raw trace (if any) and outcome.
pub fn run_traced(
    solution: &CandidateSolution,
    test: &TestCase,
    target_name: &str,
    limits: &ExecLimits,
    backend: &dyn Backend,
) -> (Option<String>, PairOutcome) {
    let job = PairJob {
        solution,
        test,
        mode: RunMode::Trace,
        target_name,
        limits,
    };
    match backend.run(&job) {
        Ok(resp) => match resp.raw_trace {
            Some(ref t) if t.len() > MAX_TRACE_BYTES => {
                (None, PairOutcome::harness_error("trace-overflow"))
            }
            _ => {
                let outcome = resp.outcome();
                (resp.raw_trace, outcome)
            }
        },
        Err(e) => (None, PairOutcome::harness_error(&e.to_string())),
    }
}

/// Executes every solution against every executable test of `bundle` on a
/// pool of `workers` threads. The result does not depend on scheduling.
pub fn build_matrix(
    bundle: &TaskBundle,
    limits: &ExecLimits,
    backend: &dyn Backend,
    workers: usize,
) -> PassFailMatrix {
    let tests: Vec<&TestCase> = bundle.executable_tests().collect();
    let target = bundle.signature.target_name().to_string();
    let (m, n) = (bundle.solutions.len(), tests.len());
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let run = |&(i, j): &(usize, usize)| {
        run_pair(&bundle.solutions[i], tests[j], &target, limits, backend)
    };
    let flat: Vec<PairOutcome> = match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
    {
        Ok(pool) => pool.install(|| pairs.par_iter().map(run).collect()),
        Err(_) => pairs.iter().map(run).collect(),
    };
    let mut cells: Vec<Vec<PairOutcome>> = Vec::with_capacity(m);
    let mut it = flat.into_iter();
    for _ in 0..m {
        cells.push(it.by_ref().take(n).collect());
    }
    PassFailMatrix {
        task_id: bundle.task_id.clone(),
        m,
        n,
        solution_ids: bundle.solutions.iter().map(|s| s.solution_id.clone()).collect(),
        test_ids: tests.iter().map(|t| t.test_id.clone()).collect(),
        cells,
    }
}

/// In-memory backend: outcomes keyed by (solution_id, test_id). Unknown
/// pairs fail with a harness error. Counts every invocation.
#[derive(Debug, Default)]
pub struct StubBackend {
    table: HashMap<(String, String), RunnerResponse>,
    invocations: AtomicU64,
}

impl StubBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, solution_id: &str, test_id: &str, response: RunnerResponse) {
        self.table
            .insert((solution_id.to_string(), test_id.to_string()), response);
    }

    /// Convenience for a verdict without trace.
    pub fn set(&mut self, solution_id: &str, test_id: &str, cause: Option<FailCause>) {
        self.insert(
            solution_id,
            test_id,
            RunnerResponse {
                status: if cause.is_none() { PairStatus::Pass } else { PairStatus::Fail },
                cause,
                raw_trace: None,
                duration_ms: 1,
                stderr_excerpt: None,
            },
        );
    }

    pub fn invocations(&self) -> u64 {
        self.invocations.load(Ordering::SeqCst)
    }
}

impl Backend for StubBackend {
    fn name(&self) -> &str {
        "stub"
    }

    fn run(&self, job: &PairJob<'_>) -> Result<RunnerResponse, BackendError> {
        self.invocations.fetch_add(1, Ordering::SeqCst);
        self.table
            .get(&(job.solution.solution_id.clone(), job.test.test_id.clone()))
            .cloned()
            .ok_or_else(|| {
                BackendError::Unavailable(format!(
                    "no stub outcome for ({}, {})",
                    job.solution.solution_id, job.test.test_id
                ))
            })
    }
}

/// Backend that always reports itself unavailable.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullBackend;

impl Backend for NullBackend {
    fn name(&self) -> &str {
        "null"
    }

    fn run(&self, _job: &PairJob<'_>) -> Result<RunnerResponse, BackendError> {
        Err(BackendError::Unavailable("no execution backend configured".into()))
    }
}
