use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::Path;
use std::time::{Duration, Instant};

use cotforge::harness::{
    build_matrix, run_pair, run_traced, Backend, BackendError, ExecLimits, NullBackend, PairJob,
    ProcessBackend, RunMode, RunnerRequest, RunnerResponse, StubBackend,
};
use cotforge::{
    CandidateSolution, DifficultyLabel, FailCause, InvalidReason, PairStatus, SignatureKind,
    SignatureSpec, SolutionOrigin, TaskBundle, TestCase, TestStructure, STDERR_EXCERPT_MAX,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn solution(id: &str) -> CandidateSolution {
    CandidateSolution {
        solution_id: id.into(),
        source: "def solution(x):\n    return x\n".into(),
        origin: SolutionOrigin::Generated,
    }
}

fn test_case(id: &str, valid: bool) -> TestCase {
    TestCase {
        test_id: id.into(),
        source: "def test_a():\n    assert solution(1) == 1".into(),
        structure: if valid { TestStructure::ValidSingleAssert } else { TestStructure::Invalid },
        invalid_reason: (!valid).then_some(InvalidReason::MultipleAsserts),
    }
}

fn bundle(m: usize, n: usize) -> TaskBundle {
    TaskBundle {
        task_id: "task".into(),
        concept_id: "c".into(),
        instruction: "i".into(),
        difficulty_label: DifficultyLabel::Hard,
        signature: SignatureSpec {
            kind: SignatureKind::Function,
            name: "solution".into(),
            params: Vec::new(),
            return_name: None,
            return_type: "int".into(),
            methods: Vec::new(),
            primary_method: None,
        },
        solutions: (0..m).map(|i| solution(&format!("task/s{i}"))).collect(),
        tests: (0..n).map(|j| test_case(&format!("task/t{j:02}"), j % 7 != 3)).collect(),
    }
}

fn stub_for(b: &TaskBundle, seed: u64) -> StubBackend {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stub = StubBackend::new();
    for s in &b.solutions {
        for t in &b.tests {
            let cause = match rng.gen_range(0..4) {
                0 => Some(FailCause::Assertion),
                1 => Some(FailCause::RuntimeError),
                _ => None,
            };
            stub.set(&s.solution_id, &t.test_id, cause);
        }
    }
    stub
}

#[test]
fn matrix_is_independent_of_scheduling() {
    let b = bundle(9, 21);
    let stub = stub_for(&b, 4);
    let reference = build_matrix(&b, &ExecLimits::default(), &stub, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for round in 0..24 {
        let mut shuffled = b.clone();
        shuffled.solutions.shuffle(&mut rng);
        shuffled.tests.shuffle(&mut rng);
        let workers = 1 + round % 8;
        let m = build_matrix(&shuffled, &ExecLimits::default(), &stub, workers);
        for (i, sid) in m.solution_ids.iter().enumerate() {
            let ri = reference.solution_ids.iter().position(|x| x == sid).unwrap();
            for (j, tid) in m.test_ids.iter().enumerate() {
                let rj = reference.test_ids.iter().position(|x| x == tid).unwrap();
                assert_eq!(m.cells[i][j], reference.cells[ri][rj], "round {round}");
            }
        }
        let again = build_matrix(&shuffled, &ExecLimits::default(), &stub, workers + 3);
        assert_eq!(again, m);
    }
}

#[test]
fn each_executable_pair_runs_once() {
    let b = bundle(5, 30);
    let stub = stub_for(&b, 1);
    let m = build_matrix(&b, &ExecLimits::default(), &stub, 4);
    let executable = b.tests.iter().filter(|t| t.is_executable()).count();
    assert_eq!(m.n, executable);
    assert_eq!(stub.invocations(), (m.m * m.n) as u64);
    assert!(m.test_ids.iter().all(|id| b.test(id).unwrap().is_executable()));
}

#[test]
fn failures_become_outcomes() {
    let s = solution("s");
    let t = test_case("t", true);
    let o = run_pair(&s, &t, "solution", &ExecLimits::default(), &NullBackend);
    assert_eq!(o.cause, Some(FailCause::HarnessError));
    let o = run_pair(&s, &test_case("bad", false), "solution", &ExecLimits::default(), &StubBackend::new());
    assert_eq!(o.cause, Some(FailCause::HarnessError));
}

#[test]
fn runner_protocol_field_names() {
    let req = RunnerRequest {
        mode: RunMode::Trace,
        solution_source: "a".into(),
        test_source: "b".into(),
        target_name: "f".into(),
        timeout_s: 2.5,
    };
    let v = serde_json::to_value(&req).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["mode", "solution_source", "target_name", "test_source", "timeout_s"]);
    assert_eq!(v["mode"], "trace");

    let resp: RunnerResponse = serde_json::from_str(
        r#"{"status":"fail","cause":"runtime-error","duration_ms":3,"stderr_excerpt":"boom"}"#,
    )
    .unwrap();
    assert_eq!(resp.status, PairStatus::Fail);
    assert_eq!(resp.outcome().cause, Some(FailCause::RuntimeError));
    let pass: RunnerResponse = serde_json::from_str(r#"{"status":"pass","raw_trace":"call 1 def f():"}"#).unwrap();
    assert!(pass.outcome().is_pass());
    assert!(serde_json::from_str::<RunnerResponse>(r#"{"status":"maybe"}"#).is_err());
}

fn script(dir: &Path, name: &str, body: &str) -> Vec<String> {
    let path = dir.join(name);
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    vec![path.display().to_string()]
}

fn run(cmd: Vec<String>, timeout_s: f64) -> Result<RunnerResponse, BackendError> {
    let backend = ProcessBackend::new(cmd);
    let s = solution("s");
    let t = test_case("t", true);
    let limits = ExecLimits {
        wall_timeout_s: timeout_s,
        ..ExecLimits::default()
    };
    backend.run(&PairJob {
        solution: &s,
        test: &t,
        mode: RunMode::Exec,
        target_name: "solution",
        limits: &limits,
    })
}

#[test]
fn process_runner_receives_request_and_reports_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let seen = dir.path().join("req.json");
    let cmd = script(
        dir.path(),
        "runner.sh",
        &format!("cat > {}\necho '{{\"status\":\"pass\",\"duration_ms\":7}}'", seen.display()),
    );
    let resp = run(cmd, 5.0).unwrap();
    assert_eq!(resp.status, PairStatus::Pass);
    let req: RunnerRequest = serde_json::from_str(&fs::read_to_string(&seen).unwrap()).unwrap();
    assert_eq!(req.target_name, "solution");
    assert_eq!(req.mode, RunMode::Exec);
}

#[test]
fn process_runner_is_killed_at_the_deadline() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(dir.path(), "slow.sh", "exec sleep 30");
    let started = Instant::now();
    let resp = run(cmd, 0.5).unwrap();
    assert!(started.elapsed() < Duration::from_secs(2), "took {:?}", started.elapsed());
    assert_eq!(resp.cause, Some(FailCause::Timeout));
}

#[test]
fn nonzero_exit_is_a_harness_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(dir.path(), "bad.sh", "cat >/dev/null\necho broken >&2\nexit 3");
    match run(cmd.clone(), 5.0) {
        Err(BackendError::RunnerExit { code, stderr }) => {
            assert_eq!(code, 3);
            assert!(stderr.contains("broken"));
        }
        other => panic!("{other:?}"),
    }
    let o = run_pair(&solution("s"), &test_case("t", true), "solution", &ExecLimits::default(), &ProcessBackend::new(cmd));
    assert_eq!(o.cause, Some(FailCause::HarnessError));
}

#[test]
fn oversized_output_is_an_overflow() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(dir.path(), "big.sh", "cat >/dev/null\nhead -c 12000000 /dev/zero | tr '\\0' 'a'");
    assert_eq!(run(cmd.clone(), 20.0), Err(BackendError::TraceOverflow));
    let limits = ExecLimits {
        wall_timeout_s: 20.0,
        ..ExecLimits::default()
    };
    let (trace, o) = run_traced(&solution("s"), &test_case("t", true), "solution", &limits, &ProcessBackend::new(cmd));
    assert!(trace.is_none());
    assert!(o.stderr_excerpt.contains("trace-overflow"));
}

#[test]
fn stderr_excerpt_is_capped() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(
        dir.path(),
        "noisy.sh",
        "cat >/dev/null\nhead -c 20000 /dev/zero | tr '\\0' 'e' >&2\necho '{\"status\":\"fail\",\"cause\":\"assertion\",\"duration_ms\":1}'",
    );
    let resp = run(cmd, 5.0).unwrap();
    let excerpt = resp.stderr_excerpt.clone().unwrap();
    assert!(!excerpt.is_empty() && excerpt.len() <= STDERR_EXCERPT_MAX);
    assert_eq!(resp.outcome().cause, Some(FailCause::Assertion));
}

#[test]
fn malformed_response_is_a_protocol_error() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(dir.path(), "garbled.sh", "cat >/dev/null\necho not-json");
    assert!(matches!(run(cmd, 5.0), Err(BackendError::Protocol(_))));
    let missing = run(vec!["/nonexistent/runner".into()], 1.0);
    assert!(matches!(missing, Err(BackendError::Unavailable(_))));
}
