//! Shared domain types and the pass/fail matrix.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A seed programming concept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub description: String,
    /// 1..=5 once scored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<u8>,
    /// 1..=5 once scored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance: Option<u8>,
    #[serde(default)]
    pub source_ref: String,
}

impl Concept {
    pub fn is_scored(&self) -> bool {
        matches!(self.difficulty, Some(1..=5)) && matches!(self.relevance, Some(1..=5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignatureKind {
    Function,
    Class,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub type_expr: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    /// Parameters excluding `self`.
    pub params: Vec<ParamSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub return_name: Option<String>,
    pub return_type: String,
}

/// Parsed signature skeleton.
///
/// For class kind, `methods` lists every method in declaration order including
/// `__init__` when present; `params` mirrors the constructor parameters and
/// `return_type` is the class name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureSpec {
    pub kind: SignatureKind,
    pub name: String,
    pub params: Vec<ParamSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub return_name: Option<String>,
    pub return_type: String,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primary_method: Option<String>,
}

impl SignatureSpec {
    pub fn constructor(&self) -> Option<&MethodSpec> {
        self.methods.iter().find(|m| m.name == "__init__")
    }

    pub fn regular_methods(&self) -> impl Iterator<Item = &MethodSpec> {
        self.methods.iter().filter(|m| m.name != "__init__")
    }

    /// Name of the callable a tracer should instrument.
    pub fn target_name(&self) -> &str {
        match self.kind {
            SignatureKind::Function => &self.name,
            SignatureKind::Class => self.primary_method.as_deref().unwrap_or(&self.name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifficultyLabel {
    Medium,
    Hard,
}

impl DifficultyLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            DifficultyLabel::Medium => "medium",
            DifficultyLabel::Hard => "hard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionOrigin {
    Generated,
    InjectedFixture,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSolution {
    pub solution_id: String,
    pub source: String,
    pub origin: SolutionOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestStructure {
    ValidSingleAssert,
    ValidChainedAssert,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvalidReason {
    AssignmentOutsideAssert,
    MultipleAsserts,
    TryExcept,
    IndirectComparison,
    WrongCallee,
    NotTopLevel,
    Unparseable,
}

impl InvalidReason {
    pub fn as_str(self) -> &'static str {
        match self {
            InvalidReason::AssignmentOutsideAssert => "assignment-outside-assert",
            InvalidReason::MultipleAsserts => "multiple-asserts",
            InvalidReason::TryExcept => "try-except",
            InvalidReason::IndirectComparison => "indirect-comparison",
            InvalidReason::WrongCallee => "wrong-callee",
            InvalidReason::NotTopLevel => "not-top-level",
            InvalidReason::Unparseable => "unparseable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub test_id: String,
    pub source: String,
    pub structure: TestStructure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid_reason: Option<InvalidReason>,
}

impl TestCase {
    pub fn is_executable(&self) -> bool {
        self.structure != TestStructure::Invalid
    }
}

/// One synthesized problem with its candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskBundle {
    pub task_id: String,
    pub concept_id: String,
    pub instruction: String,
    pub difficulty_label: DifficultyLabel,
    pub signature: SignatureSpec,
    pub solutions: Vec<CandidateSolution>,
    pub tests: Vec<TestCase>,
}

impl TaskBundle {
    pub fn executable_tests(&self) -> impl Iterator<Item = &TestCase> {
        self.tests.iter().filter(|t| t.is_executable())
    }

    pub fn test(&self, test_id: &str) -> Option<&TestCase> {
        self.tests.iter().find(|t| t.test_id == test_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailCause {
    Assertion,
    RuntimeError,
    Timeout,
    HarnessError,
}

/// Maximum stored stderr excerpt, in bytes.
pub const STDERR_EXCERPT_MAX: usize = 4096;

/// Result of executing one solution against one test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub status: PairStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<FailCause>,
    #[serde(default)]
    pub duration_ms: u64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub stderr_excerpt: String,
}

impl PairOutcome {
    pub fn pass(duration_ms: u64) -> Self {
        PairOutcome {
            status: PairStatus::Pass,
            cause: None,
            duration_ms,
            stderr_excerpt: String::new(),
        }
    }

    pub fn fail(cause: FailCause, duration_ms: u64, stderr: &str) -> Self {
        PairOutcome {
            status: PairStatus::Fail,
            cause: Some(cause),
            duration_ms,
            stderr_excerpt: crate::util::truncate_bytes(stderr, STDERR_EXCERPT_MAX),
        }
    }

    pub fn harness_error(detail: &str) -> Self {
        Self::fail(FailCause::HarnessError, 0, detail)
    }

    pub fn is_pass(&self) -> bool {
        self.status == PairStatus::Pass
    }

    /// Restores the `pass => no cause` and `fail => cause` invariants.
    fn normalized(mut self) -> Self {
        match self.status {
            PairStatus::Pass => self.cause = None,
            PairStatus::Fail => {
                if self.cause.is_none() {
                    self.cause = Some(FailCause::HarnessError);
                }
            }
        }
        self
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatrixError {
    #[error("ragged grid: row {row} has {found} cells, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
}

/// Binary solution x test outcome grid for one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassFailMatrix {
    pub task_id: String,
    pub m: usize,
    pub n: usize,
    /// Row labels, one per solution.
    #[serde(default)]
    pub solution_ids: Vec<String>,
    /// Column labels, one per executed test.
    #[serde(default)]
    pub test_ids: Vec<String>,
    pub cells: Vec<Vec<PairOutcome>>,
}

impl PassFailMatrix {
    pub fn passes(&self, i: usize, j: usize) -> bool {
        self.cells[i][j].is_pass()
    }

    pub fn row(&self, i: usize) -> Vec<bool> {
        self.cells[i].iter().map(PairOutcome::is_pass).collect()
    }

    pub fn fingerprint(&self, i: usize) -> String {
        row_fingerprint(&self.row(i))
    }

    /// Attaches row/column labels after checking their counts.
    pub fn with_labels(
        mut self,
        solution_ids: Vec<String>,
        test_ids: Vec<String>,
    ) -> Result<Self, MatrixError> {
        if solution_ids.len() != self.m || test_ids.len() != self.n {
            return Err(MatrixError::Dimensions(format!(
                "{}x{} labels for a {}x{} matrix",
                solution_ids.len(),
                test_ids.len(),
                self.m,
                self.n
            )));
        }
        self.solution_ids = solution_ids;
        self.test_ids = test_ids;
        Ok(self)
    }
}

/// Encodes a row as a '0'/'1' string; character `j` is '1' iff cell `j` passed.
pub fn row_fingerprint(row: &[bool]) -> String {
    row.iter().map(|&p| if p { '1' } else { '0' }).collect()
}

/// Builds a matrix from an m x n grid of outcomes. An empty grid (m = 0) is
/// accepted with n = 0.
pub fn matrix_from_outcomes(
    task_id: &str,
    outcomes: Vec<Vec<PairOutcome>>,
) -> Result<PassFailMatrix, MatrixError> {
    let m = outcomes.len();
    let n = outcomes.first().map_or(0, Vec::len);
    for (row, cells) in outcomes.iter().enumerate() {
        if cells.len() != n {
            return Err(MatrixError::Ragged {
                row,
                found: cells.len(),
                expected: n,
            });
        }
    }
    let cells = outcomes
        .into_iter()
        .map(|r| r.into_iter().map(PairOutcome::normalized).collect())
        .collect();
    Ok(PassFailMatrix {
        task_id: task_id.to_string(),
        m,
        n,
        solution_ids: Vec::new(),
        test_ids: Vec::new(),
        cells,
    })
}

/// Group of solutions sharing one fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionCluster {
    pub fingerprint: String,
    pub members: Vec<usize>,
    pub common_tests: Vec<usize>,
    pub score: u64,
}

/// Canonical solution with its commonly passed tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiedPair {
    pub task_id: String,
    pub canonical_solution: CandidateSolution,
    pub passing_tests: Vec<TestCase>,
    pub cluster_score: u64,
    pub cluster_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEventKind {
    Call,
    Line,
    Return,
    Exception,
    VarStart,
    VarNew,
    VarModified,
    ReturnValue,
    Elapsed,
}

impl TraceEventKind {
    pub fn is_source(self) -> bool {
        matches!(
            self,
            TraceEventKind::Call
                | TraceEventKind::Line
                | TraceEventKind::Return
                | TraceEventKind::Exception
        )
    }

    pub fn is_var(self) -> bool {
        matches!(
            self,
            TraceEventKind::VarStart | TraceEventKind::VarNew | TraceEventKind::VarModified
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: usize,
    pub kind: TraceEventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_no: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_repr: Option<String>,
}

impl TraceEvent {
    /// Checks the per-kind field presence rules.
    pub fn is_well_formed(&self) -> bool {
        if self.kind.is_source() {
            self.line_no.is_some_and(|n| n > 0) && self.source_text.is_some()
        } else if self.kind.is_var() {
            self.var_name.is_some() && self.value_repr.is_some()
        } else {
            self.value_repr.is_some()
        }
    }
}

/// A sanitized trace and its parsed events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub trace_id: String,
    pub task_id: String,
    pub test_id: String,
    pub sanitized_text: String,
    pub events: Vec<TraceEvent>,
    pub outcome: PairOutcome,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceInvariantError {
    #[error("event {index} has seq {found}")]
    Gap { index: usize, found: usize },
    #[error("malformed event at seq {0}")]
    Malformed(usize),
    #[error("expected exactly one call event, found {0}")]
    CallCount(usize),
    #[error("passing trace must have exactly one return value, found {0}")]
    ReturnCount(usize),
}

impl Trace {
    pub fn validate(&self) -> Result<(), TraceInvariantError> {
        for (index, ev) in self.events.iter().enumerate() {
            if ev.seq != index {
                return Err(TraceInvariantError::Gap {
                    index,
                    found: ev.seq,
                });
            }
            if !ev.is_well_formed() {
                return Err(TraceInvariantError::Malformed(ev.seq));
            }
        }
        let calls = self.count(TraceEventKind::Call);
        if calls != 1 {
            return Err(TraceInvariantError::CallCount(calls));
        }
        if self.outcome.is_pass() {
            let rv = self.count(TraceEventKind::ReturnValue);
            if rv != 1 {
                return Err(TraceInvariantError::ReturnCount(rv));
            }
        }
        Ok(())
    }

    pub fn count(&self, kind: TraceEventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn return_value(&self) -> Option<&str> {
        self.events
            .iter()
            .rev()
            .find(|e| e.kind == TraceEventKind::ReturnValue)
            .and_then(|e| e.value_repr.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extraction {
    Structural,
    ProviderAssisted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IOPair {
    pub input_expr: String,
    pub output_expr: String,
    pub extraction: Extraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetMode {
    Forward,
    Backward,
    Bidirectional,
}

impl DatasetMode {
    pub const ALL: [DatasetMode; 3] = [
        DatasetMode::Forward,
        DatasetMode::Backward,
        DatasetMode::Bidirectional,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetMode::Forward => "forward",
            DatasetMode::Backward => "backward",
            DatasetMode::Bidirectional => "bidirectional",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub direction: Direction,
    pub question: String,
    pub cot: String,
    pub prediction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub trace_id: String,
    pub test_id: String,
    pub cluster_score: u64,
}

/// One training record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoTRecord {
    pub task_id: String,
    pub mode: DatasetMode,
    pub instruction: String,
    pub function_source: String,
    pub turns: Vec<Turn>,
    pub provenance: Provenance,
}

impl CoTRecord {
    /// Checks the turn-count rule for the record's mode.
    pub fn is_well_formed(&self) -> bool {
        let dirs: Vec<Direction> = self.turns.iter().map(|t| t.direction).collect();
        match self.mode {
            DatasetMode::Forward => dirs == [Direction::Forward],
            DatasetMode::Backward => dirs == [Direction::Backward],
            DatasetMode::Bidirectional => dirs == [Direction::Forward, Direction::Backward],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn outcome(pass: bool) -> PairOutcome {
        if pass {
            PairOutcome::pass(0)
        } else {
            PairOutcome::fail(FailCause::Assertion, 0, "")
        }
    }

    #[test]
    fn fingerprint_direct_encoding() {
        assert_eq!(row_fingerprint(&[true, false, true]), "101");
        assert_eq!(row_fingerprint(&[]), "");
        let a = row_fingerprint(&[true, true, false]);
        let b = row_fingerprint(&[true, true, false]);
        assert_eq!(a, b);
    }

    #[test]
    fn matrix_all_pass() {
        let m = matrix_from_outcomes("t", vec![vec![outcome(true); 2]; 2]).unwrap();
        assert_eq!((m.m, m.n), (2, 2));
        assert!(m.cells.iter().flatten().all(PairOutcome::is_pass));
    }

    #[test]
    fn matrix_preserves_cause() {
        let mut grid = vec![vec![outcome(true); 2]; 2];
        grid[0][1] = PairOutcome::fail(FailCause::Timeout, 1000, "slow");
        let m = matrix_from_outcomes("t", grid).unwrap();
        assert_eq!(m.cells[0][1].status, PairStatus::Fail);
        assert_eq!(m.cells[0][1].cause, Some(FailCause::Timeout));
        assert_eq!(m.fingerprint(0), "10");
    }

    #[test]
    fn matrix_degenerate_and_ragged() {
        let m = matrix_from_outcomes("t", vec![]).unwrap();
        assert_eq!((m.m, m.n), (0, 0));
        let err = matrix_from_outcomes("t", vec![vec![outcome(true)], vec![]]).unwrap_err();
        assert_eq!(
            err,
            MatrixError::Ragged {
                row: 1,
                found: 0,
                expected: 1
            }
        );
    }

    #[test]
    fn fail_without_cause_becomes_harness_error() {
        let bad = PairOutcome {
            status: PairStatus::Fail,
            cause: None,
            duration_ms: 0,
            stderr_excerpt: String::new(),
        };
        let m = matrix_from_outcomes("t", vec![vec![bad]]).unwrap();
        assert_eq!(m.cells[0][0].cause, Some(FailCause::HarnessError));
    }

    #[test]
    fn stderr_excerpt_is_capped() {
        let big = "x".repeat(10_000);
        let o = PairOutcome::fail(FailCause::RuntimeError, 0, &big);
        assert_eq!(o.stderr_excerpt.len(), STDERR_EXCERPT_MAX);
    }

    fn arb_outcome() -> impl Strategy<Value = PairOutcome> {
        prop_oneof![
            (0u64..100).prop_map(PairOutcome::pass),
            (
                prop_oneof![
                    Just(FailCause::Assertion),
                    Just(FailCause::RuntimeError),
                    Just(FailCause::Timeout),
                    Just(FailCause::HarnessError)
                ],
                0u64..100,
                "[a-z ]{0,8}"
            )
                .prop_map(|(c, d, s)| PairOutcome::fail(c, d, &s)),
        ]
    }

    proptest! {
        #[test]
        fn fingerprint_equality_is_row_equality(
            a in proptest::collection::vec(any::<bool>(), 0..12),
            b in proptest::collection::vec(any::<bool>(), 0..12),
        ) {
            prop_assert_eq!(row_fingerprint(&a) == row_fingerprint(&b), a == b);
        }

        #[test]
        fn matrix_json_round_trip(
            m in 0usize..4, n in 0usize..5,
            cells in proptest::collection::vec(arb_outcome(), 20)
        ) {
            let grid: Vec<Vec<PairOutcome>> = (0..m)
                .map(|i| (0..n).map(|j| cells[(i * n + j) % 20].clone()).collect())
                .collect();
            let matrix = matrix_from_outcomes("task/0", grid).unwrap();
            let text = crate::json::canonical_json(&matrix).unwrap();
            let back: PassFailMatrix = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, matrix);
        }
    }

    #[test]
    fn cot_record_turn_rules() {
        let turn = |d| Turn {
            direction: d,
            question: "q".into(),
            cot: "c".into(),
            prediction: "p".into(),
        };
        let mut rec = CoTRecord {
            task_id: "t".into(),
            mode: DatasetMode::Bidirectional,
            instruction: "i".into(),
            function_source: "f".into(),
            turns: vec![turn(Direction::Forward), turn(Direction::Backward)],
            provenance: Provenance {
                trace_id: "x".into(),
                test_id: "y".into(),
                cluster_score: 1,
            },
        };
        assert!(rec.is_well_formed());
        rec.turns.reverse();
        assert!(!rec.is_well_formed());
        rec.mode = DatasetMode::Forward;
        rec.turns = vec![turn(Direction::Forward)];
        assert!(rec.is_well_formed());
    }
}
