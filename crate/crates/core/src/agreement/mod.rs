//! Dual Agreement: cluster solutions by pass/fail fingerprint, score each
//! cluster by size times commonly-passed tests, keep the best.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{PassFailMatrix, SolutionCluster, TaskBundle, TestCase, VerifiedPair};
use crate::util::collapse_whitespace;

pub mod grid;
pub mod stats;

/// Default minimum best-cluster score: two solutions agreeing on two tests.
pub const DEFAULT_MIN_SCORE: u64 = 4;

/// Groups solutions with identical rows. Ordered by (score desc,
/// fingerprint asc).
pub fn cluster_solutions(matrix: &PassFailMatrix) -> Vec<SolutionCluster> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for i in 0..matrix.m {
        groups.entry(matrix.fingerprint(i)).or_default().push(i);
    }
    let mut clusters: Vec<SolutionCluster> = groups
        .into_iter()
        .map(|(fingerprint, members)| {
            let common_tests: Vec<usize> = fingerprint
                .char_indices()
                .filter(|(_, c)| *c == '1')
                .map(|(j, _)| j)
                .collect();
            let mut c = SolutionCluster {
                fingerprint,
                members,
                common_tests,
                score: 0,
            };
            c.score = score_cluster(&c);
            c
        })
        .collect();
    clusters.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.fingerprint.cmp(&b.fingerprint)));
    clusters
}

/// |members| x |common_tests|.
pub fn score_cluster(cluster: &SolutionCluster) -> u64 {
    (cluster.members.len() * cluster.common_tests.len()) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    NoCandidates,
    LowConsensus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub task_id: String,
    pub reason: RejectReason,
    pub best_score: u64,
}

/// Picks the best cluster's canonical solution and its common tests, or
/// rejects the task.
pub fn select_best(
    bundle: &TaskBundle,
    matrix: &PassFailMatrix,
    min_score: u64,
) -> Result<VerifiedPair, Rejection> {
    let reject = |reason, best_score| Rejection {
        task_id: bundle.task_id.clone(),
        reason,
        best_score,
    };
    if matrix.m == 0 || matrix.n == 0 {
        return Err(reject(RejectReason::NoCandidates, 0));
    }
    let clusters = cluster_solutions(matrix);
    let best = &clusters[0];
    if best.score < min_score || best.score == 0 {
        return Err(reject(RejectReason::LowConsensus, best.score));
    }
    let solution_for = |i: usize| {
        matrix
            .solution_ids
            .get(i)
            .and_then(|id| bundle.solutions.iter().find(|s| &s.solution_id == id))
            .or_else(|| bundle.solutions.get(i))
    };
    let canonical = best
        .members
        .iter()
        .filter_map(|&i| solution_for(i))
        .min_by(|a, b| {
            let la = collapse_whitespace(&a.source).chars().count();
            let lb = collapse_whitespace(&b.source).chars().count();
            la.cmp(&lb).then_with(|| a.solution_id.cmp(&b.solution_id))
        })
        .ok_or_else(|| reject(RejectReason::NoCandidates, best.score))?
        .clone();
    let executable: Vec<&TestCase> = bundle.executable_tests().collect();
    let passing_tests: Vec<TestCase> = best
        .common_tests
        .iter()
        .filter_map(|&j| match matrix.test_ids.get(j) {
            Some(id) => bundle.test(id),
            None => executable.get(j).copied(),
        })
        .cloned()
        .collect();
    Ok(VerifiedPair {
        task_id: bundle.task_id.clone(),
        canonical_solution: canonical,
        passing_tests,
        cluster_score: best.score,
        cluster_size: best.members.len(),
    })
}
