//! Simulated consensus study: how often the best cluster clears a threshold
//! as the numbers of candidate solutions and tests grow.
//!
//! Generative model for one problem with S solutions and T tests:
//! each test is valid with probability `q_test_valid`; each solution is
//! correct with probability `q_solution_correct`, otherwise it carries one of
//! `bug_classes` bugs drawn uniformly. A bug class is exposed by each valid
//! test independently with probability `delta_coverage`, and all solutions of
//! that class fail exactly the exposing tests. Correct solutions pass every
//! valid test. An invalid test is coincidentally passed by each behaviour
//! group (the correct group and every bug class) with probability
//! `p_coincidental`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{from_count, is_unit_interval, Scalar};
use crate::util::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SimParams<T> {
    pub q_solution_correct: T,
    pub q_test_valid: T,
    pub delta_coverage: T,
    pub p_coincidental: T,
    pub bug_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ConsensusGridConfig<T> {
    pub solution_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
    pub problems_per_cell: usize,
    pub tau_fraction: T,
    pub sim_params: SimParams<T>,
    pub seed: u64,
}

fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("representable constant")
}

impl<T: Scalar> Default for ConsensusGridConfig<T> {
    fn default() -> Self {
        ConsensusGridConfig {
            solution_counts: vec![5, 10, 15, 20],
            test_counts: vec![5, 10, 20, 30, 40, 50],
            problems_per_cell: 500,
            tau_fraction: lit(0.25),
            sim_params: SimParams::default(),
            seed: 0,
        }
    }
}

impl<T: Scalar> Default for SimParams<T> {
    fn default() -> Self {
        SimParams {
            q_solution_correct: lit(0.6),
            q_test_valid: lit(0.8),
            delta_coverage: lit(0.4),
            p_coincidental: lit(0.3),
            bug_classes: 4,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("probability {0} outside [0, 1]")]
    Probability(&'static str),
    #[error("tau_fraction must lie in (0, 1]")]
    Tau,
    #[error("{0} must be at least 1")]
    Count(&'static str),
}

impl<T: Scalar> ConsensusGridConfig<T> {
    pub fn validate(&self) -> Result<(), GridError> {
        let p = &self.sim_params;
        for (name, v) in [
            ("q_solution_correct", &p.q_solution_correct),
            ("q_test_valid", &p.q_test_valid),
            ("delta_coverage", &p.delta_coverage),
            ("p_coincidental", &p.p_coincidental),
        ] {
            if !is_unit_interval(v) {
                return Err(GridError::Probability(name));
            }
        }
        if self.tau_fraction <= T::zero() || self.tau_fraction > T::one() {
            return Err(GridError::Tau);
        }
        if self.problems_per_cell == 0 {
            return Err(GridError::Count("problems_per_cell"));
        }
        if p.bug_classes == 0 {
            return Err(GridError::Count("bug_classes"));
        }
        if self.solution_counts.contains(&0) || self.test_counts.contains(&0) {
            return Err(GridError::Count("solution and test counts"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell<T> {
    pub solutions: usize,
    pub tests: usize,
    pub high_consensus_fraction: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusGrid<T> {
    /// Row-major over (solution_counts, test_counts).
    pub cells: Vec<GridCell<T>>,
}

impl<T: Scalar> ConsensusGrid<T> {
    pub fn fraction(&self, solutions: usize, tests: usize) -> Option<&T> {
        self.cells
            .iter()
            .find(|c| c.solutions == solutions && c.tests == tests)
            .map(|c| &c.high_consensus_fraction)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("solutions,tests,high_consensus_fraction\n");
        for c in &self.cells {
            let f = c.high_consensus_fraction.to_f64().unwrap_or(f64::NAN);
            out.push_str(&format!("{},{},{:.6}\n", c.solutions, c.tests, f));
        }
        out
    }
}

/// Probabilities as f64 for sampling.
struct Draw {
    q_correct: f64,
    q_valid: f64,
    delta: f64,
    p: f64,
    classes: usize,
}

/// Samples one S x T pass matrix under the model.
fn simulate(rng: &mut ChaCha8Rng, d: &Draw, s: usize, t: usize) -> Vec<Vec<bool>> {
    let valid: Vec<bool> = (0..t).map(|_| rng.gen::<f64>() < d.q_valid).collect();
    // groups: 0 = correct, 1..=classes = bug classes
    let groups = d.classes + 1;
    let behaviour: Vec<Vec<bool>> = (0..groups)
        .map(|g| {
            valid
                .iter()
                .map(|&v| {
                    if v {
                        g == 0 || rng.gen::<f64>() >= d.delta
                    } else {
                        rng.gen::<f64>() < d.p
                    }
                })
                .collect()
        })
        .collect();
    (0..s)
        .map(|_| {
            let g = if rng.gen::<f64>() < d.q_correct {
                0
            } else {
                1 + rng.gen_range(0..d.classes)
            };
            behaviour[g].clone()
        })
        .collect()
}

/// Best Dual Agreement score of a boolean matrix.
fn best_score(rows: &[Vec<bool>]) -> u64 {
    let mut counts: std::collections::HashMap<&[bool], usize> = std::collections::HashMap::new();
    for r in rows {
        *counts.entry(r.as_slice()).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(r, m)| (m * r.iter().filter(|&&p| p).count()) as u64)
        .max()
        .unwrap_or(0)
}

/// Runs the grid; each cell uses its own seed derived from the config seed,
/// so cells can run in parallel without changing results.
pub fn run_consensus_grid<T: Scalar + Send + Sync>(
    config: &ConsensusGridConfig<T>,
) -> Result<ConsensusGrid<T>, GridError> {
    config.validate()?;
    let sp = &config.sim_params;
    let f = |v: &T| v.to_f64().unwrap_or(0.0);
    let d = Draw {
        q_correct: f(&sp.q_solution_correct),
        q_valid: f(&sp.q_test_valid),
        delta: f(&sp.delta_coverage),
        p: f(&sp.p_coincidental),
        classes: sp.bug_classes,
    };
    let coords: Vec<(usize, usize)> = config
        .solution_counts
        .iter()
        .flat_map(|&s| config.test_counts.iter().map(move |&t| (s, t)))
        .collect();
    let highs: Vec<usize> = coords
        .par_iter()
        .map(|&(s, t)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &format!("cell/{s}/{t}")));
            let threshold = config.tau_fraction.clone() * from_count::<T>(s * t);
            (0..config.problems_per_cell)
                .filter(|_| from_count::<T>(best_score(&simulate(&mut rng, &d, s, t)) as usize) > threshold)
                .count()
        })
        .collect();
    let n = from_count::<T>(config.problems_per_cell);
    Ok(ConsensusGrid {
        cells: coords
            .into_iter()
            .zip(highs)
            .map(|((s, t), h)| GridCell {
                solutions: s,
                tests: t,
                high_consensus_fraction: from_count::<T>(h) / n.clone(),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ConsensusGridConfig<f64> {
        ConsensusGridConfig {
            problems_per_cell: 200,
            solution_counts: vec![1, 5],
            test_counts: vec![1, 10],
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        assert_eq!(run_consensus_grid(&small()).unwrap(), run_consensus_grid(&small()).unwrap());
    }

    #[test]
    fn one_by_one_cell_matches_closed_form() {
        let cfg: ConsensusGridConfig<f64> = ConsensusGridConfig {
            problems_per_cell: 20_000,
            solution_counts: vec![1],
            test_counts: vec![1],
            ..Default::default()
        };
        let g = run_consensus_grid(&cfg).unwrap();
        // P(pass) = qc(qv + (1-qv)p) + (1-qc)(qv(1-delta) + (1-qv)p)
        let closed: f64 = 0.6 * (0.8 + 0.2 * 0.3) + 0.4 * (0.8 * 0.6 + 0.2 * 0.3);
        let got = *g.fraction(1, 1).unwrap();
        // 4 sigma of a binomial proportion at n = 20000
        assert!((got - closed).abs() < 4.0 * (closed * (1.0 - closed) / 20_000.0).sqrt(), "{got} vs {closed}");
    }

    #[test]
    fn csv_layout() {
        let g = run_consensus_grid(&small()).unwrap();
        let csv = g.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "solutions,tests,high_consensus_fraction");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("1,1,"));
    }

    #[test]
    fn invalid_configs() {
        let mut c = small();
        c.tau_fraction = 0.0;
        assert_eq!(c.validate(), Err(GridError::Tau));
        let mut c = small();
        c.sim_params.p_coincidental = 1.5;
        assert!(matches!(c.validate(), Err(GridError::Probability(_))));
    }
}
