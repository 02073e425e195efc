//! Execution-grounded chain-of-thought data synthesis.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`curation`]: concept normalisation, de-duplication, scoring and filtering
//! - [`synthesis`]: instruction, signature, code, scenario and test generation
//! - [`harness`]: solution x test execution and traced runs
//! - [`agreement`]: dual-agreement clustering, selection and the consensus study
//! - [`trace`]: trace sanitisation, parsing and rationale consistency checks
//! - [`forge`]: I/O extraction, question and rationale generation, dataset assembly
//! - [`pipeline`]: stage files, manifest and configuration used by the CLI
//!
//! [`provider`] wraps the text-generation backend (HTTP or the offline mock) and
//! [`bank`] holds the built-in problem bank the mock serves from.
//!
//! Statistical routines are generic over the scalar type (see [`scalar`]); the
//! aliases below pin the concrete types the pipeline uses.

pub mod agreement;
pub mod bank;
pub mod curation;
pub mod forge;
pub mod harness;
pub mod json;
pub mod model;
pub mod pipeline;
pub mod provider;
pub mod pysrc;
pub mod pyvalue;
pub mod scalar;
pub mod synthesis;
pub mod trace;
pub mod util;

pub use model::*;

/// Floating-point probability used by simulations and ratios.
pub type Probability = f64;

/// Exact rational probability, for closed forms such as `p^k`.
pub type ExactProbability = num_rational::Ratio<i64>;

/// Consensus grid configuration over `f64`.
pub type GridConfig = agreement::grid::ConsensusGridConfig<f64>;

/// Consensus grid result over `f64`.
pub type Grid = agreement::grid::ConsensusGrid<f64>;

/// Score ratio bound over `f64`.
pub type ScoreRatioBound = agreement::stats::ScoreRatio<f64>;
