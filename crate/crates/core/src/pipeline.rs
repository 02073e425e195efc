//! Stage runner behind the command line: configuration, JSONL stage files
//! in one output directory, per-stage ledgers and the manifest.
//!
//! Every stage reads its inputs from the output directory, writes its
//! outputs atomically and appends one manifest entry. Re-running a stage on
//! unchanged inputs and configuration rewrites byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::{select_best, Rejection, DEFAULT_MIN_SCORE};
use crate::bank::{BankBackend, DEMO_CONCEPTS};
use crate::curation::{
    concepts_from_inputs, dedup_concepts, filter_concepts, score_concepts, ConceptInput,
    DEFAULT_DEDUP_THRESHOLD,
};
use crate::forge::{self, ForgeConfig, ForgeJob, ForgedRecord};
use crate::harness::{build_matrix, Backend, ExecLimits, ProcessBackend};
use crate::json::{canonical_json, read_jsonl, sha256_hex, to_jsonl, write_atomic, JsonlError};
use crate::model::{
    CoTRecord, Concept, DatasetMode, PassFailMatrix, TaskBundle, Trace, VerifiedPair,
};
use crate::provider::{HttpProvider, MockProvider, Provider, ProviderConfig};
use crate::synthesis::{synthesize_concept, SynthesisConfig};
use crate::GridConfig;

/// `"mock"` or an HTTP provider table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProviderSetting {
    Named(String),
    Http(ProviderConfig),
}

/// `"bank"` for the built-in evaluator, or a runner command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BackendSetting {
    Named(String),
    Runner { runner: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub provider: ProviderSetting,
    pub backend: BackendSetting,
    pub synthesis: SynthesisConfig,
    pub limits: ExecLimits,
    pub workers: usize,
    pub min_score: u64,
    pub tau_fraction: f64,
    pub consistency_min: f64,
    pub dedup_threshold: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset_name: String,
    pub grid: GridConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let grid = GridConfig::default();
        PipelineConfig {
            provider: ProviderSetting::Named("mock".into()),
            backend: BackendSetting::Named("bank".into()),
            synthesis: SynthesisConfig::default(),
            limits: ExecLimits::default(),
            workers: 4,
            min_score: DEFAULT_MIN_SCORE,
            tau_fraction: grid.tau_fraction,
            consistency_min: ForgeConfig::default().consistency_min,
            dedup_threshold: DEFAULT_DEDUP_THRESHOLD,
            seed: 0,
            output_dir: PathBuf::from("out"),
            dataset_name: "cot".into(),
            grid,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: std::io::Error },
    #[error("invalid config: {0}")]
    Toml(toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: PipelineConfig = toml::from_str(text).map_err(ConfigError::Toml)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|reason| ConfigError::Read {
            path: path.display().to_string(),
            reason,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if !(self.tau_fraction > 0.0 && self.tau_fraction <= 1.0) {
            return bad("tau_fraction must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.consistency_min) {
            return bad("consistency_min must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.dedup_threshold) {
            return bad("dedup_threshold must lie in [0, 1]");
        }
        if self.limits.wall_timeout_s.is_nan() || self.limits.wall_timeout_s <= 0.0 {
            return bad("limits.wall_timeout_s must be positive");
        }
        if self.dataset_name.is_empty() || self.dataset_name.contains(['/', '\\']) {
            return bad("dataset_name must be a plain file stem");
        }
        if let ProviderSetting::Named(n) = &self.provider {
            if n != "mock" {
                return bad("provider must be \"mock\" or an HTTP provider table");
            }
        }
        match &self.backend {
            BackendSetting::Named(n) if n != "bank" => return bad("backend must be \"bank\" or { runner = [...] }"),
            BackendSetting::Runner { runner } if runner.is_empty() => return bad("backend runner command is empty"),
            _ => {}
        }
        self.synthesis.validate().map_err(ConfigError::Invalid)?;
        let mut grid = self.grid.clone();
        grid.tau_fraction = self.tau_fraction;
        grid.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Canonical JSON digest, excluding the output directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        sha256_hex(canonical_json(&c).unwrap_or_default().as_bytes())
    }

    pub fn build_provider(&self) -> Result<Box<dyn Provider>, ConfigError> {
        match &self.provider {
            ProviderSetting::Named(_) => Ok(Box::new(MockProvider::new())),
            ProviderSetting::Http(cfg) => HttpProvider::new(cfg.clone())
                .map(|p| Box::new(p) as Box<dyn Provider>)
                .map_err(|e| ConfigError::Invalid(e.to_string())),
        }
    }

    pub fn build_backend(&self) -> Box<dyn Backend> {
        match &self.backend {
            BackendSetting::Runner { runner } => Box::new(ProcessBackend::new(runner.clone())),
            BackendSetting::Named(_) => Box::new(BankBackend),
        }
    }
}

/// Pipeline stages in run order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Curate,
    Synthesize,
    Execute,
    Verify,
    Trace,
    Forge,
    Assemble,
    Filter,
    ConsensusSim,
}

impl Stage {
    /// Stages `run-all` executes.
    pub const END_TO_END: [Stage; 8] = [
        Stage::Curate,
        Stage::Synthesize,
        Stage::Execute,
        Stage::Verify,
        Stage::Trace,
        Stage::Forge,
        Stage::Assemble,
        Stage::Filter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Curate => "curate",
            Stage::Synthesize => "synthesize",
            Stage::Execute => "execute",
            Stage::Verify => "verify",
            Stage::Trace => "trace",
            Stage::Forge => "forge",
            Stage::Assemble => "assemble",
            Stage::Filter => "filter",
            Stage::ConsensusSim => "consensus-sim",
        }
    }
}

pub mod files {
    pub const CURATED: &str = "curated.jsonl";
    pub const TASKS: &str = "tasks.jsonl";
    pub const MATRICES: &str = "matrices.jsonl";
    pub const VERIFIED: &str = "verified.jsonl";
    pub const REJECTIONS: &str = "rejections.jsonl";
    pub const TRACES: &str = "traces.jsonl";
    pub const TRACE_DIR: &str = "traces";
    pub const FORGED: &str = "forged.jsonl";
    pub const FILTERED: &str = "filtered.jsonl";
    pub const GRID: &str = "consensus_grid.csv";
    pub const MANIFEST: &str = "manifest.jsonl";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stage: String,
    pub input_digest: String,
    pub output_digest: String,
    pub config_digest: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// A dropped item or a stage failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub stage: String,
    pub subject: String,
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{stage}: missing input {path}")]
    MissingInput { stage: &'static str, path: String },
    #[error("{stage}: {source}")]
    Jsonl { stage: &'static str, source: JsonlError },
    #[error("{stage}: io error on {path}: {source}")]
    Io { stage: &'static str, path: String, source: std::io::Error },
    #[error("{stage}: {message}")]
    Failed { stage: &'static str, message: String },
}

/// Counts a stage produced, keyed by item kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub counts: BTreeMap<String, usize>,
}

impl StageReport {
    fn new(stage: Stage) -> Self {
        StageReport {
            stage: stage.as_str().to_string(),
            counts: BTreeMap::new(),
        }
    }

    fn count(mut self, key: &str, n: usize) -> Self {
        self.counts.insert(key.to_string(), n);
        self
    }
}

/// Output of one stage before it is committed to disk.
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
    ledger: Vec<LedgerEntry>,
    report: StageReport,
}

impl Outputs {
    fn new(stage: Stage) -> Self {
        Outputs {
            files: Vec::new(),
            ledger: Vec::new(),
            report: StageReport::new(stage),
        }
    }
}

pub struct Pipeline {
    pub config: PipelineConfig,
    provider: Box<dyn Provider>,
    backend: Box<dyn Backend>,
    /// Concept list for `curate`; the built-in demo list when absent.
    pub input: Option<PathBuf>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let provider = config.build_provider()?;
        let backend = config.build_backend();
        Ok(Pipeline {
            config,
            provider,
            backend,
            input: None,
        })
    }

    /// Replaces the execution backend.
    pub fn with_backend(mut self, backend: Box<dyn Backend>) -> Self {
        self.backend = backend;
        self
    }

    /// Replaces the provider.
    pub fn with_provider(mut self, provider: Box<dyn Provider>) -> Self {
        self.provider = provider;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    pub fn dataset_path(&self, mode: DatasetMode) -> PathBuf {
        self.path(&format!("{}.{}.jsonl", self.config.dataset_name, mode.as_str()))
    }

    pub fn filtered_dataset_path(&self, mode: DatasetMode) -> PathBuf {
        self.path(&format!("{}.{}.filtered.jsonl", self.config.dataset_name, mode.as_str()))
    }

    pub fn ledger_path(&self, stage: Stage) -> PathBuf {
        self.path(&format!("{}.ledger.jsonl", stage.as_str()))
    }

    fn read<T: serde::de::DeserializeOwned>(&self, stage: Stage, name: &str) -> Result<Vec<T>, StageError> {
        let path = self.path(name);
        if !path.exists() {
            return Err(StageError::MissingInput {
                stage: stage.as_str(),
                path: path.display().to_string(),
            });
        }
        read_jsonl(&path).map_err(|source| StageError::Jsonl { stage: stage.as_str(), source })
    }

    fn tasks_by_id(&self, stage: Stage) -> Result<BTreeMap<String, TaskBundle>, StageError> {
        Ok(self
            .read::<TaskBundle>(stage, files::TASKS)?
            .into_iter()
            .map(|t| (t.task_id.clone(), t))
            .collect())
    }

    /// Runs one stage: computes outputs, then commits them, the ledger and
    /// a manifest entry. On failure only the ledger is written.
    pub fn run(&self, stage: Stage) -> Result<StageReport, StageError> {
        let inputs = self.input_files(stage);
        let input_digest = digest_paths(&inputs);
        let result = match stage {
            Stage::Curate => self.curate(),
            Stage::Synthesize => self.synthesize(),
            Stage::Execute => self.execute(),
            Stage::Verify => self.verify(),
            Stage::Trace => self.trace(),
            Stage::Forge => self.forge(),
            Stage::Assemble => self.assemble(),
            Stage::Filter => self.filter(),
            Stage::ConsensusSim => self.consensus_sim(),
        };
        let io_err = |path: &Path, source| StageError::Io {
            stage: stage.as_str(),
            path: path.display().to_string(),
            source,
        };
        let ledger_path = self.ledger_path(stage);
        let out = match result {
            Ok(out) => out,
            Err(e) => {
                let entry = LedgerEntry {
                    stage: stage.as_str().into(),
                    subject: "stage".into(),
                    detail: e.to_string(),
                };
                let text = to_jsonl(&[entry]).unwrap_or_default();
                write_atomic(&ledger_path, text.as_bytes()).map_err(|s| io_err(&ledger_path, s))?;
                return Err(e);
            }
        };
        for (path, bytes) in &out.files {
            write_atomic(path, bytes).map_err(|s| io_err(path, s))?;
        }
        let ledger = to_jsonl(&out.ledger).map_err(|e| StageError::Failed {
            stage: stage.as_str(),
            message: e.to_string(),
        })?;
        write_atomic(&ledger_path, ledger.as_bytes()).map_err(|s| io_err(&ledger_path, s))?;
        let outputs: Vec<PathBuf> = out.files.iter().map(|(p, _)| p.clone()).collect();
        let entry = ManifestEntry {
            stage: stage.as_str().into(),
            input_digest,
            output_digest: digest_paths(&outputs),
            config_digest: self.config.digest(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        };
        self.append_manifest(&entry).map_err(|s| io_err(&self.path(files::MANIFEST), s))?;
        log::info!("{} done: {:?}", stage.as_str(), out.report.counts);
        Ok(out.report)
    }

    /// Runs curate through filter in order, stopping at the first failure.
    pub fn run_all(&self) -> Result<Vec<StageReport>, StageError> {
        Stage::END_TO_END.iter().map(|&s| self.run(s)).collect()
    }

    fn append_manifest(&self, entry: &ManifestEntry) -> std::io::Result<()> {
        let path = self.path(files::MANIFEST);
        let mut text = fs::read_to_string(&path).unwrap_or_default();
        text.push_str(&canonical_json(entry).map_err(std::io::Error::other)?);
        text.push('\n');
        write_atomic(&path, text.as_bytes())
    }

    pub fn manifest(&self) -> Result<Vec<ManifestEntry>, JsonlError> {
        read_jsonl(&self.path(files::MANIFEST))
    }

    /// Files a stage reads.
    pub fn input_files(&self, stage: Stage) -> Vec<PathBuf> {
        let p = |n: &str| self.path(n);
        match stage {
            Stage::Curate => self.input.iter().cloned().collect(),
            Stage::Synthesize => vec![p(files::CURATED)],
            Stage::Execute => vec![p(files::TASKS)],
            Stage::Verify => vec![p(files::TASKS), p(files::MATRICES)],
            Stage::Trace => vec![p(files::TASKS), p(files::VERIFIED)],
            Stage::Forge => vec![p(files::TASKS), p(files::VERIFIED), p(files::TRACES)],
            Stage::Assemble => vec![p(files::FORGED)],
            Stage::Filter => {
                let mut v = vec![p(files::TASKS), p(files::VERIFIED)];
                v.extend(DatasetMode::ALL.iter().map(|&m| self.dataset_path(m)));
                v
            }
            Stage::ConsensusSim => Vec::new(),
        }
    }

    /// Recomputes the output digest of a stage's current files and compares
    /// it with the latest manifest entry for that stage.
    pub fn verify_manifest(&self, stage: Stage, outputs: &[PathBuf]) -> Option<bool> {
        let entries = self.manifest().ok()?;
        let last = entries.iter().rev().find(|e| e.stage == stage.as_str())?;
        Some(last.output_digest == digest_paths(outputs))
    }

    fn jsonl<T: Serialize>(&self, stage: Stage, name: &str, records: &[T]) -> Result<(PathBuf, Vec<u8>), StageError> {
        let text = to_jsonl(records).map_err(|e| StageError::Failed {
            stage: stage.as_str(),
            message: e.to_string(),
        })?;
        Ok((self.path(name), text.into_bytes()))
    }

    fn curate(&self) -> Result<Outputs, StageError> {
        let stage = Stage::Curate;
        let inputs: Vec<ConceptInput> = match &self.input {
            Some(path) => read_jsonl(path).map_err(|source| StageError::Jsonl { stage: stage.as_str(), source })?,
            None => DEMO_CONCEPTS
                .iter()
                .map(|(text, desc, _, _)| ConceptInput {
                    id: None,
                    text: text.to_string(),
                    description: desc.to_string(),
                    source_ref: String::new(),
                })
                .collect(),
        };
        let concepts = concepts_from_inputs(inputs);
        let before: BTreeSet<String> = concepts.iter().map(|c| c.id.clone()).collect();
        let batch = dedup_concepts(concepts, self.config.dedup_threshold);
        let mut out = Outputs::new(stage);
        let after: BTreeSet<&String> = batch.concepts.iter().map(|c| &c.id).collect();
        for id in before.iter().filter(|id| !after.contains(id)) {
            out.ledger.push(entry(stage, id, "merged as a near-duplicate or empty after normalisation"));
        }
        let (scored, issues) = score_concepts(batch.concepts, self.provider.as_ref(), self.config.seed);
        for i in &issues {
            out.ledger.push(entry(stage, &i.concept_id, &format!("unscored: {}", i.reason)));
        }
        let deduped = scored.len();
        let kept = filter_concepts(crate::curation::ConceptBatch {
            concepts: scored.clone(),
            stats: batch.stats,
        });
        let kept_ids: BTreeSet<&String> = kept.concepts.iter().map(|c| &c.id).collect();
        for c in scored.iter().filter(|c| c.is_scored() && !kept_ids.contains(&c.id)) {
            out.ledger.push(entry(stage, &c.id, "below the score threshold"));
        }
        out.files.push(self.jsonl(stage, files::CURATED, &kept.concepts)?);
        out.report = out
            .report
            .count("input", before.len())
            .count("deduped", deduped)
            .count("kept", kept.concepts.len());
        Ok(out)
    }

    fn synthesize(&self) -> Result<Outputs, StageError> {
        let stage = Stage::Synthesize;
        let concepts: Vec<Concept> = self.read(stage, files::CURATED)?;
        let provider = self.provider.as_ref();
        let results: Vec<_> = concepts
            .par_iter()
            .map(|c| synthesize_concept(c, &self.config.synthesis, provider, self.config.seed))
            .collect();
        let mut out = Outputs::new(stage);
        let mut tasks = Vec::new();
        for (t, skips) in results {
            tasks.extend(t);
            for s in skips {
                let subject = s.task_id.clone().unwrap_or_else(|| s.concept_id.clone());
                let step = serde_json::to_value(s.step).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
                out.ledger.push(entry(stage, &subject, &format!("{step}: {}", s.reason)));
            }
        }
        for t in &tasks {
            for test in t.tests.iter().filter(|x| !x.is_executable()) {
                let reason = test.invalid_reason.map(|r| r.as_str()).unwrap_or("invalid");
                out.ledger.push(entry(stage, &test.test_id, &format!("flagged invalid: {reason}")));
            }
        }
        out.files.push(self.jsonl(stage, files::TASKS, &tasks)?);
        out.report = out.report.count("concepts", concepts.len()).count("tasks", tasks.len());
        Ok(out)
    }

    fn execute(&self) -> Result<Outputs, StageError> {
        let stage = Stage::Execute;
        let tasks: Vec<TaskBundle> = self.read(stage, files::TASKS)?;
        let matrices: Vec<PassFailMatrix> = tasks
            .iter()
            .map(|t| build_matrix(t, &self.config.limits, self.backend.as_ref(), self.config.workers))
            .collect();
        let mut out = Outputs::new(stage);
        let pairs: usize = matrices.iter().map(|m| m.m * m.n).sum();
        out.files.push(self.jsonl(stage, files::MATRICES, &matrices)?);
        out.report = out.report.count("matrices", matrices.len()).count("pairs", pairs);
        Ok(out)
    }

    fn verify(&self) -> Result<Outputs, StageError> {
        let stage = Stage::Verify;
        let tasks = self.tasks_by_id(stage)?;
        let matrices: Vec<PassFailMatrix> = self.read(stage, files::MATRICES)?;
        let mut verified = Vec::new();
        let mut rejections: Vec<Rejection> = Vec::new();
        let mut out = Outputs::new(stage);
        for m in &matrices {
            let Some(task) = tasks.get(&m.task_id) else {
                out.ledger.push(entry(stage, &m.task_id, "matrix has no task bundle"));
                continue;
            };
            match select_best(task, m, self.config.min_score) {
                Ok(v) => verified.push(v),
                Err(r) => {
                    let reason = serde_json::to_value(r.reason).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
                    out.ledger.push(entry(stage, &r.task_id, &format!("rejected: {reason} (best score {})", r.best_score)));
                    rejections.push(r);
                }
            }
        }
        out.files.push(self.jsonl(stage, files::VERIFIED, &verified)?);
        out.files.push(self.jsonl(stage, files::REJECTIONS, &rejections)?);
        out.report = out.report.count("verified", verified.len()).count("rejected", rejections.len());
        Ok(out)
    }

    fn trace(&self) -> Result<Outputs, StageError> {
        let stage = Stage::Trace;
        let tasks = self.tasks_by_id(stage)?;
        let pairs: Vec<VerifiedPair> = self.read(stage, files::VERIFIED)?;
        let backend = self.backend.as_ref();
        let results: Vec<_> = pairs
            .par_iter()
            .filter_map(|p| {
                let task = tasks.get(&p.task_id)?;
                Some(forge::trace_pair(p, &task.signature, &self.config.limits, backend))
            })
            .collect();
        let mut out = Outputs::new(stage);
        let mut traces: Vec<Trace> = Vec::new();
        for (t, issues) in results {
            traces.extend(t);
            for i in issues {
                out.ledger.push(entry(stage, &i.test_id, &i.reason));
            }
        }
        for t in &traces {
            let base = self.path(files::TRACE_DIR);
            out.files.push((base.join(format!("{}.txt", t.trace_id)), t.sanitized_text.clone().into_bytes()));
            let events = to_jsonl(&t.events).map_err(|e| StageError::Failed {
                stage: stage.as_str(),
                message: e.to_string(),
            })?;
            out.files.push((base.join(format!("{}.events.jsonl", t.trace_id)), events.into_bytes()));
        }
        out.files.push(self.jsonl(stage, files::TRACES, &traces)?);
        out.report = out.report.count("traces", traces.len());
        Ok(out)
    }

    fn forge(&self) -> Result<Outputs, StageError> {
        let stage = Stage::Forge;
        let tasks = self.tasks_by_id(stage)?;
        let pairs: Vec<VerifiedPair> = self.read(stage, files::VERIFIED)?;
        let traces: Vec<Trace> = self.read(stage, files::TRACES)?;
        let mut by_task: BTreeMap<&str, Vec<&Trace>> = BTreeMap::new();
        for t in &traces {
            by_task.entry(t.task_id.as_str()).or_default().push(t);
        }
        let jobs: Vec<ForgeJob<'_>> = pairs
            .iter()
            .filter_map(|p| {
                Some(ForgeJob {
                    task: tasks.get(&p.task_id)?,
                    pair: p,
                    traces: by_task.get(p.task_id.as_str()).cloned().unwrap_or_default(),
                })
            })
            .collect();
        let config = ForgeConfig {
            consistency_min: self.config.consistency_min,
        };
        let (records, issues) = forge::forge_all(
            &jobs,
            &config,
            self.provider.as_ref(),
            Some((self.backend.as_ref(), &self.config.limits)),
            self.config.seed,
        );
        let mut out = Outputs::new(stage);
        for i in &issues {
            let dir = i.direction.map(|d| format!("{d:?}").to_lowercase()).unwrap_or_else(|| "both".into());
            out.ledger.push(entry(stage, &i.test_id, &format!("{dir}: {}", i.reason)));
        }
        out.files.push(self.jsonl(stage, files::FORGED, &records)?);
        out.report = out
            .report
            .count("records", records.len())
            .count("forward", records.iter().filter(|r| r.forward.is_some()).count())
            .count("backward", records.iter().filter(|r| r.backward.is_some()).count());
        Ok(out)
    }

    fn assemble(&self) -> Result<Outputs, StageError> {
        let stage = Stage::Assemble;
        let forged: Vec<ForgedRecord> = self.read(stage, files::FORGED)?;
        let mut out = Outputs::new(stage);
        for mode in DatasetMode::ALL {
            let records = forge::assemble(&forged, mode);
            if let Some(bad) = records.iter().find(|r| !r.is_well_formed()) {
                return Err(StageError::Failed {
                    stage: stage.as_str(),
                    message: format!("malformed {} record for {}", mode.as_str(), bad.provenance.test_id),
                });
            }
            out.report = out.report.count(mode.as_str(), records.len());
            let text = to_jsonl(&records).map_err(|e| StageError::Failed {
                stage: stage.as_str(),
                message: e.to_string(),
            })?;
            out.files.push((self.dataset_path(mode), text.into_bytes()));
        }
        Ok(out)
    }

    fn filter(&self) -> Result<Outputs, StageError> {
        let stage = Stage::Filter;
        let tasks = self.tasks_by_id(stage)?;
        let pairs: Vec<VerifiedPair> = self.read(stage, files::VERIFIED)?;
        let provider = self.provider.as_ref();
        let (answerable, a_log) = forge::filter_answerability(
            &pairs,
            &tasks,
            provider,
            self.backend.as_ref(),
            &self.config.limits,
            self.config.seed,
        );
        let (kept, d_log) = forge::filter_rated_difficulty(&answerable, &tasks, provider, self.config.seed);
        let mut out = Outputs::new(stage);
        for d in a_log.iter().chain(&d_log).filter(|d| !d.kept) {
            out.ledger.push(entry(stage, &d.task_id, &format!("{}: {}", d.filter, d.reason)));
        }
        let ids: BTreeSet<String> = kept.iter().map(|p| p.task_id.clone()).collect();
        for mode in DatasetMode::ALL {
            let path = self.dataset_path(mode);
            let records: Vec<CoTRecord> = if path.exists() {
                read_jsonl(&path).map_err(|source| StageError::Jsonl { stage: stage.as_str(), source })?
            } else {
                Vec::new()
            };
            let sub = forge::subset(&records, &ids);
            out.report = out.report.count(&format!("{}.filtered", mode.as_str()), sub.len());
            let text = to_jsonl(&sub).map_err(|e| StageError::Failed {
                stage: stage.as_str(),
                message: e.to_string(),
            })?;
            out.files.push((self.filtered_dataset_path(mode), text.into_bytes()));
        }
        out.files.push(self.jsonl(stage, files::FILTERED, &kept)?);
        out.report = out.report.count("input", pairs.len()).count("kept", kept.len());
        Ok(out)
    }

    fn consensus_sim(&self) -> Result<Outputs, StageError> {
        let stage = Stage::ConsensusSim;
        let mut grid = self.config.grid.clone();
        grid.tau_fraction = self.config.tau_fraction;
        if grid.seed == 0 {
            grid.seed = self.config.seed;
        }
        let result = crate::agreement::grid::run_consensus_grid(&grid).map_err(|e| StageError::Failed {
            stage: stage.as_str(),
            message: e.to_string(),
        })?;
        let mut out = Outputs::new(stage);
        out.files.push((self.path(files::GRID), result.to_csv().into_bytes()));
        out.report = out.report.count("cells", result.cells.len());
        Ok(out)
    }

    /// Item counts of every stage file present in the output directory.
    pub fn stats(&self) -> BTreeMap<String, usize> {
        let mut names: Vec<String> = [
            files::CURATED,
            files::TASKS,
            files::MATRICES,
            files::VERIFIED,
            files::REJECTIONS,
            files::TRACES,
            files::FORGED,
            files::FILTERED,
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for mode in DatasetMode::ALL {
            for p in [self.dataset_path(mode), self.filtered_dataset_path(mode)] {
                names.push(p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
            }
        }
        names
            .into_iter()
            .filter_map(|n| {
                let text = fs::read_to_string(self.path(&n)).ok()?;
                Some((n, text.lines().filter(|l| !l.trim().is_empty()).count()))
            })
            .collect()
    }
}

fn entry(stage: Stage, subject: &str, detail: &str) -> LedgerEntry {
    LedgerEntry {
        stage: stage.as_str().into(),
        subject: subject.into(),
        detail: detail.into(),
    }
}

/// Digest over files in path order; each contributes its name and bytes.
pub fn digest_paths(paths: &[PathBuf]) -> String {
    let mut sorted: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    sorted.sort();
    crate::json::digest_files(&sorted)
}
