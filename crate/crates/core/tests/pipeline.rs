use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use cotforge::bank::Bank;
use cotforge::forge::ForgedRecord;
use cotforge::json::read_jsonl;
use cotforge::pipeline::{files, Pipeline, PipelineConfig, Stage, StageError};
use cotforge::trace::normalize_value;
use cotforge::{CoTRecord, DatasetMode, Direction, VerifiedPair};

fn pipeline(dir: &Path, seed: u64) -> Pipeline {
    Pipeline::new(PipelineConfig {
        output_dir: dir.to_path_buf(),
        seed,
        ..PipelineConfig::default()
    })
    .unwrap()
}

fn dataset_bytes(p: &Pipeline) -> Vec<Vec<u8>> {
    DatasetMode::ALL
        .iter()
        .flat_map(|&m| [p.dataset_path(m), p.filtered_dataset_path(m)])
        .map(|path| fs::read(path).unwrap())
        .collect()
}

#[test]
fn rerunning_stages_reproduces_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = pipeline(a.path(), 5);
    pa.run_all().unwrap();
    let first = dataset_bytes(&pa);
    let tasks = fs::read(pa.path(files::TASKS)).unwrap();
    pa.run_all().unwrap();
    assert_eq!(dataset_bytes(&pa), first);
    assert_eq!(fs::read(pa.path(files::TASKS)).unwrap(), tasks);

    let pb = pipeline(b.path(), 5);
    pb.run_all().unwrap();
    assert_eq!(dataset_bytes(&pb), first);
    assert_eq!(pa.manifest().unwrap().len(), 2 * Stage::END_TO_END.len());
}

#[test]
fn manifest_detects_edited_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(dir.path(), 1);
    for s in [Stage::Curate, Stage::Synthesize, Stage::Execute, Stage::Verify] {
        p.run(s).unwrap();
    }
    let outputs = [p.path(files::VERIFIED), p.path(files::REJECTIONS)];
    assert_eq!(p.verify_manifest(Stage::Verify, &outputs), Some(true));
    let mut text = fs::read_to_string(&outputs[0]).unwrap();
    text.push_str("{}\n");
    fs::write(&outputs[0], text).unwrap();
    assert_eq!(p.verify_manifest(Stage::Verify, &outputs), Some(false));
    assert_eq!(p.verify_manifest(Stage::Forge, &outputs), None);
    let entry = p.manifest().unwrap().into_iter().find(|e| e.stage == "execute").unwrap();
    assert_eq!(entry.config_digest, p.config.digest());
}

#[test]
fn missing_input_fails_with_ledger_and_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(dir.path(), 0);
    let err = p.run(Stage::Execute).unwrap_err();
    assert!(matches!(err, StageError::MissingInput { .. }), "{err}");
    let ledger = fs::read_to_string(p.ledger_path(Stage::Execute)).unwrap();
    assert!(ledger.contains("tasks.jsonl"));
    assert!(!p.path(files::MATRICES).exists());
    assert!(!p.path(files::MANIFEST).exists());
}

#[test]
fn datasets_respect_turn_rules() {
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(dir.path(), 9);
    p.run_all().unwrap();

    let forged: Vec<ForgedRecord> = read_jsonl(&p.path(files::FORGED)).unwrap();
    assert!(!forged.is_empty());
    for r in &forged {
        if let Some(f) = &r.forward {
            assert_eq!(normalize_value(&f.prediction), normalize_value(&r.io.output_expr), "{}", r.test_id);
        }
    }

    let mut per_task: BTreeMap<(String, &str), usize> = BTreeMap::new();
    for mode in DatasetMode::ALL {
        let records: Vec<CoTRecord> = read_jsonl(&p.dataset_path(mode)).unwrap();
        for r in &records {
            assert!(r.is_well_formed());
            if mode == DatasetMode::Bidirectional {
                let dirs: Vec<Direction> = r.turns.iter().map(|t| t.direction).collect();
                assert_eq!(dirs, [Direction::Forward, Direction::Backward]);
            }
            *per_task.entry((r.task_id.clone(), mode.as_str())).or_default() += 1;
        }
    }
    let tasks: BTreeSet<&String> = per_task.keys().map(|(t, _)| t).collect();
    for t in tasks {
        let n = |m: DatasetMode| per_task.get(&(t.clone(), DatasetMode::as_str(m))).copied().unwrap_or(0);
        assert!(n(DatasetMode::Bidirectional) <= n(DatasetMode::Forward).min(n(DatasetMode::Backward)));
    }
}

#[test]
fn answerability_filter_drops_trivial_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(dir.path(), 2);
    p.run_all().unwrap();
    let verified: Vec<VerifiedPair> = read_jsonl(&p.path(files::VERIFIED)).unwrap();
    let kept: BTreeSet<String> = read_jsonl::<VerifiedPair>(&p.path(files::FILTERED))
        .unwrap()
        .into_iter()
        .map(|v| v.task_id)
        .collect();
    let mut trivial = 0;
    for v in &verified {
        let (problem, _) = Bank::get().identify(&v.canonical_solution.source).unwrap();
        if problem.trivial || problem.rating == "easy" {
            trivial += 1;
            assert!(!kept.contains(&v.task_id), "{} ({})", v.task_id, problem.key);
        }
    }
    assert!(trivial > 0 && !kept.is_empty());
    let filtered: Vec<CoTRecord> = read_jsonl(&p.filtered_dataset_path(DatasetMode::Forward)).unwrap();
    assert!(filtered.iter().all(|r| kept.contains(&r.task_id)));
}

#[test]
fn consensus_sim_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(dir.path(), 3);
    let report = p.run(Stage::ConsensusSim).unwrap();
    let csv = fs::read_to_string(p.path(files::GRID)).unwrap();
    assert_eq!(csv.lines().count(), 1 + report.counts["cells"]);
}

#[test]
fn partial_config_tables_keep_defaults() {
    let c = PipelineConfig::from_toml(
        "[limits]\nwall_timeout_s = 3.0\n[grid]\nproblems_per_cell = 10\n[grid.sim_params]\nbug_classes = 2\n[synthesis.difficulty_mix]\nmedium = 0.8\n",
    )
    .unwrap();
    let d = PipelineConfig::default();
    assert_eq!(c.limits.wall_timeout_s, 3.0);
    assert_eq!(c.limits.memory_mb, d.limits.memory_mb);
    assert_eq!((c.grid.problems_per_cell, c.grid.sim_params.bug_classes), (10, 2));
    assert_eq!(c.grid.sim_params.q_test_valid, d.grid.sim_params.q_test_valid);
    assert_eq!(c.synthesis.difficulty_mix.hard, d.synthesis.difficulty_mix.hard);
    assert!(c.validate().is_err(), "mix no longer sums to one");
}
