use num_rational::Ratio;

use super::*;
use crate::generation::{reference_descriptor, MockGenerator, MockGeneratorConfig, RunOptions};
use crate::metrics::{kdr, MetricMode};
use crate::planner::fixtures::four_shot_plan;
use crate::planner::validate_plan;
use crate::verifier::ConstraintVerifier;

fn config(n: usize, drop: f64, mutate: f64) -> SynthConfig {
    SynthConfig {
        n_clips: n,
        shots_per_clip: 5,
        drift_rates: DriftRates {
            entity_drop: drop,
            formula_mutation: mutate,
        },
        rng_seed: 17,
    }
}

#[test]
fn clean_corpus_has_zero_ground_truth() {
    for clip in synth_clips(&config(10, 0.0, 0.0)).unwrap() {
        assert_eq!(ground_truth_kdr(&clip).unwrap(), Ratio::new(0, 1));
        assert!(validate_clip(&clip).is_empty(), "{:?}", validate_clip(&clip));
    }
}

#[test]
fn base_clip_shape() {
    let clips = synth_clips(&SynthConfig { shots_per_clip: 6, ..config(1, 0.0, 0.0) }).unwrap();
    let tags: Vec<String> = clips[0].level2.iter().map(|s| s.action_tag.tag().to_string()).collect();
    assert_eq!(tags, ["Introduce", "Derive", "Apply", "Derive", "Apply", "Summarize"]);
    let three = synth_clips(&SynthConfig { shots_per_clip: 3, ..config(1, 0.0, 0.0) }).unwrap();
    assert_eq!(three[0].level2.len(), 3);
}

#[test]
fn reconstruction_matches_ground_truth_with_both_classes() {
    for clip in synth_clips(&config(200, 0.4, 0.4)).unwrap() {
        assert!(validate_clip(&clip).iter().all(|i| i.severity == Severity::Warning));
        let (shots, states) = reconstruct(&clip).unwrap();
        assert_eq!(kdr(&shots, &states, MetricMode::Deterministic).unwrap(), ground_truth_kdr(&clip).unwrap());
    }
}

#[test]
fn corpus_files_roundtrip_and_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config(5, 0.3, 0.3);
    let ma = synth_corpus(&cfg, a.path()).unwrap();
    let mb = synth_corpus(&cfg, b.path()).unwrap();
    assert_eq!(std::fs::read(&ma).unwrap(), std::fs::read(&mb).unwrap());
    let clip = a.path().join("clips/synth_00003.json");
    assert_eq!(std::fs::read(&clip).unwrap(), std::fs::read(b.path().join("clips/synth_00003.json")).unwrap());
    let data = load_dataset(&ma).unwrap();
    assert_eq!(data.clips.len(), 5);
    assert!(data.warnings.is_empty());
}

#[test]
fn loader_errors_and_warnings() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_dataset(&dir.path().join("missing.json")),
        Err(BenchError::ManifestNotFound(_))
    ));

    let mut clips = synth_clips(&config(2, 0.0, 0.0)).unwrap();
    clips[1].duration_s = 25.0;
    let write = |clips: &[ClipRecord]| {
        let mut names = Vec::new();
        for c in clips {
            let name = format!("{}.json", c.clip_id);
            std::fs::write(dir.path().join(&name), serde_json::to_string(c).unwrap()).unwrap();
            names.push(name);
        }
        let manifest = Manifest { schema: DATASET_SCHEMA.into(), clips: names };
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, serde_json::to_string(&manifest).unwrap()).unwrap();
        path
    };
    let data = load_dataset(&write(&clips)).unwrap();
    assert_eq!(data.clips.len(), 2);
    assert_eq!(data.warnings.len(), 1);
    assert_eq!(data.warnings[0].path, "duration_s");

    clips[0].level3.pop();
    match load_dataset(&write(&clips)) {
        Err(BenchError::SchemaViolation { clip_id, path, .. }) => {
            assert_eq!(clip_id, "synth_00000");
            assert_eq!(path, "level3");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bad_formula_is_a_schema_violation() {
    let mut clip = synth_clips(&config(1, 0.0, 0.0)).unwrap().remove(0);
    clip.level2[2].formulae[0] = "y1 = = x".into();
    let issues = validate_clip(&clip);
    assert!(issues.iter().any(|i| i.severity == Severity::Error && i.path == "level2[2].formulae[0]"));
}

#[test]
fn ground_truth_single_formula_failure() {
    let mut clip = synth_clips(&SynthConfig { shots_per_clip: 3, ..config(1, 0.0, 0.0) }).unwrap().remove(0);
    clip.level3[1].formula_symbol_matching = false;
    assert_eq!(ground_truth_kdr(&clip).unwrap(), Ratio::new(1, 2));
}

#[test]
fn default_phase_mapping_is_total() {
    assert!(PhaseMapping::default().is_total());
}

#[test]
fn invalid_synth_config() {
    assert!(matches!(
        synth_clips(&SynthConfig { shots_per_clip: 2, ..config(1, 0.0, 0.0) }),
        Err(BenchError::InvalidConfig(_))
    ));
}

fn verifier() -> ConstraintVerifier {
    ConstraintVerifier::new()
}

#[test]
fn task1_clean_and_full_drift() {
    let plan = four_shot_plan();
    let clean = MockGenerator::new(MockGeneratorConfig::clean(3));
    let out = run_task1(&plan, &clean, &verifier(), &RunOptions::default(), MetricMode::Deterministic, false).unwrap();
    assert_eq!((out.summary.kdr, out.summary.pas), (0.0, 1.0));

    let drift = MockGenerator::new(MockGeneratorConfig::uniform(1.0, 3));
    let options = RunOptions { k_max: 0, ..RunOptions::default() };
    let out = run_task1(&plan, &drift, &verifier(), &options, MetricMode::Deterministic, false).unwrap();
    assert_eq!(out.summary.kdr, 1.0);
    assert_eq!(out.summary.flagged_shots, 4);
}

fn prefix(k: usize) -> Task2Prefix {
    let plan = four_shot_plan();
    let states = validate_plan(&plan).unwrap();
    Task2Prefix {
        shots: plan.shots().take(k).enumerate().map(|(i, s)| reference_descriptor(s, &states[i])).collect(),
        state: states[k].clone(),
    }
}

#[test]
fn task2_continuations() {
    let plan = four_shot_plan();
    let clean = MockGenerator::new(MockGeneratorConfig::clean(3));
    let run = |p: &Task2Prefix| run_task2(p, &plan, &clean, &verifier(), &RunOptions::default(), MetricMode::Deterministic, false);

    let last = run(&prefix(3)).unwrap();
    assert_eq!(last.shots.len(), 4);
    assert_eq!(last.reports.len(), 1);
    assert_eq!(last.summary.kdr, 0.0);

    let mid = run(&prefix(2)).unwrap();
    assert_eq!(mid.reports.len(), 2);
    assert_eq!((mid.summary.kdr, mid.summary.pas), (0.0, 1.0));

    let mut inconsistent = prefix(2);
    inconsistent.state = prefix(1).state;
    assert!(matches!(run(&inconsistent), Err(BenchError::InconsistentPrefix(_))));

    let mut whole = prefix(3);
    whole.shots.push(whole.shots[2].clone());
    assert!(matches!(run(&whole), Err(BenchError::InvalidPrefixLength { k: 4, total: 4 })));
}

#[test]
fn task2_prefix_that_fails_replay() {
    let mut plan = four_shot_plan();
    let clean = MockGenerator::new(MockGeneratorConfig::clean(3));
    let p = prefix(2);
    plan.phases[1].shots[0].action = crate::state_machine::PedagogicalAction::summarize(["ghost"]);
    assert!(matches!(
        run_task2(&p, &plan, &clean, &verifier(), &RunOptions::default(), MetricMode::Deterministic, false),
        Err(BenchError::InconsistentPrefix(_))
    ));
}
