use num_rational::Ratio;

use super::*;
use crate::generation::reference_descriptor;
use crate::planner::fixtures::four_shot_plan;
use crate::planner::PhaseName;
use crate::state_machine::PedagogicalAction;
use crate::verifier::CannedJudge;

fn reference_run() -> (ShotPlan, Vec<ShotDescriptor>, Vec<PedagogicalState>) {
    let plan = four_shot_plan();
    let states = validate_plan(&plan).unwrap();
    let shots = plan
        .shots()
        .enumerate()
        .map(|(i, s)| reference_descriptor(s, &states[i]))
        .collect();
    (plan, shots, states)
}

#[test]
fn identical_descriptors_do_not_drift() {
    let (_, shots, states) = reference_run();
    let prev = shots[3].clone();
    let mut next = prev.clone();
    next.shot_id = 5;
    let s = drift_signal(&prev, &next, &states[4], MetricMode::Deterministic).unwrap();
    assert_eq!(s.severity, 0);
}

#[test]
fn severity_counts_failed_checks() {
    let (_, shots, states) = reference_run();
    let mut next = shots[2].clone();
    next.entities_shown.retain(|e| e != "force");
    let s = drift_signal(&shots[1], &next, &states[2], MetricMode::Deterministic).unwrap();
    assert_eq!(s.severity, 1);
    next.formulae_shown = vec!["F=a".into()];
    let s = drift_signal(&shots[1], &next, &states[2], MetricMode::Deterministic).unwrap();
    assert_eq!(s.severity, 2);
    next.action_realized = PedagogicalAction::summarize(["ghost"]);
    let s = drift_signal(&shots[1], &next, &states[2], MetricMode::Deterministic).unwrap();
    assert_eq!(s.severity, 3);
}

#[test]
fn non_consecutive_pair_rejected() {
    let (_, shots, states) = reference_run();
    assert!(matches!(
        drift_signal(&shots[0], &shots[2], &states[1], MetricMode::Deterministic),
        Err(MetricsError::NonConsecutiveShots { prev: 1, next: 3 })
    ));
}

#[test]
fn kdr_examples() {
    let (_, shots, states) = reference_run();
    assert_eq!(kdr(&shots[..3], &states, MetricMode::Deterministic).unwrap(), Ratio::new(0, 1));
    let mut drifted = shots[..3].to_vec();
    drifted[2].entities_shown.retain(|e| e != "force");
    assert_eq!(kdr(&drifted, &states, MetricMode::Deterministic).unwrap(), Ratio::new(1, 2));
    assert!(matches!(kdr(&shots[..1], &states, MetricMode::Deterministic), Err(MetricsError::TooFewShots(1))));
}

#[test]
fn pas_examples() {
    let (plan, shots, _) = reference_run();
    let perfect = pas(&shots, &plan, MetricMode::Deterministic, PasOptions::default()).unwrap();
    assert_eq!(perfect, MetricValue::Exact(Ratio::new(1, 1)));

    // wrong action that still satisfies its prerequisites and keeps the phase
    let mut off = shots.clone();
    off[3].action_realized = PedagogicalAction::summarize(["force"]);
    let v = pas(&off, &plan, MetricMode::Deterministic, PasOptions::default()).unwrap();
    assert_eq!(v, MetricValue::Exact(Ratio::new(11, 12)));
    assert!((v.to_f64() - 0.9167).abs() < 1e-4);

    assert!(matches!(
        pas(&shots[..3], &plan, MetricMode::Deterministic, PasOptions::default()),
        Err(MetricsError::PlanLengthMismatch { shots: 3, plan: 4 })
    ));
}

#[test]
fn pas_excluding_flagged() {
    let (plan, mut shots, _) = reference_run();
    shots[1].phase = PhaseName::Summary;
    let mask = [false, true, false, false];
    let v = pas(&shots, &plan, MetricMode::Deterministic, PasOptions { exclude: Some(&mask) }).unwrap();
    assert_eq!(v, MetricValue::Exact(Ratio::new(1, 1)));
    let all = [true; 4];
    assert!(matches!(
        pas(&shots, &plan, MetricMode::Deterministic, PasOptions { exclude: Some(&all) }),
        Err(MetricsError::NothingToScore)
    ));
}

#[test]
fn judge_mode_uses_judge_scores() {
    let (plan, shots, states) = reference_run();
    let mut judge = CannedJudge::clean();
    judge.alignment_reply = judge.alignment_reply.replace("1.0", "0.5");
    let v = pas(&shots, &plan, MetricMode::Judge(&judge), PasOptions::default()).unwrap();
    assert_eq!(v, MetricValue::Real(0.5));
    assert_eq!(kdr(&shots, &states, MetricMode::Judge(&judge)).unwrap(), Ratio::new(0, 1));
}

fn summary(kdr: f64, pas: f64) -> MetricsSummary {
    MetricsSummary {
        kdr,
        pas,
        shot_count: 4,
        flagged_shots: 0,
        clip_s: None,
    }
}

#[test]
fn report_reproduces_cells() {
    let report = emit_report(&[
        ConditionRuns { condition: "B0".into(), summaries: vec![summary(0.41, 0.52)] },
        ConditionRuns { condition: "EduStory (Full)".into(), summaries: vec![summary(0.14, 0.79)] },
    ])
    .unwrap();
    let text = report.to_text();
    assert_eq!(
        text,
        "Condition        KDR ↓  PAS ↑  CLIP-S ↑\n\
         ---------------  -----  -----  --------\n\
         B0               0.41   0.52   ---\n\
         EduStory (Full)  0.14   0.79   ---\n"
    );
    assert!(report.to_json().contains("\"better\": \"lower\""));
}

#[test]
fn report_means_and_empty_condition() {
    let mut with_clip = summary(0.2, 0.6);
    with_clip.clip_s = Some(0.3);
    let report = emit_report(&[ConditionRuns {
        condition: "B1".into(),
        summaries: vec![summary(0.4, 0.8), with_clip],
    }])
    .unwrap();
    assert!((report.rows[0].kdr - 0.3).abs() < 1e-12);
    assert!((report.rows[0].pas - 0.7).abs() < 1e-12);
    assert_eq!(report.rows[0].clip_s, Some(0.3));
    assert!(matches!(
        emit_report(&[ConditionRuns { condition: "X".into(), summaries: vec![] }]),
        Err(MetricsError::EmptyCondition(_))
    ));
}

#[test]
fn results_group_by_first_appearance() {
    let file = ResultsFile::new(vec![
        RunRecord { condition: "Full".into(), video: "a".into(), summary: summary(0.1, 0.9) },
        RunRecord { condition: "B0".into(), video: "a".into(), summary: summary(0.5, 0.5) },
        RunRecord { condition: "Full".into(), video: "b".into(), summary: summary(0.3, 0.7) },
    ]);
    let groups = file.by_condition();
    assert_eq!(groups.len(), 2);
    assert_eq!(groups[0].condition, "Full");
    assert_eq!(groups[0].summaries.len(), 2);
}
