//! Task I (script to video) and Task II (continuation from a prefix).

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::generation::{
    generate_from, generate_video, GeneratorBackend, RunOptions, ShotDescriptor, VideoRun,
};
use crate::metrics::{kdr, pas_against, ratio_to_f64, summarize, MetricMode, MetricsSummary, PasOptions};
use crate::planner::{validate_plan, PlannedShot, ShotPlan};
use crate::state_machine::{validate_trace, PedagogicalState};
use crate::verifier::{ShotVerifier, VerifierReport};

pub const TASK2_SCHEMA: &str = "edustory_task2_v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task1Outcome {
    pub run: VideoRun,
    pub summary: MetricsSummary,
}

pub fn run_task1(
    plan: &ShotPlan,
    backend: &dyn GeneratorBackend,
    verifier: &dyn ShotVerifier,
    options: &RunOptions,
    mode: MetricMode<'_>,
    exclude_flagged: bool,
) -> Result<Task1Outcome, BenchError> {
    let run = generate_video(plan, backend, verifier, options)?;
    let summary = summarize(&run, plan, mode, exclude_flagged)?;
    Ok(Task1Outcome { run, summary })
}

/// The first `k` shots of a video and the state after them.
#[derive(Debug, Clone, PartialEq)]
pub struct Task2Prefix {
    pub shots: Vec<ShotDescriptor>,
    pub state: PedagogicalState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task2Outcome {
    pub schema: String,
    pub k: usize,
    /// Prefix shots followed by generated shots.
    pub shots: Vec<ShotDescriptor>,
    pub states: Vec<PedagogicalState>,
    /// Reports for the generated shots only.
    pub reports: Vec<VerifierReport>,
    pub summary: MetricsSummary,
}

/// Continues generation from `S_k`. KDR covers the full sequence including
/// the seam pair; PAS covers the generated shots only.
pub fn run_task2(
    prefix: &Task2Prefix,
    plan: &ShotPlan,
    backend: &dyn GeneratorBackend,
    verifier: &dyn ShotVerifier,
    options: &RunOptions,
    mode: MetricMode<'_>,
    exclude_flagged: bool,
) -> Result<Task2Outcome, BenchError> {
    let planned: Vec<&PlannedShot> = plan.shots().collect();
    let total = planned.len();
    let k = prefix.shots.len();
    if k == 0 || k >= total {
        return Err(BenchError::InvalidPrefixLength { k, total });
    }
    plan.check_structure()?;
    let actions: Vec<_> = planned[..k].iter().map(|s| s.action.clone()).collect();
    let replayed = validate_trace(&plan.initial_state(), &actions)
        .map_err(|e| BenchError::InconsistentPrefix(format!("replaying the prefix failed at {e}")))?;
    if replayed[k] != prefix.state {
        return Err(BenchError::InconsistentPrefix(format!(
            "the supplied state does not match the state after replaying shots 1-{k}"
        )));
    }
    for (i, shot) in prefix.shots.iter().enumerate() {
        if shot.shot_id as usize != i + 1 {
            return Err(BenchError::InconsistentPrefix(format!(
                "prefix shot {} has id {}",
                i + 1,
                shot.shot_id
            )));
        }
    }
    let states = validate_plan(plan)?;

    let outcomes = generate_from(&planned[k..], &prefix.state, &plan.lesson, backend, verifier, options)?;
    let flagged: Vec<bool> = outcomes.iter().map(|o| o.flagged).collect();
    let (generated, reports): (Vec<_>, Vec<_>) = outcomes.into_iter().map(|o| (o.descriptor, o.report)).unzip();

    let mut shots = prefix.shots.clone();
    shots.extend(generated.iter().cloned());
    let drift = kdr(&shots, &states, mode)?;
    let alignment = pas_against(
        &generated,
        &planned[k..],
        &states[k..],
        total,
        mode,
        PasOptions {
            exclude: exclude_flagged.then_some(flagged.as_slice()),
        },
    )?;
    Ok(Task2Outcome {
        schema: TASK2_SCHEMA.to_string(),
        k,
        summary: MetricsSummary {
            kdr: ratio_to_f64(drift),
            pas: alignment.to_f64(),
            shot_count: shots.len(),
            flagged_shots: flagged.iter().filter(|f| **f).count(),
            clip_s: None,
        },
        shots,
        states,
        reports,
    })
}
