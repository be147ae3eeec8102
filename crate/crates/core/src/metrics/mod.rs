//! Knowledge drift rate and pedagogical alignment score.
//!
//! Deterministic mode computes both from descriptors and states and keeps
//! the result as an exact rational. Judge mode asks a VLM judge and yields
//! a real number.

mod report;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::backend::JudgeBackend;
use crate::formula::{formulae_identical, Formula};
use crate::generation::{ShotDescriptor, VideoRun};
use crate::planner::{validate_plan, PlanError, ShotPlan};
use crate::state_machine::PedagogicalState;
use crate::verifier::{vlm_alignment_check, vlm_drift_check, JudgeError, JudgeInput};

pub use report::{
    emit_report, ConditionRuns, Report, ReportRow, ResultsFile, RunRecord, RESULTS_SCHEMA,
};

#[derive(Clone, Copy)]
pub enum MetricMode<'a> {
    Deterministic,
    Judge(&'a dyn JudgeBackend),
}

impl std::fmt::Debug for MetricMode<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricMode::Deterministic => f.write_str("Deterministic"),
            MetricMode::Judge(_) => f.write_str("Judge"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalSource {
    Deterministic,
    Judge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriftSignal {
    /// Shot id of the earlier shot of the pair.
    pub pair_index: u32,
    pub severity: u8,
    pub source: SignalSource,
}

impl DriftSignal {
    pub fn drifts(&self) -> bool {
        self.severity > 0
    }
}

/// A metric value: exact in deterministic mode, real in judge mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricValue {
    Exact(Ratio<u64>),
    Real(f64),
}

impl MetricValue {
    pub fn to_f64(self) -> f64 {
        match self {
            MetricValue::Exact(r) => ratio_to_f64(r),
            MetricValue::Real(x) => x,
        }
    }

    pub fn exact(self) -> Option<Ratio<u64>> {
        match self {
            MetricValue::Exact(r) => Some(r),
            MetricValue::Real(_) => None,
        }
    }
}

pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("need at least 2 shots for a drift rate, got {0}")]
    TooFewShots(usize),
    #[error("shots {prev} and {next} are not consecutive")]
    NonConsecutiveShots { prev: u32, next: u32 },
    #[error("{shots} shots but the plan has {plan}")]
    PlanLengthMismatch { shots: usize, plan: usize },
    #[error("{states} states for {shots} shots; need at least one state per shot")]
    StateCountMismatch { shots: usize, states: usize },
    #[error("no shots left to score")]
    NothingToScore,
    #[error("condition `{0}` has no runs")]
    EmptyCondition(String),
    #[error("plan invalid: {0}")]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
}

/// Registered formulas of `state` plus the one `next` introduces.
fn allowed_formulas<'a>(state: &'a PedagogicalState, next: &'a ShotDescriptor) -> Vec<(&'a str, &'a Formula)> {
    state
        .entities()
        .chain(next.action_realized.added_entity())
        .filter_map(|e| e.formula.as_ref().map(|f| (e.id.as_str(), f)))
        .collect()
}

/// Entity-level check: everything `prev` showed that is still established
/// must be shown again.
pub fn entities_preserved(prev: &ShotDescriptor, next: &ShotDescriptor, state: &PedagogicalState) -> bool {
    prev.entities_shown
        .iter()
        .filter(|id| state.contains_entity(id))
        .all(|id| next.shows(id))
}

/// Formula-level check: every formula `next` shows is symbol-identical to
/// a registered one, and every registered formula entity it lists is shown
/// in its registered form.
pub fn formulas_preserved(next: &ShotDescriptor, state: &PedagogicalState) -> bool {
    let allowed = allowed_formulas(state, next);
    let mut shown = Vec::with_capacity(next.formulae_shown.len());
    for text in &next.formulae_shown {
        match Formula::parse(text) {
            Ok(f) => shown.push(f),
            Err(_) => return false,
        }
    }
    shown
        .iter()
        .all(|s| allowed.iter().any(|(_, f)| formulae_identical(s, f)))
        && allowed
            .iter()
            .filter(|(id, _)| next.shows(id))
            .all(|(_, f)| shown.iter().any(|s| formulae_identical(s, f)))
}

/// drift(v_t, v_{t+1}, S) for consecutive shots; `state` is the state
/// after `prev`.
pub fn drift_signal(
    prev: &ShotDescriptor,
    next: &ShotDescriptor,
    state: &PedagogicalState,
    mode: MetricMode<'_>,
) -> Result<DriftSignal, MetricsError> {
    if next.shot_id != prev.shot_id.wrapping_add(1) {
        return Err(MetricsError::NonConsecutiveShots {
            prev: prev.shot_id,
            next: next.shot_id,
        });
    }
    match mode {
        MetricMode::Deterministic => {
            let failed = [
                !entities_preserved(prev, next, state),
                !formulas_preserved(next, state),
                !state.prerequisites_hold(&next.action_realized),
            ];
            Ok(DriftSignal {
                pair_index: prev.shot_id,
                severity: failed.iter().filter(|f| **f).count().min(3) as u8,
                source: SignalSource::Deterministic,
            })
        }
        MetricMode::Judge(client) => {
            let input = match &next.media_ref {
                Some(handle) => JudgeInput::Frame(handle),
                None => JudgeInput::Descriptor(next),
            };
            let report = vlm_drift_check(state, input, client)?;
            Ok(DriftSignal {
                pair_index: prev.shot_id,
                severity: report.drift_severity,
                source: SignalSource::Judge,
            })
        }
    }
}

/// Drift signal for every consecutive pair. `states[i]` is the state
/// before shot `i`, so pair `i` is judged against `states[i + 1]`.
pub fn drift_signals(
    shots: &[ShotDescriptor],
    states: &[PedagogicalState],
    mode: MetricMode<'_>,
) -> Result<Vec<DriftSignal>, MetricsError> {
    if shots.len() < 2 {
        return Err(MetricsError::TooFewShots(shots.len()));
    }
    if states.len() < shots.len() {
        return Err(MetricsError::StateCountMismatch {
            shots: shots.len(),
            states: states.len(),
        });
    }
    shots
        .windows(2)
        .enumerate()
        .map(|(i, pair)| drift_signal(&pair[0], &pair[1], &states[i + 1], mode))
        .collect()
}

/// Fraction of consecutive pairs that drift.
pub fn kdr(
    shots: &[ShotDescriptor],
    states: &[PedagogicalState],
    mode: MetricMode<'_>,
) -> Result<Ratio<u64>, MetricsError> {
    let signals = drift_signals(shots, states, mode)?;
    let drifting = signals.iter().filter(|s| s.drifts()).count() as u64;
    Ok(Ratio::new(drifting, signals.len() as u64))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PasOptions<'a> {
    /// Per-shot flags; flagged shots are left out of the mean when given.
    pub exclude: Option<&'a [bool]>,
}

/// Mean per-shot alignment with the plan.
pub fn pas(
    shots: &[ShotDescriptor],
    plan: &ShotPlan,
    mode: MetricMode<'_>,
    options: PasOptions<'_>,
) -> Result<MetricValue, MetricsError> {
    let planned: Vec<_> = plan.shots().collect();
    if shots.len() != planned.len() {
        return Err(MetricsError::PlanLengthMismatch {
            shots: shots.len(),
            plan: planned.len(),
        });
    }
    let states = validate_plan(plan)?;
    pas_against(shots, &planned, &states, planned.len(), mode, options)
}

/// PAS over `shots` aligned with `planned` (same length), where `states[i]`
/// is the planned state before `planned[i]` and `total` is the full plan
/// length.
pub fn pas_against(
    shots: &[ShotDescriptor],
    planned: &[&crate::planner::PlannedShot],
    states: &[PedagogicalState],
    total: usize,
    mode: MetricMode<'_>,
    options: PasOptions<'_>,
) -> Result<MetricValue, MetricsError> {
    if shots.len() != planned.len() {
        return Err(MetricsError::PlanLengthMismatch {
            shots: shots.len(),
            plan: planned.len(),
        });
    }
    if states.len() < shots.len() {
        return Err(MetricsError::StateCountMismatch {
            shots: shots.len(),
            states: states.len(),
        });
    }
    let keep = |i: usize| options.exclude.is_none_or(|mask| !mask.get(i).copied().unwrap_or(false));
    let indices: Vec<usize> = (0..shots.len()).filter(|i| keep(*i)).collect();
    if indices.is_empty() {
        return Err(MetricsError::NothingToScore);
    }
    match mode {
        MetricMode::Deterministic => {
            let thirds: u64 = indices
                .iter()
                .map(|&i| {
                    let (shot, plan) = (&shots[i], planned[i]);
                    u64::from(shot.action_realized == plan.action)
                        + u64::from(shot.phase == plan.phase)
                        + u64::from(states[i].prerequisites_hold(&shot.action_realized))
                })
                .sum();
            Ok(MetricValue::Exact(Ratio::new(thirds, 3 * indices.len() as u64)))
        }
        MetricMode::Judge(client) => {
            let mut total_score = 0.0;
            for &i in &indices {
                let input = match &shots[i].media_ref {
                    Some(handle) => JudgeInput::Frame(handle),
                    None => JudgeInput::Descriptor(&shots[i]),
                };
                total_score += vlm_alignment_check(planned[i], total, input, client)?.alignment_score;
            }
            Ok(MetricValue::Real(total_score / indices.len() as f64))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSummary {
    pub kdr: f64,
    pub pas: f64,
    pub shot_count: usize,
    pub flagged_shots: usize,
    /// Supplied from outside; never computed here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_s: Option<f64>,
}

/// KDR and PAS for a complete run of `plan`.
pub fn summarize(
    run: &VideoRun,
    plan: &ShotPlan,
    mode: MetricMode<'_>,
    exclude_flagged: bool,
) -> Result<MetricsSummary, MetricsError> {
    let mask = run.flagged_mask();
    let kdr = kdr(&run.shots, &run.states, mode)?;
    let pas = pas(
        &run.shots,
        plan,
        mode,
        PasOptions {
            exclude: exclude_flagged.then_some(mask.as_slice()),
        },
    )?;
    Ok(MetricsSummary {
        kdr: ratio_to_f64(kdr),
        pas: pas.to_f64(),
        shot_count: run.shots.len(),
        flagged_shots: run.flagged_shots(),
        clip_s: None,
    })
}

#[cfg(test)]
mod tests;
