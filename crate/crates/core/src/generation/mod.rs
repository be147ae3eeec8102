//! State-conditioned shot generation with a verify-and-regenerate loop.
//!
//! The engine works on [`ShotDescriptor`]s: structured records of what a
//! generated shot shows. Real backends can attach an opaque `media_ref`
//! pointing at rendered video. State advancement is always driven by the
//! plan's action; the descriptor is only what gets verified.

mod http;
mod mock;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::BackendError;
use crate::planner::{validate_plan, PhaseName, PlanError, PlannedShot, ShotPlan};
use crate::state_machine::{KnowledgeEntity, PedagogicalAction, PedagogicalState, Relation};
use crate::verifier::{ShotVerifier, VerifierReport, VerifyError};

pub use http::HttpGenerator;
pub use mock::{mutate_formula, InjectedFault, MockGenerator, MockGeneratorConfig};

pub const SHOT_SCHEMA: &str = "edustory_shot_v1";
pub const RUN_SCHEMA: &str = "edustory_run_v1";
pub const DEFAULT_K_MAX: u32 = 3;

fn shot_schema() -> String {
    SHOT_SCHEMA.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotDescriptor {
    #[serde(default = "shot_schema")]
    pub schema: String,
    pub shot_id: u32,
    pub phase: PhaseName,
    pub entities_shown: Vec<String>,
    pub formulae_shown: Vec<String>,
    /// Sign conventions displayed for quantity entities, keyed by entity id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub conventions_shown: BTreeMap<String, String>,
    pub action_realized: PedagogicalAction,
    pub narration: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_ref: Option<String>,
    pub attempt: u32,
}

impl ShotDescriptor {
    pub fn shows(&self, entity_id: &str) -> bool {
        self.entities_shown.iter().any(|e| e == entity_id)
    }
}

/// Which conditioning channels reach the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conditioning {
    /// Per-shot descriptions from the plan; otherwise the whole lesson text.
    pub planner: bool,
    /// Accumulated entities and relations of the current state.
    pub state: bool,
}

impl Conditioning {
    pub const FULL: Conditioning = Conditioning {
        planner: true,
        state: true,
    };
}

impl Default for Conditioning {
    fn default() -> Self {
        Self::FULL
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationPrompt {
    pub shot_id: u32,
    pub phase: PhaseName,
    pub planned_action: PedagogicalAction,
    /// Entities the shot is meant to show, resolved against the post-shot state.
    pub expected_entities: Vec<KnowledgeEntity>,
    pub base_description: String,
    pub state_entities: Vec<KnowledgeEntity>,
    pub active_relations: Vec<Relation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation_feedback: Option<Vec<String>>,
    pub conditioning: Conditioning,
}

impl GenerationPrompt {
    /// Text form for generators that take a single prompt string.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Shot {} ({}): {}\n",
            self.shot_id, self.phase, self.base_description
        ));
        if !self.state_entities.is_empty() {
            out.push_str("Established entities:\n");
            for e in &self.state_entities {
                match &e.formula {
                    Some(f) => out.push_str(&format!("- {} [{:?}]: {}\n", e.id, e.kind, f)),
                    None => out.push_str(&format!("- {} [{:?}]: {}\n", e.id, e.kind, e.label)),
                }
            }
        }
        if !self.active_relations.is_empty() {
            out.push_str("Active relations:\n");
            for r in &self.active_relations {
                out.push_str(&format!("- {r}\n"));
            }
        }
        if let Some(feedback) = &self.violation_feedback {
            out.push_str("Fix these violations from the previous attempt:\n");
            for v in feedback {
                out.push_str(&format!("- {v}\n"));
            }
        }
        out
    }
}

/// P_θ: samples one shot for a prompt. The mock is deterministic in
/// `(prompt, seed)`; remote backends need not be.
pub trait GeneratorBackend: Send + Sync {
    fn generate(&self, prompt: &GenerationPrompt, seed: u64) -> Result<ShotDescriptor, BackendError>;
}

/// Builds the fully conditioned prompt for `shot` at `state`.
pub fn build_prompt(
    shot: &PlannedShot,
    state: &PedagogicalState,
    violations: Option<&[String]>,
) -> GenerationPrompt {
    build_prompt_with(shot, state, violations, Conditioning::FULL, "")
}

pub fn build_prompt_with(
    shot: &PlannedShot,
    state: &PedagogicalState,
    violations: Option<&[String]>,
    conditioning: Conditioning,
    lesson: &str,
) -> GenerationPrompt {
    let post = state.apply_action(&shot.action).ok();
    let expected_entities = shot
        .expected_entities
        .iter()
        .filter_map(|id| post.as_ref().and_then(|s| s.lookup(id)).or_else(|| state.lookup(id)))
        .cloned()
        .collect();

    let (state_entities, active_relations) = if conditioning.state {
        (
            state.entities().cloned().collect(),
            state
                .relations()
                .iter()
                .filter(|r| shot.expected_entities.iter().any(|id| r.touches(id)))
                .cloned()
                .collect(),
        )
    } else {
        (Vec::new(), Vec::new())
    };

    GenerationPrompt {
        shot_id: shot.shot_id,
        phase: shot.phase,
        planned_action: shot.action.clone(),
        expected_entities,
        base_description: if conditioning.planner {
            shot.description.clone()
        } else {
            lesson.to_string()
        },
        state_entities,
        active_relations,
        violation_feedback: violations.map(<[String]>::to_vec),
        conditioning,
    }
}

/// Knobs for one video run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub k_max: u32,
    pub base_seed: u64,
    pub conditioning: Conditioning,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            k_max: DEFAULT_K_MAX,
            base_seed: 0,
            conditioning: Conditioning::FULL,
        }
    }
}

/// Seed for attempt `attempt` (1-based) of shot `shot_id`.
pub fn attempt_seed(base_seed: u64, shot_id: u32, attempt: u32) -> u64 {
    base_seed
        .wrapping_add(u64::from(shot_id).wrapping_mul(1000))
        .wrapping_add(u64::from(attempt))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotOutcome {
    pub descriptor: ShotDescriptor,
    pub report: VerifierReport,
    /// Verification still failed after all retries.
    pub flagged: bool,
    pub backend_calls: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum GenerationError {
    #[error("plan invalid: {0}")]
    PlanInvalid(#[from] PlanError),
    #[error("generator backend failed: {0}")]
    Backend(#[from] BackendError),
    #[error("verification failed: {0}")]
    Verify(#[from] VerifyError),
}

/// Generates one shot, regenerating with violation feedback while the
/// verifier rejects it, for at most `k_max + 1` attempts. After exhaustion
/// the last candidate is returned flagged. Backend errors are returned
/// immediately and never retried.
pub fn generate_shot_with_retry(
    shot: &PlannedShot,
    state: &PedagogicalState,
    lesson: &str,
    backend: &dyn GeneratorBackend,
    verifier: &dyn ShotVerifier,
    options: &RunOptions,
) -> Result<ShotOutcome, GenerationError> {
    let constraints: Vec<_> = state
        .constraints()
        .iter()
        .filter(|c| shot.constraint_ids.contains(&c.id))
        .cloned()
        .collect();
    let mut feedback: Option<Vec<String>> = None;
    let mut attempt = 1u32;
    loop {
        let prompt = build_prompt_with(shot, state, feedback.as_deref(), options.conditioning, lesson);
        let seed = attempt_seed(options.base_seed, shot.shot_id, attempt);
        let mut descriptor = backend.generate(&prompt, seed)?;
        descriptor.attempt = attempt;
        let report = verifier.verify(&descriptor, shot, &constraints, state)?;
        if report.verdict || attempt > options.k_max {
            return Ok(ShotOutcome {
                flagged: !report.verdict,
                descriptor,
                report,
                backend_calls: attempt,
            });
        }
        feedback = Some(report.violations());
        attempt += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoRun {
    pub schema: String,
    pub lesson: String,
    pub shots: Vec<ShotDescriptor>,
    pub states: Vec<PedagogicalState>,
    pub reports: Vec<VerifierReport>,
    pub backend_calls: u64,
}

impl VideoRun {
    pub fn flagged_shots(&self) -> usize {
        self.reports.iter().filter(|r| !r.verdict).count()
    }

    pub fn flagged_mask(&self) -> Vec<bool> {
        self.reports.iter().map(|r| !r.verdict).collect()
    }
}

/// Generates every shot of `plan` in order, advancing the state with the
/// plan's own actions.
pub fn generate_video(
    plan: &ShotPlan,
    backend: &dyn GeneratorBackend,
    verifier: &dyn ShotVerifier,
    options: &RunOptions,
) -> Result<VideoRun, GenerationError> {
    let states = validate_plan(plan)?;
    let shots: Vec<&PlannedShot> = plan.shots().collect();
    let outcomes = generate_from(&shots, &states[0], &plan.lesson, backend, verifier, options)?;
    Ok(assemble_run(plan, states, outcomes))
}

/// Continues generation from `start` (the state before `shots[0]`).
/// Returns one outcome per shot.
pub fn generate_from(
    shots: &[&PlannedShot],
    start: &PedagogicalState,
    lesson: &str,
    backend: &dyn GeneratorBackend,
    verifier: &dyn ShotVerifier,
    options: &RunOptions,
) -> Result<Vec<ShotOutcome>, GenerationError> {
    let mut state = start.clone();
    let mut outcomes = Vec::with_capacity(shots.len());
    for shot in shots {
        outcomes.push(generate_shot_with_retry(shot, &state, lesson, backend, verifier, options)?);
        state = state.apply_action(&shot.action).map_err(|source| PlanError::Precondition {
            shot_id: shot.shot_id,
            source,
        })?;
    }
    Ok(outcomes)
}

pub(crate) fn assemble_run(
    plan: &ShotPlan,
    states: Vec<PedagogicalState>,
    outcomes: Vec<ShotOutcome>,
) -> VideoRun {
    let backend_calls = outcomes.iter().map(|o| u64::from(o.backend_calls)).sum();
    let (shots, reports) = outcomes.into_iter().map(|o| (o.descriptor, o.report)).unzip();
    VideoRun {
        schema: RUN_SCHEMA.to_string(),
        lesson: plan.lesson.clone(),
        shots,
        states,
        reports,
        backend_calls,
    }
}

/// The descriptor a perfect generator would produce for `shot` at `state`.
pub fn reference_descriptor(shot: &PlannedShot, state: &PedagogicalState) -> ShotDescriptor {
    mock::clean_descriptor(&build_prompt(shot, state, None))
}
