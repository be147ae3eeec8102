//! Two-level shot plans: four canonical phases, each holding shot-level
//! actions with expected entities and constraint ids.
//!
//! [`validate_plan`] simulates the plan against the state machine from the
//! empty state. [`template_plan`] builds plans deterministically from a
//! structured lesson spec. [`llm_plan`] asks a backend for plan JSON.

mod llm;
mod template;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::state_machine::{
    validate_trace, Constraint, PedagogicalAction, PedagogicalState, StateError,
};

pub use llm::{llm_plan, render_planner_prompt, LlmPlan, PlannerError, MAX_PLAN_ATTEMPTS, PLANNER_PROMPT_TEMPLATE};
pub use template::{template_plan, ExampleSpec, FormulaSpec, LessonSpec};

pub const PLAN_SCHEMA: &str = "edustory_plan_v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseName {
    Introduction,
    Explanation,
    Application,
    Summary,
}

impl PhaseName {
    /// Canonical order; K = 4.
    pub const ALL: [PhaseName; 4] = [
        PhaseName::Introduction,
        PhaseName::Explanation,
        PhaseName::Application,
        PhaseName::Summary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseName::Introduction => "Introduction",
            PhaseName::Explanation => "Explanation",
            PhaseName::Application => "Application",
            PhaseName::Summary => "Summary",
        }
    }
}

impl fmt::Display for PhaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannedShot {
    pub shot_id: u32,
    pub phase: PhaseName,
    pub action: PedagogicalAction,
    pub expected_entities: Vec<String>,
    pub constraint_ids: Vec<String>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanPhase {
    pub name: PhaseName,
    pub shots: Vec<PlannedShot>,
}

fn plan_schema() -> String {
    PLAN_SCHEMA.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotPlan {
    #[serde(default = "plan_schema")]
    pub schema: String,
    pub lesson: String,
    pub phases: Vec<PlanPhase>,
    pub constraints: Vec<Constraint>,
}

impl ShotPlan {
    pub fn shots(&self) -> impl Iterator<Item = &PlannedShot> {
        self.phases.iter().flat_map(|p| p.shots.iter())
    }

    pub fn total_shots(&self) -> usize {
        self.phases.iter().map(|p| p.shots.len()).sum()
    }

    /// N_k per phase, in plan order.
    pub fn shot_counts(&self) -> Vec<usize> {
        self.phases.iter().map(|p| p.shots.len()).collect()
    }

    pub fn actions(&self) -> Vec<PedagogicalAction> {
        self.shots().map(|s| s.action.clone()).collect()
    }

    pub fn shot(&self, shot_id: u32) -> Option<&PlannedShot> {
        self.shots().find(|s| s.shot_id == shot_id)
    }

    pub fn initial_state(&self) -> PedagogicalState {
        PedagogicalState::new(self.constraints.clone())
    }

    /// Resolves a shot's constraint ids against the plan's constraint set,
    /// keeping the plan's order.
    pub fn constraints_for(&self, shot: &PlannedShot) -> Vec<Constraint> {
        self.constraints
            .iter()
            .filter(|c| shot.constraint_ids.iter().any(|id| id == &c.id))
            .cloned()
            .collect()
    }

    /// Phase order, non-empty phases, consecutive shot ids, resolvable
    /// constraint ids.
    pub fn check_structure(&self) -> Result<(), PlanError> {
        if self.schema != PLAN_SCHEMA {
            return Err(PlanError::Malformed(format!(
                "unsupported schema `{}` (expected `{PLAN_SCHEMA}`)",
                self.schema
            )));
        }
        let names: Vec<PhaseName> = self.phases.iter().map(|p| p.name).collect();
        if names != PhaseName::ALL {
            return Err(PlanError::Malformed(format!(
                "phases must be exactly [Introduction, Explanation, Application, Summary] in order, got {names:?}"
            )));
        }
        if let Some(empty) = self.phases.iter().find(|p| p.shots.is_empty()) {
            return Err(PlanError::EmptyPhase(empty.name));
        }

        let mut constraint_ids = BTreeSet::new();
        for c in &self.constraints {
            if !constraint_ids.insert(c.id.as_str()) {
                return Err(PlanError::Malformed(format!("duplicate constraint id `{}`", c.id)));
            }
        }

        let mut expected_id = 1u32;
        for phase in &self.phases {
            for shot in &phase.shots {
                if shot.shot_id != expected_id {
                    return Err(PlanError::Malformed(format!(
                        "shot ids must be consecutive from 1: expected {expected_id}, found {}",
                        shot.shot_id
                    )));
                }
                if shot.phase != phase.name {
                    return Err(PlanError::Malformed(format!(
                        "shot {} is tagged {} but sits in phase {}",
                        shot.shot_id, shot.phase, phase.name
                    )));
                }
                if let Some(unknown) = shot
                    .constraint_ids
                    .iter()
                    .find(|id| !constraint_ids.contains(id.as_str()))
                {
                    return Err(PlanError::UnknownConstraint {
                        shot_id: shot.shot_id,
                        constraint_id: unknown.clone(),
                    });
                }
                expected_id += 1;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("malformed plan: {0}")]
    Malformed(String),
    #[error("phase {0} has no shots")]
    EmptyPhase(PhaseName),
    #[error("shot {shot_id} references unknown constraint `{constraint_id}`")]
    UnknownConstraint { shot_id: u32, constraint_id: String },
    #[error("shot {shot_id}: {source}")]
    Precondition {
        shot_id: u32,
        #[source]
        source: StateError,
    },
    #[error("shot {shot_id}: expected entity `{entity_id}` is not in the post-shot state")]
    ExpectedEntityMissing { shot_id: u32, entity_id: String },
    #[error("lesson spec incomplete: {0}")]
    SpecIncomplete(String),
}

/// Simulates the plan from the empty state carrying the plan's constraints
/// and returns the state trajectory `[S_0, …, S_T]`.
pub fn validate_plan(plan: &ShotPlan) -> Result<Vec<PedagogicalState>, PlanError> {
    plan.check_structure()?;
    let shots: Vec<&PlannedShot> = plan.shots().collect();
    let actions = plan.actions();
    let trajectory = validate_trace(&plan.initial_state(), &actions).map_err(|err| {
        PlanError::Precondition {
            shot_id: shots[err.step].shot_id,
            source: err.source,
        }
    })?;
    for (shot, post) in shots.iter().zip(&trajectory[1..]) {
        if let Some(missing) = shot.expected_entities.iter().find(|id| post.lookup(id).is_none()) {
            return Err(PlanError::ExpectedEntityMissing {
                shot_id: shot.shot_id,
                entity_id: missing.clone(),
            });
        }
    }
    Ok(trajectory)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::state_machine::KnowledgeEntity;

    #[test]
    fn four_shot_plan_trajectory() {
        let plan = four_shot_plan();
        let trajectory = validate_plan(&plan).unwrap();
        let sizes: Vec<usize> = trajectory.iter().map(|s| s.entity_count()).collect();
        assert_eq!(sizes, [0, 1, 2, 2, 2]);
        assert!(trajectory.iter().all(|s| s.constraints() == plan.constraints.as_slice()));
        assert_eq!(plan.shot_counts(), [1, 1, 1, 1]);
        assert_eq!(plan.total_shots(), 4);
    }

    #[test]
    fn applying_unknown_entity_fails_at_its_shot() {
        let mut plan = four_shot_plan();
        plan.phases[2].shots[0].action = PedagogicalAction::apply("energy", cart());
        assert!(matches!(
            validate_plan(&plan).unwrap_err(),
            PlanError::Precondition { shot_id: 3, .. }
        ));
    }

    #[test]
    fn expected_entity_must_exist_after_shot() {
        let mut plan = four_shot_plan();
        plan.phases[0].shots[0].expected_entities.push("F=ma".into());
        assert_eq!(
            validate_plan(&plan).unwrap_err(),
            PlanError::ExpectedEntityMissing {
                shot_id: 1,
                entity_id: "F=ma".into()
            }
        );
    }

    #[test]
    fn structural_errors() {
        let mut empty = four_shot_plan();
        empty.phases[1].shots.clear();
        assert!(matches!(validate_plan(&empty).unwrap_err(), PlanError::EmptyPhase(PhaseName::Explanation)));

        let mut reordered = four_shot_plan();
        reordered.phases.swap(0, 1);
        assert!(matches!(validate_plan(&reordered).unwrap_err(), PlanError::Malformed(_)));

        let mut gap = four_shot_plan();
        gap.phases[3].shots[0].shot_id = 7;
        assert!(matches!(validate_plan(&gap).unwrap_err(), PlanError::Malformed(_)));

        let mut unknown = four_shot_plan();
        unknown.phases[0].shots[0].constraint_ids.push("nope".into());
        assert!(matches!(
            validate_plan(&unknown).unwrap_err(),
            PlanError::UnknownConstraint { shot_id: 1, .. }
        ));

        let mut mistagged = four_shot_plan();
        mistagged.phases[0].shots[0].phase = PhaseName::Summary;
        assert!(matches!(validate_plan(&mistagged).unwrap_err(), PlanError::Malformed(_)));
    }

    #[test]
    fn plan_json_field_names() {
        let plan = four_shot_plan();
        let value = serde_json::to_value(&plan).unwrap();
        assert_eq!(value["schema"], "edustory_plan_v1");
        assert_eq!(value["phases"][0]["name"], "introduction");
        let shot = &value["phases"][1]["shots"][0];
        for field in ["shot_id", "phase", "action", "expected_entities", "constraint_ids", "description"] {
            assert!(shot.get(field).is_some(), "missing {field}");
        }
        let back: ShotPlan = serde_json::from_value(value).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn minimal_plan_keeps_constraints_invariant() {
        let mut plan = four_shot_plan();
        plan.phases[2].shots[0].action =
            PedagogicalAction::apply("force", KnowledgeEntity::example("push", "push"));
        plan.phases[2].shots[0].expected_entities = vec!["push".into()];
        let trajectory = validate_plan(&plan).unwrap();
        assert_eq!(trajectory.len(), 5);
        assert!(trajectory.windows(2).all(|w| w[0].constraints() == w[1].constraints()));
    }
}
