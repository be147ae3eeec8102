//! Backend-driven planner with a bounded repair loop.

use super::{validate_plan, ShotPlan};
use crate::backend::{BackendError, PlannerBackend};
use crate::jsonx::json_payload;

/// Prompt template; `{{LESSON}}` and `{{SCHEMA}}` are substituted.
pub const PLANNER_PROMPT_TEMPLATE: &str = include_str!("../../resources/planner_prompt_v1.txt");
const PLAN_SHAPE: &str = include_str!("../../resources/plan_shape_v1.json");

/// Same budget as the verifier's default retry count.
pub const MAX_PLAN_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlannerError {
    #[error("planner backend failed: {0}")]
    Backend(#[from] BackendError),
    #[error("no valid plan after {} attempts: {}", attempts.len(), attempts.join(" | "))]
    InvalidPlanAfterRetries { attempts: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmPlan {
    pub plan: ShotPlan,
    pub attempts: usize,
}

pub fn render_planner_prompt(lesson: &str) -> String {
    PLANNER_PROMPT_TEMPLATE
        .replacen("{{SCHEMA}}", PLAN_SHAPE.trim_end(), 1)
        .replacen("{{LESSON}}", lesson, 1)
}

pub fn llm_plan(lesson: &str, client: &dyn PlannerBackend) -> Result<LlmPlan, PlannerError> {
    let base = render_planner_prompt(lesson);
    let mut errors: Vec<String> = Vec::new();

    for attempt in 1..=MAX_PLAN_ATTEMPTS {
        let prompt = match errors.last() {
            None => base.clone(),
            Some(err) => format!(
                "{base}\n\nYour previous response was rejected: {err}\nReturn a corrected plan as JSON only."
            ),
        };
        let text = client.complete(&prompt)?;
        let outcome = serde_json::from_str::<ShotPlan>(json_payload(&text))
            .map_err(|e| format!("schema error: {e}"))
            .and_then(|plan| {
                validate_plan(&plan)
                    .map(|_| plan)
                    .map_err(|e| format!("validation error: {e}"))
            });
        match outcome {
            Ok(plan) => return Ok(LlmPlan { plan, attempts: attempt }),
            Err(err) => errors.push(err),
        }
    }
    Err(PlannerError::InvalidPlanAfterRetries { attempts: errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::planner::fixtures::four_shot_plan;

    #[test]
    fn passthrough() {
        let plan_json = serde_json::to_string(&four_shot_plan()).unwrap();
        let client = ScriptedBackend::new([plan_json]);
        let out = llm_plan("Newton's second law", &client).unwrap();
        assert_eq!(out.plan, four_shot_plan());
        assert_eq!(out.attempts, 1);
        let prompt = &client.requests()[0].prompt;
        assert!(prompt.contains("Newton's second law"));
        assert!(prompt.contains("\"edustory_plan_v1\""));
        assert!(!prompt.contains("{{"));
    }

    #[test]
    fn malformed_then_valid() {
        let plan_json = serde_json::to_string(&four_shot_plan()).unwrap();
        let client = ScriptedBackend::new(["{not json".to_string(), format!("```json\n{plan_json}\n```")]);
        let out = llm_plan("lesson", &client).unwrap();
        assert_eq!(out.attempts, 2);
        let second = &client.requests()[1].prompt;
        assert!(second.contains("previous response was rejected: schema error"));
    }

    #[test]
    fn exhausts_after_three_invalid_plans() {
        let mut bad = four_shot_plan();
        bad.phases[2].shots[0].action =
            crate::state_machine::PedagogicalAction::summarize(["ghost"]);
        let bad_json = serde_json::to_string(&bad).unwrap();
        let client = ScriptedBackend::new([bad_json.clone(), bad_json.clone(), bad_json]);
        match llm_plan("lesson", &client).unwrap_err() {
            PlannerError::InvalidPlanAfterRetries { attempts } => {
                assert_eq!(attempts.len(), 3);
                assert!(attempts.iter().all(|a| a.starts_with("validation error")));
            }
            other => panic!("unexpected {other}"),
        }
        assert_eq!(client.call_count(), 3);
    }

    #[test]
    fn backend_errors_are_not_retried() {
        let client = ScriptedBackend::with_results([Err(BackendError::Status(503))]);
        assert_eq!(
            llm_plan("lesson", &client).unwrap_err(),
            PlannerError::Backend(BackendError::Status(503))
        );
        assert_eq!(client.call_count(), 1);
    }

    #[test]
    fn shape_example_is_itself_a_valid_plan() {
        let plan: ShotPlan = serde_json::from_str(PLAN_SHAPE).unwrap();
        validate_plan(&plan).unwrap();
    }
}
