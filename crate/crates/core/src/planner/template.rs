//! Deterministic planner over a structured lesson spec.
//!
//! One Introduce per concept, one Derive per formula, one Apply and one
//! Summarize over every entity. Each shot expects the entities of its
//! post-shot state, plus the example instance on the Apply shot.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{PhaseName, PlanError, PlanPhase, PlannedShot, ShotPlan, PLAN_SCHEMA};
use crate::formula::DimensionTable;
use crate::state_machine::{
    Constraint, ConstraintKind, EntityKind, KnowledgeEntity, PedagogicalAction, Relation,
    RelationLabel,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulaSpec {
    pub entity: KnowledgeEntity,
    pub derived_from: String,
    #[serde(default = "default_label")]
    pub label: RelationLabel,
}

fn default_label() -> RelationLabel {
    RelationLabel::Derives
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleSpec {
    pub instance: KnowledgeEntity,
    /// Entity the example instantiates; defaults to the last formula.
    #[serde(default)]
    pub applies_to: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LessonSpec {
    pub topic: String,
    pub concepts: Vec<KnowledgeEntity>,
    #[serde(default)]
    pub relations: Vec<Relation>,
    pub formulas: Vec<FormulaSpec>,
    pub example: ExampleSpec,
    /// Enables an `equation_balance` constraint over this table.
    #[serde(default)]
    pub dimensions: Option<DimensionTable>,
    /// Replaces the default constraint set when given.
    #[serde(default)]
    pub constraints: Option<Vec<Constraint>>,
}

impl LessonSpec {
    fn default_constraints(&self) -> Vec<Constraint> {
        let mut constraints = vec![
            Constraint::new("entity_continuity", ConstraintKind::EntityContinuity),
            Constraint::new("formula_identity", ConstraintKind::FormulaIdentity),
            Constraint::new("logical_ordering", ConstraintKind::LogicalOrdering),
        ];
        if let Some(table) = &self.dimensions {
            constraints.push(
                Constraint::new("equation_balance", ConstraintKind::EquationBalance).with_param(
                    "dimensions",
                    serde_json::to_value(table).expect("table serializes"),
                ),
            );
        }
        if self.concepts.iter().any(|c| c.convention.is_some()) {
            constraints.push(Constraint::new(
                "directional_convention",
                ConstraintKind::DirectionalConvention,
            ));
        }
        constraints
    }
}

fn incomplete(msg: impl Into<String>) -> PlanError {
    PlanError::SpecIncomplete(msg.into())
}

pub fn template_plan(spec: &LessonSpec) -> Result<ShotPlan, PlanError> {
    if spec.concepts.is_empty() {
        return Err(incomplete("at least one concept is required"));
    }
    if spec.formulas.is_empty() {
        return Err(incomplete("at least one derivable formula is required"));
    }
    if let Some(bad) = spec
        .concepts
        .iter()
        .find(|c| !matches!(c.kind, EntityKind::Concept | EntityKind::Quantity))
    {
        return Err(incomplete(format!("`{}` must be a concept or quantity", bad.id)));
    }
    if let Some(bad) = spec.formulas.iter().find(|f| f.entity.kind != EntityKind::Formula) {
        return Err(incomplete(format!("`{}` must be a formula entity", bad.entity.id)));
    }

    let constraints = spec
        .constraints
        .clone()
        .unwrap_or_else(|| spec.default_constraints());
    let constraint_ids: Vec<String> = constraints.iter().map(|c| c.id.clone()).collect();

    let mut known: Vec<String> = Vec::new();
    let mut shot_id = 0u32;
    let mut next_shot = |phase: PhaseName, action: PedagogicalAction, expected: Vec<String>, description: String| {
        shot_id += 1;
        PlannedShot {
            shot_id,
            phase,
            action,
            expected_entities: expected,
            constraint_ids: constraint_ids.clone(),
            description,
        }
    };

    let concept_ids: Vec<&str> = spec.concepts.iter().map(|c| c.id.as_str()).collect();
    for relation in &spec.relations {
        for endpoint in [&relation.source, &relation.target] {
            if !concept_ids.contains(&endpoint.as_str()) {
                return Err(incomplete(format!(
                    "relation {relation} must connect two concepts; `{endpoint}` is not one"
                )));
            }
        }
    }

    let mut introduction = Vec::new();
    for (idx, concept) in spec.concepts.iter().enumerate() {
        // a relation is attached to whichever endpoint is introduced last
        let incident: Vec<Relation> = spec
            .relations
            .iter()
            .filter(|r| {
                let pos = |id: &str| concept_ids.iter().position(|c| *c == id);
                let (s, t) = (pos(&r.source), pos(&r.target));
                s.max(t) == Some(idx)
            })
            .cloned()
            .collect();
        known.push(concept.id.clone());
        introduction.push(next_shot(
            PhaseName::Introduction,
            PedagogicalAction::Introduce {
                entity: concept.clone(),
                incident_relations: incident,
            },
            known.clone(),
            format!("Introduce {} in the context of {}", concept.label, spec.topic),
        ));
    }

    let mut explanation = Vec::new();
    for formula in &spec.formulas {
        if !known.contains(&formula.derived_from) {
            return Err(incomplete(format!(
                "formula `{}` is derived from `{}`, which is not introduced before it",
                formula.entity.id, formula.derived_from
            )));
        }
        let source_label = spec
            .concepts
            .iter()
            .map(|c| (&c.id, &c.label))
            .chain(spec.formulas.iter().map(|f| (&f.entity.id, &f.entity.label)))
            .find(|(id, _)| **id == formula.derived_from)
            .map(|(_, label)| label.clone())
            .unwrap_or_default();
        known.push(formula.entity.id.clone());
        explanation.push(next_shot(
            PhaseName::Explanation,
            PedagogicalAction::derive(formula.derived_from.clone(), formula.entity.clone(), formula.label),
            known.clone(),
            format!("Derive {} from {}", formula.entity.label, source_label),
        ));
    }

    let target = spec
        .example
        .applies_to
        .clone()
        .unwrap_or_else(|| spec.formulas.last().expect("nonempty").entity.id.clone());
    if !known.contains(&target) {
        return Err(incomplete(format!("example applies to unknown entity `{target}`")));
    }
    if spec.example.instance.kind != EntityKind::ExampleInstance {
        return Err(incomplete(format!(
            "`{}` must be an example_instance",
            spec.example.instance.id
        )));
    }
    let mut apply_expected = known.clone();
    apply_expected.push(spec.example.instance.id.clone());
    let application = vec![next_shot(
        PhaseName::Application,
        PedagogicalAction::apply(target.clone(), spec.example.instance.clone()),
        apply_expected,
        format!("Apply {} to {}", target, spec.example.instance.label),
    )];

    let all: BTreeSet<String> = known.iter().cloned().collect();
    let summary = vec![next_shot(
        PhaseName::Summary,
        PedagogicalAction::Summarize { entity_ids: all },
        known.clone(),
        format!("Summarize {}", known.join(", ")),
    )];

    let plan = ShotPlan {
        schema: PLAN_SCHEMA.to_string(),
        lesson: spec.topic.clone(),
        phases: vec![
            PlanPhase { name: PhaseName::Introduction, shots: introduction },
            PlanPhase { name: PhaseName::Explanation, shots: explanation },
            PlanPhase { name: PhaseName::Application, shots: application },
            PlanPhase { name: PhaseName::Summary, shots: summary },
        ],
        constraints,
    };
    // surfaces duplicate ids and other state-level problems in the lesson
    super::validate_plan(&plan)?;
    Ok(plan)
}
