//! Pedagogical state, the four-action set and the deterministic transition.
//!
//! A state is an immutable value holding the knowledge entities introduced so
//! far, a typed relation graph over those entities and the constraint list
//! that stays fixed for the whole video. [`PedagogicalState::apply_action`]
//! never mutates its receiver.
//!
//! Example instances created by `Apply` do not join the entity set. They live
//! in a separate example registry, and their instantiation edges are kept in
//! a parallel edge set, so every relation still connects two entities.

mod types;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use types::{
    ActionTag, Constraint, ConstraintKind, EntityKind, Instantiation, KnowledgeEntity,
    PedagogicalAction, Relation, RelationLabel,
};

pub const STATE_SCHEMA: &str = "edustory_state_v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateError {
    #[error("precondition violated for {action}: {reason}")]
    PreconditionViolation { action: ActionTag, reason: String },
    #[error("relation {relation} references unknown entity `{missing}`")]
    DanglingRelation { relation: Relation, missing: String },
    #[error("states are not monotone: `{missing}` present before but absent after")]
    NonMonotoneStates { missing: String },
    #[error("shot index {after} does not follow {before}")]
    ShotIndexMismatch { before: u32, after: u32 },
    #[error("invalid state: {0}")]
    InvalidState(String),
}

impl StateError {
    fn precondition(action: ActionTag, reason: impl Into<String>) -> Self {
        StateError::PreconditionViolation {
            action,
            reason: reason.into(),
        }
    }
}

/// A failed step while folding actions over a state.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("step {step}: {source}")]
pub struct TraceError {
    pub step: usize,
    #[source]
    pub source: StateError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct PedagogicalState {
    shot_index: u32,
    entities: BTreeMap<String, KnowledgeEntity>,
    relations: BTreeSet<Relation>,
    examples: BTreeMap<String, KnowledgeEntity>,
    instantiations: BTreeSet<Instantiation>,
    constraints: Vec<Constraint>,
    last_action: Option<ActionTag>,
}

impl PedagogicalState {
    /// Empty state at shot 0 carrying the video's constraint list.
    pub fn new(constraints: Vec<Constraint>) -> Self {
        Self {
            shot_index: 0,
            entities: BTreeMap::new(),
            relations: BTreeSet::new(),
            examples: BTreeMap::new(),
            instantiations: BTreeSet::new(),
            constraints,
            last_action: None,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn shot_index(&self) -> u32 {
        self.shot_index
    }

    pub fn entities(&self) -> impl Iterator<Item = &KnowledgeEntity> {
        self.entities.values()
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = &str> {
        self.entities.keys().map(String::as_str)
    }

    pub fn entity(&self, id: &str) -> Option<&KnowledgeEntity> {
        self.entities.get(id)
    }

    pub fn contains_entity(&self, id: &str) -> bool {
        self.entities.contains_key(id)
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relations(&self) -> &BTreeSet<Relation> {
        &self.relations
    }

    pub fn examples(&self) -> impl Iterator<Item = &KnowledgeEntity> {
        self.examples.values()
    }

    pub fn example(&self, id: &str) -> Option<&KnowledgeEntity> {
        self.examples.get(id)
    }

    pub fn instantiations(&self) -> &BTreeSet<Instantiation> {
        &self.instantiations
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.id == id)
    }

    /// Kind of the action that produced this state, if any.
    pub fn last_action(&self) -> Option<ActionTag> {
        self.last_action
    }

    /// Looks an id up in the entity set, then in the example registry.
    pub fn lookup(&self, id: &str) -> Option<&KnowledgeEntity> {
        self.entities.get(id).or_else(|| self.examples.get(id))
    }

    fn id_taken(&self, id: &str) -> bool {
        self.entities.contains_key(id) || self.examples.contains_key(id)
    }

    /// Deterministic transition. Returns a new state one shot later; the
    /// receiver is left untouched.
    pub fn apply_action(&self, action: &PedagogicalAction) -> Result<PedagogicalState, StateError> {
        let tag = action.tag();
        let mut next = self.clone();
        next.shot_index = self
            .shot_index
            .checked_add(1)
            .ok_or_else(|| StateError::precondition(tag, "shot index overflow"))?;
        next.last_action = Some(tag);

        match action {
            PedagogicalAction::Introduce {
                entity,
                incident_relations,
            } => {
                self.check_new_entity(tag, entity)?;
                next.entities.insert(entity.id.clone(), entity.clone());
                for relation in incident_relations {
                    if relation.source == relation.target {
                        return Err(StateError::precondition(
                            tag,
                            format!("relation {relation} is a self-loop"),
                        ));
                    }
                    if relation.source != entity.id && relation.target != entity.id {
                        return Err(StateError::precondition(
                            tag,
                            format!("relation {relation} is not incident to `{}`", entity.id),
                        ));
                    }
                    for endpoint in [&relation.source, &relation.target] {
                        if !next.entities.contains_key(endpoint) {
                            return Err(StateError::DanglingRelation {
                                relation: relation.clone(),
                                missing: endpoint.clone(),
                            });
                        }
                    }
                    next.relations.insert(relation.clone());
                }
            }
            PedagogicalAction::Derive {
                source_id,
                new_entity,
                label,
            } => {
                if !self.entities.contains_key(source_id) {
                    let reason = if self.examples.contains_key(source_id) {
                        format!("source `{source_id}` is an example instance; instances are terminal")
                    } else {
                        format!("source `{source_id}` has not been introduced")
                    };
                    return Err(StateError::precondition(tag, reason));
                }
                self.check_new_entity(tag, new_entity)?;
                next.entities.insert(new_entity.id.clone(), new_entity.clone());
                next.relations.insert(Relation::new(
                    source_id.clone(),
                    new_entity.id.clone(),
                    *label,
                ));
            }
            PedagogicalAction::Apply { entity_id, instance } => {
                if !self.entities.contains_key(entity_id) {
                    return Err(StateError::precondition(
                        tag,
                        format!("entity `{entity_id}` has not been introduced"),
                    ));
                }
                if instance.kind != EntityKind::ExampleInstance {
                    return Err(StateError::precondition(
                        tag,
                        format!("instance `{}` must have kind example_instance", instance.id),
                    ));
                }
                instance
                    .validate()
                    .map_err(|reason| StateError::precondition(tag, reason))?;
                if self.id_taken(&instance.id) {
                    return Err(StateError::precondition(
                        tag,
                        format!("instance id `{}` is already in use", instance.id),
                    ));
                }
                next.examples.insert(instance.id.clone(), instance.clone());
                next.instantiations.insert(Instantiation {
                    entity_id: entity_id.clone(),
                    instance_id: instance.id.clone(),
                });
            }
            PedagogicalAction::Summarize { entity_ids } => {
                if let Some(missing) = entity_ids.iter().find(|id| !self.entities.contains_key(*id)) {
                    return Err(StateError::precondition(
                        tag,
                        format!("entity `{missing}` has not been introduced"),
                    ));
                }
            }
        }
        Ok(next)
    }

    /// True when `action` can be applied to this state.
    pub fn prerequisites_hold(&self, action: &PedagogicalAction) -> bool {
        self.apply_action(action).is_ok()
    }

    fn check_new_entity(&self, tag: ActionTag, entity: &KnowledgeEntity) -> Result<(), StateError> {
        entity
            .validate()
            .map_err(|reason| StateError::precondition(tag, reason))?;
        if entity.kind == EntityKind::ExampleInstance {
            return Err(StateError::precondition(
                tag,
                format!("`{}`: example instances enter only through Apply", entity.id),
            ));
        }
        if self.id_taken(&entity.id) {
            return Err(StateError::precondition(
                tag,
                format!("entity `{}` already exists", entity.id),
            ));
        }
        Ok(())
    }

    /// Checks the structural invariants: unique ids, relation endpoints
    /// resolve, no self-loops, instantiation edges resolve.
    pub fn check_invariants(&self) -> Result<(), StateError> {
        for (id, entity) in &self.entities {
            if id != &entity.id {
                return Err(StateError::InvalidState(format!("entity key `{id}` != id `{}`", entity.id)));
            }
            entity.validate().map_err(StateError::InvalidState)?;
            if self.examples.contains_key(id) {
                return Err(StateError::InvalidState(format!("id `{id}` is both entity and example")));
            }
        }
        for relation in &self.relations {
            if relation.source == relation.target {
                return Err(StateError::InvalidState(format!("self-loop {relation}")));
            }
            for endpoint in [&relation.source, &relation.target] {
                if !self.entities.contains_key(endpoint) {
                    return Err(StateError::DanglingRelation {
                        relation: relation.clone(),
                        missing: endpoint.clone(),
                    });
                }
            }
        }
        for edge in &self.instantiations {
            if !self.entities.contains_key(&edge.entity_id) || !self.examples.contains_key(&edge.instance_id) {
                return Err(StateError::InvalidState(format!(
                    "instantiation {} -> {} does not resolve",
                    edge.entity_id, edge.instance_id
                )));
            }
        }
        Ok(())
    }

    /// Compact canonical JSON (sorted arrays, stable field order).
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("state serialization is infallible")
    }

    #[cfg(test)]
    pub(crate) fn with_shot_index(mut self, shot_index: u32) -> Self {
        self.shot_index = shot_index;
        self
    }
}

/// Folds `actions` over `initial`, returning `[S_0, …, S_T]`.
pub fn validate_trace(
    initial: &PedagogicalState,
    actions: &[PedagogicalAction],
) -> Result<Vec<PedagogicalState>, TraceError> {
    let mut trajectory = Vec::with_capacity(actions.len() + 1);
    trajectory.push(initial.clone());
    for (step, action) in actions.iter().enumerate() {
        let next = trajectory[step]
            .apply_action(action)
            .map_err(|source| TraceError { step, source })?;
        trajectory.push(next);
    }
    Ok(trajectory)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDelta {
    pub added_entities: BTreeSet<String>,
    pub added_relations: BTreeSet<Relation>,
    #[serde(default)]
    pub added_instantiations: BTreeSet<Instantiation>,
    pub recap_triggered: bool,
}

impl StateDelta {
    pub fn is_empty(&self) -> bool {
        self.added_entities.is_empty()
            && self.added_relations.is_empty()
            && self.added_instantiations.is_empty()
    }
}

/// Set difference between consecutive states.
pub fn state_delta(
    before: &PedagogicalState,
    after: &PedagogicalState,
) -> Result<StateDelta, StateError> {
    if before.shot_index.checked_add(1) != Some(after.shot_index) {
        return Err(StateError::ShotIndexMismatch {
            before: before.shot_index,
            after: after.shot_index,
        });
    }
    if let Some(missing) = before.entities.keys().find(|id| !after.entities.contains_key(*id)) {
        return Err(StateError::NonMonotoneStates {
            missing: missing.clone(),
        });
    }
    if let Some(missing) = before.relations.iter().find(|r| !after.relations.contains(*r)) {
        return Err(StateError::NonMonotoneStates {
            missing: missing.to_string(),
        });
    }

    let added_entities: BTreeSet<String> = after
        .entities
        .keys()
        .filter(|id| !before.entities.contains_key(*id))
        .cloned()
        .collect();
    let added_relations: BTreeSet<Relation> =
        after.relations.difference(&before.relations).cloned().collect();
    let added_instantiations: BTreeSet<Instantiation> = after
        .instantiations
        .difference(&before.instantiations)
        .cloned()
        .collect();
    let recap_triggered = added_entities.is_empty()
        && added_relations.is_empty()
        && after.last_action == Some(ActionTag::Summarize);

    Ok(StateDelta {
        added_entities,
        added_relations,
        added_instantiations,
        recap_triggered,
    })
}

/// On-disk form of a state: arrays sorted by id, explicit schema tag.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateRepr {
    schema: String,
    shot_index: u32,
    entities: Vec<KnowledgeEntity>,
    relations: Vec<Relation>,
    #[serde(default)]
    examples: Vec<KnowledgeEntity>,
    #[serde(default)]
    instantiations: Vec<Instantiation>,
    constraints: Vec<Constraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    last_action: Option<ActionTag>,
}

impl From<PedagogicalState> for StateRepr {
    fn from(state: PedagogicalState) -> Self {
        StateRepr {
            schema: STATE_SCHEMA.to_string(),
            shot_index: state.shot_index,
            entities: state.entities.into_values().collect(),
            relations: state.relations.into_iter().collect(),
            examples: state.examples.into_values().collect(),
            instantiations: state.instantiations.into_iter().collect(),
            constraints: state.constraints,
            last_action: state.last_action,
        }
    }
}

impl TryFrom<StateRepr> for PedagogicalState {
    type Error = StateError;

    fn try_from(repr: StateRepr) -> Result<Self, Self::Error> {
        if repr.schema != STATE_SCHEMA {
            return Err(StateError::InvalidState(format!(
                "unsupported schema `{}` (expected `{STATE_SCHEMA}`)",
                repr.schema
            )));
        }
        let mut entities = BTreeMap::new();
        for entity in repr.entities {
            if let Some(dup) = entities.insert(entity.id.clone(), entity) {
                return Err(StateError::InvalidState(format!("duplicate entity id `{}`", dup.id)));
            }
        }
        let mut examples = BTreeMap::new();
        for example in repr.examples {
            if let Some(dup) = examples.insert(example.id.clone(), example) {
                return Err(StateError::InvalidState(format!("duplicate example id `{}`", dup.id)));
            }
        }
        let mut ids = BTreeSet::new();
        for constraint in &repr.constraints {
            if !ids.insert(constraint.id.as_str()) {
                return Err(StateError::InvalidState(format!(
                    "duplicate constraint id `{}`",
                    constraint.id
                )));
            }
        }
        let state = PedagogicalState {
            shot_index: repr.shot_index,
            entities,
            relations: repr.relations.into_iter().collect(),
            examples,
            instantiations: repr.instantiations.into_iter().collect(),
            constraints: repr.constraints,
            last_action: repr.last_action,
        };
        state.check_invariants()?;
        Ok(state)
    }
}

#[cfg(test)]
mod tests;
