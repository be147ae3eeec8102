use std::collections::BTreeSet;

use super::*;
use crate::formula::{parse_formula, Dimension};

fn force() -> KnowledgeEntity {
    KnowledgeEntity::concept("force", "force")
}

fn acceleration() -> KnowledgeEntity {
    KnowledgeEntity::quantity("acceleration", "acceleration", Dimension([0, 1, -2, 0, 0, 0, 0]))
}

fn fma() -> KnowledgeEntity {
    KnowledgeEntity::formula("F=ma", parse_formula("F=m*a").unwrap())
}

fn constraints() -> Vec<Constraint> {
    vec![
        Constraint::new("c_entity", ConstraintKind::EntityContinuity),
        Constraint::new("c_formula", ConstraintKind::FormulaIdentity),
    ]
}

#[test]
fn first_introduction_has_no_edges() {
    let s0 = PedagogicalState::empty();
    let s1 = s0.apply_action(&PedagogicalAction::introduce(force())).unwrap();
    assert_eq!(s1.entity_ids().collect::<Vec<_>>(), ["force"]);
    assert!(s1.relations().is_empty());
    assert_eq!(s1.shot_index(), 1);
    // input untouched
    assert_eq!(s0, PedagogicalState::empty());
}

#[test]
fn derive_adds_entity_and_edge() {
    let s = validate_trace(
        &PedagogicalState::empty(),
        &[
            PedagogicalAction::introduce(force()),
            PedagogicalAction::introduce(acceleration()),
        ],
    )
    .unwrap()
    .pop()
    .unwrap();
    let next = s
        .apply_action(&PedagogicalAction::derive("force", fma(), RelationLabel::Derives))
        .unwrap();
    assert!(next.contains_entity("F=ma"));
    assert_eq!(next.entity_count(), 3);
    assert_eq!(
        next.relations().iter().collect::<Vec<_>>(),
        [&Relation::new("force", "F=ma", RelationLabel::Derives)]
    );
}

#[test]
fn summarize_leaves_state_unchanged() {
    let s = PedagogicalState::empty()
        .apply_action(&PedagogicalAction::introduce(force()))
        .unwrap()
        .apply_action(&PedagogicalAction::derive("force", fma(), RelationLabel::Derives))
        .unwrap();
    let next = s.apply_action(&PedagogicalAction::summarize(["F=ma"])).unwrap();
    let before_json = serde_json::to_string(&s.entities().collect::<Vec<_>>()).unwrap();
    let after_json = serde_json::to_string(&next.entities().collect::<Vec<_>>()).unwrap();
    assert_eq!(before_json, after_json);
    assert_eq!(s.relations(), next.relations());
    let delta = state_delta(&s, &next).unwrap();
    assert!(delta.added_entities.is_empty() && delta.added_relations.is_empty());
    assert!(delta.recap_triggered);
}

#[test]
fn apply_records_instance_outside_entity_set() {
    let s = PedagogicalState::empty()
        .apply_action(&PedagogicalAction::introduce(fma()))
        .unwrap();
    let next = s
        .apply_action(&PedagogicalAction::apply(
            "F=ma",
            KnowledgeEntity::example("cart_example", "a cart pushed on a track"),
        ))
        .unwrap();
    assert_eq!(next.entity_count(), 1);
    assert!(next.example("cart_example").is_some());
    assert_eq!(next.relations(), s.relations());
    let delta = state_delta(&s, &next).unwrap();
    assert!(delta.added_entities.is_empty());
    assert_eq!(delta.added_instantiations.len(), 1);
    assert!(!delta.recap_triggered);
}

#[test]
fn preconditions() {
    let s = PedagogicalState::empty()
        .apply_action(&PedagogicalAction::introduce(force()))
        .unwrap();

    let dup = s.apply_action(&PedagogicalAction::introduce(force())).unwrap_err();
    assert!(matches!(dup, StateError::PreconditionViolation { action: ActionTag::Introduce, .. }));

    let missing = s
        .apply_action(&PedagogicalAction::derive("mass", fma(), RelationLabel::Derives))
        .unwrap_err();
    assert!(missing.to_string().contains("mass"));

    let bad_apply = s
        .apply_action(&PedagogicalAction::apply("force", KnowledgeEntity::concept("x", "x")))
        .unwrap_err();
    assert!(matches!(bad_apply, StateError::PreconditionViolation { action: ActionTag::Apply, .. }));

    let bad_summary = s
        .apply_action(&PedagogicalAction::summarize(["force", "energy"]))
        .unwrap_err();
    assert!(bad_summary.to_string().contains("energy"));

    // instances are terminal
    let with_example = s
        .apply_action(&PedagogicalAction::apply("force", KnowledgeEntity::example("push", "a push")))
        .unwrap();
    assert!(with_example
        .apply_action(&PedagogicalAction::derive("push", fma(), RelationLabel::Derives))
        .unwrap_err()
        .to_string()
        .contains("terminal"));
    assert!(with_example
        .apply_action(&PedagogicalAction::apply("force", KnowledgeEntity::example("push", "again")))
        .is_err());
}

#[test]
fn introduce_with_incident_relations() {
    let s = PedagogicalState::empty()
        .apply_action(&PedagogicalAction::introduce(force()))
        .unwrap();
    let ok = PedagogicalAction::Introduce {
        entity: acceleration(),
        incident_relations: vec![Relation::new("force", "acceleration", RelationLabel::Causes)],
    };
    let next = s.apply_action(&ok).unwrap();
    assert_eq!(next.relations().len(), 1);

    let dangling = PedagogicalAction::Introduce {
        entity: acceleration(),
        incident_relations: vec![Relation::new("mass", "acceleration", RelationLabel::Causes)],
    };
    assert_eq!(
        s.apply_action(&dangling).unwrap_err(),
        StateError::DanglingRelation {
            relation: Relation::new("mass", "acceleration", RelationLabel::Causes),
            missing: "mass".into(),
        }
    );

    let not_incident = PedagogicalAction::Introduce {
        entity: acceleration(),
        incident_relations: vec![Relation::new("force", "force", RelationLabel::Causes)],
    };
    assert!(s.apply_action(&not_incident).is_err());
}

#[test]
fn entity_field_rules() {
    let mut bad = fma();
    bad.formula = None;
    assert!(PedagogicalState::empty()
        .apply_action(&PedagogicalAction::introduce(bad))
        .is_err());
    let mut no_unit = acceleration();
    no_unit.unit = None;
    assert!(no_unit.validate().is_err());
    assert!(KnowledgeEntity::concept("", "blank").validate().is_err());
    assert!(force().with_convention("up").validate().is_err());
    assert!(acceleration().with_convention("up").validate().is_ok());
}

#[test]
fn trace_examples() {
    let empty = PedagogicalState::new(constraints());
    assert_eq!(validate_trace(&empty, &[]).unwrap(), vec![empty.clone()]);

    let a = KnowledgeEntity::concept("a", "a");
    let b = KnowledgeEntity::concept("b", "b");
    let actions = vec![
        PedagogicalAction::introduce(a),
        PedagogicalAction::derive("a", b, RelationLabel::Derives),
        PedagogicalAction::apply("b", KnowledgeEntity::example("x", "x")),
        PedagogicalAction::summarize(["a", "b"]),
    ];
    let trace = validate_trace(&empty, &actions).unwrap();
    assert_eq!(trace.len(), 5);
    let sizes: Vec<usize> = trace.iter().map(|s| s.entity_count()).collect();
    assert_eq!(sizes, [0, 1, 2, 2, 2]);
    assert!(trace.iter().all(|s| s.constraints() == empty.constraints()));

    let err = validate_trace(
        &PedagogicalState::empty(),
        &[PedagogicalAction::derive(
            "missing",
            KnowledgeEntity::concept("b", "b"),
            RelationLabel::Derives,
        )],
    )
    .unwrap_err();
    assert_eq!(err.step, 0);
    assert!(matches!(err.source, StateError::PreconditionViolation { .. }));
}

#[test]
fn delta_single_add_and_errors() {
    let s0 = PedagogicalState::empty();
    let s1 = s0.apply_action(&PedagogicalAction::introduce(force())).unwrap();
    let delta = state_delta(&s0, &s1).unwrap();
    assert_eq!(delta.added_entities, BTreeSet::from(["force".to_string()]));
    assert!(delta.added_relations.is_empty());
    assert!(!delta.recap_triggered);

    assert!(matches!(
        state_delta(&s1, &s0).unwrap_err(),
        StateError::ShotIndexMismatch { .. }
    ));
    let shrunk = PedagogicalState::empty().with_shot_index(2);
    assert_eq!(
        state_delta(&s1, &shrunk).unwrap_err(),
        StateError::NonMonotoneStates {
            missing: "force".into()
        }
    );
}

#[test]
fn canonical_json_is_sorted_and_round_trips() {
    let s = validate_trace(
        &PedagogicalState::new(constraints()),
        &[
            PedagogicalAction::introduce(KnowledgeEntity::concept("zeta", "z")),
            PedagogicalAction::introduce(KnowledgeEntity::concept("alpha", "a")),
            PedagogicalAction::derive("zeta", fma(), RelationLabel::Quantifies),
            PedagogicalAction::apply("F=ma", KnowledgeEntity::example("cart", "cart")),
        ],
    )
    .unwrap()
    .pop()
    .unwrap();
    let json = s.to_canonical_json();
    assert!(json.starts_with(r#"{"schema":"edustory_state_v1","shot_index":4,"entities":[{"id":"F=ma""#));
    let alpha = json.find(r#""id":"alpha""#).unwrap();
    let zeta = json.find(r#""id":"zeta""#).unwrap();
    assert!(alpha < zeta);
    let back: PedagogicalState = serde_json::from_str(&json).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.to_canonical_json(), json);
}

#[test]
fn deserialization_rejects_broken_states() {
    let dangling = r#"{"schema":"edustory_state_v1","shot_index":1,
        "entities":[{"id":"a","kind":"concept","label":"a"}],
        "relations":[{"source":"a","target":"b","label":"causes"}],
        "constraints":[]}"#;
    assert!(serde_json::from_str::<PedagogicalState>(dangling).is_err());
    let dup = r#"{"schema":"edustory_state_v1","shot_index":1,
        "entities":[{"id":"a","kind":"concept","label":"a"},{"id":"a","kind":"concept","label":"b"}],
        "relations":[],"constraints":[]}"#;
    assert!(serde_json::from_str::<PedagogicalState>(dup).is_err());
    let wrong_schema = r#"{"schema":"v0","shot_index":0,"entities":[],"relations":[],"constraints":[]}"#;
    assert!(serde_json::from_str::<PedagogicalState>(wrong_schema).is_err());
    let bad_label = r#"{"source":"a","target":"b","label":"implies"}"#;
    assert!(serde_json::from_str::<Relation>(bad_label).is_err());
}

#[test]
fn action_json_shape() {
    let action = PedagogicalAction::derive("force", fma(), RelationLabel::Derives);
    let json = serde_json::to_string(&action).unwrap();
    assert_eq!(
        json,
        r#"{"type":"derive","source_id":"force","new_entity":{"id":"F=ma","kind":"formula","label":"F=m*a","formula":"F=m*a"},"label":"derives"}"#
    );
    assert_eq!(serde_json::from_str::<PedagogicalAction>(&json).unwrap(), action);
    assert!(serde_json::from_str::<PedagogicalAction>(r#"{"type":"teleport"}"#).is_err());
    assert_eq!(action.to_string(), "Derive(force, F=ma, derives)");
    assert_eq!(
        PedagogicalAction::summarize(["b", "a"]).to_string(),
        "Summarize({a, b})"
    );
}
