//! Helpers shared by the integration test targets: fixtures, random
//! generators and independent metric oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;

use num_rational::Ratio;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use edustory::formula::{parse_formula, Dimension, DimensionTable};
use edustory::generation::ShotDescriptor;
use edustory::planner::{template_plan, ExampleSpec, FormulaSpec, LessonSpec, PlannedShot, ShotPlan};
use edustory::state_machine::{
    EntityKind, KnowledgeEntity, PedagogicalAction, PedagogicalState, Relation, RelationLabel,
};

pub const NEWTON_LESSON: &str = include_str!("../fixtures/newton_lesson.json");

pub fn newton_plan() -> ShotPlan {
    template_plan(&serde_json::from_str(NEWTON_LESSON).unwrap()).unwrap()
}

/// Equations that balance under the standard mechanics table.
pub const BALANCED: [&str; 8] = [
    "F = m * a",
    "p = m * v",
    "E = F * d",
    "v = a * t",
    "W = F * s",
    "P = E / t",
    "x = v * t",
    "E = m * c ^ 2",
];

fn random_concept<R: Rng>(rng: &mut R, id: String) -> KnowledgeEntity {
    match rng.random_range(0..3) {
        0 => KnowledgeEntity::concept(id.clone(), format!("concept {id}")),
        1 => KnowledgeEntity::quantity(id.clone(), format!("quantity {id}"), Dimension([0, 1, -1, 0, 0, 0, 0])),
        _ => KnowledgeEntity::quantity(id.clone(), format!("quantity {id}"), Dimension([1, 0, 0, 0, 0, 0, 0]))
            .with_convention(if rng.random() { "up_positive" } else { "right_positive" }),
    }
}

/// A random lesson whose template plan has exactly `total` shots
/// (`4 <= total <= 7`).
pub fn random_lesson<R: Rng>(rng: &mut R, total: usize) -> LessonSpec {
    assert!((4..=7).contains(&total));
    let body = total - 2;
    let n_formulas = rng.random_range(1..=body.min(3)).min(body - 1).max(1);
    let n_concepts = body - n_formulas;
    let concepts: Vec<KnowledgeEntity> = (0..n_concepts).map(|i| random_concept(rng, format!("c{i}"))).collect();
    let mut relations = Vec::new();
    for i in 1..n_concepts {
        if rng.random_bool(0.5) {
            let j = rng.random_range(0..i);
            let (s, t) = if rng.random() { (i, j) } else { (j, i) };
            relations.push(Relation::new(
                format!("c{s}"),
                format!("c{t}"),
                *RelationLabel::ALL.choose(rng).unwrap(),
            ));
        }
    }
    let texts: Vec<&str> = BALANCED.choose_multiple(rng, n_formulas).copied().collect();
    let mut known: Vec<String> = concepts.iter().map(|c| c.id.clone()).collect();
    let mut formulas = Vec::new();
    for (i, text) in texts.iter().enumerate() {
        let id = format!("f{i}");
        formulas.push(FormulaSpec {
            entity: KnowledgeEntity::formula(id.clone(), parse_formula(text).unwrap()),
            derived_from: known.choose(rng).unwrap().clone(),
            label: *[RelationLabel::Derives, RelationLabel::Quantifies].choose(rng).unwrap(),
        });
        known.push(id);
    }
    LessonSpec {
        topic: "a randomized lesson".into(),
        concepts,
        relations,
        formulas,
        example: ExampleSpec {
            instance: KnowledgeEntity::example("ex0", "worked example"),
            applies_to: if rng.random() { Some(known.choose(rng).unwrap().clone()) } else { None },
        },
        dimensions: rng.random_bool(0.5).then(DimensionTable::standard),
        constraints: None,
    }
}

pub fn random_plan<R: Rng>(rng: &mut R, total: usize) -> ShotPlan {
    template_plan(&random_lesson(rng, total)).expect("random lesson yields a valid plan")
}

/// A random action that is legal in `state`. Fresh ids come from `counter`.
pub fn random_valid_action<R: Rng>(rng: &mut R, state: &PedagogicalState, counter: &mut u32) -> PedagogicalAction {
    let ids: Vec<String> = state.entity_ids().map(str::to_string).collect();
    let mut fresh = |prefix: &str| {
        *counter += 1;
        format!("{prefix}{counter}")
    };
    let choice = if ids.is_empty() { 0 } else { rng.random_range(0..4) };
    match choice {
        0 => {
            let id = fresh("n");
            let entity = random_concept(rng, id.clone());
            let mut incident = Vec::new();
            for _ in 0..rng.random_range(0..=2usize.min(ids.len())) {
                let other = ids.choose(rng).unwrap().clone();
                let label = *RelationLabel::ALL.choose(rng).unwrap();
                incident.push(if rng.random() {
                    Relation::new(id.clone(), other, label)
                } else {
                    Relation::new(other, id.clone(), label)
                });
            }
            PedagogicalAction::Introduce {
                entity,
                incident_relations: incident,
            }
        }
        1 => {
            let id = fresh("d");
            let entity = if rng.random() {
                KnowledgeEntity::formula(id, parse_formula(BALANCED.choose(rng).unwrap()).unwrap())
            } else {
                random_concept(rng, id)
            };
            PedagogicalAction::derive(
                ids.choose(rng).unwrap().clone(),
                entity,
                *RelationLabel::ALL.choose(rng).unwrap(),
            )
        }
        2 => {
            let id = fresh("x");
            PedagogicalAction::apply(ids.choose(rng).unwrap().clone(), KnowledgeEntity::example(id, "instance"))
        }
        _ => {
            let k = rng.random_range(1..=ids.len());
            PedagogicalAction::summarize(ids.choose_multiple(rng, k).cloned())
        }
    }
}

/// Applies `steps` random legal actions to `start`.
pub fn random_state<R: Rng>(rng: &mut R, start: PedagogicalState, steps: usize, counter: &mut u32) -> PedagogicalState {
    let mut state = start;
    for _ in 0..steps {
        let action = random_valid_action(rng, &state, counter);
        state = state.apply_action(&action).expect("generated action is legal");
    }
    state
}

/// Perturbs a generated run so that every metric indicator gets exercised:
/// foreign actions, reordered entity lists and garbage formulae.
pub fn tamper<R: Rng>(rng: &mut R, shots: &mut [ShotDescriptor], pool: &[PlannedShot]) {
    for shot in shots.iter_mut() {
        if rng.random_bool(0.15) {
            shot.action_realized = pool.choose(rng).unwrap().action.clone();
        }
        if rng.random_bool(0.3) {
            shot.entities_shown.shuffle(rng);
        }
        if rng.random_bool(0.05) {
            shot.formulae_shown.push("x = = y".into());
        }
        if rng.random_bool(0.05) {
            shot.entities_shown.clear();
        }
    }
}

fn canonical_or_none(text: &str) -> Option<String> {
    parse_formula(text).ok().map(|f| f.canonical())
}

/// Pair-drift predicate written from the definition, using set membership
/// and canonical strings rather than the library's helpers.
pub fn oracle_pair_drifts(prev: &ShotDescriptor, next: &ShotDescriptor, state: &PedagogicalState) -> bool {
    let established: BTreeSet<&str> = state.entity_ids().collect();
    let next_shown: BTreeSet<&str> = next.entities_shown.iter().map(String::as_str).collect();
    let lost = prev
        .entities_shown
        .iter()
        .any(|id| established.contains(id.as_str()) && !next_shown.contains(id.as_str()));

    let mut registered: Vec<(String, String)> = state
        .entities()
        .filter(|e| e.kind == EntityKind::Formula)
        .map(|e| (e.id.clone(), e.formula.as_ref().unwrap().canonical()))
        .collect();
    if let Some(added) = next.action_realized.added_entity() {
        if let Some(f) = &added.formula {
            registered.push((added.id.clone(), f.canonical()));
        }
    }
    let shown: Vec<Option<String>> = next.formulae_shown.iter().map(|t| canonical_or_none(t)).collect();
    let garbled = shown.iter().any(Option::is_none);
    let shown: BTreeSet<String> = shown.into_iter().flatten().collect();
    let registered_forms: BTreeSet<&str> = registered.iter().map(|(_, c)| c.as_str()).collect();
    let unregistered = shown.iter().any(|c| !registered_forms.contains(c.as_str()));
    let misrendered = registered
        .iter()
        .any(|(id, c)| next_shown.contains(id.as_str()) && !shown.contains(c));

    let illegal = state.apply_action(&next.action_realized).is_err();
    lost || garbled || unregistered || misrendered || illegal
}

/// KDR by enumeration: pair `i` is judged against `states[i + 1]`.
pub fn oracle_kdr(shots: &[ShotDescriptor], states: &[PedagogicalState]) -> Ratio<u64> {
    let pairs = shots.len() - 1;
    let mut drifting = 0u64;
    for i in 0..pairs {
        if oracle_pair_drifts(&shots[i], &shots[i + 1], &states[i + 1]) {
            drifting += 1;
        }
    }
    Ratio::new(drifting, pairs as u64)
}

/// PAS as the mean over shots of the mean of three indicators.
pub fn oracle_pas(shots: &[ShotDescriptor], planned: &[&PlannedShot], states: &[PedagogicalState]) -> Ratio<u64> {
    let mut sum = Ratio::new(0u64, 1);
    for (i, shot) in shots.iter().enumerate() {
        let hits = [
            shot.action_realized == planned[i].action,
            shot.phase == planned[i].phase,
            states[i].apply_action(&shot.action_realized).is_ok(),
        ]
        .iter()
        .filter(|b| **b)
        .count() as u64;
        sum += Ratio::new(hits, 3);
    }
    sum / Ratio::from_integer(shots.len() as u64)
}
