//! Deterministic fault-injecting generator.
//!
//! A clean realization shows exactly the prompt's expected entities, their
//! registered formulas and conventions, and the planned action and phase.
//! Each attempt then independently injects up to three fault classes:
//! entity drop, formula mutation and phase mismatch. Missing conditioning
//! channels scale the entity and formula probabilities up (state channel)
//! and all three probabilities up (planner channel), capped at 1.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GenerationPrompt, GeneratorBackend, ShotDescriptor, SHOT_SCHEMA};
use crate::backend::BackendError;
use crate::formula::{formulae_identical, BinaryOp, Expr, Formula};
use crate::planner::PhaseName;
use crate::state_machine::{EntityKind, PedagogicalAction};

fn default_ungrounded() -> f64 {
    2.0
}

fn default_unplanned() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockGeneratorConfig {
    pub drift_entity_drop_prob: f64,
    pub drift_formula_mutate_prob: f64,
    pub phase_mismatch_prob: f64,
    pub rng_seed: u64,
    /// Multiplier on entity/formula drift when the state channel is off.
    #[serde(default = "default_ungrounded")]
    pub ungrounded_drift_factor: f64,
    /// Multiplier on every fault class when the planner channel is off.
    #[serde(default = "default_unplanned")]
    pub unplanned_drift_factor: f64,
}

impl MockGeneratorConfig {
    pub fn clean(rng_seed: u64) -> Self {
        Self::uniform(0.0, rng_seed)
    }

    /// Same probability for all three fault classes.
    pub fn uniform(p: f64, rng_seed: u64) -> Self {
        Self {
            drift_entity_drop_prob: p,
            drift_formula_mutate_prob: p,
            phase_mismatch_prob: p,
            rng_seed,
            ungrounded_drift_factor: default_ungrounded(),
            unplanned_drift_factor: default_unplanned(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("drift_entity_drop_prob", self.drift_entity_drop_prob),
            ("drift_formula_mutate_prob", self.drift_formula_mutate_prob),
            ("phase_mismatch_prob", self.phase_mismatch_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must be within [0, 1], got {p}"));
            }
        }
        for (name, f) in [
            ("ungrounded_drift_factor", self.ungrounded_drift_factor),
            ("unplanned_drift_factor", self.unplanned_drift_factor),
        ] {
            if !(f.is_finite() && f >= 1.0) {
                return Err(format!("{name} must be a finite number >= 1, got {f}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum InjectedFault {
    EntityDrop { entity_id: String },
    FormulaMutation { original: String, mutated: String },
    PhaseMismatch { planned: PhaseName, realized: PhaseName },
}

#[derive(Debug, Clone)]
pub struct MockGenerator {
    config: MockGeneratorConfig,
}

/// Effective per-attempt probabilities after conditioning adjustments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRates {
    pub entity_drop: f64,
    pub formula_mutation: f64,
    pub phase_mismatch: f64,
}

impl MockGenerator {
    pub fn new(config: MockGeneratorConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &MockGeneratorConfig {
        &self.config
    }

    pub fn effective_rates(&self, prompt: &GenerationPrompt) -> EffectiveRates {
        let c = &self.config;
        let plan_factor = if prompt.conditioning.planner { 1.0 } else { c.unplanned_drift_factor };
        let state_factor = if prompt.conditioning.state { 1.0 } else { c.ungrounded_drift_factor };
        EffectiveRates {
            entity_drop: (c.drift_entity_drop_prob * plan_factor * state_factor).min(1.0),
            formula_mutation: (c.drift_formula_mutate_prob * plan_factor * state_factor).min(1.0),
            phase_mismatch: (c.phase_mismatch_prob * plan_factor).min(1.0),
        }
    }

    /// Generates a descriptor and reports which faults were injected.
    pub fn generate_with_faults(
        &self,
        prompt: &GenerationPrompt,
        seed: u64,
    ) -> (ShotDescriptor, Vec<InjectedFault>) {
        let rates = self.effective_rates(prompt);
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.config.rng_seed, seed));
        // all three draws happen every attempt so one class never shifts another's stream
        let roll_drop = rng.random::<f64>() < rates.entity_drop;
        let roll_mutate = rng.random::<f64>() < rates.formula_mutation;
        let roll_phase = rng.random::<f64>() < rates.phase_mismatch;

        let mut descriptor = clean_descriptor(prompt);
        let mut faults = Vec::new();

        if roll_drop {
            let candidates = drop_candidates(prompt);
            if let Some(victim) = candidates.choose(&mut rng) {
                let victim = victim.to_string();
                descriptor.entities_shown.retain(|e| *e != victim);
                descriptor.conventions_shown.remove(&victim);
                if let Some(f) = prompt
                    .expected_entities
                    .iter()
                    .find(|e| e.id == victim)
                    .and_then(|e| e.formula.as_ref())
                {
                    if let Some(pos) = descriptor.formulae_shown.iter().position(|s| s == f.source()) {
                        descriptor.formulae_shown.remove(pos);
                    }
                }
                faults.push(InjectedFault::EntityDrop { entity_id: victim });
            }
        }

        if roll_mutate && !descriptor.formulae_shown.is_empty() {
            let idx = rng.random_range(0..descriptor.formulae_shown.len());
            let known: Vec<&Formula> = prompt
                .expected_entities
                .iter()
                .chain(&prompt.state_entities)
                .filter_map(|e| e.formula.as_ref())
                .collect();
            let original = descriptor.formulae_shown[idx].clone();
            if let Ok(parsed) = Formula::parse(&original) {
                let mutated = mutate_formula(&parsed, &known).source().to_string();
                descriptor.formulae_shown[idx] = mutated.clone();
                faults.push(InjectedFault::FormulaMutation { original, mutated });
            }
        }

        if roll_phase {
            let others: Vec<PhaseName> = PhaseName::ALL.into_iter().filter(|p| *p != prompt.phase).collect();
            let realized = *others.choose(&mut rng).expect("three other phases");
            descriptor.phase = realized;
            faults.push(InjectedFault::PhaseMismatch {
                planned: prompt.phase,
                realized,
            });
        }

        if !faults.is_empty() {
            descriptor.narration.push_str(" [drifted]");
        }
        (descriptor, faults)
    }
}

impl GeneratorBackend for MockGenerator {
    fn generate(&self, prompt: &GenerationPrompt, seed: u64) -> Result<ShotDescriptor, BackendError> {
        Ok(self.generate_with_faults(prompt, seed).0)
    }
}

fn mix(rng_seed: u64, seed: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = rng_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ seed;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Expected entities that already exist before the shot: the ones whose
/// disappearance is a continuity fault.
fn drop_candidates(prompt: &GenerationPrompt) -> Vec<&str> {
    let added = prompt.planned_action.added_entity().map(|e| e.id.as_str());
    let instance = match &prompt.planned_action {
        PedagogicalAction::Apply { instance, .. } => Some(instance.id.as_str()),
        _ => None,
    };
    prompt
        .expected_entities
        .iter()
        .filter(|e| e.kind != EntityKind::ExampleInstance)
        .map(|e| e.id.as_str())
        .filter(|id| Some(*id) != added && Some(*id) != instance)
        .collect()
}

pub(crate) fn clean_descriptor(prompt: &GenerationPrompt) -> ShotDescriptor {
    ShotDescriptor {
        schema: SHOT_SCHEMA.to_string(),
        shot_id: prompt.shot_id,
        phase: prompt.phase,
        entities_shown: prompt.expected_entities.iter().map(|e| e.id.clone()).collect(),
        formulae_shown: prompt
            .expected_entities
            .iter()
            .filter_map(|e| e.formula.as_ref().map(|f| f.source().to_string()))
            .collect(),
        conventions_shown: prompt
            .expected_entities
            .iter()
            .filter_map(|e| e.convention.as_ref().map(|c| (e.id.clone(), c.clone())))
            .collect(),
        action_realized: prompt.planned_action.clone(),
        narration: format!("Shot {} ({}): {}", prompt.shot_id, prompt.phase, prompt.base_description),
        media_ref: None,
        attempt: 1,
    }
}

/// Produces a formula that is not symbol-identical to `original` or to any
/// formula in `avoid`. Tries, in order: keeping only the right operand of
/// the top-level operation on the right-hand side (a lost coefficient or
/// term), keeping only the left operand, then scaling by 2, 3, ...
pub fn mutate_formula(original: &Formula, avoid: &[&Formula]) -> Formula {
    let (wrap, target): (Box<dyn Fn(Expr) -> Expr>, &Expr) = match original.sides() {
        Some((lhs, rhs)) => {
            let lhs = lhs.clone();
            (Box::new(move |e| Expr::binary(BinaryOp::Eq, lhs.clone(), e)), rhs)
        }
        None => (Box::new(|e| e), original.ast()),
    };

    let mut candidates: Vec<Expr> = Vec::new();
    match target {
        Expr::Binary { op, lhs, rhs } if *op != BinaryOp::Eq => {
            candidates.push((**rhs).clone());
            candidates.push((**lhs).clone());
        }
        Expr::Neg(inner) => candidates.push((**inner).clone()),
        _ => {}
    }
    let fresh = |f: &Formula| {
        !formulae_identical(f, original) && avoid.iter().all(|a| !formulae_identical(f, a))
    };
    for candidate in candidates {
        let f = Formula::from_ast(wrap(candidate));
        if fresh(&f) {
            return f;
        }
    }
    let mut k = 2u64;
    loop {
        let scaled = Expr::binary(BinaryOp::Mul, target.clone(), Expr::Number(k.to_string()));
        let f = Formula::from_ast(wrap(scaled));
        if fresh(&f) {
            return f;
        }
        k += 1;
    }
}
