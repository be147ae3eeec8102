//! Synthetic annotated corpora with drift injected at known pairs.
//!
//! Each clip follows Introduce, Derive, then alternating Apply and Derive,
//! and ends with a Summarize over every entity. A clean shot shows every
//! established entity with its formula. For each pair (t, t+1) the second
//! shot independently drops one entity the first shot showed (entity drop)
//! and mutates one shown formula (formula mutation); the Level-3 items are
//! set false exactly where a fault was injected.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schema::{
    BenchPhase, ClipRecord, Manifest, PhaseSegment, ShotAnnotation, TransitionAnnotation, DATASET_SCHEMA,
};
use super::BenchError;
use crate::formula::{parse_formula, Formula};
use crate::generation::mutate_formula;
use crate::state_machine::{state_delta, validate_trace, KnowledgeEntity, PedagogicalAction, PedagogicalState, RelationLabel};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftRates {
    #[serde(default)]
    pub entity_drop: f64,
    #[serde(default)]
    pub formula_mutation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_clips: usize,
    pub shots_per_clip: usize,
    #[serde(default)]
    pub drift_rates: DriftRates,
    pub rng_seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidConfig(m));
        if self.shots_per_clip < 3 {
            return bad(format!("shots_per_clip must be at least 3, got {}", self.shots_per_clip));
        }
        for (name, p) in [
            ("entity_drop", self.drift_rates.entity_drop),
            ("formula_mutation", self.drift_rates.formula_mutation),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("drift rate {name} must be within [0, 1], got {p}"));
            }
        }
        Ok(())
    }
}

fn base_actions(shots: usize) -> Vec<PedagogicalAction> {
    let formula = |k: usize| {
        KnowledgeEntity::formula(format!("f{k}"), parse_formula(&format!("y{k}=k{k}*x{k}")).expect("valid"))
    };
    let mut actions = vec![
        PedagogicalAction::introduce(KnowledgeEntity::concept("c1", "concept 1")),
        PedagogicalAction::derive("c1", formula(1), RelationLabel::Derives),
    ];
    let (mut formulas, mut examples) = (1usize, 0usize);
    while actions.len() < shots - 1 {
        if actions.len() % 2 == 0 {
            examples += 1;
            actions.push(PedagogicalAction::apply(
                format!("f{formulas}"),
                KnowledgeEntity::example(format!("ex{examples}"), format!("example {examples}")),
            ));
        } else {
            formulas += 1;
            actions.push(PedagogicalAction::derive(format!("f{}", formulas - 1), formula(formulas), RelationLabel::Derives));
        }
    }
    let mut all: Vec<String> = vec!["c1".into()];
    all.extend((1..=formulas).map(|k| format!("f{k}")));
    actions.push(PedagogicalAction::summarize(all));
    actions
}

fn bench_phase(action: &PedagogicalAction) -> BenchPhase {
    match action {
        PedagogicalAction::Introduce { .. } => BenchPhase::PhenomenonIntroduction,
        PedagogicalAction::Derive { .. } => BenchPhase::FormalDerivation,
        PedagogicalAction::Apply { .. } => BenchPhase::ExampleApplication,
        PedagogicalAction::Summarize { .. } => BenchPhase::Summary,
    }
}

/// Entities and formulas a clean shot shows after reaching `state`.
fn clean_shot(shot_id: u32, action: &PedagogicalAction, state: &PedagogicalState) -> ShotAnnotation {
    let mut entities: Vec<String> = state.entity_ids().map(str::to_string).collect();
    if let PedagogicalAction::Apply { instance, .. } = action {
        entities.push(instance.id.clone());
    }
    let formulae = state
        .entities()
        .filter_map(|e| e.formula.as_ref().map(|f| f.source().to_string()))
        .collect();
    ShotAnnotation {
        shot_id,
        action_tag: action.clone(),
        entities_present: entities,
        formulae,
        verified: None,
    }
}

fn synth_clip(index: usize, config: &SynthConfig, rng: &mut ChaCha8Rng) -> ClipRecord {
    let actions = base_actions(config.shots_per_clip);
    let states = validate_trace(&PedagogicalState::empty(), &actions).expect("base actions replay");
    let all_formulas: Vec<Formula> = states
        .last()
        .expect("nonempty")
        .entities()
        .filter_map(|e| e.formula.clone())
        .collect();
    let avoid: Vec<&Formula> = all_formulas.iter().collect();

    let mut level2: Vec<ShotAnnotation> = actions
        .iter()
        .enumerate()
        .map(|(i, a)| clean_shot(i as u32 + 1, a, &states[i + 1]))
        .collect();
    let mut level3 = Vec::with_capacity(actions.len() - 1);

    for t in 1..level2.len() {
        // draw both classes every pair so rates stay independent
        let roll_drop = rng.random::<f64>() < config.drift_rates.entity_drop;
        let roll_mutate = rng.random::<f64>() < config.drift_rates.formula_mutation;
        let pre = &states[t];
        let mut dropped = false;
        let mut mutated = false;

        if roll_drop {
            let candidates: Vec<String> = level2[t - 1]
                .entities_present
                .iter()
                .filter(|id| pre.contains_entity(id) && level2[t].entities_present.contains(id))
                .cloned()
                .collect();
            if let Some(victim) = candidates.choose(rng) {
                let shot = &mut level2[t];
                shot.entities_present.retain(|e| e != victim);
                if let Some(f) = pre.entity(victim).and_then(|e| e.formula.as_ref()) {
                    shot.formulae.retain(|s| s != f.source());
                }
                dropped = true;
            }
        }
        if roll_mutate && !level2[t].formulae.is_empty() {
            let shot = &mut level2[t];
            let idx = rng.random_range(0..shot.formulae.len());
            let original = parse_formula(&shot.formulae[idx]).expect("clean formulas parse");
            shot.formulae[idx] = mutate_formula(&original, &avoid).source().to_string();
            mutated = true;
        }

        level3.push(TransitionAnnotation {
            pair: [t as u32, t as u32 + 1],
            delta: state_delta(&states[t], &states[t + 1]).expect("consecutive states"),
            entity_continuity: !dropped,
            formula_symbol_matching: !mutated,
            logical_ordering: true,
        });
    }

    let duration_s = (rng.random_range(300..=900) as f64) / 10.0;
    let per_shot = duration_s / actions.len() as f64;
    let mut level1: Vec<PhaseSegment> = Vec::new();
    for (i, action) in actions.iter().enumerate() {
        let phase = bench_phase(action);
        let end_s = if i + 1 == actions.len() { duration_s } else { per_shot * (i + 1) as f64 };
        match level1.last_mut() {
            Some(seg) if seg.phase == phase => seg.end_s = end_s,
            _ => level1.push(PhaseSegment {
                phase,
                start_s: per_shot * i as f64,
                end_s,
            }),
        }
    }

    ClipRecord {
        schema: DATASET_SCHEMA.to_string(),
        clip_id: format!("synth_{index:05}"),
        source: "synthetic".into(),
        duration_s,
        constraints: Vec::new(),
        level1,
        level2,
        level3,
    }
}

/// Generates the clips in memory; deterministic per config.
pub fn synth_clips(config: &SynthConfig) -> Result<Vec<ClipRecord>, BenchError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    Ok((0..config.n_clips).map(|i| synth_clip(i, config, &mut rng)).collect())
}

/// Writes `manifest.json` and `clips/*.json` under `out_dir` and returns
/// the manifest path.
pub fn synth_corpus(config: &SynthConfig, out_dir: &Path) -> Result<PathBuf, BenchError> {
    let clips = synth_clips(config)?;
    let io = |path: &Path, e: std::io::Error| BenchError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let clip_dir = out_dir.join("clips");
    fs::create_dir_all(&clip_dir).map_err(|e| io(&clip_dir, e))?;
    let mut names = Vec::with_capacity(clips.len());
    for clip in &clips {
        let name = format!("clips/{}.json", clip.clip_id);
        let path = out_dir.join(&name);
        let mut json = serde_json::to_string_pretty(clip).expect("clip serializes");
        json.push('\n');
        fs::write(&path, json).map_err(|e| io(&path, e))?;
        names.push(name);
    }
    let manifest = Manifest {
        schema: DATASET_SCHEMA.to_string(),
        clips: names,
    };
    let path = out_dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&path, json).map_err(|e| io(&path, e))?;
    Ok(path)
}
