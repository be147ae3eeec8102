//! Three-level clip annotation schema ("eduvideobench_v1").

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::planner::PhaseName;
use crate::state_machine::{Constraint, PedagogicalAction, StateDelta};

pub const DATASET_SCHEMA: &str = "eduvideobench_v1";

fn dataset_schema() -> String {
    DATASET_SCHEMA.to_string()
}

/// The five annotated lecture phases of a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchPhase {
    PhenomenonIntroduction,
    HypothesisFormulation,
    FormalDerivation,
    ExampleApplication,
    Summary,
}

impl BenchPhase {
    pub const ALL: [BenchPhase; 5] = [
        BenchPhase::PhenomenonIntroduction,
        BenchPhase::HypothesisFormulation,
        BenchPhase::FormalDerivation,
        BenchPhase::ExampleApplication,
        BenchPhase::Summary,
    ];
}

/// Maps annotated phases onto planner phases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseMapping(pub BTreeMap<BenchPhase, PhaseName>);

impl Default for PhaseMapping {
    fn default() -> Self {
        PhaseMapping(BTreeMap::from([
            (BenchPhase::PhenomenonIntroduction, PhaseName::Introduction),
            (BenchPhase::HypothesisFormulation, PhaseName::Explanation),
            (BenchPhase::FormalDerivation, PhaseName::Explanation),
            (BenchPhase::ExampleApplication, PhaseName::Application),
            (BenchPhase::Summary, PhaseName::Summary),
        ]))
    }
}

impl PhaseMapping {
    pub fn get(&self, phase: BenchPhase) -> Option<PhaseName> {
        self.0.get(&phase).copied()
    }

    /// True when every annotated phase maps somewhere.
    pub fn is_total(&self) -> bool {
        BenchPhase::ALL.iter().all(|p| self.0.contains_key(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSegment {
    pub phase: BenchPhase,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotAnnotation {
    pub shot_id: u32,
    pub action_tag: PedagogicalAction,
    pub entities_present: Vec<String>,
    pub formulae: Vec<String>,
    /// Optional stored verdict of an external formula check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verified: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionAnnotation {
    pub pair: [u32; 2],
    pub delta: StateDelta,
    pub entity_continuity: bool,
    pub formula_symbol_matching: bool,
    pub logical_ordering: bool,
}

impl TransitionAnnotation {
    /// A pair drifts when any preservation item fails.
    pub fn drifts(&self) -> bool {
        !(self.entity_continuity && self.formula_symbol_matching && self.logical_ordering)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipRecord {
    #[serde(default = "dataset_schema")]
    pub schema: String,
    pub clip_id: String,
    pub source: String,
    pub duration_s: f64,
    /// Constraint list the clip's states carry; usually empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<Constraint>,
    pub level1: Vec<PhaseSegment>,
    pub level2: Vec<ShotAnnotation>,
    pub level3: Vec<TransitionAnnotation>,
}

impl ClipRecord {
    pub fn shot_count(&self) -> usize {
        self.level2.len()
    }
}

/// Dataset manifest: clip file paths relative to the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: String,
    pub clips: Vec<String>,
}
