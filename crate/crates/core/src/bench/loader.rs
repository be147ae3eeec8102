//! Manifest loading, clip validation and descriptor reconstruction.

use std::fs;
use std::path::Path;

use num_rational::Ratio;
use serde::Serialize;

use super::schema::{ClipRecord, Manifest, DATASET_SCHEMA};
use super::BenchError;
use crate::formula::Formula;
use crate::generation::{ShotDescriptor, SHOT_SCHEMA};
use crate::planner::PhaseName;
use crate::state_machine::{state_delta, validate_trace, PedagogicalAction, PedagogicalState};

pub const MIN_DURATION_S: f64 = 30.0;
pub const MAX_DURATION_S: f64 = 90.0;
pub const MIN_SHOTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub clip_id: String,
    /// Field path inside the clip record, e.g. `level2[3].formulae[0]`.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub clips: Vec<ClipRecord>,
    pub warnings: Vec<Issue>,
}

/// Loads every clip in the manifest. Soft expectations (duration, shot
/// count, delta annotations) produce warnings; the first hard error aborts.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, BenchError> {
    let text = fs::read_to_string(manifest_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => BenchError::ManifestNotFound(manifest_path.to_path_buf()),
        _ => BenchError::Io {
            path: manifest_path.to_path_buf(),
            message: e.to_string(),
        },
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| BenchError::SchemaViolation {
        clip_id: String::new(),
        path: "manifest".into(),
        message: e.to_string(),
    })?;
    if manifest.schema != DATASET_SCHEMA {
        return Err(BenchError::SchemaViolation {
            clip_id: String::new(),
            path: "manifest.schema".into(),
            message: format!("expected `{DATASET_SCHEMA}`, found `{}`", manifest.schema),
        });
    }
    let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();

    let mut clips = Vec::with_capacity(manifest.clips.len());
    let mut warnings = Vec::new();
    for (i, rel) in manifest.clips.iter().enumerate() {
        let path = base.join(rel);
        let text = fs::read_to_string(&path).map_err(|e| BenchError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let clip: ClipRecord = serde_json::from_str(&text).map_err(|e| BenchError::SchemaViolation {
            clip_id: rel.clone(),
            path: format!("clips[{i}]"),
            message: e.to_string(),
        })?;
        for issue in validate_clip(&clip) {
            match issue.severity {
                Severity::Error => {
                    return Err(BenchError::SchemaViolation {
                        clip_id: issue.clip_id,
                        path: issue.path,
                        message: issue.message,
                    })
                }
                Severity::Warning => warnings.push(issue),
            }
        }
        clips.push(clip);
    }
    Ok(Dataset { clips, warnings })
}

/// All invariant violations of one clip.
pub fn validate_clip(clip: &ClipRecord) -> Vec<Issue> {
    let mut issues = Vec::new();
    let mut push = |severity, path: String, message: String| {
        issues.push(Issue {
            severity,
            clip_id: clip.clip_id.clone(),
            path,
            message,
        })
    };
    use Severity::{Error, Warning};

    if clip.schema != DATASET_SCHEMA {
        push(Error, "schema".into(), format!("expected `{DATASET_SCHEMA}`"));
    }
    if clip.clip_id.is_empty() {
        push(Error, "clip_id".into(), "must not be empty".into());
    }
    if !(MIN_DURATION_S..=MAX_DURATION_S).contains(&clip.duration_s) {
        push(
            Warning,
            "duration_s".into(),
            format!("{} s is outside the expected {MIN_DURATION_S}-{MAX_DURATION_S} s", clip.duration_s),
        );
    }
    if clip.level2.len() < MIN_SHOTS {
        push(Warning, "level2".into(), format!("{} shots; at least {MIN_SHOTS} expected", clip.level2.len()));
    }

    let mut previous_end = 0.0f64;
    for (i, seg) in clip.level1.iter().enumerate() {
        if !(seg.start_s >= 0.0 && seg.start_s < seg.end_s) {
            push(Error, format!("level1[{i}]"), format!("needs 0 <= start_s < end_s, got {}..{}", seg.start_s, seg.end_s));
        } else if seg.start_s < previous_end {
            push(Error, format!("level1[{i}].start_s"), "segments overlap or are out of order".into());
        }
        previous_end = previous_end.max(seg.end_s);
    }

    for (i, shot) in clip.level2.iter().enumerate() {
        if shot.shot_id as usize != i + 1 {
            push(Error, format!("level2[{i}].shot_id"), format!("expected {}, found {}", i + 1, shot.shot_id));
        }
        for (j, f) in shot.formulae.iter().enumerate() {
            if let Err(e) = Formula::parse(f) {
                push(Error, format!("level2[{i}].formulae[{j}]"), format!("`{f}` does not parse: {e}"));
            }
        }
    }

    if clip.level3.len() + 1 != clip.level2.len() {
        push(
            Error,
            "level3".into(),
            format!("{} transitions for {} shots; expected one fewer than shots", clip.level3.len(), clip.level2.len()),
        );
    }
    for (i, tr) in clip.level3.iter().enumerate() {
        let expected = [i as u32 + 1, i as u32 + 2];
        if tr.pair != expected {
            push(Error, format!("level3[{i}].pair"), format!("expected {expected:?}, found {:?}", tr.pair));
        }
    }

    match replay(clip) {
        Err(e) => push(Error, format!("level2[{}].action_tag", e.step), e.source.to_string()),
        Ok(states) => {
            for (i, tr) in clip.level3.iter().enumerate() {
                if let (Some(before), Some(after)) = (states.get(i + 1), states.get(i + 2)) {
                    if state_delta(before, after).ok().as_ref() != Some(&tr.delta) {
                        push(Warning, format!("level3[{i}].delta"), "does not match the replayed actions".into());
                    }
                }
            }
        }
    }
    issues
}

fn replay(clip: &ClipRecord) -> Result<Vec<PedagogicalState>, crate::state_machine::TraceError> {
    let actions: Vec<PedagogicalAction> = clip.level2.iter().map(|s| s.action_tag.clone()).collect();
    validate_trace(&PedagogicalState::new(clip.constraints.clone()), &actions)
}

/// KDR from the Level-3 checklist: a pair drifts when any item is false.
pub fn ground_truth_kdr(clip: &ClipRecord) -> Result<Ratio<u64>, BenchError> {
    if clip.level2.len() < 2 {
        return Err(BenchError::TooFewShots(clip.level2.len()));
    }
    let drifting = clip.level3.iter().filter(|t| t.drifts()).count() as u64;
    Ok(Ratio::new(drifting, clip.level2.len() as u64 - 1))
}

pub fn phase_of(action: &PedagogicalAction) -> PhaseName {
    match action {
        PedagogicalAction::Introduce { .. } => PhaseName::Introduction,
        PedagogicalAction::Derive { .. } => PhaseName::Explanation,
        PedagogicalAction::Apply { .. } => PhaseName::Application,
        PedagogicalAction::Summarize { .. } => PhaseName::Summary,
    }
}

/// Descriptors from the Level-2 annotations and the state trajectory from
/// replaying their actions.
pub fn reconstruct(clip: &ClipRecord) -> Result<(Vec<ShotDescriptor>, Vec<PedagogicalState>), BenchError> {
    let states = replay(clip).map_err(|e| BenchError::SchemaViolation {
        clip_id: clip.clip_id.clone(),
        path: format!("level2[{}].action_tag", e.step),
        message: e.source.to_string(),
    })?;
    let shots = clip
        .level2
        .iter()
        .map(|s| ShotDescriptor {
            schema: SHOT_SCHEMA.to_string(),
            shot_id: s.shot_id,
            phase: phase_of(&s.action_tag),
            entities_shown: s.entities_present.clone(),
            formulae_shown: s.formulae.clone(),
            conventions_shown: Default::default(),
            action_realized: s.action_tag.clone(),
            narration: String::new(),
            media_ref: None,
            attempt: 1,
        })
        .collect();
    Ok((shots, states))
}
