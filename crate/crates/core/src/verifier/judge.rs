//! VLM judge client: renders the two evaluation prompts and parses the
//! judge's JSON replies strictly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{CheckResult, ShotVerifier, VerifierReport, VerifyError, Violation};
use crate::backend::{BackendError, JudgeBackend};
use crate::generation::ShotDescriptor;
use crate::jsonx::json_payload;
use crate::planner::PlannedShot;
use crate::state_machine::{Constraint, ConstraintKind, KnowledgeEntity, PedagogicalState};

pub const KDR_PROMPT_TEMPLATE: &str = include_str!("../../resources/kdr_prompt_v1.txt");
pub const PAS_PROMPT_TEMPLATE: &str = include_str!("../../resources/pas_prompt_v1.txt");

/// Constraint id under which [`JudgeVerifier`] records its verdict.
pub const JUDGE_CHECK_ID: &str = "vlm_drift";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftReport {
    pub entities_preserved: bool,
    pub entities_incorrectly_modified: Vec<String>,
    pub unexplained_new_entities: Vec<String>,
    pub drift_detected: bool,
    pub drift_severity: u8,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentReport {
    pub action_matched: bool,
    pub phase_appropriate: bool,
    pub logical_continuity: bool,
    pub alignment_score: f64,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JudgeError {
    #[error("judge backend failed: {0}")]
    Backend(#[from] BackendError),
    #[error("malformed judge response ({reason}): {raw}")]
    MalformedJudgeResponse { raw: String, reason: String },
}

/// What the judge looks at: a descriptor serialized into the prompt, or a
/// frame handle passed alongside it.
#[derive(Debug, Clone, Copy)]
pub enum JudgeInput<'a> {
    Descriptor(&'a ShotDescriptor),
    Frame(&'a str),
}

impl JudgeInput<'_> {
    fn attach(&self, prompt: String) -> (String, Option<String>) {
        match self {
            JudgeInput::Descriptor(d) => {
                let json = serde_json::to_string(d).expect("descriptor serializes");
                (
                    format!("{prompt}\nShot descriptor (in place of the video frame):\n{json}\n"),
                    None,
                )
            }
            JudgeInput::Frame(handle) => (prompt, Some(handle.to_string())),
        }
    }
}

/// Single left-to-right pass; substituted text is never rescanned.
fn fill(template: &str, substitutions: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'scan: while !rest.is_empty() {
        for (key, value) in substitutions {
            if let Some(after) = rest.strip_prefix(key) {
                out.push_str(value);
                rest = after;
                continue 'scan;
            }
        }
        let ch = rest.chars().next().expect("nonempty");
        out.push(ch);
        rest = &rest[ch.len_utf8()..];
    }
    out
}

/// The drift prompt for a shot following `prev_state`. Returns the prompt
/// text and the media handle, if any.
pub fn render_drift_prompt(prev_state: &PedagogicalState, input: JudgeInput<'_>) -> (String, Option<String>) {
    let entities: Vec<&KnowledgeEntity> = prev_state.entities().collect();
    let entities = serde_json::to_string(&entities).expect("entities serialize");
    let state = prev_state.to_canonical_json();
    input.attach(fill(KDR_PROMPT_TEMPLATE, &[("[E_t]", &entities), ("[S_t]", &state)]))
}

pub fn render_alignment_prompt(
    planned: &PlannedShot,
    total: usize,
    input: JudgeInput<'_>,
) -> (String, Option<String>) {
    let text = fill(
        PAS_PROMPT_TEMPLATE,
        &[
            ("[shot_id]", &planned.shot_id.to_string()),
            ("[total]", &total.to_string()),
            ("[phase]", planned.phase.as_str()),
            ("[action]", &planned.action.to_string()),
            ("[description]", &planned.description),
        ],
    );
    input.attach(text)
}

pub fn parse_drift_report(text: &str) -> Result<DriftReport, String> {
    let report: DriftReport = serde_json::from_str(json_payload(text)).map_err(|e| e.to_string())?;
    if report.drift_severity > 3 {
        return Err(format!("drift_severity {} is outside 0-3", report.drift_severity));
    }
    if report.drift_detected != (report.drift_severity > 0) {
        return Err(format!(
            "drift_severity {} contradicts drift_detected {}",
            report.drift_severity, report.drift_detected
        ));
    }
    Ok(report)
}

pub fn parse_alignment_report(text: &str) -> Result<AlignmentReport, String> {
    let report: AlignmentReport = serde_json::from_str(json_payload(text)).map_err(|e| e.to_string())?;
    if !(0.0..=1.0).contains(&report.alignment_score) {
        return Err(format!("alignment_score {} is outside [0, 1]", report.alignment_score));
    }
    Ok(report)
}

/// Sends the prompt; on an unparseable reply, re-prompts once with the
/// parse error appended.
fn ask<T>(
    client: &dyn JudgeBackend,
    prompt: &str,
    media_ref: Option<&str>,
    parse: fn(&str) -> Result<T, String>,
) -> Result<T, JudgeError> {
    let raw = client.judge(prompt, media_ref)?;
    let reason = match parse(&raw) {
        Ok(report) => return Ok(report),
        Err(reason) => reason,
    };
    let retry = format!(
        "{prompt}\nYour previous response could not be parsed: {reason}\nRespond only with the JSON object described above.\n"
    );
    let raw = client.judge(&retry, media_ref)?;
    parse(&raw).map_err(|reason| JudgeError::MalformedJudgeResponse { raw, reason })
}

pub fn vlm_drift_check(
    prev_state: &PedagogicalState,
    input: JudgeInput<'_>,
    client: &dyn JudgeBackend,
) -> Result<DriftReport, JudgeError> {
    let (prompt, media) = render_drift_prompt(prev_state, input);
    ask(client, &prompt, media.as_deref(), parse_drift_report)
}

pub fn vlm_alignment_check(
    planned: &PlannedShot,
    total: usize,
    input: JudgeInput<'_>,
    client: &dyn JudgeBackend,
) -> Result<AlignmentReport, JudgeError> {
    let (prompt, media) = render_alignment_prompt(planned, total, input);
    ask(client, &prompt, media.as_deref(), parse_alignment_report)
}

/// Adds a judge drift verdict to an inner verifier's report. Shots with a
/// `media_ref` are judged by frame handle, others by descriptor.
pub struct JudgeVerifier<V> {
    inner: V,
    client: Arc<dyn JudgeBackend>,
}

impl<V: ShotVerifier> JudgeVerifier<V> {
    pub fn new(inner: V, client: Arc<dyn JudgeBackend>) -> Self {
        Self { inner, client }
    }
}

impl<V: ShotVerifier> ShotVerifier for JudgeVerifier<V> {
    fn verify(
        &self,
        shot: &ShotDescriptor,
        planned: &PlannedShot,
        constraints: &[Constraint],
        state: &PedagogicalState,
    ) -> Result<VerifierReport, VerifyError> {
        let mut report = self.inner.verify(shot, planned, constraints, state)?;
        let input = match &shot.media_ref {
            Some(handle) => JudgeInput::Frame(handle),
            None => JudgeInput::Descriptor(shot),
        };
        let drift = vlm_drift_check(state, input, self.client.as_ref())?;
        let result = if drift.drift_detected {
            let offending = drift
                .entities_incorrectly_modified
                .iter()
                .chain(&drift.unexplained_new_entities)
                .cloned()
                .collect();
            CheckResult::fail(
                JUDGE_CHECK_ID,
                Violation::new(
                    ConstraintKind::Custom,
                    format!("judge reports drift (severity {}): {}", drift.drift_severity, drift.explanation),
                    offending,
                ),
            )
        } else {
            CheckResult::pass(JUDGE_CHECK_ID)
        };
        report.results.push(result);
        Ok(VerifierReport::new(report.shot_id, report.results))
    }
}

/// Offline judge with fixed replies, routed by which prompt it receives.
#[derive(Debug, Clone)]
pub struct CannedJudge {
    pub drift_reply: String,
    pub alignment_reply: String,
}

impl CannedJudge {
    /// No drift and perfect alignment for every shot.
    pub fn clean() -> Self {
        Self {
            drift_reply: serde_json::to_string(&DriftReport {
                entities_preserved: true,
                entities_incorrectly_modified: vec![],
                unexplained_new_entities: vec![],
                drift_detected: false,
                drift_severity: 0,
                explanation: "All established entities are preserved.".into(),
            })
            .expect("serializes"),
            alignment_reply: serde_json::to_string(&AlignmentReport {
                action_matched: true,
                phase_appropriate: true,
                logical_continuity: true,
                alignment_score: 1.0,
                explanation: "The shot follows its plan.".into(),
            })
            .expect("serializes"),
        }
    }
}

impl JudgeBackend for CannedJudge {
    fn judge(&self, prompt: &str, _media_ref: Option<&str>) -> Result<String, BackendError> {
        let drift_head = KDR_PROMPT_TEMPLATE.lines().next().unwrap_or_default();
        if prompt.starts_with(drift_head) {
            Ok(self.drift_reply.clone())
        } else {
            Ok(self.alignment_reply.clone())
        }
    }
}
