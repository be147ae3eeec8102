//! Constraint verifier: a conjunction of per-constraint checks over a shot
//! descriptor, evaluated against the state before the shot.

mod checks;
pub mod judge;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::formula::DimensionTable;
use crate::generation::ShotDescriptor;
use crate::planner::PlannedShot;
use crate::state_machine::{Constraint, ConstraintKind, PedagogicalState};

pub use judge::{
    parse_alignment_report, parse_drift_report, render_alignment_prompt, render_drift_prompt,
    vlm_alignment_check, vlm_drift_check, AlignmentReport, CannedJudge, DriftReport, JudgeError,
    JudgeInput, JudgeVerifier, PAS_PROMPT_TEMPLATE, KDR_PROMPT_TEMPLATE,
};

/// Machine-readable description of a failed check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Violation {
    pub kind: ConstraintKind,
    pub message: String,
    /// Offending entity ids, formula strings or phase names.
    pub offending: Vec<String>,
}

impl Violation {
    pub fn new(kind: ConstraintKind, message: impl Into<String>, offending: Vec<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            offending,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckResult {
    pub constraint_id: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<Violation>,
}

impl CheckResult {
    pub fn pass(constraint_id: impl Into<String>) -> Self {
        Self {
            constraint_id: constraint_id.into(),
            passed: true,
            violation: None,
        }
    }

    pub fn fail(constraint_id: impl Into<String>, violation: Violation) -> Self {
        Self {
            constraint_id: constraint_id.into(),
            passed: false,
            violation: Some(violation),
        }
    }

    fn from_outcome(constraint_id: &str, outcome: Option<Violation>) -> Self {
        match outcome {
            None => Self::pass(constraint_id),
            Some(v) => Self::fail(constraint_id, v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierReport {
    pub shot_id: u32,
    pub results: Vec<CheckResult>,
    pub verdict: bool,
}

impl VerifierReport {
    pub fn new(shot_id: u32, results: Vec<CheckResult>) -> Self {
        let verdict = results.iter().all(|r| r.passed);
        Self {
            shot_id,
            results,
            verdict,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        self.results
            .iter()
            .filter_map(|r| r.violation.as_ref().map(ToString::to_string))
            .collect()
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| !r.passed)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("no checker registered for constraint `{constraint_id}` ({detail})")]
    UnknownConstraintKind { constraint_id: String, detail: String },
    #[error("constraint `{0}` needs a dimension table (`dimensions` or `dimension_table` param)")]
    MissingDimensionTable(String),
    #[error("constraint `{constraint_id}`: bad dimension table: {message}")]
    BadDimensionTable { constraint_id: String, message: String },
    #[error("judge failed: {0}")]
    Judge(#[from] JudgeError),
}

/// Everything a checker may look at.
#[derive(Debug, Clone, Copy)]
pub struct CheckContext<'a> {
    pub shot: &'a ShotDescriptor,
    pub planned: &'a PlannedShot,
    /// The state before the shot.
    pub state: &'a PedagogicalState,
}

/// Plugin for constraints of kind `custom`, selected by the constraint's
/// `checker` param. Returns `None` when the shot passes.
pub trait CustomChecker: Send + Sync {
    fn check(&self, ctx: &CheckContext<'_>, constraint: &Constraint) -> Option<Violation>;
}

/// V: runs checks for a shot and folds them into a verdict.
pub trait ShotVerifier: Send + Sync {
    fn verify(
        &self,
        shot: &ShotDescriptor,
        planned: &PlannedShot,
        constraints: &[Constraint],
        state: &PedagogicalState,
    ) -> Result<VerifierReport, VerifyError>;
}

/// Deterministic checkers for every built-in constraint kind, plus
/// registered `custom` plugins.
#[derive(Default)]
pub struct ConstraintVerifier {
    plugins: BTreeMap<String, Arc<dyn CustomChecker>>,
    tables: Mutex<HashMap<String, Arc<DimensionTable>>>,
}

impl fmt::Debug for ConstraintVerifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintVerifier")
            .field("plugins", &self.plugins.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl ConstraintVerifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_plugin(mut self, name: impl Into<String>, plugin: Arc<dyn CustomChecker>) -> Self {
        self.plugins.insert(name.into(), plugin);
        self
    }

    pub fn check_constraint(
        &self,
        ctx: &CheckContext<'_>,
        constraint: &Constraint,
    ) -> Result<CheckResult, VerifyError> {
        let outcome = match constraint.kind {
            ConstraintKind::EntityContinuity => checks::entity_continuity(ctx),
            ConstraintKind::FormulaIdentity => checks::formula_identity(ctx),
            ConstraintKind::LogicalOrdering => checks::logical_ordering(ctx),
            ConstraintKind::DirectionalConvention => checks::directional_convention(ctx),
            ConstraintKind::EquationBalance | ConstraintKind::UnitConsistency => {
                let table = self.dimension_table(constraint)?;
                checks::dimensional(ctx, constraint.kind, &table)
            }
            ConstraintKind::Custom => {
                let name = constraint.params.get("checker").and_then(|v| v.as_str());
                let plugin = name.and_then(|n| self.plugins.get(n)).ok_or_else(|| {
                    VerifyError::UnknownConstraintKind {
                        constraint_id: constraint.id.clone(),
                        detail: match name {
                            Some(n) => format!("custom checker `{n}` is not registered"),
                            None => "custom constraint without a `checker` param".to_string(),
                        },
                    }
                })?;
                plugin.check(ctx, constraint)
            }
        };
        Ok(CheckResult::from_outcome(&constraint.id, outcome))
    }

    fn dimension_table(&self, constraint: &Constraint) -> Result<Arc<DimensionTable>, VerifyError> {
        let bad = |message: String| VerifyError::BadDimensionTable {
            constraint_id: constraint.id.clone(),
            message,
        };
        if let Some(inline) = constraint.params.get("dimensions") {
            return serde_json::from_value::<DimensionTable>(inline.clone())
                .map(Arc::new)
                .map_err(|e| bad(e.to_string()));
        }
        let Some(path) = constraint.params.get("dimension_table") else {
            return Err(VerifyError::MissingDimensionTable(constraint.id.clone()));
        };
        let path = path
            .as_str()
            .ok_or_else(|| bad("`dimension_table` must be a path string".into()))?;
        let mut cache = self.tables.lock().expect("table cache poisoned");
        if let Some(table) = cache.get(path) {
            return Ok(Arc::clone(table));
        }
        let table = Arc::new(DimensionTable::load(path.as_ref()).map_err(|e| bad(e.to_string()))?);
        cache.insert(path.to_string(), Arc::clone(&table));
        Ok(table)
    }
}

impl ShotVerifier for ConstraintVerifier {
    fn verify(
        &self,
        shot: &ShotDescriptor,
        planned: &PlannedShot,
        constraints: &[Constraint],
        state: &PedagogicalState,
    ) -> Result<VerifierReport, VerifyError> {
        let ctx = CheckContext { shot, planned, state };
        let results = constraints
            .iter()
            .map(|c| self.check_constraint(&ctx, c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VerifierReport::new(shot.shot_id, results))
    }
}

/// Runs the built-in checkers in constraint order.
pub fn verify(
    shot: &ShotDescriptor,
    planned: &PlannedShot,
    constraints: &[Constraint],
    state: &PedagogicalState,
) -> Result<VerifierReport, VerifyError> {
    ConstraintVerifier::new().verify(shot, planned, constraints, state)
}

pub fn check_constraint(
    shot: &ShotDescriptor,
    planned: &PlannedShot,
    constraint: &Constraint,
    state: &PedagogicalState,
) -> Result<CheckResult, VerifyError> {
    ConstraintVerifier::new().check_constraint(&CheckContext { shot, planned, state }, constraint)
}
