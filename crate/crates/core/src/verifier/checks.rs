//! Built-in checkers. Each returns `None` on pass.

use crate::formula::{check_dimension, formulae_identical, DimensionOutcome, DimensionTable, Formula};
use crate::state_machine::{ConstraintKind, EntityKind};

use super::{CheckContext, Violation};

fn quoted(items: &[String]) -> String {
    items.iter().map(|s| format!("`{s}`")).collect::<Vec<_>>().join(", ")
}

/// Every expected entity that already exists must be shown.
pub(super) fn entity_continuity(ctx: &CheckContext<'_>) -> Option<Violation> {
    let missing: Vec<String> = ctx
        .planned
        .expected_entities
        .iter()
        .filter(|id| ctx.state.contains_entity(id) && !ctx.shot.shows(id))
        .cloned()
        .collect();
    (!missing.is_empty()).then(|| {
        Violation::new(
            ConstraintKind::EntityContinuity,
            format!("established entities missing from shot: {}", quoted(&missing)),
            missing,
        )
    })
}

/// Formula entities the shot may legitimately display: those in the state
/// plus the one the planned action introduces.
fn known_formulas<'a>(ctx: &CheckContext<'a>) -> Vec<(&'a str, &'a Formula)> {
    ctx.state
        .entities()
        .chain(ctx.planned.action.added_entity())
        .filter_map(|e| e.formula.as_ref().map(|f| (e.id.as_str(), f)))
        .collect()
}

/// Every registered formula the shot lists must be shown in its registered
/// form, and every shown formula must be a registered one.
pub(super) fn formula_identity(ctx: &CheckContext<'_>) -> Option<Violation> {
    let known = known_formulas(ctx);
    let mut problems = Vec::new();
    let mut offending = Vec::new();
    let mut shown = Vec::new();

    for text in &ctx.shot.formulae_shown {
        match Formula::parse(text) {
            Ok(f) => shown.push(f),
            Err(e) => {
                problems.push(format!("unparseable formula `{text}` ({e})"));
                offending.push(text.clone());
            }
        }
    }

    for (id, registered) in &known {
        if ctx.shot.shows(id) && !shown.iter().any(|s| formulae_identical(s, registered)) {
            problems.push(format!(
                "formula mismatch: `{id}` is registered as `{registered}` but not shown in that form"
            ));
            offending.push(registered.source().to_string());
        }
    }

    for s in &shown {
        if !known.iter().any(|(_, k)| formulae_identical(s, k)) {
            let registered: Vec<String> = known.iter().map(|(_, k)| k.source().to_string()).collect();
            problems.push(format!(
                "formula mismatch: shown `{s}` matches no registered formula (registered: {})",
                if registered.is_empty() { "none".to_string() } else { quoted(&registered) }
            ));
            offending.push(s.source().to_string());
        }
    }

    (!problems.is_empty())
        .then(|| Violation::new(ConstraintKind::FormulaIdentity, problems.join("; "), offending))
}

/// Shown formulas must be dimensionally well formed; equations must balance.
pub(super) fn dimensional(
    ctx: &CheckContext<'_>,
    kind: ConstraintKind,
    table: &DimensionTable,
) -> Option<Violation> {
    let mut problems = Vec::new();
    let mut offending = Vec::new();
    for text in &ctx.shot.formulae_shown {
        let problem = match Formula::parse(text) {
            Err(e) => Some(format!("unparseable formula `{text}` ({e})")),
            Ok(f) => match check_dimension(&f, table) {
                Err(e) => Some(format!("`{text}`: {e}")),
                Ok(DimensionOutcome::Equation(v)) if !v.balanced => {
                    Some(format!("`{text}` is unbalanced: {} vs {}", v.lhs, v.rhs))
                }
                Ok(_) => None,
            },
        };
        if let Some(p) = problem {
            problems.push(p);
            offending.push(text.clone());
        }
    }
    if kind == ConstraintKind::UnitConsistency {
        // declared quantity units must agree with the table
        for id in &ctx.shot.entities_shown {
            let Some(entity) = ctx.state.lookup(id).or_else(|| {
                ctx.planned.action.added_entity().filter(|e| &e.id == id)
            }) else {
                continue;
            };
            if let (EntityKind::Quantity, Some(unit), Some(expected)) =
                (entity.kind, entity.unit, table.get(id))
            {
                if unit != expected {
                    problems.push(format!("quantity `{id}` declares {unit} but the table says {expected}"));
                    offending.push(id.clone());
                }
            }
        }
    }
    (!problems.is_empty()).then(|| Violation::new(kind, problems.join("; "), offending))
}

/// The realized action must be the planned one, in the planned phase, with
/// its prerequisites met by the state.
pub(super) fn logical_ordering(ctx: &CheckContext<'_>) -> Option<Violation> {
    let mut problems = Vec::new();
    let mut offending = Vec::new();
    if ctx.shot.action_realized != ctx.planned.action {
        problems.push(format!(
            "realized {} but planned {}",
            ctx.shot.action_realized, ctx.planned.action
        ));
        offending.push(ctx.shot.action_realized.to_string());
    }
    if ctx.shot.phase != ctx.planned.phase {
        problems.push(format!(
            "phase mismatch: shot is in {} but planned for {}",
            ctx.shot.phase, ctx.planned.phase
        ));
        offending.push(ctx.shot.phase.to_string());
        offending.push(ctx.planned.phase.to_string());
    }
    if let Err(e) = ctx.state.apply_action(&ctx.shot.action_realized) {
        problems.push(format!("prerequisites not met: {e}"));
        offending.extend(ctx.shot.action_realized.referenced_ids().into_iter().map(str::to_string));
    }
    (!problems.is_empty())
        .then(|| Violation::new(ConstraintKind::LogicalOrdering, problems.join("; "), offending))
}

/// Displayed sign conventions must match the declared ones.
pub(super) fn directional_convention(ctx: &CheckContext<'_>) -> Option<Violation> {
    let mut problems = Vec::new();
    let mut offending = Vec::new();
    for (id, shown) in &ctx.shot.conventions_shown {
        let declared = ctx
            .state
            .lookup(id)
            .or_else(|| ctx.planned.action.added_entity().filter(|e| &e.id == id))
            .and_then(|e| e.convention.as_ref());
        match declared {
            Some(d) if d == shown => {}
            Some(d) => {
                problems.push(format!("`{id}` shown with convention `{shown}` but declared `{d}`"));
                offending.push(id.clone());
            }
            None => {
                problems.push(format!("`{id}` shown with convention `{shown}` but declares none"));
                offending.push(id.clone());
            }
        }
    }
    for id in &ctx.shot.entities_shown {
        let declared = ctx.state.lookup(id).and_then(|e| e.convention.as_ref());
        if let (Some(d), None) = (declared, ctx.shot.conventions_shown.get(id)) {
            problems.push(format!("`{id}` shown without its declared convention `{d}`"));
            offending.push(id.clone());
        }
    }
    (!problems.is_empty())
        .then(|| Violation::new(ConstraintKind::DirectionalConvention, problems.join("; "), offending))
}
