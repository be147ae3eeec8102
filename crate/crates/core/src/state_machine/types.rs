use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::formula::{Dimension, Formula};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Concept,
    Quantity,
    Formula,
    ExampleInstance,
}

/// Element of the entity set. Identity is the `id`; labels may repeat.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeEntity {
    pub id: String,
    pub kind: EntityKind,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<Formula>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<Dimension>,
    /// Declared sign/direction convention, quantities only (e.g. "up_positive").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<String>,
}

impl KnowledgeEntity {
    pub fn concept(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: EntityKind::Concept,
            label: label.into(),
            formula: None,
            unit: None,
            convention: None,
        }
    }

    pub fn quantity(id: impl Into<String>, label: impl Into<String>, unit: Dimension) -> Self {
        Self {
            kind: EntityKind::Quantity,
            unit: Some(unit),
            ..Self::concept(id, label)
        }
    }

    pub fn formula(id: impl Into<String>, formula: Formula) -> Self {
        let label = formula.source().to_string();
        Self {
            kind: EntityKind::Formula,
            formula: Some(formula),
            ..Self::concept(id, label)
        }
    }

    pub fn example(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            kind: EntityKind::ExampleInstance,
            ..Self::concept(id, label)
        }
    }

    pub fn with_convention(mut self, convention: impl Into<String>) -> Self {
        self.convention = Some(convention.into());
        self
    }

    /// Field-presence rules: formula iff kind=formula, unit iff
    /// kind=quantity, convention only on quantities.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("entity id must be nonempty".into());
        }
        let is_formula = self.kind == EntityKind::Formula;
        if is_formula != self.formula.is_some() {
            return Err(format!(
                "`{}`: formula field must be present iff kind is formula",
                self.id
            ));
        }
        let is_quantity = self.kind == EntityKind::Quantity;
        if is_quantity != self.unit.is_some() {
            return Err(format!(
                "`{}`: unit field must be present iff kind is quantity",
                self.id
            ));
        }
        if self.convention.is_some() && !is_quantity {
            return Err(format!("`{}`: only quantities carry a convention", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationLabel {
    Causes,
    Quantifies,
    Derives,
    Instantiates,
}

impl RelationLabel {
    pub const ALL: [RelationLabel; 4] = [
        RelationLabel::Causes,
        RelationLabel::Quantifies,
        RelationLabel::Derives,
        RelationLabel::Instantiates,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationLabel::Causes => "causes",
            RelationLabel::Quantifies => "quantifies",
            RelationLabel::Derives => "derives",
            RelationLabel::Instantiates => "instantiates",
        }
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relation {
    pub source: String,
    pub target: String,
    pub label: RelationLabel,
}

impl Relation {
    pub fn new(source: impl Into<String>, target: impl Into<String>, label: RelationLabel) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            label,
        }
    }

    pub fn touches(&self, id: &str) -> bool {
        self.source == id || self.target == id
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.source, self.target, self.label)
    }
}

/// Edge from an entity to one of its example instances.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instantiation {
    pub entity_id: String,
    pub instance_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    EquationBalance,
    UnitConsistency,
    DirectionalConvention,
    EntityContinuity,
    FormulaIdentity,
    LogicalOrdering,
    Custom,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 7] = [
        ConstraintKind::EquationBalance,
        ConstraintKind::UnitConsistency,
        ConstraintKind::DirectionalConvention,
        ConstraintKind::EntityContinuity,
        ConstraintKind::FormulaIdentity,
        ConstraintKind::LogicalOrdering,
        ConstraintKind::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::EquationBalance => "equation_balance",
            ConstraintKind::UnitConsistency => "unit_consistency",
            ConstraintKind::DirectionalConvention => "directional_convention",
            ConstraintKind::EntityContinuity => "entity_continuity",
            ConstraintKind::FormulaIdentity => "formula_identity",
            ConstraintKind::LogicalOrdering => "logical_ordering",
            ConstraintKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraint {
    pub id: String,
    pub kind: ConstraintKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl Constraint {
    pub fn new(id: impl Into<String>, kind: ConstraintKind) -> Self {
        Self {
            id: id.into(),
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: impl Into<String>, value: serde_json::Value) -> Self {
        self.params.insert(key.into(), value);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionTag {
    Introduce,
    Derive,
    Apply,
    Summarize,
}

impl fmt::Display for ActionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionTag::Introduce => "Introduce",
            ActionTag::Derive => "Derive",
            ActionTag::Apply => "Apply",
            ActionTag::Summarize => "Summarize",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PedagogicalAction {
    Introduce {
        entity: KnowledgeEntity,
        #[serde(default)]
        incident_relations: Vec<Relation>,
    },
    Derive {
        source_id: String,
        new_entity: KnowledgeEntity,
        label: RelationLabel,
    },
    Apply {
        entity_id: String,
        instance: KnowledgeEntity,
    },
    Summarize {
        entity_ids: BTreeSet<String>,
    },
}

impl PedagogicalAction {
    pub fn introduce(entity: KnowledgeEntity) -> Self {
        PedagogicalAction::Introduce {
            entity,
            incident_relations: Vec::new(),
        }
    }

    pub fn derive(source_id: impl Into<String>, new_entity: KnowledgeEntity, label: RelationLabel) -> Self {
        PedagogicalAction::Derive {
            source_id: source_id.into(),
            new_entity,
            label,
        }
    }

    pub fn apply(entity_id: impl Into<String>, instance: KnowledgeEntity) -> Self {
        PedagogicalAction::Apply {
            entity_id: entity_id.into(),
            instance,
        }
    }

    pub fn summarize<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        PedagogicalAction::Summarize {
            entity_ids: ids.into_iter().map(Into::into).collect(),
        }
    }

    pub fn tag(&self) -> ActionTag {
        match self {
            PedagogicalAction::Introduce { .. } => ActionTag::Introduce,
            PedagogicalAction::Derive { .. } => ActionTag::Derive,
            PedagogicalAction::Apply { .. } => ActionTag::Apply,
            PedagogicalAction::Summarize { .. } => ActionTag::Summarize,
        }
    }

    /// The entity this action adds to the entity set, if any.
    pub fn added_entity(&self) -> Option<&KnowledgeEntity> {
        match self {
            PedagogicalAction::Introduce { entity, .. } => Some(entity),
            PedagogicalAction::Derive { new_entity, .. } => Some(new_entity),
            _ => None,
        }
    }

    /// Ids the action requires to already exist.
    pub fn referenced_ids(&self) -> Vec<&str> {
        match self {
            PedagogicalAction::Introduce {
                entity,
                incident_relations,
            } => incident_relations
                .iter()
                .flat_map(|r| [r.source.as_str(), r.target.as_str()])
                .filter(|id| *id != entity.id)
                .collect(),
            PedagogicalAction::Derive { source_id, .. } => vec![source_id.as_str()],
            PedagogicalAction::Apply { entity_id, .. } => vec![entity_id.as_str()],
            PedagogicalAction::Summarize { entity_ids } => entity_ids.iter().map(String::as_str).collect(),
        }
    }
}

impl fmt::Display for PedagogicalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PedagogicalAction::Introduce { entity, .. } => write!(f, "Introduce({})", entity.id),
            PedagogicalAction::Derive {
                source_id,
                new_entity,
                label,
            } => write!(f, "Derive({source_id}, {}, {label})", new_entity.id),
            PedagogicalAction::Apply { entity_id, instance } => {
                write!(f, "Apply({entity_id}, {})", instance.id)
            }
            PedagogicalAction::Summarize { entity_ids } => {
                let ids: Vec<&str> = entity_ids.iter().map(String::as_str).collect();
                write!(f, "Summarize({{{}}})", ids.join(", "))
            }
        }
    }
}
