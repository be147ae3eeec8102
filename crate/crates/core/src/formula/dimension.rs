//! Dimensional analysis over the seven SI base dimensions.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BinaryOp, Expr, Formula};

pub const BASE_DIMENSIONS: [&str; 7] = [
    "mass",
    "length",
    "time",
    "current",
    "temperature",
    "amount",
    "luminosity",
];

const BASE_SYMBOLS: [&str; 7] = ["M", "L", "T", "I", "Θ", "N", "J"];

/// Integer exponent vector; addition corresponds to multiplying quantities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dimension(pub [i32; 7]);

impl Dimension {
    pub const DIMENSIONLESS: Dimension = Dimension([0; 7]);

    pub fn new(exponents: [i32; 7]) -> Self {
        Dimension(exponents)
    }

    pub fn is_dimensionless(&self) -> bool {
        self.0 == [0; 7]
    }

    pub fn checked_scale(&self, factor: i64) -> Option<Dimension> {
        let mut out = [0i32; 7];
        for (slot, &e) in out.iter_mut().zip(self.0.iter()) {
            *slot = i32::try_from(i64::from(e).checked_mul(factor)?).ok()?;
        }
        Some(Dimension(out))
    }
}

impl Add for Dimension {
    type Output = Dimension;
    fn add(self, rhs: Dimension) -> Dimension {
        let mut out = self.0;
        for (slot, e) in out.iter_mut().zip(rhs.0) {
            *slot += e;
        }
        Dimension(out)
    }
}

impl Sub for Dimension {
    type Output = Dimension;
    fn sub(self, rhs: Dimension) -> Dimension {
        self + (-rhs)
    }
}

impl Neg for Dimension {
    type Output = Dimension;
    fn neg(self) -> Dimension {
        Dimension(self.0.map(|e| -e))
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dimensionless() {
            return f.write_str("1");
        }
        let mut first = true;
        for (symbol, &e) in BASE_SYMBOLS.iter().zip(self.0.iter()) {
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("·")?;
            }
            first = false;
            if e == 1 {
                write!(f, "{symbol}")?;
            } else {
                write!(f, "{symbol}^{e}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TableLoadError {
    #[error("cannot read dimension table {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid dimension table {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

/// Symbol → dimension lookup. JSON form: `{"F": [1,1,-2,0,0,0,0], ...}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DimensionTable(BTreeMap<String, Dimension>);

impl DimensionTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// A small mechanics table: F, m, a, v, t, x, d, s, E, W, c, p, P, g.
    pub fn standard() -> Self {
        let mut table = Self::new();
        let entries: [(&str, [i32; 7]); 14] = [
            ("F", [1, 1, -2, 0, 0, 0, 0]),
            ("m", [1, 0, 0, 0, 0, 0, 0]),
            ("a", [0, 1, -2, 0, 0, 0, 0]),
            ("g", [0, 1, -2, 0, 0, 0, 0]),
            ("v", [0, 1, -1, 0, 0, 0, 0]),
            ("c", [0, 1, -1, 0, 0, 0, 0]),
            ("t", [0, 0, 1, 0, 0, 0, 0]),
            ("x", [0, 1, 0, 0, 0, 0, 0]),
            ("d", [0, 1, 0, 0, 0, 0, 0]),
            ("s", [0, 1, 0, 0, 0, 0, 0]),
            ("E", [1, 2, -2, 0, 0, 0, 0]),
            ("W", [1, 2, -2, 0, 0, 0, 0]),
            ("p", [1, 1, -1, 0, 0, 0, 0]),
            ("P", [1, 2, -3, 0, 0, 0, 0]),
        ];
        for (symbol, exps) in entries {
            table.insert(symbol, Dimension(exps));
        }
        table
    }

    pub fn insert(&mut self, symbol: impl Into<String>, dim: Dimension) -> Option<Dimension> {
        self.0.insert(symbol.into(), dim)
    }

    pub fn get(&self, symbol: &str) -> Option<Dimension> {
        self.0.get(symbol).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Dimension)> {
        self.0.iter()
    }

    pub fn load(path: &Path) -> Result<Self, TableLoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| TableLoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| TableLoadError::Json {
            path: path.display().to_string(),
            source,
        })
    }
}

impl FromIterator<(String, Dimension)> for DimensionTable {
    fn from_iter<I: IntoIterator<Item = (String, Dimension)>>(iter: I) -> Self {
        DimensionTable(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BalanceVerdict {
    pub balanced: bool,
    pub lhs: Dimension,
    pub rhs: Dimension,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DimensionOutcome {
    Expression(Dimension),
    Equation(BalanceVerdict),
}

impl DimensionOutcome {
    /// True for any expression and for balanced equations.
    pub fn is_consistent(&self) -> bool {
        match self {
            DimensionOutcome::Expression(_) => true,
            DimensionOutcome::Equation(v) => v.balanced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DimensionError {
    #[error("unknown symbol `{0}` (not in dimension table)")]
    UnknownSymbol(String),
    #[error("fractional exponent {exponent} on dimensioned base `{base}`")]
    FractionalExponent { base: String, exponent: String },
    #[error("exponent `{exponent}` on dimensioned base `{base}` is not a numeric constant")]
    NonConstantExponent { base: String, exponent: String },
    #[error("exponent `{exponent}` carries dimension {dimension}")]
    DimensionedExponent { exponent: String, dimension: Dimension },
    #[error("exponent {exponent} on `{base}` overflows the exponent vector")]
    ExponentOverflow { base: String, exponent: String },
    #[error("`{op}` operands differ in dimension: {lhs} vs {rhs} in `{expr}`")]
    AdditionMismatch {
        op: &'static str,
        lhs: Dimension,
        rhs: Dimension,
        expr: String,
    },
}

/// Derives the dimension of an expression, or the balance verdict of an
/// equation. Sums and differences must agree in dimension; products add
/// exponent vectors; integer powers scale them.
pub fn check_dimension(
    formula: &Formula,
    table: &DimensionTable,
) -> Result<DimensionOutcome, DimensionError> {
    match formula.sides() {
        Some((lhs, rhs)) => {
            let lhs = dimension_of(lhs, table)?;
            let rhs = dimension_of(rhs, table)?;
            Ok(DimensionOutcome::Equation(BalanceVerdict {
                balanced: lhs == rhs,
                lhs,
                rhs,
            }))
        }
        None => dimension_of(formula.ast(), table).map(DimensionOutcome::Expression),
    }
}

fn dimension_of(expr: &Expr, table: &DimensionTable) -> Result<Dimension, DimensionError> {
    match expr {
        Expr::Ident(name) => table
            .get(name)
            .ok_or_else(|| DimensionError::UnknownSymbol(name.clone())),
        Expr::Number(_) => Ok(Dimension::DIMENSIONLESS),
        Expr::Neg(operand) => dimension_of(operand, table),
        Expr::Binary { op, lhs, rhs } => {
            let left = dimension_of(lhs, table)?;
            let right = dimension_of(rhs, table)?;
            match op {
                BinaryOp::Add | BinaryOp::Sub | BinaryOp::Eq => {
                    if left == right {
                        Ok(left)
                    } else {
                        Err(DimensionError::AdditionMismatch {
                            op: op.symbol(),
                            lhs: left,
                            rhs: right,
                            expr: expr.render(),
                        })
                    }
                }
                BinaryOp::Mul => Ok(left + right),
                BinaryOp::Div => Ok(left - right),
                BinaryOp::Pow => power_dimension(lhs, left, rhs, right),
            }
        }
    }
}

fn power_dimension(
    base: &Expr,
    base_dim: Dimension,
    exponent: &Expr,
    exponent_dim: Dimension,
) -> Result<Dimension, DimensionError> {
    if !exponent_dim.is_dimensionless() {
        return Err(DimensionError::DimensionedExponent {
            exponent: exponent.render(),
            dimension: exponent_dim,
        });
    }
    if base_dim.is_dimensionless() {
        return Ok(Dimension::DIMENSIONLESS);
    }
    let value = constant_value(exponent).ok_or_else(|| DimensionError::NonConstantExponent {
        base: base.render(),
        exponent: exponent.render(),
    })?;
    if !value.is_finite() || value.fract() != 0.0 {
        return Err(DimensionError::FractionalExponent {
            base: base.render(),
            exponent: exponent.render(),
        });
    }
    let overflow = || DimensionError::ExponentOverflow {
        base: base.render(),
        exponent: exponent.render(),
    };
    if value.abs() > i32::MAX as f64 {
        return Err(overflow());
    }
    base_dim.checked_scale(value as i64).ok_or_else(overflow)
}

/// Evaluates an identifier-free expression.
fn constant_value(expr: &Expr) -> Option<f64> {
    match expr {
        Expr::Ident(_) => None,
        Expr::Number(lit) => lit.parse().ok(),
        Expr::Neg(operand) => constant_value(operand).map(|v| -v),
        Expr::Binary { op, lhs, rhs } => {
            let l = constant_value(lhs)?;
            let r = constant_value(rhs)?;
            Some(match op {
                BinaryOp::Add => l + r,
                BinaryOp::Sub => l - r,
                BinaryOp::Mul => l * r,
                BinaryOp::Div => l / r,
                BinaryOp::Pow => l.powf(r),
                BinaryOp::Eq => return None,
            })
        }
    }
}
