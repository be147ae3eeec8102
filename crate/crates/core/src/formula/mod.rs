//! Formula parsing, canonical rendering, structural identity and
//! dimensional analysis.
//!
//! Formulas are small arithmetic expressions with an optional single
//! top-level `=`. Identity between two formulas is structural: `m * a` and
//! `a * m` are different formulas even though they are algebraically equal.

mod dimension;
mod parser;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use dimension::{
    check_dimension, BalanceVerdict, Dimension, DimensionError, DimensionOutcome, DimensionTable,
    BASE_DIMENSIONS,
};
pub use parser::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Eq,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Eq => "=",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Eq => 0,
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
            BinaryOp::Pow => 4,
        }
    }
}

/// Expression tree. Number literals keep their source lexeme so that
/// `2` and `2.0` stay distinguishable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Ident(String),
    Number(String),
    Neg(Box<Expr>),
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

const PREC_NEG: u8 = 3;
const PREC_ATOM: u8 = 5;

impl Expr {
    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Ident(_) | Expr::Number(_) => PREC_ATOM,
            Expr::Neg(_) => PREC_NEG,
            Expr::Binary { op, .. } => op.precedence(),
        }
    }

    /// Canonical rendering: minimal parentheses, single spaces around
    /// binary operators, no space after unary minus.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out);
        out
    }

    fn render_into(&self, out: &mut String) {
        match self {
            Expr::Ident(name) => out.push_str(name),
            Expr::Number(lit) => out.push_str(lit),
            Expr::Neg(operand) => {
                out.push('-');
                render_child(operand, operand.precedence() < PREC_NEG, out);
            }
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                let (lhs_parens, rhs_parens) = match op {
                    // base must be an atom; exponent may be unary or another power
                    BinaryOp::Pow => (lhs.precedence() <= p, rhs.precedence() < PREC_NEG),
                    _ => (lhs.precedence() < p, rhs.precedence() <= p),
                };
                render_child(lhs, lhs_parens, out);
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                render_child(rhs, rhs_parens, out);
            }
        }
    }

    fn collect_symbols(&self, out: &mut Vec<String>) {
        match self {
            Expr::Ident(name) => {
                if !out.iter().any(|s| s == name) {
                    out.push(name.clone());
                }
            }
            Expr::Number(_) => {}
            Expr::Neg(operand) => operand.collect_symbols(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_symbols(out);
                rhs.collect_symbols(out);
            }
        }
    }
}

fn render_child(expr: &Expr, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        expr.render_into(out);
        out.push(')');
    } else {
        expr.render_into(out);
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// A parsed formula. Serializes as its source string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Formula {
    source: String,
    ast: Expr,
    symbols: Vec<String>,
}

impl Formula {
    pub fn parse(text: &str) -> Result<Formula, ParseError> {
        parse_formula(text)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// Identifiers in first-appearance order, without duplicates.
    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn is_equation(&self) -> bool {
        matches!(self.ast, Expr::Binary { op: BinaryOp::Eq, .. })
    }

    pub fn canonical(&self) -> String {
        self.ast.render()
    }

    /// Left and right sides when the formula is an equation.
    pub fn sides(&self) -> Option<(&Expr, &Expr)> {
        match &self.ast {
            Expr::Binary {
                op: BinaryOp::Eq,
                lhs,
                rhs,
            } => Some((lhs, rhs)),
            _ => None,
        }
    }

    pub(crate) fn from_ast(ast: Expr) -> Formula {
        let source = ast.render();
        let mut symbols = Vec::new();
        ast.collect_symbols(&mut symbols);
        Formula {
            source,
            ast,
            symbols,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_formula(&text).map_err(serde::de::Error::custom)
    }
}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let tokens = parser::tokenize(text)?;
    let ast = parser::Parser::new(tokens).parse_formula()?;
    let mut symbols = Vec::new();
    ast.collect_symbols(&mut symbols);
    Ok(Formula {
        source: text.to_string(),
        ast,
        symbols,
    })
}

/// Symbol-for-symbol identity: structural AST equality, insensitive to
/// whitespace and redundant parentheses, with no algebraic rewriting.
pub fn formulae_identical(a: &Formula, b: &Formula) -> bool {
    a.ast == b.ast
}

/// Parses both strings and compares them; unparseable input is never
/// identical to anything.
pub fn strings_identical(a: &str, b: &str) -> bool {
    match (parse_formula(a), parse_formula(b)) {
        (Ok(a), Ok(b)) => formulae_identical(&a, &b),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ident(name: &str) -> Expr {
        Expr::Ident(name.into())
    }

    fn num(lit: &str) -> Expr {
        Expr::Number(lit.into())
    }

    #[test]
    fn force_equation() {
        let f = parse_formula("F=m*a").unwrap();
        assert_eq!(
            *f.ast(),
            Expr::binary(
                BinaryOp::Eq,
                ident("F"),
                Expr::binary(BinaryOp::Mul, ident("m"), ident("a"))
            )
        );
        assert_eq!(f.symbols(), ["F", "m", "a"]);
    }

    #[test]
    fn power_binds_tighter_than_product() {
        let f = parse_formula("E=m*c^2").unwrap();
        assert_eq!(
            *f.ast(),
            Expr::binary(
                BinaryOp::Eq,
                ident("E"),
                Expr::binary(
                    BinaryOp::Mul,
                    ident("m"),
                    Expr::binary(BinaryOp::Pow, ident("c"), num("2"))
                )
            )
        );
        assert_eq!(f.symbols(), ["E", "m", "c"]);
    }

    #[test]
    fn malformed_operator_sequence() {
        let err = parse_formula("a+*b").unwrap_err();
        assert_eq!(err.offset(), 2);
        assert!(matches!(err, ParseError::Unexpected { .. }));
    }

    #[test]
    fn two_equals_signs() {
        assert_eq!(
            parse_formula("a=b=c").unwrap_err(),
            ParseError::MultipleEquals { offset: 3 }
        );
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_formula("").unwrap_err().offset(), 0);
        assert_eq!(parse_formula("   ").unwrap_err().offset(), 3);
    }

    #[test]
    fn unary_minus_below_power() {
        // -a^2 is -(a^2)
        let f = parse_formula("-a^2").unwrap();
        assert_eq!(
            *f.ast(),
            Expr::Neg(Box::new(Expr::binary(BinaryOp::Pow, ident("a"), num("2"))))
        );
    }

    #[test]
    fn power_is_right_associative_and_binaries_left() {
        let f = parse_formula("a^b^c").unwrap();
        assert_eq!(
            *f.ast(),
            Expr::binary(
                BinaryOp::Pow,
                ident("a"),
                Expr::binary(BinaryOp::Pow, ident("b"), ident("c"))
            )
        );
        let g = parse_formula("a-b-c").unwrap();
        assert_eq!(
            *g.ast(),
            Expr::binary(
                BinaryOp::Sub,
                Expr::binary(BinaryOp::Sub, ident("a"), ident("b")),
                ident("c")
            )
        );
    }

    #[test]
    fn canonical_rendering() {
        assert_eq!(parse_formula("F=m*a").unwrap().canonical(), "F = m * a");
        assert_eq!(parse_formula("(a-b)-c").unwrap().canonical(), "a - b - c");
        assert_eq!(parse_formula("a-(b-c)").unwrap().canonical(), "a - (b - c)");
        assert_eq!(parse_formula("(a^b)^c").unwrap().canonical(), "(a ^ b) ^ c");
        assert_eq!(parse_formula("(-a)^2").unwrap().canonical(), "(-a) ^ 2");
        assert_eq!(parse_formula("a^(-2)").unwrap().canonical(), "a ^ -2");
        assert_eq!(parse_formula("a*(-b)").unwrap().canonical(), "a * -b");
        assert_eq!(parse_formula("-(-x)").unwrap().canonical(), "--x");
        assert_eq!(parse_formula("x=(a+b)/(c*d)").unwrap().canonical(), "x = (a + b) / (c * d)");
    }

    #[test]
    fn identity_is_structural() {
        let fma = parse_formula("F=m*a").unwrap();
        assert!(formulae_identical(&fma, &parse_formula("F = m * a").unwrap()));
        assert!(formulae_identical(&fma, &parse_formula("F=(m*a)").unwrap()));
        assert!(!formulae_identical(&fma, &parse_formula("F=a*m").unwrap()));
        assert!(!strings_identical("E=m*c^2", "E=m*c"));
        assert!(!strings_identical("x=2", "x=2.0"));
        assert!(!strings_identical("F=m*a", "F=m*"));
    }

    #[test]
    fn serde_uses_source_string() {
        let f = parse_formula("v = d/t").unwrap();
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, "\"v = d/t\"");
        let back: Formula = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<Formula>("\"v = \"").is_err());
    }
}
