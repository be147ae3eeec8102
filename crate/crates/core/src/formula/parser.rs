//! Lexer and precedence-climbing parser for formula strings.
//!
//! Precedence (lowest to highest):
//! 1. Equation: `=` (at most one, top level only)
//! 2. Additive: `+`, `-` (left-associative)
//! 3. Multiplicative: `*`, `/` (left-associative)
//! 4. Unary: `-`
//! 5. Power: `^` (right-associative; the exponent may carry a unary minus)
//! 6. Primary: identifiers, numbers, parenthesised expressions

use std::fmt;

use super::{BinaryOp, Expr};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TokenKind {
    Ident(String),
    Number(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Equals,
    LParen,
    RParen,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(name) => write!(f, "identifier `{name}`"),
            TokenKind::Number(lit) => write!(f, "number `{lit}`"),
            TokenKind::Plus => f.write_str("`+`"),
            TokenKind::Minus => f.write_str("`-`"),
            TokenKind::Star => f.write_str("`*`"),
            TokenKind::Slash => f.write_str("`/`"),
            TokenKind::Caret => f.write_str("`^`"),
            TokenKind::Equals => f.write_str("`=`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub offset: usize,
}

/// Failure to parse a formula string.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("parse error at byte {offset}: expected one of [{}], found {found}", expected.join(", "))]
    Unexpected {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("more than one `=` in formula (second `=` at byte {offset})")]
    MultipleEquals { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Unexpected { offset, .. } | ParseError::MultipleEquals { offset } => *offset,
        }
    }

    fn unexpected(token: &Token, expected: &[&str]) -> Self {
        ParseError::Unexpected {
            offset: token.offset,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: token.kind.to_string(),
        }
    }
}

const OPERAND: &[&str] = &["identifier", "number", "`(`", "`-`"];

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();

    while let Some(&(offset, ch)) = chars.peek() {
        if ch.is_whitespace() {
            chars.next();
            continue;
        }
        let single = match ch {
            '+' => Some(TokenKind::Plus),
            '-' => Some(TokenKind::Minus),
            '*' => Some(TokenKind::Star),
            '/' => Some(TokenKind::Slash),
            '^' => Some(TokenKind::Caret),
            '=' => Some(TokenKind::Equals),
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            _ => None,
        };
        if let Some(kind) = single {
            chars.next();
            tokens.push(Token { kind, offset });
            continue;
        }

        if ch.is_alphabetic() {
            let mut name = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if c.is_alphanumeric() || c == '_' {
                    name.push(c);
                    chars.next();
                } else {
                    break;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Ident(name),
                offset,
            });
            continue;
        }

        if ch.is_ascii_digit() {
            let mut lit = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if c.is_ascii_digit() {
                    lit.push(c);
                    chars.next();
                } else {
                    break;
                }
            }
            if let Some(&(dot, '.')) = chars.peek() {
                chars.next();
                lit.push('.');
                let mut fraction = false;
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_ascii_digit() {
                        lit.push(c);
                        chars.next();
                        fraction = true;
                    } else {
                        break;
                    }
                }
                if !fraction {
                    let found = chars
                        .peek()
                        .map(|&(_, c)| format!("`{c}`"))
                        .unwrap_or_else(|| "end of input".to_string());
                    return Err(ParseError::Unexpected {
                        offset: dot + 1,
                        expected: vec!["digit".to_string()],
                        found,
                    });
                }
            }
            tokens.push(Token {
                kind: TokenKind::Number(lit),
                offset,
            });
            continue;
        }

        return Err(ParseError::Unexpected {
            offset,
            expected: ["identifier", "number", "operator", "`(`", "`)`"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            found: format!("`{ch}`"),
        });
    }

    tokens.push(Token {
        kind: TokenKind::Eof,
        offset: text.len(),
    });
    Ok(tokens)
}

pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(tokens: Vec<Token>) -> Self {
        Self { tokens, pos: 0 }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let token = self.tokens[self.pos].clone();
        if token.kind != TokenKind::Eof {
            self.pos += 1;
        }
        token
    }

    /// formula := additive ( '=' additive )? EOF
    pub(crate) fn parse_formula(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.parse_additive()?;
        let expr = if self.peek().kind == TokenKind::Equals {
            self.advance();
            let rhs = self.parse_additive()?;
            if self.peek().kind == TokenKind::Equals {
                return Err(ParseError::MultipleEquals {
                    offset: self.peek().offset,
                });
            }
            Expr::binary(BinaryOp::Eq, lhs, rhs)
        } else {
            lhs
        };

        match self.peek().kind {
            TokenKind::Eof => Ok(expr),
            _ => Err(ParseError::unexpected(
                self.peek(),
                &["operator", "`=`", "end of input"],
            )),
        }
    }

    fn parse_additive(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.parse_multiplicative()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => BinaryOp::Add,
                TokenKind::Minus => BinaryOp::Sub,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.parse_multiplicative()?;
            left = Expr::binary(op, left, right);
        }
    }

    fn parse_multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.parse_unary()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => BinaryOp::Mul,
                TokenKind::Slash => BinaryOp::Div,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.parse_unary()?;
            left = Expr::binary(op, left, right);
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().kind == TokenKind::Minus {
            self.advance();
            let operand = self.parse_unary()?;
            return Ok(Expr::Neg(Box::new(operand)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, ParseError> {
        let base = self.parse_primary()?;
        if self.peek().kind == TokenKind::Caret {
            self.advance();
            // right-associative: a^b^c = a^(b^c)
            let exponent = self.parse_unary()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        let token = self.advance();
        match token.kind {
            TokenKind::Ident(name) => Ok(Expr::Ident(name)),
            TokenKind::Number(lit) => Ok(Expr::Number(lit)),
            TokenKind::LParen => {
                let inner = self.parse_additive()?;
                if self.peek().kind != TokenKind::RParen {
                    return Err(ParseError::unexpected(self.peek(), &["operator", "`)`"]));
                }
                self.advance();
                Ok(inner)
            }
            _ => {
                // Eof does not advance, so the offset still points at the culprit.
                Err(ParseError::unexpected(&token, OPERAND))
            }
        }
    }
}
