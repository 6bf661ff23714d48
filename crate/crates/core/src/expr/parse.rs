//! Lexer and recursive-descent parser for expressions and criteria.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" UINT)?
//! primary := NUMBER | "inf" | NAME | "exp" "(" expr ")" | "(" expr ")"
//! ```
//!
//! A minus sign directly in front of a number literal folds into the literal,
//! except when the literal is the base of a power, so `-2^2` is `-(2^2)`.

use std::fmt;

use thiserror::Error;

use super::criterion::{CmpOp, Comparison, Criterion};
use super::Expr;

pub(crate) const RESERVED: &[&str] = &["input", "in", "exp", "and", "or", "criterion", "inf"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undeclared variable `{name}`")]
    Undeclared { line: usize, col: usize, name: String },
    #[error("{line}:{col}: exponent must be a nonnegative integer, found `{found}`")]
    NonIntegerExponent { line: usize, col: usize, found: String },
    #[error("{line}:{col}: `{name}` is declared more than once")]
    Duplicate { line: usize, col: usize, name: String },
    #[error("{line}:{col}: invalid range for `{name}`: {msg}")]
    BadRange { line: usize, col: usize, name: String, msg: String },
    #[error("cyclic definition: {}", cycle.join(" -> "))]
    Cyclic { cycle: Vec<String> },
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Num(f64),
    Ident(String),
    Sym(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(x) => write!(f, "{x}"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Sym(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
    /// Source text of the token (used to report bad exponents verbatim).
    pub text: String,
}

const SYMBOLS: &[&str] = &["<=", ">=", "+", "-", "*", "/", "^", "(", ")", "[", "]", ",", "=", ":", "<", ">"];

/// Tokenizes one line. `line` is 1-based and only used for positions.
pub(crate) fn lex(src: &str, line: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let x: f64 = text.parse().map_err(|_| ParseError::Syntax {
                line,
                col,
                msg: format!("malformed number `{text}`"),
            })?;
            out.push(Token { tok: Tok::Num(x), line, col, text });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token {
                tok: Tok::Ident(text.clone()),
                line,
                col,
                text,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                out.push(Token {
                    tok: Tok::Sym(s),
                    line,
                    col,
                    text: s.to_string(),
                });
                i += s.len();
            }
            None => {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(out)
}

/// Parses a standalone expression over the given variable names.
pub fn parse_expression(src: &str, names: &[String]) -> Result<Expr, ParseError> {
    let mut p = Parser::new(lex(src, 1)?, names, 1, src.chars().count() + 1);
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses a criterion such as `PVR <= 1.62 and x > 0`.
pub(crate) fn parse_criterion(src: &str, names: &[String], line: usize) -> Result<Criterion, ParseError> {
    let mut p = Parser::new(lex(src, line)?, names, line, src.chars().count() + 1);
    let c = p.criterion()?;
    p.finish()?;
    Ok(c)
}

pub(crate) struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    names: &'a [String],
    line: usize,
    end_col: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(toks: Vec<Token>, names: &'a [String], line: usize, end_col: usize) -> Self {
        Parser {
            toks,
            pos: 0,
            names,
            line,
            end_col,
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == w)
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => (self.line, self.end_col),
        }
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        let found = match self.toks.get(self.pos) {
            Some(t) => format!("`{}`", t.tok),
            None => "end of line".to_string(),
        };
        ParseError::Syntax {
            line,
            col,
            msg: format!("{}, found {found}", msg.into()),
        }
    }

    pub(crate) fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`")))
        }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub(crate) fn finish(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }

    pub(crate) fn expect_word(&mut self, w: &str) -> Result<(), ParseError> {
        if self.is_word(w) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{w}`")))
        }
    }

    /// Reads a name that is not a reserved word; returns it with its position.
    pub(crate) fn name(&mut self) -> Result<(String, usize, usize), ParseError> {
        match self.toks.get(self.pos) {
            Some(Token {
                tok: Tok::Ident(s),
                line,
                col,
                ..
            }) if !RESERVED.contains(&s.as_str()) => {
                let out = (s.clone(), *line, *col);
                self.pos += 1;
                Ok(out)
            }
            _ => Err(self.error("expected a variable name")),
        }
    }

    /// A signed number or `inf` / `-inf`.
    pub(crate) fn signed_number(&mut self) -> Result<f64, ParseError> {
        let neg = if self.is_sym("-") {
            self.pos += 1;
            true
        } else {
            if self.is_sym("+") {
                self.pos += 1;
            }
            false
        };
        let x = match self.peek() {
            Some(Tok::Num(x)) => *x,
            Some(Tok::Ident(w)) if w == "inf" => f64::INFINITY,
            _ => return Err(self.error("expected a number")),
        };
        self.pos += 1;
        Ok(if neg { -x } else { x })
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.is_sym("+") {
                self.pos += 1;
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.is_sym("-") {
                self.pos += 1;
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.is_sym("*") {
                self.pos += 1;
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.is_sym("/") {
                self.pos += 1;
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.is_sym("-") {
            let literal = match self.peek_at(1) {
                Some(Tok::Num(x)) => Some(*x),
                Some(Tok::Ident(w)) if w == "inf" => Some(f64::INFINITY),
                _ => None,
            };
            let then_pow = matches!(self.peek_at(2), Some(Tok::Sym("^")));
            if let (Some(x), false) = (literal, then_pow) {
                self.pos += 2;
                return Ok(Expr::Const(-x));
            }
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.is_sym("^") {
            return Ok(base);
        }
        self.pos += 1;
        let tok = match self.toks.get(self.pos) {
            Some(t) => t.clone(),
            None => return Err(self.error("expected an exponent")),
        };
        let n = match tok.tok {
            Tok::Num(x) if !tok.text.contains(['.', 'e', 'E']) && x <= u32::MAX as f64 => x as u32,
            Tok::Num(_) => {
                return Err(ParseError::NonIntegerExponent {
                    line: tok.line,
                    col: tok.col,
                    found: tok.text,
                })
            }
            Tok::Sym("-") | Tok::Sym("(") | Tok::Ident(_) => {
                // collect the offending exponent text for the message
                let found = self.toks[self.pos..]
                    .iter()
                    .take(3)
                    .map(|t| t.text.as_str())
                    .collect::<Vec<_>>()
                    .join("");
                return Err(ParseError::NonIntegerExponent {
                    line: tok.line,
                    col: tok.col,
                    found,
                });
            }
            _ => return Err(self.error("expected an exponent")),
        };
        self.pos += 1;
        Ok(Expr::Pow(Box::new(base), n))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = match self.toks.get(self.pos) {
            Some(t) => t.clone(),
            None => return Err(self.error("expected an expression")),
        };
        match &t.tok {
            Tok::Num(x) => {
                self.pos += 1;
                Ok(Expr::Const(*x))
            }
            Tok::Sym("(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(w) if w == "inf" => {
                self.pos += 1;
                Ok(Expr::Const(f64::INFINITY))
            }
            Tok::Ident(w) if w == "exp" => {
                self.pos += 1;
                self.expect_sym("(")?;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(Expr::Exp(Box::new(e)))
            }
            Tok::Ident(w) if RESERVED.contains(&w.as_str()) => Err(self.error("expected an expression")),
            Tok::Ident(w) => {
                self.pos += 1;
                match self.names.iter().position(|n| n == w) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(ParseError::Undeclared {
                        line: t.line,
                        col: t.col,
                        name: w.clone(),
                    }),
                }
            }
            _ => Err(self.error("expected an expression")),
        }
    }

    pub(crate) fn criterion(&mut self) -> Result<Criterion, ParseError> {
        let mut parts = vec![self.conjunction()?];
        while self.is_word("or") {
            self.pos += 1;
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Criterion::Or(parts)
        })
    }

    fn conjunction(&mut self) -> Result<Criterion, ParseError> {
        let mut parts = vec![self.atom()?];
        while self.is_word("and") {
            self.pos += 1;
            parts.push(self.atom()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Criterion::And(parts)
        })
    }

    fn atom(&mut self) -> Result<Criterion, ParseError> {
        if self.is_sym("(") {
            // Either a parenthesized criterion or an expression that starts
            // with a parenthesis; try the former and back off.
            let save = self.pos;
            self.pos += 1;
            if let Ok(c) = self.criterion() {
                if self.is_sym(")") {
                    self.pos += 1;
                    let continues_expr = matches!(
                        self.peek(),
                        Some(Tok::Sym("+" | "-" | "*" | "/" | "^" | "<" | "<=" | ">" | ">="))
                    );
                    if !continues_expr {
                        return Ok(c);
                    }
                }
            }
            self.pos = save;
        }
        let expr = self.expr()?;
        let op = match self.peek() {
            Some(Tok::Sym("<=")) => CmpOp::Le,
            Some(Tok::Sym("<")) => CmpOp::Lt,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            Some(Tok::Sym(">")) => CmpOp::Gt,
            _ => return Err(self.error("expected a comparison (<=, <, >=, >)")),
        };
        self.pos += 1;
        let rhs = self.signed_number()?;
        Ok(Criterion::Cmp(Comparison { expr, op, rhs }))
    }
}
