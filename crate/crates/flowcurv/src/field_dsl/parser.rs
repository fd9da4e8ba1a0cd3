//! Recursive-descent parser for polynomial expressions.
//!
//! Grammar (precedence `^` > unary `-` > `*` > binary `+`/`-`):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary ('*' unary)*
//! unary := '-' unary | power
//! power := atom ('^' integer)*          -- right-associative, exponent ≥ 0
//! atom  := number | identifier | '(' expr ')'
//! ```
//!
//! Identifiers are `x`, `y`, `z` or declared parameter names. There is no
//! division operator; exponents are plain non-negative integer literals.

use crate::error::{Error, Result};

use super::expr::{Axis, Expr};

const MAX_EXPONENT: u32 = 64;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num { value: f64, integral: Option<u32> },
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    column: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    column_offset: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize, column_offset: usize) -> Lexer<'a> {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line,
            column_offset,
        }
    }

    fn column(&self, byte_pos: usize) -> usize {
        self.column_offset + byte_pos + 1
    }

    fn error(&self, byte_pos: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            column: self.column(byte_pos),
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let start = self.pos;
            let c = self.src[self.pos];
            match c {
                b' ' | b'\t' | b'\r' => {
                    self.pos += 1;
                }
                b'+' => {
                    self.pos += 1;
                    out.push(self.spanned(Tok::Plus, start));
                }
                b'-' => {
                    self.pos += 1;
                    out.push(self.spanned(Tok::Minus, start));
                }
                b'*' => {
                    self.pos += 1;
                    out.push(self.spanned(Tok::Star, start));
                }
                b'^' => {
                    self.pos += 1;
                    out.push(self.spanned(Tok::Caret, start));
                }
                b'(' => {
                    self.pos += 1;
                    out.push(self.spanned(Tok::LParen, start));
                }
                b')' => {
                    self.pos += 1;
                    out.push(self.spanned(Tok::RParen, start));
                }
                b'/' => {
                    return Err(self.error(
                        start,
                        "unexpected `/`: division is not part of the expression grammar",
                    ));
                }
                b'0'..=b'9' | b'.' => {
                    let tok = self.lex_number(start)?;
                    out.push(self.spanned(tok, start));
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    while self.pos < self.src.len()
                        && (self.src[self.pos].is_ascii_alphanumeric()
                            || self.src[self.pos] == b'_')
                    {
                        self.pos += 1;
                    }
                    let name = std::str::from_utf8(&self.src[start..self.pos])
                        .expect("ascii range checked")
                        .to_owned();
                    out.push(self.spanned(Tok::Ident(name), start));
                }
                other => {
                    return Err(self.error(
                        start,
                        format!("unexpected character `{}`", char::from(other)),
                    ));
                }
            }
        }
        Ok(out)
    }

    fn spanned(&self, tok: Tok, start: usize) -> Spanned {
        Spanned {
            tok,
            column: self.column(start),
        }
    }

    fn lex_number(&mut self, start: usize) -> Result<Tok> {
        let mut saw_dot = false;
        let mut saw_exp = false;
        while self.pos < self.src.len() {
            match self.src[self.pos] {
                b'0'..=b'9' => self.pos += 1,
                b'.' if !saw_dot && !saw_exp => {
                    saw_dot = true;
                    self.pos += 1;
                }
                b'e' | b'E' if !saw_exp => {
                    saw_exp = true;
                    self.pos += 1;
                    if self.pos < self.src.len()
                        && matches!(self.src[self.pos], b'+' | b'-')
                    {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let value: f64 = text
            .parse()
            .map_err(|_| self.error(start, format!("malformed number `{text}`")))?;
        let integral = if !saw_dot && !saw_exp {
            text.parse::<u32>().ok()
        } else {
            None
        };
        Ok(Tok::Num { value, integral })
    }
}

struct Parser<'a> {
    tokens: Vec<Spanned>,
    pos: usize,
    declared: &'a [&'a str],
    line: usize,
    end_column: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Spanned> {
        self.tokens.get(self.pos)
    }

    fn advance(&mut self) -> Option<Spanned> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, column: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn error_here(&self, message: impl Into<String>) -> Error {
        let column = self
            .peek()
            .map(|s| s.column)
            .unwrap_or(self.end_column);
        self.error_at(column, message)
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.parse_term()?];
        while let Some(s) = self.peek() {
            match s.tok {
                Tok::Plus => {
                    self.advance();
                    terms.push(self.parse_term()?);
                }
                Tok::Minus => {
                    self.advance();
                    terms.push(Expr::neg(self.parse_term()?));
                }
                _ => break,
            }
        }
        Ok(Expr::sum(terms))
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let mut factors = vec![self.parse_unary()?];
        while matches!(self.peek().map(|s| &s.tok), Some(Tok::Star)) {
            self.advance();
            factors.push(self.parse_unary()?);
        }
        Ok(Expr::prod(factors))
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        if matches!(self.peek().map(|s| &s.tok), Some(Tok::Minus)) {
            self.advance();
            return Ok(Expr::neg(self.parse_unary()?));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let base = self.parse_atom()?;
        let mut exponents = Vec::new();
        while matches!(self.peek().map(|s| &s.tok), Some(Tok::Caret)) {
            self.advance();
            exponents.push(self.parse_exponent()?);
        }
        if exponents.is_empty() {
            return Ok(base);
        }
        // Right-associative: x^2^3 = x^(2^3).
        let mut total = exponents.pop().expect("nonempty");
        while let Some(e) = exponents.pop() {
            total = e
                .checked_pow(total)
                .filter(|t| *t <= MAX_EXPONENT)
                .ok_or_else(|| {
                    self.error_here(format!("exponent exceeds the maximum of {MAX_EXPONENT}"))
                })?;
        }
        if total > MAX_EXPONENT {
            return Err(
                self.error_here(format!("exponent exceeds the maximum of {MAX_EXPONENT}"))
            );
        }
        Ok(Expr::pow(base, total))
    }

    fn parse_exponent(&mut self) -> Result<u32> {
        match self.advance() {
            Some(Spanned {
                tok: Tok::Num {
                    integral: Some(n), ..
                },
                ..
            }) => Ok(n),
            Some(s) => Err(self.error_at(
                s.column,
                "exponent must be a non-negative integer literal",
            )),
            None => Err(self.error_here("expected an integer exponent")),
        }
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        match self.advance() {
            Some(Spanned {
                tok: Tok::Num { value, .. },
                ..
            }) => Ok(Expr::constant(value)),
            Some(Spanned {
                tok: Tok::Ident(name),
                column,
            }) => match name.as_str() {
                "x" => Ok(Expr::var(Axis::X)),
                "y" => Ok(Expr::var(Axis::Y)),
                "z" => Ok(Expr::var(Axis::Z)),
                other if self.declared.contains(&other) => Ok(Expr::param(other)),
                other => Err(self.error_at(
                    column,
                    format!("unknown identifier `{other}` (not x/y/z or a declared parameter)"),
                )),
            },
            Some(Spanned {
                tok: Tok::LParen, ..
            }) => {
                let inner = self.parse_expr()?;
                match self.advance() {
                    Some(Spanned {
                        tok: Tok::RParen, ..
                    }) => Ok(inner),
                    Some(s) => Err(self.error_at(s.column, "expected `)`")),
                    None => Err(self.error_here("unclosed `(`")),
                }
            }
            Some(s) => Err(self.error_at(s.column, "expected a number, identifier, or `(`")),
            None => Err(self.error_here("unexpected end of expression")),
        }
    }
}

/// Parses one expression, permitting `x`, `y`, `z` and the given parameter
/// names. Positions in errors are 1-based; `line` and `column_offset` locate
/// the expression inside a larger source text.
pub(crate) fn parse_expr_at(
    src: &str,
    declared: &[&str],
    line: usize,
    column_offset: usize,
) -> Result<Expr> {
    let lexer = Lexer::new(src, line, column_offset);
    let end_column = column_offset + src.len() + 1;
    let tokens = lexer.tokens()?;
    if tokens.is_empty() {
        return Err(Error::Parse {
            line,
            column: column_offset + 1,
            message: "empty expression".into(),
        });
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        declared,
        line,
        end_column,
    };
    let expr = parser.parse_expr()?;
    if let Some(s) = parser.peek() {
        return Err(parser.error_at(s.column, "unexpected trailing input"));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_dsl::expr::ParamValues;
    use nalgebra::Vector3;

    fn parse(src: &str, declared: &[&str]) -> Result<Expr> {
        parse_expr_at(src, declared, 1, 0)
    }

    #[test]
    fn parses_negated_sum() {
        let e = parse("-y - z", &[]).unwrap();
        assert_eq!(
            e,
            Expr::sum(vec![
                Expr::neg(Expr::var(Axis::Y)),
                Expr::neg(Expr::var(Axis::Z)),
            ])
        );
    }

    #[test]
    fn parses_constant_component() {
        assert_eq!(parse("0", &[]).unwrap(), Expr::Const(0.0));
    }

    #[test]
    fn parses_parameterized_expression() {
        let e = parse("b + z*(x - c)", &["b", "c"]).unwrap();
        let params = ParamValues::from_pairs([("b", 2.0), ("c", 4.0)]).unwrap();
        let value = e.eval(&Vector3::new(1.0, 0.0, 3.0), &params).unwrap();
        assert_eq!(value, -7.0);
    }

    #[test]
    fn precedence_pow_over_neg_over_mul() {
        let e = parse("-x^2", &[]).unwrap();
        assert_eq!(e, Expr::neg(Expr::pow(Expr::var(Axis::X), 2)));
        let e = parse("2*x^3", &[]).unwrap();
        assert_eq!(
            e.eval(&Vector3::new(2.0, 0.0, 0.0), &ParamValues::empty())
                .unwrap(),
            16.0
        );
        // Right-associative exponent chain: x^2^3 = x^8.
        let e = parse("x^2^3", &[]).unwrap();
        assert_eq!(e, Expr::pow(Expr::var(Axis::X), 8));
    }

    #[test]
    fn division_is_rejected_with_position() {
        let err = parse("x / y", &[]).unwrap_err();
        match err {
            Error::Parse {
                line,
                column,
                message,
            } => {
                assert_eq!(line, 1);
                assert_eq!(column, 3);
                assert!(message.contains("division"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_is_rejected() {
        let err = parse("x + q", &[]).unwrap_err();
        match err {
            Error::Parse { column, message, .. } => {
                assert_eq!(column, 5);
                assert!(message.contains("unknown identifier `q`"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn fractional_exponent_is_rejected() {
        assert!(parse("x^2.5", &[]).is_err());
        assert!(parse("x^-1", &[]).is_err());
        assert!(parse("x^y", &[]).is_err());
    }

    #[test]
    fn trailing_input_is_rejected() {
        assert!(parse("x y", &[]).is_err());
        assert!(parse("(x", &[]).is_err());
    }

    #[test]
    fn scientific_notation_literals() {
        let e = parse("1.5e-3 + x", &[]).unwrap();
        let got = e
            .eval(&Vector3::new(1.0, 0.0, 0.0), &ParamValues::empty())
            .unwrap();
        assert!((got - 1.0015).abs() < 1e-12);
    }
}
