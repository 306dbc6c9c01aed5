//! Recursive-descent parser for the expression DSL.
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := ('-' | '+') unary | power
//! power    := atom ('^' exponent)?
//! exponent := ['-'] INT | '(' ['-'] INT ')'
//! atom     := INT | '(' expr ')' | 'm' | NAME
//!           | ('x' | 'u' | 'v' | 'w') ( "'"* | '[' ['-' | '+'] INT ']' )
//! ```
//!
//! `NAME` starts with an uppercase letter and denotes a named constant.
//! `x` never carries primes.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use super::{product, quotient, sum, Expression, Family};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownIdentifier(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Syntax(msg) => {
                write!(
                    f,
                    "syntax error at line {}, column {}: {}",
                    self.line, self.column, msg
                )
            }
            ParseErrorKind::UnknownIdentifier(name) => write!(
                f,
                "unknown identifier `{}` at line {}, column {}",
                name, self.line, self.column
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Prime,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Prime => write!(f, "`'`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Caret => write!(f, "`^`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut line, mut column) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, column);
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let tok = if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            column += i - start;
            Tok::Int(s.parse().expect("digits"))
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - start;
            Tok::Ident(chars[start..i].iter().collect())
        } else {
            i += 1;
            column += 1;
            match c {
                '\'' => Tok::Prime,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '^' => Tok::Caret,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                other => {
                    return Err(ParseError {
                        kind: ParseErrorKind::Syntax(format!("unexpected character `{other}`")),
                        line: tl,
                        column: tc,
                    })
                }
            }
        };
        out.push(Token {
            tok,
            line: tl,
            column: tc,
        });
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn next(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, msg: String) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError {
            kind: ParseErrorKind::Syntax(msg),
            line: t.line,
            column: t.column,
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.error_here(format!("expected {}, found {}", tok, self.peek())))
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.next();
                    terms.push(-self.term()?);
                }
                _ => break,
            }
        }
        Ok(sum(terms))
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.next();
                    let rhs = self.unary()?;
                    acc = product(vec![acc, rhs]);
                }
                Tok::Slash => {
                    self.next();
                    let rhs = self.unary()?;
                    acc = quotient(acc, rhs);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        match self.peek() {
            Tok::Minus => {
                self.next();
                Ok(-self.unary()?)
            }
            Tok::Plus => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.next();
        let e = self.exponent()?;
        Ok(base.pow(e))
    }

    fn exponent(&mut self) -> Result<i32, ParseError> {
        let paren = *self.peek() == Tok::LParen;
        if paren {
            self.next();
        }
        let neg = match self.peek() {
            Tok::Minus => {
                self.next();
                true
            }
            Tok::Plus => {
                self.next();
                false
            }
            _ => false,
        };
        let n = self.int("integer exponent")?;
        let e = n
            .to_i32()
            .ok_or_else(|| self.error_here("exponent out of range".into()))?;
        if paren {
            self.expect(Tok::RParen)?;
        }
        Ok(if neg { -e } else { e })
    }

    fn int(&mut self, what: &str) -> Result<BigInt, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.next();
                Ok(n)
            }
            other => Err(self.error_here(format!("expected {what}, found {other}"))),
        }
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        let t = self.next();
        let (line, column) = (t.line, t.column);
        match t.tok.clone() {
            Tok::Int(n) => Ok(Expression::Rational(BigRational::from_integer(n))),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => self.identifier(name, line, column),
            other => Err(ParseError {
                kind: ParseErrorKind::Syntax(format!("expected an operand, found {other}")),
                line,
                column,
            }),
        }
    }

    fn identifier(
        &mut self,
        name: String,
        line: usize,
        column: usize,
    ) -> Result<Expression, ParseError> {
        let family = match name.as_str() {
            "x" => Some(Family::X),
            "u" => Some(Family::U),
            "v" => Some(Family::V),
            "w" => Some(Family::W),
            _ => None,
        };
        if let Some(family) = family {
            match self.peek() {
                Tok::LBracket => {
                    self.next();
                    let neg = match self.peek() {
                        Tok::Minus => {
                            self.next();
                            true
                        }
                        Tok::Plus => {
                            self.next();
                            false
                        }
                        _ => false,
                    };
                    let n = self.int("stencil offset")?;
                    let k = n
                        .to_i32()
                        .ok_or_else(|| self.error_here("stencil offset out of range".into()))?;
                    self.expect(Tok::RBracket)?;
                    return Ok(Expression::Stencil(family, if neg { -k } else { k }));
                }
                Tok::Prime => {
                    if family == Family::X {
                        return Err(self.error_here(
                            "`x` is the independent variable and takes no primes".into(),
                        ));
                    }
                    let mut order = 0;
                    while *self.peek() == Tok::Prime {
                        self.next();
                        order += 1;
                    }
                    return Ok(Expression::Jet(family, order));
                }
                _ => return Ok(Expression::Jet(family, 0)),
            }
        }
        if name == "m" {
            return Ok(Expression::Index);
        }
        if name.chars().next().is_some_and(|c| c.is_ascii_uppercase()) {
            return Ok(Expression::Const(Arc::from(name.as_str())));
        }
        Err(ParseError {
            kind: ParseErrorKind::UnknownIdentifier(name),
            line,
            column,
        })
    }
}

/// Parses DSL text into an expression tree. Integer literal quotients such
/// as `3/2` are folded into a single rational.
pub fn parse(text: &str) -> Result<Expression, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error_here(format!("unexpected {}", p.peek())));
    }
    Ok(fold_literals(e))
}

fn fold_literals(e: Expression) -> Expression {
    match e {
        Expression::Quotient(n, d) => {
            let n = fold_literals(*n);
            let d = fold_literals(*d);
            match (&n, &d) {
                (Expression::Rational(a), Expression::Rational(b)) if !b.is_zero() => {
                    Expression::Rational(a / b)
                }
                _ => Expression::Quotient(Box::new(n), Box::new(d)),
            }
        }
        Expression::Sum(xs) => Expression::Sum(xs.into_iter().map(fold_literals).collect()),
        Expression::Product(xs) => Expression::Product(xs.into_iter().map(fold_literals).collect()),
        Expression::Power(b, k) => Expression::Power(Box::new(fold_literals(*b)), k),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms() {
        assert_eq!(parse("0").unwrap(), Expression::zero());
        assert_eq!(parse("u'''").unwrap(), Expression::Jet(Family::U, 3));
        assert_eq!(parse("u[-2]").unwrap(), Expression::Stencil(Family::U, -2));
        assert_eq!(parse("x").unwrap(), Expression::Jet(Family::X, 0));
        assert_eq!(parse("m").unwrap(), Expression::Index);
        assert_eq!(parse("K").unwrap(), Expression::Const(Arc::from("K")));
        assert_eq!(parse("3/2").unwrap(), Expression::rational(3, 2));
        assert_eq!(parse("v''").unwrap(), Expression::Jet(Family::V, 2));
        assert_eq!(
            parse(" u [ -1 ] ").unwrap(),
            Expression::Stencil(Family::U, -1)
        );
    }

    #[test]
    fn precedence() {
        let e = parse("-u^2").unwrap();
        assert_eq!(e, -Expression::Jet(Family::U, 0).pow(2));
        let e = parse("u'^-2").unwrap();
        assert_eq!(e, Expression::Jet(Family::U, 1).pow(-2));
        let e = parse("1 - 2 - 3").unwrap();
        assert_eq!(
            e.to_rational_function().unwrap().as_constant().unwrap(),
            BigRational::from_integer((-4).into())
        );
        let e = parse("8/2/2").unwrap();
        assert_eq!(
            e.to_rational_function().unwrap().as_constant().unwrap(),
            BigRational::from_integer(2.into())
        );
    }

    #[test]
    fn cross_ratio_scheme_parses() {
        let e = parse("(u[3]-u[1])*(u[2]-u[0])/((u[3]-u[2])*(u[1]-u[0])) - K").unwrap();
        let vars = e.vars();
        assert_eq!(vars.len(), 5);
        let e = parse("u'''/u' - (3/2)*u''^2/u'^2").unwrap();
        assert_eq!(e.vars().len(), 3);
    }

    #[test]
    fn errors_carry_position() {
        let err = parse("u[1] +\n  * 2").unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
        assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));

        let err = parse("u + y").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("y".into()));
        assert_eq!((err.line, err.column), (1, 5));

        assert!(parse("x'").is_err());
        assert!(parse("u[").is_err());
        assert!(parse("(u").is_err());
        assert!(parse("u^x").is_err());
        assert!(parse("u $ 2").is_err());
        assert!(parse("").is_err());
    }
}
