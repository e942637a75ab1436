//! Recursive-descent parser for the expression grammar.
//!
//! Core grammar (system-spec subset): identifiers `[A-Za-z][A-Za-z0-9]*`,
//! jet names `dep_letters`, integer literals, `+ - * / ^` with integer
//! exponents, parentheses. Extended forms accepted everywhere else:
//! parenthesized rational exponents `x^(-1/2)`, `exp(...)`, `ln(...)`, and
//! registered opaque applications with primes `Fu''(s)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::expr::{self, Expr};
use super::rational::{rat_int, Rat};
use super::symbol::SymbolContext;
use num_bigint::BigInt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl core::fmt::Display for ParseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "parse error at byte {}: {}", self.offset, self.message)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Prime,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>, ParseError> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            lx.skip_ws();
            if lx.pos >= lx.src.len() {
                return Ok(out);
            }
            let start = lx.pos;
            let c = lx.src[lx.pos];
            let tok = match c {
                b'+' => {
                    lx.pos += 1;
                    Tok::Plus
                }
                b'-' => {
                    lx.pos += 1;
                    Tok::Minus
                }
                b'*' => {
                    lx.pos += 1;
                    Tok::Star
                }
                b'/' => {
                    lx.pos += 1;
                    Tok::Slash
                }
                b'^' => {
                    lx.pos += 1;
                    Tok::Caret
                }
                b'(' => {
                    lx.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    lx.pos += 1;
                    Tok::RParen
                }
                b'\'' => {
                    lx.pos += 1;
                    Tok::Prime
                }
                b'0'..=b'9' => {
                    while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_digit() {
                        lx.pos += 1;
                    }
                    let text = core::str::from_utf8(&lx.src[start..lx.pos]).unwrap();
                    Tok::Int(text.parse().unwrap())
                }
                b'A'..=b'Z' | b'a'..=b'z' => {
                    while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_alphanumeric() {
                        lx.pos += 1;
                    }
                    // one optional jet suffix: '_' followed by letters
                    if lx.pos < lx.src.len() && lx.src[lx.pos] == b'_' {
                        let mark = lx.pos;
                        lx.pos += 1;
                        let letters_start = lx.pos;
                        while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_alphabetic() {
                            lx.pos += 1;
                        }
                        if lx.pos == letters_start {
                            lx.pos = mark; // lone underscore is not part of the name
                        }
                    }
                    let text = core::str::from_utf8(&lx.src[start..lx.pos]).unwrap();
                    Tok::Ident(text.into())
                }
                other => {
                    return Err(ParseError {
                        offset: start,
                        message: format!("unexpected character `{}`", other as char),
                    })
                }
            };
            out.push((start, tok));
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    ctx: &'a SymbolContext,
    end: usize,
}

/// Parse `text` in `ctx`; all identifiers must resolve.
pub fn parse_expr(text: &str, ctx: &SymbolContext) -> Result<Expr, ParseError> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        ctx,
        end: text.len(),
    };
    let e = p.sum()?;
    if p.pos < p.toks.len() {
        return Err(p.err_here("trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: &str) -> ParseError {
        ParseError {
            offset: self.offset(),
            message: msg.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err_here(what))
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut terms = alloc::vec![self.product()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    terms.push(self.product()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    terms.push(expr::neg(self.product()?));
                }
                _ => break,
            }
        }
        Ok(expr::add(terms))
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc = expr::mul2(acc, self.unary()?);
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    acc = match rhs.as_const() {
                        Some(c) if !num_traits::Zero::is_zero(c) => {
                            expr::mul2(acc, Expr::Const(c.clone().recip()))
                        }
                        Some(_) => return Err(self.err_here("division by zero constant")),
                        None => expr::mul2(acc, expr::pow_int(rhs, -1)),
                    };
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(expr::neg(self.unary()?))
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let exp_offset = self.offset();
        let q = self.exponent()?;
        if super::rational::is_integer(&q) {
            use num_traits::ToPrimitive;
            let k = q.numer().to_i64().ok_or(ParseError {
                offset: exp_offset,
                message: "exponent too large".into(),
            })?;
            Ok(expr::pow_int(base, k))
        } else {
            expr::pow_rat(base, q).map_err(|_| ParseError {
                offset: exp_offset,
                message: "rational power base must be a symbol or a sum of symbols".into(),
            })
        }
    }

    /// integer | '(' ['-'] integer ['/' integer] ')'
    fn exponent(&mut self) -> Result<Rat, ParseError> {
        match self.bump() {
            Some(Tok::Int(n)) => Ok(Rat::from_integer(n)),
            Some(Tok::Minus) => match self.bump() {
                Some(Tok::Int(n)) => Ok(-Rat::from_integer(n)),
                _ => Err(self.err_here("expected integer exponent")),
            },
            Some(Tok::LParen) => {
                let neg = if self.peek() == Some(&Tok::Minus) {
                    self.pos += 1;
                    true
                } else {
                    false
                };
                let n = match self.bump() {
                    Some(Tok::Int(n)) => n,
                    _ => return Err(self.err_here("expected integer in exponent")),
                };
                let mut q = Rat::from_integer(n);
                if self.peek() == Some(&Tok::Slash) {
                    self.pos += 1;
                    match self.bump() {
                        Some(Tok::Int(d)) if !num_traits::Zero::is_zero(&d) => {
                            q /= Rat::from_integer(d);
                        }
                        _ => return Err(self.err_here("expected nonzero denominator")),
                    }
                }
                self.expect(Tok::RParen, "expected `)` after exponent")?;
                Ok(if neg { -q } else { q })
            }
            _ => Err(self.err_here("expected exponent")),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Int(n)) => Ok(Expr::Const(Rat::from_integer(n))),
            Some(Tok::LParen) => {
                let e = self.sum()?;
                self.expect(Tok::RParen, "expected `)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => self.identifier(name, offset),
            Some(_) => Err(ParseError {
                offset,
                message: "expected a term".into(),
            }),
            None => Err(ParseError {
                offset,
                message: "unexpected end of input".into(),
            }),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Expr, ParseError> {
        let mut primes = 0u32;
        while self.peek() == Some(&Tok::Prime) {
            self.pos += 1;
            primes += 1;
        }
        let applied = self.peek() == Some(&Tok::LParen);
        if applied && (name == "exp" || name == "ln" || self.ctx.is_function(&name)) {
            self.pos += 1;
            let arg = self.sum()?;
            self.expect(Tok::RParen, "expected `)` after argument")?;
            return Ok(match name.as_str() {
                "exp" if primes == 0 => expr::exp_of(arg),
                "ln" if primes == 0 => expr::ln_of(arg),
                "exp" | "ln" => {
                    return Err(ParseError {
                        offset,
                        message: format!("`{name}` does not take primes"),
                    })
                }
                _ => expr::func(&name, primes, arg),
            });
        }
        if primes > 0 {
            return Err(ParseError {
                offset,
                message: format!("`{name}` is not a registered function"),
            });
        }
        match self.ctx.resolve(&name) {
            Some(sym) => Ok(Expr::Sym(sym)),
            None => Err(ParseError {
                offset,
                message: format!("unknown identifier `{name}`"),
            }),
        }
    }
}

/// Parse a rational literal such as `-3/4` or `2` (used by CLI flags).
pub fn parse_rational(text: &str) -> Result<Rat, ParseError> {
    let ctx = SymbolContext::new();
    let e = parse_expr(text, &ctx)?;
    e.as_const().cloned().ok_or(ParseError {
        offset: 0,
        message: "expected a rational constant".into(),
    })
}

#[allow(unused)]
fn _rat_int_is_used() -> Rat {
    rat_int(0)
}
