//! Canonical expression printing.
//!
//! The printed form re-parses to the same tree (polynomial subset: same
//! canonical polynomial; extended subset: structurally equal tree). Additive
//! operators carry single spaces, multiplicative ones do not:
//! `u*u_x + v*u_y - u_yy - Gr*calpha*theta`.

use core::fmt;

use super::expr::Expr;
use super::rational::{self, Rat};
use num_traits::Signed;

#[derive(PartialEq, PartialOrd)]
enum Prec {
    Sum,
    Prod,
    Pow,
}

fn fmt_const(c: &Rat, f: &mut fmt::Formatter<'_>, prec: Prec) -> fmt::Result {
    let needs_paren = !rational::is_integer(c) && prec >= Prec::Prod || c.is_negative() && prec >= Prec::Prod;
    if needs_paren {
        write!(f, "({})", rational::fmt_rat(c))
    } else {
        write!(f, "{}", rational::fmt_rat(c))
    }
}

fn fmt_expr(e: &Expr, f: &mut fmt::Formatter<'_>, prec: Prec) -> fmt::Result {
    match e {
        Expr::Const(c) => fmt_const(c, f, prec),
        Expr::Sym(s) => write!(f, "{s}"),
        Expr::Sum(terms) => {
            let parens = prec > Prec::Sum;
            if parens {
                f.write_str("(")?;
            }
            for (i, t) in terms.iter().enumerate() {
                if i == 0 {
                    fmt_expr(t, f, Prec::Sum)?;
                } else if t.leading_const_negative() {
                    f.write_str(" - ")?;
                    fmt_negated(t, f)?;
                } else {
                    f.write_str(" + ")?;
                    fmt_expr(t, f, Prec::Sum)?;
                }
            }
            if parens {
                f.write_str(")")?;
            }
            Ok(())
        }
        Expr::Prod(factors) => {
            let parens = prec > Prec::Prod;
            if parens {
                f.write_str("(")?;
            }
            // A leading constant never needs parentheses: -2*eps, 1/2*x.
            let mut rest: &[Expr] = factors;
            if let Some(Expr::Const(c)) = factors.first() {
                rest = &factors[1..];
                if *c == -rational::rat_one() && !rest.is_empty() {
                    f.write_str("-")?;
                } else {
                    fmt_const(c, f, Prec::Sum)?;
                    if !rest.is_empty() {
                        f.write_str("*")?;
                    }
                }
            }
            for (i, x) in rest.iter().enumerate() {
                if i > 0 {
                    f.write_str("*")?;
                }
                fmt_expr(x, f, Prec::Prod)?;
            }
            if parens {
                f.write_str(")")?;
            }
            Ok(())
        }
        Expr::IntPow(b, k) => {
            fmt_expr(b, f, Prec::Pow)?;
            if *k >= 0 {
                write!(f, "^{k}")
            } else {
                write!(f, "^({k})")
            }
        }
        Expr::RatPow(b, q) => {
            fmt_expr(b, f, Prec::Pow)?;
            write!(f, "^({})", rational::fmt_rat(q))
        }
        Expr::Exp(a) => {
            f.write_str("exp(")?;
            fmt_expr(a, f, Prec::Sum)?;
            f.write_str(")")
        }
        Expr::Ln(a) => {
            f.write_str("ln(")?;
            fmt_expr(a, f, Prec::Sum)?;
            f.write_str(")")
        }
        Expr::Func(app) => {
            write!(f, "{}", app.name)?;
            for _ in 0..app.primes {
                f.write_str("'")?;
            }
            f.write_str("(")?;
            fmt_expr(&app.arg, f, Prec::Sum)?;
            f.write_str(")")
        }
    }
}

/// Print `t` with its leading constant negated (caller emitted the sign).
fn fmt_negated(t: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Expr::Const(c) => fmt_const(&-c.clone(), f, Prec::Sum),
        Expr::Prod(factors) => {
            if let Some(Expr::Const(c)) = factors.first() {
                let pos = -c.clone();
                let rest = &factors[1..];
                if pos == rational::rat_one() && !rest.is_empty() {
                    for (i, x) in rest.iter().enumerate() {
                        if i > 0 {
                            f.write_str("*")?;
                        }
                        fmt_expr(x, f, Prec::Prod)?;
                    }
                    return Ok(());
                }
                fmt_const(&pos, f, Prec::Prod)?;
                for x in rest {
                    f.write_str("*")?;
                    fmt_expr(x, f, Prec::Prod)?;
                }
                Ok(())
            } else {
                fmt_expr(t, f, Prec::Sum)
            }
        }
        other => fmt_expr(other, f, Prec::Sum),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_expr(self, f, Prec::Sum)
    }
}
